#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hjbsos {

// Exponent vector of a single power product, e.g. x1^2*x3. Monomials over the
// same variable count are totally ordered: ascending total degree, ties broken
// lexicographically with earlier variables dominating (so the degree-<=2 basis
// in two variables enumerates as 1, x1, x2, x1^2, x1*x2, x2^2).
class Monomial {
  public:
    explicit Monomial(std::vector<int> exponents);
    static Monomial constant(int nvars);
    static Monomial variable(int nvars, int index, int power = 1);

    int nvars() const { return static_cast<int>(exps_.size()); }
    int degree() const;
    int exponent(int i) const { return exps_.at(static_cast<std::size_t>(i)); }
    const std::vector<int>& exponents() const { return exps_; }

    Monomial operator*(const Monomial& other) const;
    double evaluate(std::span<const double> point) const;

    bool operator==(const Monomial& other) const { return exps_ == other.exps_; }
    bool operator!=(const Monomial& other) const { return !(*this == other); }
    bool operator<(const Monomial& other) const;

    std::string to_string(const std::vector<std::string>& names) const;

  private:
    std::vector<int> exps_;
};

// Enumerates all monomials in `nvars` variables of total degree <= max_degree,
// in the canonical order above. This is the basis every dense coefficient
// vector in the project refers to.
std::vector<Monomial> monomial_basis(int nvars, int max_degree);

class Polynomial;

// Chebyshev polynomials T_0..T_max_degree of the affine map of [lo, hi] onto
// [-1, 1], as univariate polynomials. Numerically preferable to monomials as
// a quadratic-module basis at high degree.
std::vector<Polynomial> chebyshev_basis_1d(int max_degree, double lo, double hi);

// Sparse multivariate polynomial with double coefficients. Kept canonical:
// terms with |coefficient| < coeff_epsilon() are dropped after arithmetic, and
// the term map iterates in the fixed monomial order, so printing and dense
// coefficient extraction are deterministic.
class Polynomial {
  public:
    explicit Polynomial(int nvars);
    static Polynomial constant(int nvars, double value);
    static Polynomial variable(int nvars, int index);
    static Polynomial monomial(const Monomial& m, double coefficient);

    static constexpr double coeff_epsilon() { return 1e-14; }

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    // Total degree; 0 for the zero polynomial.
    int degree() const;
    std::size_t term_count() const { return terms_.size(); }
    const std::map<Monomial, double>& terms() const { return terms_; }
    double coefficient(const Monomial& m) const;

    Polynomial& add_term(const Monomial& m, double coefficient);

    Polynomial operator-() const;
    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(const Polynomial& other);
    Polynomial& operator*=(double scalar);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

    Polynomial differentiate(int var_index) const;
    double evaluate(std::span<const double> point) const;

    // Dense coefficients over monomial_basis(nvars, max_degree).
    // Throws if degree() > max_degree.
    std::vector<double> coefficients_in_basis(int max_degree) const;
    static Polynomial from_basis_coefficients(int nvars, int max_degree,
                                              std::span<const double> coeffs);

    // Text form `c * x1^a1 * ... * xn^an + ...` with round-trip coefficients.
    std::string to_string() const;
    std::string to_string(const std::vector<std::string>& names) const;
    static Polynomial parse(const std::string& text, int nvars);
    static Polynomial parse(const std::string& text, const std::vector<std::string>& names);

    bool near_equal(const Polynomial& other, double tol) const;

  private:
    int nvars_;
    std::map<Monomial, double> terms_;
    void trim();
};

// Dense matrix of polynomials sharing one variable count.
class PolyMatrix {
  public:
    PolyMatrix(int rows, int cols, int nvars);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int nvars() const { return nvars_; }

    Polynomial& at(int r, int c);
    const Polynomial& at(int r, int c) const;

    PolyMatrix transpose() const;
    PolyMatrix operator*(const PolyMatrix& other) const;
    PolyMatrix operator+(const PolyMatrix& other) const;
    PolyMatrix operator-(const PolyMatrix& other) const;
    PolyMatrix scaled(double s) const;

    // Lift a constant real matrix (row-major rows x cols) into polynomials.
    static PolyMatrix from_constant(int rows, int cols, int nvars,
                                    std::span<const double> row_major);

    // Row-major values of every entry at `point`.
    std::vector<double> evaluate(std::span<const double> point) const;

    // Sum of diagonal entries (square matrices).
    Polynomial trace() const;

  private:
    int rows_, cols_, nvars_;
    std::vector<Polynomial> entries_;
};

PolyMatrix gradient(const Polynomial& p);
PolyMatrix hessian(const Polynomial& p);

}  // namespace hjbsos
