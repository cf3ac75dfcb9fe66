#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hjbsos/poly.hpp"
#include "hjbsos/sdp.hpp"

namespace hjbsos::sos {

// Basic closed semialgebraic set Omega = {x : g_i(x) >= 0} together with a
// polynomial-representable boundary {x : prod h_i(x) = 0} and an axis-aligned
// bounding box used for sampling.
struct SemialgebraicDomain {
    int nvars = 0;
    std::vector<Polynomial> inequalities;        // g_i
    std::vector<Polynomial> boundary;            // h_i
    std::vector<std::array<double, 2>> box;      // per-axis [lo, hi]

    void validate() const;
    bool contains(std::span<const double> point, double tol = 1e-9) const;
};

// Deterministic rejection sampler over the domain's bounding box.
std::vector<std::vector<double>> sample_domain(const SemialgebraicDomain& domain, int count,
                                               unsigned seed);

struct GramBlock {
    int id = 0;
    std::vector<Polynomial> basis;  // z(x); the block certifies z' Q z with Q >= 0
};

// Polynomial depending affinely on scalar decision variables and on entries of
// PSD Gram blocks:  p(x) = fixed(x) + sum_j coeff_j(x) f_j
//                          + sum_g weight_g(x) * z_g(x)' Q_g z_g(x).
struct ParamPolynomial {
    int nvars = 0;
    Polynomial fixed{1};
    std::vector<std::pair<int, Polynomial>> linear;  // (free var id, coefficient)
    std::vector<std::pair<int, Polynomial>> grams;   // (gram block id, weight)

    explicit ParamPolynomial(int nv) : nvars(nv), fixed(nv) {}
    static ParamPolynomial from_fixed(Polynomial p);

    ParamPolynomial& operator+=(const ParamPolynomial& other);
    ParamPolynomial& operator-=(const ParamPolynomial& other);
    ParamPolynomial operator-() const;
    friend ParamPolynomial operator+(ParamPolynomial a, const ParamPolynomial& b) { return a += b; }
    friend ParamPolynomial operator-(ParamPolynomial a, const ParamPolynomial& b) { return a -= b; }

    void add_linear(int var, Polynomial coeff);
    void add_gram(int block, Polynomial weight);
    void merge_duplicates();
};

// Builder and container for a sum-of-squares program: SOS membership
// constraints on parameterized polynomials, linear equalities on the scalar
// decision variables, and a linear objective.
class SosProgram {
  public:
    explicit SosProgram(int nvars) : nvars_(nvars) {}

    int nvars() const { return nvars_; }

    int new_free(const std::string& name);
    int num_free() const { return static_cast<int>(free_names_.size()); }
    const std::string& free_name(int id) const { return free_names_.at(static_cast<std::size_t>(id)); }

    int new_gram_block(std::vector<Polynomial> basis);
    int new_gram_block(const std::vector<Monomial>& basis);

    // When set (univariate programs), internally created Gram blocks use the
    // Chebyshev basis of [lo, hi] instead of monomials.
    void use_chebyshev_gram_basis(double lo, double hi);

    // Basis z of degree <= half_degree under the current policy.
    std::vector<Polynomial> make_gram_basis(int half_degree) const;
    const GramBlock& gram_block(int id) const { return gram_blocks_.at(static_cast<std::size_t>(id)); }
    int num_gram_blocks() const { return static_cast<int>(gram_blocks_.size()); }

    // Fresh polynomial of the given total degree whose coefficients are new
    // free decision variables.
    ParamPolynomial new_free_polynomial(int degree, const std::string& name_prefix);

    struct SosConstraint {
        ParamPolynomial expr;
        int main_gram = -1;  // the certificate block, created on add
        std::string label;
    };
    struct LinearEquality {
        std::vector<std::pair<int, double>> coeffs;
        double rhs = 0.0;
        std::string label;
    };

    // Constrain expr(x) to be a sum of squares (a fresh certificate Gram block
    // is created internally). Returns the constraint index. A nonnegative
    // cert_degree caps the certificate degree below the expression degree,
    // which implicitly forces the top coefficients of the identity to cancel.
    std::size_t add_sos_constraint(ParamPolynomial expr, const std::string& label,
                                   int cert_degree = -1);
    void add_linear_equality(std::vector<std::pair<int, double>> coeffs, double rhs,
                             const std::string& label);
    void set_objective(std::vector<std::pair<int, double>> minimize);

    const std::vector<SosConstraint>& sos_constraints() const { return sos_; }
    const std::vector<LinearEquality>& equalities() const { return equalities_; }

    struct Compiled {
        sdp::SdpProblem problem;
        // Row bookkeeping per SOS constraint, in declaration order: which SDP
        // row matches which monomial (coefficient compile) or which sample
        // point (sampled compile).
        struct RowGroup {
            std::string label;
            std::vector<std::pair<Monomial, int>> rows;        // (monomial, SDP row)
            std::vector<std::pair<double, int>> sample_rows;   // (point, SDP row)
            int main_gram = -1;
        };
        std::vector<RowGroup> groups;
        std::vector<int> equality_rows;
    };
    Compiled compile() const;

    // Univariate alternative: each polynomial identity of degree N is matched
    // by evaluation at N+1 Chebyshev-Lobatto points of [lo, hi] instead of by
    // monomial coefficients. Equivalent constraints, far better scaled at high
    // degree.
    Compiled compile_sampled(double lo, double hi) const;

    // Reconstructed affine data of one compiled SOS constraint: fixed part and
    // free-variable coefficient polynomials, rebuilt purely from SDP rows.
    ParamPolynomial decompile_constraint(const Compiled& compiled, std::size_t index) const;

    // Value extraction from a solved SDP.
    std::vector<double> free_values(const sdp::SdpSolution& solution) const;
    Polynomial gram_polynomial(int gram_id, const Eigen::MatrixXd& Q) const;
    Polynomial instantiate(const ParamPolynomial& p, std::span<const double> free_vals,
                           const std::vector<Eigen::MatrixXd>& gram_vals) const;
    Polynomial instantiate(const ParamPolynomial& p, const sdp::SdpSolution& solution) const;

    std::string dump() const;

  private:
    int nvars_;
    std::optional<std::array<double, 2>> chebyshev_interval_;
    std::vector<std::string> free_names_;
    std::vector<GramBlock> gram_blocks_;
    std::vector<SosConstraint> sos_;
    std::vector<LinearEquality> equalities_;
    std::vector<std::pair<int, double>> objective_;
};

// p(x) = z(x)' Q z(x) over the monomial basis of degree <= max_degree/2 with a
// fresh PSD block Q. max_degree must be even.
std::pair<ParamPolynomial, int> gram_parameterize(SosProgram& program, int max_degree);

// Preordering element sum_{nu in {0,1}^k} s_nu(x) g_1^nu1 ... g_k^nuk with
// fresh SOS multipliers s_nu of degree <= multiplier_degree each.
ParamPolynomial domain_operator(SosProgram& program, const SemialgebraicDomain& domain,
                                int multiplier_degree);

// Same operator with per-term degrees: each s_nu gets the largest even degree
// with deg(s_nu * g^nu) <= total_degree; products exceeding total_degree are
// dropped (the nu = 0 term is always kept).
ParamPolynomial domain_operator_capped(SosProgram& program, const SemialgebraicDomain& domain,
                                       int total_degree);

// {p - t_i h_i : i}, one per boundary factor, with fresh free multipliers t_i
// of degree <= multiplier_degree. Constraining every element to be SOS
// certifies p >= 0 on the corresponding boundary component.
std::vector<ParamPolynomial> boundary_operator(SosProgram& program, const ParamPolynomial& p,
                                               const SemialgebraicDomain& domain,
                                               int multiplier_degree);

struct SosCheck {
    bool is_sos = false;
    std::vector<Polynomial> decomposition;  // nonempty iff is_sos
    sdp::SdpStatus solver_status = sdp::SdpStatus::NumericalFailure;
};

// Decides SOS membership of a concrete polynomial by compiling and solving the
// feasibility SDP; on success the Gram matrix is factorized into squares.
// Throws std::invalid_argument on odd degree and std::runtime_error when the
// solver fails numerically.
SosCheck check_sos(const Polynomial& p, const sdp::SdpSettings& settings = {});

}  // namespace hjbsos::sos
