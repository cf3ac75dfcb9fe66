#include "hjbsos/poly.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hjbsos {

namespace {

std::string default_name(int index) { return "x" + std::to_string(index + 1); }

std::vector<std::string> default_names(int nvars) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(nvars));
    for (int i = 0; i < nvars; ++i) names.push_back(default_name(i));
    return names;
}

// Shortest round-trip decimal form of a double.
std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double int_pow(double base, int exp) {
    double result = 1.0;
    double b = base;
    int e = exp;
    while (e > 0) {
        if (e & 1) result *= b;
        b *= b;
        e >>= 1;
    }
    return result;
}

}  // namespace

Monomial::Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_)
        if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
}

Monomial Monomial::constant(int nvars) {
    return Monomial(std::vector<int>(static_cast<std::size_t>(nvars), 0));
}

Monomial Monomial::variable(int nvars, int index, int power) {
    if (index < 0 || index >= nvars) throw std::out_of_range("Monomial: variable index out of range");
    std::vector<int> e(static_cast<std::size_t>(nvars), 0);
    e[static_cast<std::size_t>(index)] = power;
    return Monomial(std::move(e));
}

int Monomial::degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

Monomial Monomial::operator*(const Monomial& other) const {
    if (nvars() != other.nvars()) throw std::invalid_argument("Monomial: variable count mismatch");
    std::vector<int> e(exps_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.exps_[i];
    return Monomial(std::move(e));
}

double Monomial::evaluate(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != nvars())
        throw std::invalid_argument("Monomial: point dimension mismatch");
    double v = 1.0;
    for (std::size_t i = 0; i < exps_.size(); ++i)
        if (exps_[i] != 0) v *= int_pow(point[i], exps_[i]);
    return v;
}

bool Monomial::operator<(const Monomial& other) const {
    const int da = degree();
    const int db = other.degree();
    if (da != db) return da < db;
    // Within a degree, higher exponent on an earlier variable comes first.
    return exps_ > other.exps_;
}

std::string Monomial::to_string(const std::vector<std::string>& names) const {
    std::string out;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        if (exps_[i] == 0) continue;
        if (!out.empty()) out += " * ";
        out += names.at(i);
        if (exps_[i] != 1) out += "^" + std::to_string(exps_[i]);
    }
    return out;
}

std::vector<Monomial> monomial_basis(int nvars, int max_degree) {
    if (nvars <= 0) throw std::invalid_argument("monomial_basis: nvars must be positive");
    if (max_degree < 0) throw std::invalid_argument("monomial_basis: negative degree");
    std::vector<Monomial> basis;
    std::vector<int> current(static_cast<std::size_t>(nvars), 0);
    // Enumerate exponent vectors of fixed total degree in the canonical order.
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == nvars - 1) {
            current[static_cast<std::size_t>(pos)] = remaining;
            basis.push_back(Monomial(current));
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[static_cast<std::size_t>(pos)] = e;
            self(self, pos + 1, remaining - e);
        }
        current[static_cast<std::size_t>(pos)] = 0;
    };
    for (int d = 0; d <= max_degree; ++d) rec(rec, 0, d);
    return basis;
}

std::vector<Polynomial> chebyshev_basis_1d(int max_degree, double lo, double hi) {
    if (max_degree < 0) throw std::invalid_argument("chebyshev_basis_1d: negative degree");
    if (!(lo < hi)) throw std::invalid_argument("chebyshev_basis_1d: empty interval");
    std::vector<Polynomial> basis;
    basis.reserve(static_cast<std::size_t>(max_degree) + 1);
    const Polynomial t = Polynomial::variable(1, 0) * (2.0 / (hi - lo)) -
                         Polynomial::constant(1, (hi + lo) / (hi - lo));
    basis.push_back(Polynomial::constant(1, 1.0));
    if (max_degree >= 1) basis.push_back(t);
    for (int k = 2; k <= max_degree; ++k)
        basis.push_back(t * basis[static_cast<std::size_t>(k - 1)] * 2.0 -
                        basis[static_cast<std::size_t>(k - 2)]);
    return basis;
}

Polynomial::Polynomial(int nvars) : nvars_(nvars) {
    if (nvars <= 0) throw std::invalid_argument("Polynomial: nvars must be positive");
}

Polynomial Polynomial::constant(int nvars, double value) {
    Polynomial p(nvars);
    p.add_term(Monomial::constant(nvars), value);
    return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
    Polynomial p(nvars);
    p.add_term(Monomial::variable(nvars, index), 1.0);
    return p;
}

Polynomial Polynomial::monomial(const Monomial& m, double coefficient) {
    Polynomial p(m.nvars());
    p.add_term(m, coefficient);
    return p;
}

int Polynomial::degree() const {
    if (terms_.empty()) return 0;
    return terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

Polynomial& Polynomial::add_term(const Monomial& m, double coefficient) {
    if (m.nvars() != nvars_) throw std::invalid_argument("Polynomial: variable count mismatch");
    auto [it, inserted] = terms_.emplace(m, coefficient);
    if (!inserted) it->second += coefficient;
    if (std::abs(it->second) < coeff_epsilon()) terms_.erase(it);
    return *this;
}

void Polynomial::trim() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < coeff_epsilon())
            it = terms_.erase(it);
        else
            ++it;
    }
}

Polynomial Polynomial::operator-() const {
    Polynomial out(nvars_);
    for (const auto& [m, c] : terms_) out.terms_.emplace(m, -c);
    return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    if (nvars_ != other.nvars_) throw std::invalid_argument("Polynomial: variable count mismatch");
    for (const auto& [m, c] : other.terms_) add_term(m, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    if (nvars_ != other.nvars_) throw std::invalid_argument("Polynomial: variable count mismatch");
    for (const auto& [m, c] : other.terms_) add_term(m, -c);
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.nvars_ != b.nvars_) throw std::invalid_argument("Polynomial: variable count mismatch");
    Polynomial out(a.nvars_);
    for (const auto& [ma, ca] : a.terms_)
        for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
    out.trim();
    return out;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
    *this = *this * other;
    return *this;
}

Polynomial& Polynomial::operator*=(double scalar) {
    for (auto& [m, c] : terms_) c *= scalar;
    trim();
    return *this;
}

Polynomial Polynomial::differentiate(int var_index) const {
    if (var_index < 0 || var_index >= nvars_)
        throw std::out_of_range("Polynomial::differentiate: variable index out of range");
    Polynomial out(nvars_);
    for (const auto& [m, c] : terms_) {
        const int e = m.exponent(var_index);
        if (e == 0) continue;
        std::vector<int> exps = m.exponents();
        exps[static_cast<std::size_t>(var_index)] = e - 1;
        out.add_term(Monomial(std::move(exps)), c * e);
    }
    return out;
}

double Polynomial::evaluate(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != nvars_)
        throw std::invalid_argument("Polynomial::evaluate: point dimension mismatch");
    double sum = 0.0;
    for (const auto& [m, c] : terms_) sum += c * m.evaluate(point);
    return sum;
}

std::vector<double> Polynomial::coefficients_in_basis(int max_degree) const {
    if (degree() > max_degree)
        throw std::invalid_argument("Polynomial::coefficients_in_basis: degree exceeds basis");
    const auto basis = monomial_basis(nvars_, max_degree);
    std::vector<double> out(basis.size(), 0.0);
    for (std::size_t i = 0; i < basis.size(); ++i) out[i] = coefficient(basis[i]);
    return out;
}

Polynomial Polynomial::from_basis_coefficients(int nvars, int max_degree,
                                               std::span<const double> coeffs) {
    const auto basis = monomial_basis(nvars, max_degree);
    if (coeffs.size() != basis.size())
        throw std::invalid_argument("Polynomial::from_basis_coefficients: size mismatch");
    Polynomial p(nvars);
    for (std::size_t i = 0; i < basis.size(); ++i)
        if (coeffs[i] != 0.0) p.add_term(basis[i], coeffs[i]);
    return p;
}

std::string Polynomial::to_string() const { return to_string(default_names(nvars_)); }

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
    if (static_cast<int>(names.size()) != nvars_)
        throw std::invalid_argument("Polynomial::to_string: name count mismatch");
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        const double mag = std::abs(c);
        if (first) {
            out += (c < 0 ? "-" : "");
            first = false;
        } else {
            out += (c < 0 ? " - " : " + ");
        }
        const std::string mono = m.to_string(names);
        if (mono.empty()) {
            out += format_double(mag);
        } else if (mag == 1.0) {
            out += mono;
        } else {
            out += format_double(mag) + " * " + mono;
        }
    }
    return out;
}

namespace {

// Recursive-descent parser for polynomial expressions:
//   expr   := ['+'|'-'] term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := number | name ['^' int] | '(' expr ')' ['^' int]
class PolyParser {
  public:
    PolyParser(const std::string& text, const std::vector<std::string>& names)
        : text_(text), names_(names), nvars_(static_cast<int>(names.size())) {}

    Polynomial run() {
        Polynomial p = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return p;
    }

  private:
    const std::string& text_;
    const std::vector<std::string>& names_;
    int nvars_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "polynomial parse error at position " << pos_ << ": " << what << " in \"" << text_
           << "\"";
        throw std::invalid_argument(os.str());
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Polynomial parse_expr() {
        double sign = 1.0;
        if (consume('+')) {
        } else if (consume('-')) {
            sign = -1.0;
        }
        Polynomial acc = parse_term() * sign;
        while (true) {
            if (consume('+'))
                acc += parse_term();
            else if (consume('-'))
                acc -= parse_term();
            else
                break;
        }
        return acc;
    }

    Polynomial parse_term() {
        Polynomial acc = parse_factor();
        while (consume('*')) acc *= parse_factor();
        return acc;
    }

    int parse_exponent() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) fail("expected integer exponent after '^'");
        return std::stoi(text_.substr(start, pos_ - start));
    }

    Polynomial pow(const Polynomial& base, int e) {
        Polynomial out = Polynomial::constant(nvars_, 1.0);
        for (int i = 0; i < e; ++i) out *= base;
        return out;
    }

    Polynomial parse_factor() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Polynomial inner = parse_expr();
            if (!consume(')')) fail("expected ')'");
            if (consume('^')) return pow(inner, parse_exponent());
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = text_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("malformed number");
            pos_ += static_cast<std::size_t>(end - begin);
            Polynomial out = Polynomial::constant(nvars_, v);
            if (consume('^')) return pow(out, parse_exponent());
            return out;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            const std::string name = text_.substr(start, pos_ - start);
            auto it = std::find(names_.begin(), names_.end(), name);
            if (it == names_.end()) fail("unknown variable '" + name + "'");
            const int index = static_cast<int>(it - names_.begin());
            int e = 1;
            if (consume('^')) e = parse_exponent();
            return Polynomial::monomial(Monomial::variable(nvars_, index, e), 1.0);
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

}  // namespace

Polynomial Polynomial::parse(const std::string& text, int nvars) {
    return parse(text, default_names(nvars));
}

Polynomial Polynomial::parse(const std::string& text, const std::vector<std::string>& names) {
    if (names.empty()) throw std::invalid_argument("Polynomial::parse: no variable names");
    return PolyParser(text, names).run();
}

bool Polynomial::near_equal(const Polynomial& other, double tol) const {
    if (nvars_ != other.nvars_) return false;
    Polynomial diff = *this - other;
    for (const auto& [m, c] : diff.terms_)
        if (std::abs(c) > tol) return false;
    return true;
}

PolyMatrix::PolyMatrix(int rows, int cols, int nvars)
    : rows_(rows), cols_(cols), nvars_(nvars),
      entries_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
               Polynomial(nvars)) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("PolyMatrix: dimensions must be positive");
}

Polynomial& PolyMatrix::at(int r, int c) {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw std::out_of_range("PolyMatrix::at");
    return entries_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
                    static_cast<std::size_t>(c)];
}

const Polynomial& PolyMatrix::at(int r, int c) const {
    return const_cast<PolyMatrix*>(this)->at(r, c);
}

PolyMatrix PolyMatrix::transpose() const {
    PolyMatrix out(cols_, rows_, nvars_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) out.at(c, r) = at(r, c);
    return out;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& other) const {
    if (cols_ != other.rows_ || nvars_ != other.nvars_)
        throw std::invalid_argument("PolyMatrix: shape mismatch in product");
    PolyMatrix out(rows_, other.cols_, nvars_);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < other.cols_; ++c) {
            Polynomial sum(nvars_);
            for (int k = 0; k < cols_; ++k) sum += at(r, k) * other.at(k, c);
            out.at(r, c) = sum;
        }
    return out;
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_ || nvars_ != other.nvars_)
        throw std::invalid_argument("PolyMatrix: shape mismatch in sum");
    PolyMatrix out = *this;
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) out.at(r, c) += other.at(r, c);
    return out;
}

PolyMatrix PolyMatrix::operator-(const PolyMatrix& other) const {
    return *this + other.scaled(-1.0);
}

PolyMatrix PolyMatrix::scaled(double s) const {
    PolyMatrix out = *this;
    for (auto& p : out.entries_) p *= s;
    return out;
}

PolyMatrix PolyMatrix::from_constant(int rows, int cols, int nvars,
                                     std::span<const double> row_major) {
    if (row_major.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw std::invalid_argument("PolyMatrix::from_constant: size mismatch");
    PolyMatrix out(rows, cols, nvars);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = row_major[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                                       static_cast<std::size_t>(c)];
            if (v != 0.0) out.at(r, c) = Polynomial::constant(nvars, v);
        }
    return out;
}

std::vector<double> PolyMatrix::evaluate(std::span<const double> point) const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const auto& p : entries_) out.push_back(p.evaluate(point));
    return out;
}

Polynomial PolyMatrix::trace() const {
    if (rows_ != cols_) throw std::invalid_argument("PolyMatrix::trace: matrix not square");
    Polynomial sum(nvars_);
    for (int i = 0; i < rows_; ++i) sum += at(i, i);
    return sum;
}

PolyMatrix gradient(const Polynomial& p) {
    PolyMatrix out(p.nvars(), 1, p.nvars());
    for (int i = 0; i < p.nvars(); ++i) out.at(i, 0) = p.differentiate(i);
    return out;
}

PolyMatrix hessian(const Polynomial& p) {
    PolyMatrix out(p.nvars(), p.nvars(), p.nvars());
    for (int i = 0; i < p.nvars(); ++i) {
        const Polynomial di = p.differentiate(i);
        for (int j = i; j < p.nvars(); ++j) {
            Polynomial dij = di.differentiate(j);
            out.at(i, j) = dij;
            if (j != i) out.at(j, i) = dij;
        }
    }
    return out;
}

}  // namespace hjbsos
