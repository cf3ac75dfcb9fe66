#include "hjbsos/sos.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hjbsos::sos {

void SemialgebraicDomain::validate() const {
    if (nvars <= 0) throw std::invalid_argument("SemialgebraicDomain: nvars must be positive");
    if (inequalities.empty())
        throw std::invalid_argument("SemialgebraicDomain: at least one inequality generator");
    for (const auto& g : inequalities)
        if (g.nvars() != nvars) throw std::invalid_argument("SemialgebraicDomain: nvars mismatch in g");
    for (const auto& h : boundary)
        if (h.nvars() != nvars) throw std::invalid_argument("SemialgebraicDomain: nvars mismatch in h");
    if (static_cast<int>(box.size()) != nvars)
        throw std::invalid_argument("SemialgebraicDomain: bounding box must cover every axis");
    for (const auto& [lo, hi] : box)
        if (!(lo < hi)) throw std::invalid_argument("SemialgebraicDomain: empty box interval");
}

bool SemialgebraicDomain::contains(std::span<const double> point, double tol) const {
    for (const auto& g : inequalities)
        if (g.evaluate(point) < -tol) return false;
    return true;
}

std::vector<std::vector<double>> sample_domain(const SemialgebraicDomain& domain, int count,
                                               unsigned seed) {
    domain.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(count));
    const int max_attempts = count * 1000 + 1000;
    std::vector<double> x(static_cast<std::size_t>(domain.nvars));
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count; ++attempt) {
        for (int i = 0; i < domain.nvars; ++i) {
            const auto& [lo, hi] = domain.box[static_cast<std::size_t>(i)];
            x[static_cast<std::size_t>(i)] = lo + (hi - lo) * u(rng);
        }
        if (domain.contains(x)) out.push_back(x);
    }
    return out;
}

ParamPolynomial ParamPolynomial::from_fixed(Polynomial p) {
    ParamPolynomial out(p.nvars());
    out.fixed = std::move(p);
    return out;
}

ParamPolynomial& ParamPolynomial::operator+=(const ParamPolynomial& other) {
    if (nvars != other.nvars) throw std::invalid_argument("ParamPolynomial: nvars mismatch");
    fixed += other.fixed;
    linear.insert(linear.end(), other.linear.begin(), other.linear.end());
    grams.insert(grams.end(), other.grams.begin(), other.grams.end());
    merge_duplicates();
    return *this;
}

ParamPolynomial& ParamPolynomial::operator-=(const ParamPolynomial& other) {
    return *this += -other;
}

ParamPolynomial ParamPolynomial::operator-() const {
    ParamPolynomial out(nvars);
    out.fixed = -fixed;
    for (const auto& [id, p] : linear) out.linear.emplace_back(id, -p);
    for (const auto& [id, p] : grams) out.grams.emplace_back(id, -p);
    return out;
}

void ParamPolynomial::add_linear(int var, Polynomial coeff) {
    linear.emplace_back(var, std::move(coeff));
}

void ParamPolynomial::add_gram(int block, Polynomial weight) {
    grams.emplace_back(block, std::move(weight));
}

void ParamPolynomial::merge_duplicates() {
    auto merge = [&](std::vector<std::pair<int, Polynomial>>& list) {
        std::map<int, Polynomial> acc;
        for (auto& [id, p] : list) {
            auto it = acc.find(id);
            if (it == acc.end())
                acc.emplace(id, std::move(p));
            else
                it->second += p;
        }
        list.clear();
        for (auto& [id, p] : acc)
            if (!p.is_zero()) list.emplace_back(id, std::move(p));
    };
    merge(linear);
    merge(grams);
}

int SosProgram::new_free(const std::string& name) {
    free_names_.push_back(name);
    return static_cast<int>(free_names_.size()) - 1;
}

int SosProgram::new_gram_block(std::vector<Polynomial> basis) {
    if (basis.empty()) throw std::invalid_argument("SosProgram: empty Gram basis");
    GramBlock block;
    block.id = static_cast<int>(gram_blocks_.size());
    block.basis = std::move(basis);
    gram_blocks_.push_back(std::move(block));
    return gram_blocks_.back().id;
}

int SosProgram::new_gram_block(const std::vector<Monomial>& basis) {
    std::vector<Polynomial> polys;
    polys.reserve(basis.size());
    for (const auto& m : basis) polys.push_back(Polynomial::monomial(m, 1.0));
    return new_gram_block(std::move(polys));
}

void SosProgram::use_chebyshev_gram_basis(double lo, double hi) {
    if (nvars_ != 1)
        throw std::invalid_argument("use_chebyshev_gram_basis: univariate programs only");
    if (!(lo < hi)) throw std::invalid_argument("use_chebyshev_gram_basis: empty interval");
    chebyshev_interval_ = {lo, hi};
}

std::vector<Polynomial> SosProgram::make_gram_basis(int half_degree) const {
    if (chebyshev_interval_)
        return chebyshev_basis_1d(half_degree, (*chebyshev_interval_)[0], (*chebyshev_interval_)[1]);
    std::vector<Polynomial> polys;
    for (const auto& m : monomial_basis(nvars_, half_degree))
        polys.push_back(Polynomial::monomial(m, 1.0));
    return polys;
}

ParamPolynomial SosProgram::new_free_polynomial(int degree, const std::string& name_prefix) {
    ParamPolynomial out(nvars_);
    const auto basis = monomial_basis(nvars_, degree);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const int id = new_free(name_prefix + "[" + std::to_string(i) + "]");
        out.add_linear(id, Polynomial::monomial(basis[i], 1.0));
    }
    return out;
}

namespace {

int param_degree(const SosProgram& program, const ParamPolynomial& p) {
    int deg = p.fixed.is_zero() ? 0 : p.fixed.degree();
    for (const auto& [id, coeff] : p.linear) {
        (void)id;
        if (!coeff.is_zero()) deg = std::max(deg, coeff.degree());
    }
    for (const auto& [id, weight] : p.grams) {
        if (weight.is_zero()) continue;
        int basis_deg = 0;
        for (const auto& b : program.gram_block(id).basis) basis_deg = std::max(basis_deg, b.degree());
        deg = std::max(deg, weight.degree() + 2 * basis_deg);
    }
    return deg;
}

}  // namespace

std::size_t SosProgram::add_sos_constraint(ParamPolynomial expr, const std::string& label,
                                           int cert_degree) {
    if (expr.nvars != nvars_) throw std::invalid_argument("SosProgram: nvars mismatch");
    expr.merge_duplicates();
    int deg = param_degree(*this, expr);
    if (cert_degree >= 0) deg = std::min(deg, cert_degree);
    const int main_gram = new_gram_block(make_gram_basis(deg / 2));
    sos_.push_back({std::move(expr), main_gram, label});
    return sos_.size() - 1;
}

void SosProgram::add_linear_equality(std::vector<std::pair<int, double>> coeffs, double rhs,
                                     const std::string& label) {
    equalities_.push_back({std::move(coeffs), rhs, label});
}

void SosProgram::set_objective(std::vector<std::pair<int, double>> minimize) {
    objective_ = std::move(minimize);
}

SosProgram::Compiled SosProgram::compile() const {
    Compiled out;
    auto& prob = out.problem;
    prob.num_free = num_free();
    for (const auto& g : gram_blocks_) prob.block_dims.push_back(static_cast<int>(g.basis.size()));

    for (const auto& constraint : sos_) {
        Compiled::RowGroup group;
        group.label = constraint.label;
        group.main_gram = constraint.main_gram;

        // The identity expr(x) - z' Q_main z = 0, matched per monomial.
        // rows: monomial -> (entries, free coefficients, rhs)
        std::map<Monomial, sdp::SdpProblem::Constraint> rows;
        std::map<Monomial, double> rhs;

        auto add_gram_term = [&](int block_id, const Polynomial& weight) {
            const auto& basis = gram_blocks_[static_cast<std::size_t>(block_id)].basis;
            const int dim = static_cast<int>(basis.size());
            for (int i = 0; i < dim; ++i) {
                for (int j = i; j < dim; ++j) {
                    const Polynomial prod = weight * basis[static_cast<std::size_t>(i)] *
                                            basis[static_cast<std::size_t>(j)];
                    for (const auto& [mono, c] : prod.terms())
                        rows[mono].entries.push_back({block_id, i, j, c});
                }
            }
        };

        for (const auto& [block_id, weight] : constraint.expr.grams) add_gram_term(block_id, weight);
        add_gram_term(constraint.main_gram, Polynomial::constant(nvars_, -1.0));

        for (const auto& [var, coeff] : constraint.expr.linear)
            for (const auto& [mono, c] : coeff.terms())
                rows[mono].free_coeffs.emplace_back(var, c);

        for (const auto& [mono, c] : constraint.expr.fixed.terms()) {
            rows.try_emplace(mono);
            rhs[mono] = -c;
        }

        for (auto& [mono, row] : rows) {
            const int row_index = prob.num_constraints();
            prob.constraints.push_back(std::move(row));
            auto it = rhs.find(mono);
            prob.rhs.push_back(it == rhs.end() ? 0.0 : it->second);
            group.rows.emplace_back(mono, row_index);
        }
        out.groups.push_back(std::move(group));
    }

    for (const auto& eq : equalities_) {
        sdp::SdpProblem::Constraint row;
        row.free_coeffs = eq.coeffs;
        out.equality_rows.push_back(prob.num_constraints());
        prob.constraints.push_back(std::move(row));
        prob.rhs.push_back(eq.rhs);
    }

    prob.objective_free = objective_;
    prob.validate();
    return out;
}

SosProgram::Compiled SosProgram::compile_sampled(double lo, double hi) const {
    if (nvars_ != 1)
        throw std::invalid_argument("compile_sampled: only univariate programs are supported");
    if (!(lo < hi)) throw std::invalid_argument("compile_sampled: empty interval");
    Compiled out;
    auto& prob = out.problem;
    prob.num_free = num_free();
    for (const auto& g : gram_blocks_) prob.block_dims.push_back(static_cast<int>(g.basis.size()));

    const double center = 0.5 * (lo + hi);
    const double radius = 0.5 * (hi - lo);

    for (const auto& constraint : sos_) {
        Compiled::RowGroup group;
        group.label = constraint.label;
        group.main_gram = constraint.main_gram;

        int deg = param_degree(*this, constraint.expr);
        {
            int basis_deg = 0;
            for (const auto& b : gram_blocks_[static_cast<std::size_t>(constraint.main_gram)].basis)
                basis_deg = std::max(basis_deg, b.degree());
            deg = std::max(deg, 2 * basis_deg);
        }

        for (int k = 0; k <= deg; ++k) {
            const double t = deg == 0 ? 0.0 : std::cos(M_PI * k / deg);
            const std::vector<double> x{center + radius * t};

            sdp::SdpProblem::Constraint row;
            auto add_gram_at = [&](int block_id, double weight) {
                if (weight == 0.0) return;
                const auto& basis = gram_blocks_[static_cast<std::size_t>(block_id)].basis;
                const int dim = static_cast<int>(basis.size());
                std::vector<double> z(static_cast<std::size_t>(dim));
                for (int i = 0; i < dim; ++i)
                    z[static_cast<std::size_t>(i)] = basis[static_cast<std::size_t>(i)].evaluate(x);
                for (int i = 0; i < dim; ++i)
                    for (int j = i; j < dim; ++j)
                        row.entries.push_back({block_id, i, j,
                                               weight * z[static_cast<std::size_t>(i)] *
                                                   z[static_cast<std::size_t>(j)]});
            };
            for (const auto& [block_id, weight] : constraint.expr.grams)
                add_gram_at(block_id, weight.evaluate(x));
            add_gram_at(constraint.main_gram, -1.0);
            for (const auto& [var, coeff] : constraint.expr.linear) {
                const double c = coeff.evaluate(x);
                if (c != 0.0) row.free_coeffs.emplace_back(var, c);
            }

            const int row_index = prob.num_constraints();
            prob.constraints.push_back(std::move(row));
            prob.rhs.push_back(-constraint.expr.fixed.evaluate(x));
            group.sample_rows.emplace_back(x[0], row_index);
        }
        out.groups.push_back(std::move(group));
    }

    for (const auto& eq : equalities_) {
        sdp::SdpProblem::Constraint row;
        row.free_coeffs = eq.coeffs;
        out.equality_rows.push_back(prob.num_constraints());
        prob.constraints.push_back(std::move(row));
        prob.rhs.push_back(eq.rhs);
    }

    prob.objective_free = objective_;
    prob.validate();
    return out;
}

ParamPolynomial SosProgram::decompile_constraint(const Compiled& compiled, std::size_t index) const {
    const auto& group = compiled.groups.at(index);
    if (!group.sample_rows.empty())
        throw std::invalid_argument("decompile_constraint: sampled compilations are not supported");
    ParamPolynomial out(nvars_);
    std::map<int, Polynomial> coeffs;
    for (const auto& [mono, row] : group.rows) {
        const double fixed_c = -compiled.problem.rhs[static_cast<std::size_t>(row)];
        if (fixed_c != 0.0) out.fixed.add_term(mono, fixed_c);
        for (const auto& [var, c] :
             compiled.problem.constraints[static_cast<std::size_t>(row)].free_coeffs) {
            auto [it, inserted] = coeffs.try_emplace(var, nvars_);
            it->second.add_term(mono, c);
        }
    }
    for (auto& [var, p] : coeffs)
        if (!p.is_zero()) out.add_linear(var, std::move(p));
    const auto& expr = sos_.at(index).expr;
    for (const auto& [id, weight] : expr.grams) out.add_gram(id, weight);
    return out;
}

std::vector<double> SosProgram::free_values(const sdp::SdpSolution& solution) const {
    std::vector<double> out(static_cast<std::size_t>(num_free()), 0.0);
    for (int i = 0; i < num_free() && i < solution.free_values.size(); ++i)
        out[static_cast<std::size_t>(i)] = solution.free_values(i);
    return out;
}

Polynomial SosProgram::gram_polynomial(int gram_id, const Eigen::MatrixXd& Q) const {
    const auto& basis = gram_block(gram_id).basis;
    const int dim = static_cast<int>(basis.size());
    if (Q.rows() != dim || Q.cols() != dim)
        throw std::invalid_argument("SosProgram::gram_polynomial: dimension mismatch");
    Polynomial out(nvars_);
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
            const double w = (i == j) ? Q(i, j) : Q(i, j) + Q(j, i);
            if (w == 0.0) continue;
            out += basis[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(j)] * w;
        }
    return out;
}

Polynomial SosProgram::instantiate(const ParamPolynomial& p, std::span<const double> free_vals,
                                   const std::vector<Eigen::MatrixXd>& gram_vals) const {
    Polynomial out = p.fixed;
    for (const auto& [var, coeff] : p.linear)
        out += coeff * free_vals[static_cast<std::size_t>(var)];
    for (const auto& [id, weight] : p.grams)
        out += weight * gram_polynomial(id, gram_vals.at(static_cast<std::size_t>(id)));
    return out;
}

Polynomial SosProgram::instantiate(const ParamPolynomial& p, const sdp::SdpSolution& solution) const {
    return instantiate(p, free_values(solution), solution.X);
}

std::string SosProgram::dump() const {
    std::ostringstream os;
    os << "sos program: " << nvars_ << " vars, " << num_free() << " free, "
       << gram_blocks_.size() << " gram blocks\n";
    for (const auto& c : sos_) {
        os << "  [sos] " << c.label << ": ";
        bool first = true;
        if (!c.expr.fixed.is_zero()) {
            os << c.expr.fixed.to_string();
            first = false;
        }
        for (const auto& [var, coeff] : c.expr.linear) {
            os << (first ? "" : " + ") << "(" << coeff.to_string() << ")*" << free_name(var);
            first = false;
        }
        for (const auto& [id, weight] : c.expr.grams) {
            os << (first ? "" : " + ") << "(" << weight.to_string() << ")*gram" << id << "[z"
               << gram_block(id).basis.size() << "]";
            first = false;
        }
        if (first) os << "0";
        os << "  in SOS (cert gram" << c.main_gram << ")\n";
    }
    for (const auto& eq : equalities_) {
        os << "  [eq] " << eq.label << ": ";
        bool first = true;
        for (const auto& [var, v] : eq.coeffs) {
            os << (first ? "" : " + ") << v << "*" << free_name(var);
            first = false;
        }
        os << " = " << eq.rhs << "\n";
    }
    if (!objective_.empty()) {
        os << "  minimize ";
        bool first = true;
        for (const auto& [var, v] : objective_) {
            os << (first ? "" : " + ") << v << "*" << free_name(var);
            first = false;
        }
        os << "\n";
    }
    return os.str();
}

std::pair<ParamPolynomial, int> gram_parameterize(SosProgram& program, int max_degree) {
    if (max_degree < 0 || max_degree % 2 != 0)
        throw std::invalid_argument("gram_parameterize: degree must be even and nonnegative");
    const int id = program.new_gram_block(program.make_gram_basis(max_degree / 2));
    ParamPolynomial p(program.nvars());
    p.add_gram(id, Polynomial::constant(program.nvars(), 1.0));
    return {p, id};
}

namespace {

ParamPolynomial domain_operator_impl(SosProgram& program, const SemialgebraicDomain& domain,
                                     int uniform_degree, int total_degree) {
    domain.validate();
    if (domain.nvars != program.nvars())
        throw std::invalid_argument("domain_operator: nvars mismatch");
    const int k = static_cast<int>(domain.inequalities.size());
    if (k > 16) throw std::invalid_argument("domain_operator: too many generators");
    ParamPolynomial out(program.nvars());
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
        Polynomial weight = Polynomial::constant(program.nvars(), 1.0);
        for (int i = 0; i < k; ++i)
            if (mask & (1u << i)) weight *= domain.inequalities[static_cast<std::size_t>(i)];
        int mult_degree = uniform_degree;
        if (total_degree >= 0) {
            const int wdeg = weight.is_zero() ? 0 : weight.degree();
            if (wdeg > total_degree && mask != 0) continue;
            mult_degree = std::max(0, total_degree - wdeg);
            mult_degree -= mult_degree % 2;
        }
        auto [s, id] = gram_parameterize(program, mult_degree);
        (void)id;
        out.add_gram(s.grams.front().first, weight);
    }
    return out;
}

}  // namespace

ParamPolynomial domain_operator(SosProgram& program, const SemialgebraicDomain& domain,
                                int multiplier_degree) {
    if (multiplier_degree < 0 || multiplier_degree % 2 != 0)
        throw std::invalid_argument("domain_operator: multiplier degree must be even and >= 0");
    return domain_operator_impl(program, domain, multiplier_degree, -1);
}

ParamPolynomial domain_operator_capped(SosProgram& program, const SemialgebraicDomain& domain,
                                       int total_degree) {
    if (total_degree < 0) throw std::invalid_argument("domain_operator_capped: negative degree");
    return domain_operator_impl(program, domain, 0, total_degree);
}

std::vector<ParamPolynomial> boundary_operator(SosProgram& program, const ParamPolynomial& p,
                                               const SemialgebraicDomain& domain,
                                               int multiplier_degree) {
    domain.validate();
    if (domain.boundary.empty())
        throw std::invalid_argument("boundary_operator: domain has no boundary factors");
    if (multiplier_degree < 0)
        throw std::invalid_argument("boundary_operator: negative multiplier degree");
    std::vector<ParamPolynomial> out;
    out.reserve(domain.boundary.size());
    const auto t_basis = monomial_basis(program.nvars(), multiplier_degree);
    for (std::size_t i = 0; i < domain.boundary.size(); ++i) {
        const Polynomial& h = domain.boundary[i];
        ParamPolynomial q = p;
        for (std::size_t j = 0; j < t_basis.size(); ++j) {
            const int var = program.new_free("t" + std::to_string(i) + "[" + std::to_string(j) + "]");
            q.add_linear(var, Polynomial::monomial(t_basis[j], -1.0) * h);
        }
        q.merge_duplicates();
        out.push_back(std::move(q));
    }
    return out;
}

SosCheck check_sos(const Polynomial& p, const sdp::SdpSettings& settings) {
    if (p.degree() % 2 != 0)
        throw std::invalid_argument("check_sos: polynomial degree must be even");
    SosProgram program(p.nvars());
    const std::size_t idx =
        program.add_sos_constraint(ParamPolynomial::from_fixed(p), "membership");
    const auto compiled = program.compile();
    const auto solution = sdp::solve(compiled.problem, settings);

    SosCheck out;
    out.solver_status = solution.status;
    if (solution.status == sdp::SdpStatus::Infeasible) {
        out.is_sos = false;
        return out;
    }
    if (solution.status != sdp::SdpStatus::Optimal)
        throw std::runtime_error("check_sos: SDP solver failed with status " +
                                 sdp::to_string(solution.status));

    out.is_sos = true;
    const int gram_id = compiled.groups.at(idx).main_gram;
    const Eigen::MatrixXd& Q = solution.X.at(static_cast<std::size_t>(gram_id));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    const auto& basis = program.gram_block(gram_id).basis;
    const double cutoff = 1e-7 * std::max(1.0, es.eigenvalues().maxCoeff());
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()(i);
        if (lam <= cutoff) continue;
        Polynomial sq(p.nvars());
        for (std::size_t j = 0; j < basis.size(); ++j)
            sq += basis[j] * (std::sqrt(lam) * es.eigenvectors()(static_cast<Eigen::Index>(j), i));
        out.decomposition.push_back(std::move(sq));
    }
    return out;
}

}  // namespace hjbsos::sos
