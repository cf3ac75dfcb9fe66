#include "hjbsos/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjbsos::hjb {

namespace {

constexpr unsigned kSampleSeed = 0x5eedu;

bool is_origin(std::span<const double> point, double tol = 1e-12) {
    for (double v : point)
        if (std::abs(v) > tol) return false;
    return true;
}

// Interval bound of p over an axis-aligned box, one term at a time.
std::pair<double, double> range_over_box(const Polynomial& p,
                                         const std::vector<std::array<double, 2>>& box) {
    double lo = 0.0, hi = 0.0;
    for (const auto& [mono, c] : p.terms()) {
        double tlo = c, thi = c;
        for (int v = 0; v < p.nvars(); ++v) {
            const int e = mono.exponent(v);
            if (e == 0) continue;
            const double a = std::pow(box[static_cast<std::size_t>(v)][0], e);
            const double b = std::pow(box[static_cast<std::size_t>(v)][1], e);
            double plo = std::min(a, b), phi = std::max(a, b);
            if (e % 2 == 0 && box[static_cast<std::size_t>(v)][0] < 0.0 &&
                box[static_cast<std::size_t>(v)][1] > 0.0)
                plo = 0.0;
            const double c1 = tlo * plo, c2 = tlo * phi, c3 = thi * plo, c4 = thi * phi;
            tlo = std::min({c1, c2, c3, c4});
            thi = std::max({c1, c2, c3, c4});
        }
        lo += tlo;
        hi += thi;
    }
    return {lo, hi};
}

// True if the half-space side {sign * x_axis > 0} of the domain has samples,
// i.e. the monotonicity constraint on that side is not vacuous.
bool half_domain_inhabited(const sos::SemialgebraicDomain& domain, int axis, int sign) {
    const auto& [lo, hi] = domain.box[static_cast<std::size_t>(axis)];
    if (sign > 0 && hi <= 1e-9) return false;
    if (sign < 0 && lo >= -1e-9) return false;
    sos::SemialgebraicDomain half = domain;
    auto& b = half.box[static_cast<std::size_t>(axis)];
    if (sign > 0)
        b[0] = std::max(b[0], 1e-9);
    else
        b[1] = std::min(b[1], -1e-9);
    return !sos::sample_domain(half, 8, kSampleSeed).empty();
}

// Generators that are strictly positive on the whole bounding box never touch
// the set; their multiplier blocks only add flat directions to the SDP.
void drop_redundant_generators(sos::SemialgebraicDomain& domain);

sos::SemialgebraicDomain half_space_intersection(const sos::SemialgebraicDomain& domain, int axis,
                                                 int sign) {
    sos::SemialgebraicDomain out = domain;
    Polynomial cut = Polynomial::variable(domain.nvars, axis) * static_cast<double>(sign);
    bool present = false;
    for (const auto& g : out.inequalities)
        if (g.near_equal(cut, 1e-14)) present = true;
    if (!present) out.inequalities.push_back(cut);
    auto& b = out.box[static_cast<std::size_t>(axis)];
    if (sign > 0)
        b[0] = std::max(b[0], 0.0);
    else
        b[1] = std::min(b[1], 0.0);
    drop_redundant_generators(out);
    return out;
}

// Root of an affine polynomial in one variable, if that is what h is.
std::optional<double> point_component_root(const Polynomial& h) {
    if (h.nvars() != 1 || h.degree() != 1) return std::nullopt;
    const double c1 = h.coefficient(Monomial::variable(1, 0));
    const double c0 = h.coefficient(Monomial::constant(1));
    if (c1 == 0.0) return std::nullopt;
    return -c0 / c1;
}

void drop_redundant_generators(sos::SemialgebraicDomain& domain) {
    std::vector<Polynomial> kept;
    for (const auto& g : domain.inequalities) {
        const auto [lo, hi] = range_over_box(g, domain.box);
        (void)hi;
        if (lo > 1e-12) continue;
        kept.push_back(g);
    }
    if (!kept.empty()) domain.inequalities = std::move(kept);
}

PolyMatrix lift_constant(const Eigen::MatrixXd& M, int nvars) {
    PolyMatrix out(static_cast<int>(M.rows()), static_cast<int>(M.cols()), nvars);
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j)
            if (M(i, j) != 0.0) out.at(i, j) = Polynomial::constant(nvars, M(i, j));
    return out;
}

bool nonzero_at_origin(const PolyMatrix& M, std::span<const double> origin) {
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j)
            if (std::abs(M.at(i, j).evaluate(origin)) > 1e-12) return true;
    return false;
}

}  // namespace

std::vector<std::string> HjbProblem::validate() {
    std::vector<std::string> warnings;
    if (nvars <= 0) throw std::invalid_argument("HjbProblem: nvars must be positive");
    if (f.rows() != nvars || f.cols() != 1) throw std::invalid_argument("HjbProblem: f must be n x 1");
    if (G.rows() != nvars) throw std::invalid_argument("HjbProblem: G must have n rows");
    if (B.rows() != nvars) throw std::invalid_argument("HjbProblem: B must have n rows");
    if (q.nvars() != nvars) throw std::invalid_argument("HjbProblem: q variable count mismatch");
    if (R.rows() != G.cols() || R.cols() != G.cols())
        throw std::invalid_argument("HjbProblem: R must be m x m");
    if (sigma_eps.rows() != B.cols() || sigma_eps.cols() != B.cols())
        throw std::invalid_argument("HjbProblem: Sigma_eps must be l x l");
    domain.validate();
    if (static_cast<int>(domain.box.size()) != nvars)
        throw std::invalid_argument("HjbProblem: domain box dimension mismatch");
    for (const auto& comp : boundary) {
        if (comp.h.nvars() != nvars || comp.psi.nvars() != nvars)
            throw std::invalid_argument("HjbProblem: boundary component variable count mismatch");
    }

    const std::vector<double> origin(static_cast<std::size_t>(nvars), 0.0);
    for (int i = 0; i < nvars; ++i)
        if (std::abs(f.at(i, 0).evaluate(origin)) > 1e-12)
            throw std::invalid_argument("HjbProblem: drift must vanish at the origin");
    if (nonzero_at_origin(G, origin))
        warnings.push_back("G(0) != 0: the origin is not a strict equilibrium");
    if (nonzero_at_origin(B, origin))
        warnings.push_back("B(0) != 0: noise does not vanish at the origin");

    if (std::abs(q.evaluate(origin)) > 1e-12)
        throw std::invalid_argument("HjbProblem: q(0) must be 0");
    for (const auto& x : sos::sample_domain(domain, 1000, kSampleSeed)) {
        if (is_origin(x, 1e-8)) continue;
        if (q.evaluate(x) <= 0.0)
            throw std::invalid_argument("HjbProblem: q must be positive on the domain away from 0");
    }

    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("HjbProblem: R must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> rllt(R);
    if (rllt.info() != Eigen::Success)
        throw std::invalid_argument("HjbProblem: R must be positive definite");
    if ((sigma_eps - sigma_eps.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("HjbProblem: Sigma_eps must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(sigma_eps, Eigen::EigenvaluesOnly);
    if (ses.eigenvalues().minCoeff() < -1e-12)
        throw std::invalid_argument("HjbProblem: Sigma_eps must be positive semidefinite");

    if (lambda <= 0.0) {
        // Solve lambda G R^-1 G' = B Sigma_eps B' when both sides are constant.
        const PolyMatrix lhs = G * lift_constant(R.inverse(), nvars) * G.transpose();
        const PolyMatrix rhs = noise_covariance();
        double ratio = 0.0;
        for (int i = 0; i < nvars && ratio == 0.0; ++i)
            for (int j = 0; j < nvars && ratio == 0.0; ++j) {
                const Polynomial& den = lhs.at(i, j);
                const Polynomial& num = rhs.at(i, j);
                if (den.degree() > 0 || num.degree() > 0)
                    throw std::invalid_argument(
                        "HjbProblem: lambda not given and the compatibility identity is not constant");
                const double d = den.evaluate(origin);
                if (std::abs(d) > 1e-14) ratio = num.evaluate(origin) / d;
            }
        if (ratio <= 0.0)
            throw std::invalid_argument("HjbProblem: could not solve for a positive lambda");
        lambda = ratio;
    }
    validate_compatibility();
    return warnings;
}

PolyMatrix HjbProblem::noise_covariance() const {
    return B * lift_constant(sigma_eps, nvars) * B.transpose();
}

PolyMatrix HjbProblem::validate_compatibility() const {
    if (lambda <= 0.0) throw std::invalid_argument("HjbProblem: lambda must be positive");
    const PolyMatrix lhs = (G * lift_constant(R.inverse(), nvars) * G.transpose()).scaled(lambda);
    const PolyMatrix rhs = noise_covariance();

    double worst = 0.0;
    int wr = 0, wc = 0;
    for (int i = 0; i < nvars; ++i)
        for (int j = 0; j < nvars; ++j) {
            const Polynomial diff = lhs.at(i, j) - rhs.at(i, j);
            for (const auto& [mono, c] : diff.terms()) {
                (void)mono;
                if (std::abs(c) > std::abs(worst)) {
                    worst = c;
                    wr = i;
                    wc = j;
                }
            }
        }
    if (std::abs(worst) > 1e-10) {
        std::ostringstream os;
        os << "compatibility condition violated at Sigma entry (" << wr << ", " << wc
           << "): coefficient mismatch " << worst;
        throw CompatibilityViolation(wr, wc, worst, os.str());
    }
    return rhs;
}

Polynomial HjbProblem::generator(const Polynomial& psi) const {
    if (psi.nvars() != nvars) throw std::invalid_argument("generator: variable count mismatch");
    const PolyMatrix sigma = noise_covariance();
    const PolyMatrix grad = gradient(psi);
    Polynomial out(nvars);
    for (int i = 0; i < nvars; ++i) out += f.at(i, 0) * grad.at(i, 0);
    const PolyMatrix hess = hessian(psi);
    for (int i = 0; i < nvars; ++i)
        for (int j = 0; j < nvars; ++j) out += hess.at(i, j) * sigma.at(j, i) * 0.5;
    return out;
}

Relaxation build_relaxation(const HjbProblem& p, int degree) {
    if (degree < 2 || degree % 2 != 0)
        throw std::invalid_argument("build_relaxation: degree must be even and >= 2");
    for (const auto& comp : p.boundary)
        if (comp.psi.degree() > degree)
            throw std::invalid_argument(
                "build_relaxation: degree too small to represent the boundary data");
    const PolyMatrix sigma = p.validate_compatibility();
    (void)sigma;

    Relaxation rel{sos::SosProgram(p.nvars), {}};
    auto& prog = rel.program;
    rel.layout.degree = degree;

    // Chebyshev parameterization and Gram bases in one dimension; monomials
    // otherwise. The univariate hierarchy reaches degree ~20 where monomial
    // bases are numerically unusable.
    if (p.nvars == 1) {
        rel.layout.param_basis =
            chebyshev_basis_1d(degree, p.domain.box[0][0], p.domain.box[0][1]);
        prog.use_chebyshev_gram_basis(p.domain.box[0][0], p.domain.box[0][1]);
    } else {
        for (const auto& m : monomial_basis(p.nvars, degree))
            rel.layout.param_basis.push_back(Polynomial::monomial(m, 1.0));
    }
    const auto& basis = rel.layout.param_basis;

    sos::ParamPolynomial psi_l(p.nvars), psi_u(p.nvars);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const int vl = prog.new_free("psi_l[" + std::to_string(i) + "]");
        psi_l.add_linear(vl, basis[i]);
        rel.layout.psi_l_vars.push_back(vl);
    }
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const int vu = prog.new_free("psi_u[" + std::to_string(i) + "]");
        psi_u.add_linear(vu, basis[i]);
        rel.layout.psi_u_vars.push_back(vu);
    }
    const int eps = prog.new_free("eps");
    rel.layout.eps_var = eps;

    // (i)  L(Psi_l) - (1/lambda) q Psi_l - D(Omega) in S[x]
    // (ii) (1/lambda) q Psi_u - L(Psi_u) - D(Omega) in S[x]
    const double inv_lambda = 1.0 / p.lambda;
    sos::ParamPolynomial pde_lower(p.nvars), pde_upper(p.nvars);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const Polynomial lm = p.generator(basis[i]) - p.q * basis[i] * inv_lambda;
        pde_lower.add_linear(rel.layout.psi_l_vars[i], lm);
        pde_upper.add_linear(rel.layout.psi_u_vars[i], -lm);
    }
    pde_lower -= sos::domain_operator_capped(prog, p.domain, degree);
    prog.add_sos_constraint(pde_lower, "pde_lower", degree);
    pde_upper -= sos::domain_operator_capped(prog, p.domain, degree);
    prog.add_sos_constraint(pde_upper, "pde_upper", degree);

    // (iii) eps - (Psi_u - Psi_l) - D(Omega) in S[x]
    sos::ParamPolynomial gap(p.nvars);
    gap.add_linear(eps, Polynomial::constant(p.nvars, 1.0));
    gap -= psi_u;
    gap += psi_l;
    gap -= sos::domain_operator_capped(prog, p.domain, degree);
    prog.add_sos_constraint(gap, "gap");

    // (iv) 0 <= Psi_l <= psi <= Psi_u on every boundary component. Affine 1D
    // factors pin a single point, where the multiplier construction
    // degenerates to evaluation; other components go through B with free
    // multipliers of degree d - deg(h).
    auto eval_param = [&](const sos::ParamPolynomial& param, std::span<const double> at) {
        sos::ParamPolynomial out(p.nvars);
        out.fixed = Polynomial::constant(p.nvars, param.fixed.evaluate(at));
        for (const auto& [var, coeff] : param.linear)
            out.add_linear(var, Polynomial::constant(p.nvars, coeff.evaluate(at)));
        out.merge_duplicates();
        return out;
    };
    for (std::size_t ci = 0; ci < p.boundary.size(); ++ci) {
        const auto& comp = p.boundary[ci];
        const std::string tag = "@h" + std::to_string(ci);
        if (const auto root = point_component_root(comp.h)) {
            const std::vector<double> xb{*root};
            const double psi_val = comp.psi.evaluate(xb);
            // An anchor equality pinning Psi_l at this very point makes the
            // lower-bound rows exact equalities; keeping them would squeeze
            // their slack blocks to zero and destroy the primal interior.
            bool anchored_here = false;
            for (const auto& anchor : p.anchors)
                if (static_cast<int>(anchor.point.size()) == 1 &&
                    std::abs(anchor.point[0] - *root) <= 1e-12 &&
                    std::abs(anchor.value - psi_val) <= 1e-12)
                    anchored_here = true;
            sos::ParamPolynomial l_at = eval_param(psi_l, xb);
            sos::ParamPolynomial u_at = eval_param(psi_u, xb);
            if (!anchored_here) {
                prog.add_sos_constraint(l_at, "bnd_lower_nonneg" + tag);
                sos::ParamPolynomial below = -l_at;
                below.fixed += Polynomial::constant(p.nvars, psi_val);
                prog.add_sos_constraint(below, "bnd_lower_le_psi" + tag);
            }
            sos::ParamPolynomial above = u_at;
            above.fixed -= Polynomial::constant(p.nvars, psi_val);
            prog.add_sos_constraint(above, "bnd_upper_ge_psi" + tag);
        } else {
            sos::SemialgebraicDomain single = p.domain;
            single.boundary = {comp.h};
            const int t_degree = std::max(0, degree - comp.h.degree());
            const auto psi_fixed = sos::ParamPolynomial::from_fixed(comp.psi);
            auto emit = [&](const sos::ParamPolynomial& expr, const std::string& label) {
                auto elems = sos::boundary_operator(prog, expr, single, t_degree);
                prog.add_sos_constraint(elems.at(0), label + tag);
            };
            emit(psi_l, "bnd_lower_nonneg");
            emit(psi_fixed - psi_l, "bnd_lower_le_psi");
            emit(psi_u - psi_fixed, "bnd_upper_ge_psi");
        }
    }

    // (v) monotonicity of Psi_l toward the origin, per axis, skipping sides
    // the domain does not reach.
    for (int axis = 0; axis < p.nvars; ++axis) {
        sos::ParamPolynomial dpsi(p.nvars);
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const Polynomial dm = basis[i].differentiate(axis);
            if (!dm.is_zero()) dpsi.add_linear(rel.layout.psi_l_vars[i], dm);
        }
        if (half_domain_inhabited(p.domain, axis, +1)) {
            sos::ParamPolynomial expr = -dpsi;
            expr -= sos::domain_operator_capped(prog, half_space_intersection(p.domain, axis, +1),
                                                degree);
            prog.add_sos_constraint(expr, "mono_dec_axis" + std::to_string(axis));
        }
        if (half_domain_inhabited(p.domain, axis, -1)) {
            sos::ParamPolynomial expr = dpsi;
            expr -= sos::domain_operator_capped(prog, half_space_intersection(p.domain, axis, -1),
                                                degree);
            prog.add_sos_constraint(expr, "mono_inc_axis" + std::to_string(axis));
        }
    }

    // (vi) interior anchors Psi_l(x0) = value.
    for (const auto& anchor : p.anchors) {
        if (static_cast<int>(anchor.point.size()) != p.nvars)
            throw std::invalid_argument("build_relaxation: anchor dimension mismatch");
        std::vector<std::pair<int, double>> coeffs;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const double v = basis[i].evaluate(anchor.point);
            if (v != 0.0) coeffs.emplace_back(rel.layout.psi_l_vars[i], v);
        }
        prog.add_linear_equality(std::move(coeffs), anchor.value, "anchor");
    }

    prog.set_objective({{eps, 1.0}});
    return rel;
}

std::string to_string(RungStatus s) {
    switch (s) {
        case RungStatus::Feasible: return "feasible";
        case RungStatus::Infeasible: return "infeasible";
        case RungStatus::SolverFailure: return "solver_failure";
    }
    return "unknown";
}

SubdomainSolution solve_relaxation(const HjbProblem& p, int degree,
                                   const sdp::SdpSettings& settings) {
    SubdomainSolution out;
    out.degree = degree;
    Relaxation rel = build_relaxation(p, degree);
    // Univariate identities are matched at Chebyshev points; the coefficient
    // form is badly scaled at hierarchy degrees.
    const auto compiled = p.nvars == 1
                              ? rel.program.compile_sampled(p.domain.box[0][0], p.domain.box[0][1])
                              : rel.program.compile();
    const auto solution = sdp::solve(compiled.problem, settings);
    out.solver_status = solution.status;
    out.iterations = solution.iterations;
    out.primal_residual = solution.primal_residual;
    out.duality_gap = solution.duality_gap;
    switch (solution.status) {
        case sdp::SdpStatus::Optimal: {
            out.status = RungStatus::Feasible;
            const auto vals = rel.program.free_values(solution);
            Polynomial pl(p.nvars), pu(p.nvars);
            for (std::size_t i = 0; i < rel.layout.param_basis.size(); ++i) {
                pl += rel.layout.param_basis[i] *
                      vals[static_cast<std::size_t>(rel.layout.psi_l_vars[i])];
                pu += rel.layout.param_basis[i] *
                      vals[static_cast<std::size_t>(rel.layout.psi_u_vars[i])];
            }
            out.psi_l = pl;
            out.psi_u = pu;
            out.epsilon = vals[static_cast<std::size_t>(rel.layout.eps_var)];
            break;
        }
        case sdp::SdpStatus::Infeasible:
            out.status = RungStatus::Infeasible;
            break;
        default:
            out.status = RungStatus::SolverFailure;
            break;
    }
    return out;
}

bool RelaxationSolution::feasible() const {
    if (parts.empty()) return false;
    for (const auto& part : parts)
        if (part.status != RungStatus::Feasible) return false;
    return true;
}

double RelaxationSolution::max_epsilon() const {
    double eps = 0.0;
    for (const auto& part : parts) eps = std::max(eps, part.epsilon);
    return eps;
}

std::vector<RelaxationSolution> solve_hierarchy(const std::vector<HjbProblem>& subproblems,
                                                int d_min, int d_max,
                                                const sdp::SdpSettings& settings) {
    if (subproblems.empty()) throw std::invalid_argument("solve_hierarchy: no subproblems");
    if (d_min > d_max || d_min % 2 != 0 || d_max % 2 != 0)
        throw std::invalid_argument("solve_hierarchy: degree range must be even");
    std::vector<RelaxationSolution> out;
    for (int d = d_min; d <= d_max; d += 2) {
        RelaxationSolution rung;
        rung.degree = d;
        for (const auto& sub : subproblems) rung.parts.push_back(solve_relaxation(sub, d, settings));
        out.push_back(std::move(rung));
    }
    return out;
}

std::vector<HjbProblem> partition_domain(const HjbProblem& p, int axis) {
    if (axis < 0 || axis >= p.nvars) throw std::invalid_argument("partition_domain: axis out of range");
    const auto& [lo, hi] = p.domain.box[static_cast<std::size_t>(axis)];
    if (!(lo < -1e-12 && hi > 1e-12))
        throw std::invalid_argument("partition_domain: origin is not interior along the axis");

    const std::vector<double> origin(static_cast<std::size_t>(p.nvars), 0.0);
    std::optional<double> origin_value;
    for (const auto& anchor : p.anchors)
        if (is_origin(anchor.point)) origin_value = anchor.value;
    if (!origin_value)
        throw std::invalid_argument("partition_domain: an origin anchor is required");

    std::vector<HjbProblem> out;
    for (const int sign : {-1, +1}) {
        HjbProblem sub = p;
        sub.domain = half_space_intersection(p.domain, axis, sign);
        drop_redundant_generators(sub.domain);
        sub.boundary.clear();
        for (const auto& comp : p.boundary) {
            const auto [rlo, rhi] = range_over_box(comp.h, sub.domain.box);
            if (rlo > 1e-12 || rhi < -1e-12) continue;  // cannot vanish on this half
            sub.boundary.push_back(comp);
        }
        sub.boundary.push_back({Polynomial::variable(p.nvars, axis),
                                Polynomial::constant(p.nvars, *origin_value)});
        out.push_back(std::move(sub));
    }
    return out;
}

}  // namespace hjbsos::hjb
