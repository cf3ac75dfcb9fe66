#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjbsos/poly.hpp"
#include "hjbsos/sdp.hpp"
#include "hjbsos/sos.hpp"

namespace hjbsos::hjb {

// One boundary component {x : h(x) = 0} carrying desirability data psi.
struct BoundaryComponent {
    Polynomial h;
    Polynomial psi;
};

struct Anchor {
    std::vector<double> point;
    double value = 1.0;
};

class CompatibilityViolation : public std::runtime_error {
  public:
    CompatibilityViolation(int row, int col, double worst, const std::string& what)
        : std::runtime_error(what), row(row), col(col), worst(worst) {}
    int row;
    int col;
    double worst;
};

// First-exit stochastic optimal control problem
//   dx = (f(x) + G(x) u) dt + B(x) dw,   E[J] = E[phi(x_T) + int q + u'Ru/2]
// with the noise compatibility condition lambda G R^-1 G' = B Sigma_eps B'.
struct HjbProblem {
    int nvars = 0;
    PolyMatrix f;  // n x 1 drift
    PolyMatrix G;  // n x m control gain
    PolyMatrix B;  // n x l noise gain
    Polynomial q;  // state cost rate
    Eigen::MatrixXd R;          // m x m SPD control penalty
    Eigen::MatrixXd sigma_eps;  // l x l PSD Brownian covariance
    double lambda = 0.0;        // <= 0 requests solving it from the compatibility condition
    sos::SemialgebraicDomain domain;
    std::vector<BoundaryComponent> boundary;
    std::vector<Anchor> anchors;

    HjbProblem(int nv, PolyMatrix f_, PolyMatrix G_, PolyMatrix B_, Polynomial q_)
        : nvars(nv), f(std::move(f_)), G(std::move(G_)), B(std::move(B_)), q(std::move(q_)) {}

    int num_controls() const { return G.cols(); }
    int num_noise() const { return B.cols(); }

    // Checks shapes, the equilibrium conditions, positive definiteness of q
    // and R, and solves for lambda when it was left unset. Returns warnings
    // for paper conditions that are violated by benign constant-gain systems.
    std::vector<std::string> validate();

    // Sigma(x) = B Sigma_eps B'.
    PolyMatrix noise_covariance() const;

    // Verifies lambda G R^-1 G' == B Sigma_eps B' as an exact polynomial
    // identity (coefficient tolerance 1e-10); throws CompatibilityViolation
    // with the worst entry otherwise. Returns Sigma(x).
    PolyMatrix validate_compatibility() const;

    // L(Psi) = f' grad(Psi) + 1/2 Tr(hess(Psi) Sigma(x)).
    Polynomial generator(const Polynomial& psi) const;
};

struct RelaxationLayout {
    int degree = 0;
    // Psi_l = sum_i value(psi_l_vars[i]) * param_basis[i], same for Psi_u.
    std::vector<Polynomial> param_basis;
    std::vector<int> psi_l_vars;
    std::vector<int> psi_u_vars;
    int eps_var = -1;
};

struct Relaxation {
    sos::SosProgram program;
    RelaxationLayout layout;
};

// Compiles the joint lower/upper relaxation at the given even degree:
// PDE sub/supersolution inequalities on Omega, the epsilon gap bound,
// boundary ordering 0 <= Psi_l <= psi <= Psi_u, per-axis monotonicity of
// Psi_l, and the anchor equalities. Objective: minimize epsilon.
Relaxation build_relaxation(const HjbProblem& p, int degree);

enum class RungStatus { Feasible, Infeasible, SolverFailure };

std::string to_string(RungStatus s);

struct SubdomainSolution {
    RungStatus status = RungStatus::SolverFailure;
    sdp::SdpStatus solver_status = sdp::SdpStatus::NumericalFailure;
    Polynomial psi_l{1};
    Polynomial psi_u{1};
    double epsilon = 0.0;
    int degree = 0;
    int iterations = 0;
    double primal_residual = 0.0;
    double duality_gap = 0.0;
};

SubdomainSolution solve_relaxation(const HjbProblem& p, int degree,
                                   const sdp::SdpSettings& settings = {});

struct RelaxationSolution {
    int degree = 0;
    std::vector<SubdomainSolution> parts;  // one per subproblem, in order

    bool feasible() const;
    double max_epsilon() const;
};

// One rung per even degree in [d_min, d_max], each solving every subproblem
// independently. Infeasible rungs are recorded, not raised.
std::vector<RelaxationSolution> solve_hierarchy(const std::vector<HjbProblem>& subproblems,
                                                int d_min, int d_max,
                                                const sdp::SdpSettings& settings = {});

// Splits along one axis into Omega cap {x_axis >= 0} and Omega cap
// {x_axis <= 0}. Boundary components that cannot touch a half are dropped;
// both halves gain the origin anchor as a boundary component.
std::vector<HjbProblem> partition_domain(const HjbProblem& p, int axis);

}  // namespace hjbsos::hjb
