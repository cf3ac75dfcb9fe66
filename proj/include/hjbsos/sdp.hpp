#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace hjbsos::sdp {

// One symmetric entry of a constraint or objective matrix. Entries are stored
// with i <= j; an off-diagonal entry (i, j, v) stands for the symmetric pair,
// so its contribution to <A, X> is 2 * v * X(i, j).
struct Entry {
    int block = 0;
    int i = 0;
    int j = 0;
    double value = 0.0;
};

// Semidefinite program in standard primal form with free scalar variables:
//
//   minimize    <C, X> + c_free . f
//   subject to  <A_k, X> + (F f)_k = b_k     k = 1..m
//               X  block-diagonal PSD,  f free
struct SdpProblem {
    std::vector<int> block_dims;
    int num_free = 0;

    struct Constraint {
        std::vector<Entry> entries;                       // A_k, sparse symmetric
        std::vector<std::pair<int, double>> free_coeffs;  // row of F
    };
    std::vector<Constraint> constraints;
    std::vector<double> rhs;  // b

    std::vector<Entry> objective_entries;                   // C
    std::vector<std::pair<int, double>> objective_free;     // c_free

    int num_constraints() const { return static_cast<int>(constraints.size()); }
    void validate() const;  // throws std::invalid_argument on malformed input

    // Sparse SDPA-style text export for cross-checking against external
    // solvers. Free variables are emitted as a trailing diagonal block of
    // size 2*num_free via the split f = u - v. Coefficients are printed with
    // 17 significant digits.
    std::string to_sdpa_sparse() const;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericalFailure };

std::string to_string(SdpStatus s);

struct SdpSolution {
    SdpStatus status = SdpStatus::NumericalFailure;
    std::vector<Eigen::MatrixXd> X;  // primal blocks
    Eigen::VectorXd y;               // dual multipliers
    Eigen::VectorXd free_values;     // f
    std::vector<Eigen::MatrixXd> S;  // dual slack blocks

    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;

    int iterations = 0;
    // <X, S> complementarity trace, one value per iteration.
    std::vector<double> gap_trace;

    // On Infeasible: normalized dual improving ray and its certificate
    // quality (objective improvement b'y_ray, worst cone violation).
    Eigen::VectorXd infeasibility_ray;
    double ray_improvement = 0.0;
    double ray_violation = 0.0;
};

struct SdpSettings {
    int max_iter = 100;
    double tol = 1e-8;
    int verbosity = 0;
};

SdpSolution solve(const SdpProblem& problem, const SdpSettings& settings = {});

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

Residuals residuals(const SdpProblem& problem, const SdpSolution& solution);

}  // namespace hjbsos::sdp
