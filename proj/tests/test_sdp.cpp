#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hjbsos/sdp.hpp"

using namespace hjbsos::sdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// minimize x s.t. [[x, 1], [1, x]] >= 0, written without free variables:
// min X00 s.t. X00 - X11 = 0, X01 = 1.
SdpProblem min_x_symmetric() {
    SdpProblem p;
    p.block_dims = {2};
    p.objective_entries = {{0, 0, 0, 1.0}};
    SdpProblem::Constraint c1;
    c1.entries = {{0, 0, 0, 1.0}, {0, 1, 1, -1.0}};
    SdpProblem::Constraint c2;
    c2.entries = {{0, 0, 1, 0.5}};
    p.constraints = {c1, c2};
    p.rhs = {0.0, 1.0};
    return p;
}

// Same problem with the scalar x carried as a free variable.
SdpProblem min_x_free_var() {
    SdpProblem p;
    p.block_dims = {2};
    p.num_free = 1;
    p.objective_free = {{0, 1.0}};
    SdpProblem::Constraint c1;
    c1.entries = {{0, 0, 0, 1.0}};
    c1.free_coeffs = {{0, -1.0}};
    SdpProblem::Constraint c2;
    c2.entries = {{0, 1, 1, 1.0}};
    c2.free_coeffs = {{0, -1.0}};
    SdpProblem::Constraint c3;
    c3.entries = {{0, 0, 1, 0.5}};
    p.constraints = {c1, c2, c3};
    p.rhs = {0.0, 0.0, 1.0};
    return p;
}

}  // namespace

TEST_CASE("analytic sdp: minimize x with [[x,1],[1,x]] psd") {
    const auto problem = min_x_symmetric();
    const auto sol = solve(problem);
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.primal_obj == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(sol.primal_obj - sol.dual_obj) <= 1e-7 * (1.0 + std::abs(sol.primal_obj)));
    CHECK(sol.primal_residual <= 1e-7);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sol.X[0], Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-7);
}

TEST_CASE("analytic sdp with a free variable") {
    const auto sol = solve(min_x_free_var());
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.primal_obj == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.free_values(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("forced feasibility: trace(X) = 1 on a 1x1 block") {
    SdpProblem p;
    p.block_dims = {1};
    SdpProblem::Constraint c;
    c.entries = {{0, 0, 0, 1.0}};
    p.constraints = {c};
    p.rhs = {1.0};
    const auto sol = solve(p);
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.X[0](0, 0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("minimize trace with pinned corner") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective_entries = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
    SdpProblem::Constraint c;
    c.entries = {{0, 0, 0, 1.0}};
    p.constraints = {c};
    p.rhs = {2.0};
    const auto sol = solve(p);
    REQUIRE(sol.status == SdpStatus::Optimal);

    // Independent oracle: grid search over the remaining entries.
    double best = 1e100;
    for (int i = 0; i <= 300; ++i) {
        const double x22 = 0.01 * i;
        for (int j = -200; j <= 200; ++j) {
            const double x12 = 0.01 * j;
            if (2.0 * x22 - x12 * x12 < 0.0) continue;  // PSD test for [[2,x12],[x12,x22]]
            best = std::min(best, 2.0 + x22);
        }
    }
    CHECK(best == doctest::Approx(2.0));
    CHECK(sol.primal_obj == doctest::Approx(best).epsilon(1e-6));
    CHECK(std::abs(sol.X[0](1, 1)) <= 1e-6);
}

TEST_CASE("residuals of exact and perturbed solutions") {
    const auto problem = min_x_symmetric();
    auto sol = solve(problem);
    REQUIRE(sol.status == SdpStatus::Optimal);
    auto r = residuals(problem, sol);
    CHECK(r.primal <= 1e-7);
    CHECK(r.dual <= 1e-6);
    CHECK(r.gap <= 1e-6);

    sol.X[0](0, 0) += 1e-3;
    r = residuals(problem, sol);
    CHECK(r.primal == doctest::Approx(1e-3).epsilon(1e-3));

    // Zero problem: one vacuous constraint, zero matrices everywhere.
    SdpProblem zero;
    zero.block_dims = {2};
    zero.constraints.push_back({});
    zero.rhs = {0.0};
    SdpSolution zsol;
    zsol.X = {MatrixXd::Zero(2, 2)};
    zsol.S = {MatrixXd::Zero(2, 2)};
    zsol.y = VectorXd::Zero(1);
    const auto zr = residuals(zero, zsol);
    CHECK(zr.primal == 0.0);
    CHECK(zr.dual == 0.0);
    CHECK(zr.gap == 0.0);
}

TEST_CASE("duality gap trace is non-increasing near convergence") {
    const auto sol = solve(min_x_symmetric());
    REQUIRE(sol.status == SdpStatus::Optimal);
    REQUIRE(sol.gap_trace.size() >= 5);
    for (std::size_t i = sol.gap_trace.size() - 4; i < sol.gap_trace.size(); ++i)
        CHECK(sol.gap_trace[i] <= sol.gap_trace[i - 1] * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("weak duality on returned optima") {
    const auto sol = solve(min_x_symmetric());
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(sol.dual_obj <= sol.primal_obj + 1e-9 * (1.0 + std::abs(sol.primal_obj)));
}

TEST_CASE("random instances with known optimum from dual certificates") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim_dist(3, 6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    int solved = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const int n = dim_dist(rng);
        // Keep the constraint count well below the cone dimension so the
        // instances stay strictly feasible on both sides.
        const int m = 2 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));

        // Complementary pair X* S* = 0 sharing an eigenbasis.
        MatrixXd basis = MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
        Eigen::HouseholderQR<MatrixXd> qr(basis);
        MatrixXd Q = qr.householderQ();
        const int rank_x = 1 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));
        VectorXd dx = VectorXd::Zero(n), ds = VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (i < rank_x)
                dx(i) = 0.5 + std::abs(u(rng));
            else
                ds(i) = 0.5 + std::abs(u(rng));
        }
        const MatrixXd Xstar = Q * dx.asDiagonal() * Q.transpose();
        const MatrixXd Sstar = Q * ds.asDiagonal() * Q.transpose();
        VectorXd ystar = VectorXd::NullaryExpr(m, [&]() { return u(rng); });

        SdpProblem p;
        p.block_dims = {n};
        MatrixXd C = Sstar;
        for (int k = 0; k < m; ++k) {
            const MatrixXd raw = MatrixXd::NullaryExpr(n, n, [&]() { return u(rng); });
            const MatrixXd A = 0.5 * (raw + raw.transpose());
            SdpProblem::Constraint c;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) c.entries.push_back({0, i, j, A(i, j)});
            p.constraints.push_back(c);
            p.rhs.push_back((A.cwiseProduct(Xstar)).sum());
            C += ystar(k) * A;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) p.objective_entries.push_back({0, i, j, C(i, j)});

        const double pstar = (C.cwiseProduct(Xstar)).sum();
        const auto sol = solve(p);
        REQUIRE(sol.status == SdpStatus::Optimal);
        CHECK(std::abs(sol.primal_obj - pstar) <= 1e-6 * (1.0 + std::abs(pstar)));
        ++solved;
    }
    CHECK(solved == 50);
}

TEST_CASE("infeasible problem yields a dual improving ray") {
    // X11 = -1 with X a 1x1 PSD block.
    SdpProblem p;
    p.block_dims = {1};
    SdpProblem::Constraint c;
    c.entries = {{0, 0, 0, 1.0}};
    p.constraints = {c};
    p.rhs = {-1.0};
    const auto sol = solve(p);
    REQUIRE(sol.status == SdpStatus::Infeasible);
    CHECK(sol.ray_improvement > 1e-6);
    CHECK(sol.ray_violation <= 1e-6);
}

TEST_CASE("unbounded problem is detected") {
    SdpProblem p;
    p.block_dims = {2};
    p.objective_entries = {{0, 0, 0, -1.0}, {0, 1, 1, -1.0}};
    SdpProblem::Constraint c;
    c.entries = {{0, 0, 0, 1.0}};
    p.constraints = {c};
    p.rhs = {1.0};
    const auto sol = solve(p);
    CHECK(sol.status == SdpStatus::Unbounded);
}

TEST_CASE("sdpa export has stable shape") {
    const auto p = min_x_free_var();
    const std::string text = p.to_sdpa_sparse();
    CHECK(text.find("3\n") != std::string::npos);
    CHECK(text.find("-2") != std::string::npos);  // free-variable diagonal block
    CHECK(text.find("0.5") != std::string::npos);
}
