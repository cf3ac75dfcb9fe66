#include "hjbsos/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace hjbsos::oracle {

Grid1D solve_bvp(const hjb::HjbProblem& p, double a, double b, double psi_a, double psi_b, int n) {
    if (p.nvars != 1) throw std::invalid_argument("solve_bvp: problem must be one-dimensional");
    if (n < 3) throw std::invalid_argument("solve_bvp: need at least 3 nodes");
    if (!(a < b)) throw std::invalid_argument("solve_bvp: empty interval");

    const PolyMatrix sigma = p.validate_compatibility();
    const Polynomial& sig = sigma.at(0, 0);
    const Polynomial& drift = p.f.at(0, 0);

    Grid1D grid;
    grid.a = a;
    grid.b = b;
    grid.n = n;
    grid.values.assign(static_cast<std::size_t>(n), 0.0);
    grid.values.front() = psi_a;
    grid.values.back() = psi_b;
    const double h = grid.spacing();

    // Tridiagonal rows for the interior nodes.
    const int m = n - 2;
    std::vector<double> sub(static_cast<std::size_t>(m), 0.0);
    std::vector<double> diag(static_cast<std::size_t>(m), 0.0);
    std::vector<double> sup(static_cast<std::size_t>(m), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);

    for (int i = 0; i < m; ++i) {
        const std::vector<double> x{grid.node(i + 1)};
        const double s = sig.evaluate(x);
        const double fv = drift.evaluate(x);
        const double qv = p.q.evaluate(x) / p.lambda;
        if (s <= 1e-14) throw std::runtime_error("solve_bvp: degenerate diffusion coefficient");

        double lower = s / (2.0 * h * h);
        double upper = s / (2.0 * h * h);
        double center = -s / (h * h) - qv;
        if (std::abs(fv) * h / s > 2.0) {
            // Upwind the convection term.
            if (fv > 0.0) {
                upper += fv / h;
                center -= fv / h;
            } else {
                lower -= fv / h;
                center += fv / h;
            }
        } else {
            lower -= fv / (2.0 * h);
            upper += fv / (2.0 * h);
        }
        sub[static_cast<std::size_t>(i)] = lower;
        diag[static_cast<std::size_t>(i)] = center;
        sup[static_cast<std::size_t>(i)] = upper;
        if (i == 0) rhs[static_cast<std::size_t>(i)] -= lower * psi_a;
        if (i == m - 1) rhs[static_cast<std::size_t>(i)] -= upper * psi_b;
    }

    // Thomas algorithm.
    for (int i = 1; i < m; ++i) {
        const double denom = diag[static_cast<std::size_t>(i - 1)];
        if (std::abs(denom) < 1e-300) throw std::runtime_error("solve_bvp: singular tridiagonal system");
        const double w = sub[static_cast<std::size_t>(i)] / denom;
        diag[static_cast<std::size_t>(i)] -= w * sup[static_cast<std::size_t>(i - 1)];
        rhs[static_cast<std::size_t>(i)] -= w * rhs[static_cast<std::size_t>(i - 1)];
    }
    if (std::abs(diag[static_cast<std::size_t>(m - 1)]) < 1e-300)
        throw std::runtime_error("solve_bvp: singular tridiagonal system");
    grid.values[static_cast<std::size_t>(m)] =
        rhs[static_cast<std::size_t>(m - 1)] / diag[static_cast<std::size_t>(m - 1)];
    for (int i = m - 2; i >= 0; --i) {
        grid.values[static_cast<std::size_t>(i + 1)] =
            (rhs[static_cast<std::size_t>(i)] -
             sup[static_cast<std::size_t>(i)] * grid.values[static_cast<std::size_t>(i + 2)]) /
            diag[static_cast<std::size_t>(i)];
    }
    return grid;
}

double sup_norm_estimate(const Grid1D& grid, double lambda) {
    double vmax = 0.0;
    for (double v : grid.values) {
        if (v <= 0.0) throw std::invalid_argument("sup_norm_estimate: nonpositive grid value");
        vmax = std::max(vmax, -lambda * std::log(v));
    }
    return vmax;
}

}  // namespace hjbsos::oracle
