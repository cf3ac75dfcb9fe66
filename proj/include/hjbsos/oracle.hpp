#pragma once

#include <vector>

#include "hjbsos/hjb.hpp"

namespace hjbsos::oracle {

struct Grid1D {
    double a = 0.0;
    double b = 1.0;
    int n = 0;
    std::vector<double> values;

    double spacing() const { return (b - a) / (n - 1); }
    double node(int i) const { return a + spacing() * i; }
};

// Second-order finite-difference solve of the linear desirability equation
//   0 = -(q/lambda) Psi + f Psi' + (Sigma/2) Psi''
// on [a, b] with Dirichlet data, switching to first-order upwinding wherever
// the cell Peclet number |f| h / Sigma exceeds 2.
Grid1D solve_bvp(const hjb::HjbProblem& p, double a, double b, double psi_a, double psi_b, int n);

// max over nodes of -lambda log Psi; requires strictly positive grid values.
double sup_norm_estimate(const Grid1D& grid, double lambda);

}  // namespace hjbsos::oracle
