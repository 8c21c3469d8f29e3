#pragma once

#include <Eigen/Dense>
#include <functional>

namespace sqlab {

// Adaptive Gauss-Kronrod (G7,K15) integration of f over [a, b] to absolute
// accuracy abs_tol. Throws std::runtime_error if the subdivision budget is
// exhausted before the error estimate drops below abs_tol.
double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-12, int max_intervals = 4096);

// Gauss-Hermite rule for the weight exp(-x^2), computed by Golub-Welsch on the
// Jacobi matrix. nodes/weights have size `order`.
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};
GaussHermiteRule gauss_hermite_rule(int order);

// E[f(Z)] for Z ~ N(0,1) using a Gauss-Hermite rule of the given order.
double normal_expectation(const std::function<double(double)>& f, int order);

}  // namespace sqlab
