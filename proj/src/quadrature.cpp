#include "sqlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace sqlab {

namespace {

// (G7, K15) abscissae and weights on [-1, 1], positive half.
constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
    double integral;
    double error;
};

PanelResult gauss_kronrod_panel(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);

    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kKronrodNodes[i]);
        fv[14 - i] = f(c + h * kKronrodNodes[i]);
    }
    fv[7] = f(c);

    double kronrod = kKronrodWeights[7] * fv[7];
    for (int i = 0; i < 7; ++i) kronrod += kKronrodWeights[i] * (fv[i] + fv[14 - i]);

    double gauss = kGaussWeights[3] * fv[7];
    for (int i = 0; i < 3; ++i) gauss += kGaussWeights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);

    kronrod *= h;
    gauss *= h;
    // conservative error estimate: the raw embedded-rule difference
    const double err = std::abs(kronrod - gauss);
    return {kronrod, std::max(err, std::abs(kronrod) * 1e-16)};
}

}  // namespace

double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, int max_intervals) {
    if (!(a < b)) {
        if (a == b) return 0.0;
        return -adaptive_integrate(f, b, a, abs_tol, max_intervals);
    }

    struct Interval {
        double a, b, integral, error;
        bool operator<(const Interval& o) const { return error < o.error; }
    };

    // start from several panels so a spike near one edge cannot hide inside a
    // single panel's error estimate
    std::priority_queue<Interval> queue;
    double total = 0.0;
    double total_error = 0.0;
    const int initial = 8;
    for (int i = 0; i < initial; ++i) {
        const double lo = a + (b - a) * i / initial;
        const double hi = a + (b - a) * (i + 1) / initial;
        PanelResult panel = gauss_kronrod_panel(f, lo, hi);
        queue.push({lo, hi, panel.integral, panel.error});
        total += panel.integral;
        total_error += panel.error;
    }
    int used = initial;

    while (total_error > abs_tol) {
        if (used >= max_intervals) {
            throw std::runtime_error("adaptive_integrate: subdivision budget exhausted");
        }
        Interval worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        PanelResult left = gauss_kronrod_panel(f, worst.a, mid);
        PanelResult right = gauss_kronrod_panel(f, mid, worst.b);
        total += left.integral + right.integral - worst.integral;
        total_error += left.error + right.error - worst.error;
        queue.push({worst.a, mid, left.integral, left.error});
        queue.push({mid, worst.b, right.integral, right.error});
        ++used;
    }
    return total;
}

GaussHermiteRule gauss_hermite_rule(int order) {
    if (order < 1) throw std::invalid_argument("gauss_hermite_rule: order must be >= 1");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double off = std::sqrt(0.5 * k);
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes = solver.eigenvalues();
    rule.weights.resize(order);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int i = 0; i < order; ++i) {
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights(i) = sqrt_pi * v0 * v0;
    }
    return rule;
}

double normal_expectation(const std::function<double(double)>& f, int order) {
    GaussHermiteRule rule = gauss_hermite_rule(order);
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    double acc = 0.0;
    for (int i = 0; i < rule.nodes.size(); ++i) {
        acc += rule.weights(i) * f(rule.nodes(i) * M_SQRT2);
    }
    return acc * inv_sqrt_pi;
}

}  // namespace sqlab
