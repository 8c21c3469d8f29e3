#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sqlab/detectors_gmm.hpp"
#include "sqlab/models.hpp"
#include "sqlab/sq_core.hpp"

namespace sqlab {

// Second-moment regression tests. sigma_hint is the noise scale the test uses
// inside its truncations and thresholds; the truth may differ.
struct RegTestSpec {
    std::string family;  // reg-exhaustive | reg-coordinate
    ThresholdMode mode = ThresholdMode::Formula;
    double calibrated_threshold = 0.0;
    double R = 6.0;
    double C_const = 4.0;  // the unspecified threshold constant
    double xi = 0.05;
    long n = 1;
    int d = 1;
    int s = 1;
    double sigma_hint = 1.0;

    double formula_threshold() const;
    double threshold() const {
        return mode == ThresholdMode::Formula ? formula_threshold() : calibrated_threshold;
    }
    std::string to_json() const;
    static RegTestSpec from_json(const std::string& text);
};

// q_v(y,x) = y^2 (s^{-1}(x'v)^2 - 1) 1{|y| <= sigma R} 1{|v'x| <= R sqrt(s log n)}
std::vector<BoundedQuery> reg_exhaustive_queries(int d, int s, double sigma_hint, double R, long n,
                                                 std::size_t cap = default_enum_cap());
// q_j(y,x) = y^2 (x_j^2 - 1) 1{|y| <= sigma R} 1{|x_j| <= R sqrt(log n)}
std::vector<BoundedQuery> reg_coordinate_queries(int d, double sigma_hint, double R, long n);

int reg_exhaustive_test(const Transcript& transcript, const RegTestSpec& spec);
int reg_coordinate_test(const Transcript& transcript, const RegTestSpec& spec);

// Integral of w^2 (w^2 - 1) over |w| > t against the standard normal density:
// the truncation loss of the second-moment queries per unit squared
// correlation. Closed form 2[(t^3 + 2t) phi(t) + 2 Q(t)].
double truncation_bias_coefficient(double t);
// Adaptive-quadrature evaluation of the same integral (independent oracle).
double truncation_bias_coefficient_by_quadrature(double t, double abs_tol = 1e-10);

// Truncation level R = max(2 t*, R_tail): t* solves
// truncation_bias_coefficient(t) = target by bisection on [1, 64]; R_tail is
// the smallest half-integer making the exponential-tail bias bound fall below
// 1/n at the configured (n, sigma). target must lie in (0, 2).
double truncation_level(double target, long n, double sigma);

// Fast honest-oracle statistics on a regression dataset (rows are [y, x']).
double reg_exhaustive_statistic(const Eigen::MatrixXd& data, int s, double y_radius, double radius,
                                int threads = 1);
double reg_coordinate_statistic(const Eigen::MatrixXd& data, double y_radius, double radius);

// 1{ ||beta_hat||^2 / sigma^2 >= 5/8 gamma_n }
using RegSqEstimator = std::function<Eigen::VectorXd(QueryChannel&)>;
std::function<int(QueryChannel&)> reg_estimator_to_detector(RegSqEstimator estimator, double sigma,
                                                            double gamma_n);

}  // namespace sqlab
