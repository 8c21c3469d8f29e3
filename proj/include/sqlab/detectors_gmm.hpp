#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sqlab/models.hpp"
#include "sqlab/sq_core.hpp"

namespace sqlab {

enum class ThresholdMode { Formula, Calibrated };

// Family descriptor plus the constants a test's threshold is built from.
// Formula-mode thresholds are deterministic functions of (R, xi, n, d, s).
struct TestSpec {
    std::string family;  // gmm-exhaustive | gmm-diagonal | gmm-net | gmm-net-diagonal
    ThresholdMode mode = ThresholdMode::Formula;
    double calibrated_threshold = 0.0;
    double R = 6.0;
    double xi = 0.05;
    long n = 1;
    int d = 1;
    int s = 1;

    double formula_threshold() const;
    double threshold() const {
        return mode == ThresholdMode::Formula ? formula_threshold() : calibrated_threshold;
    }
    std::string to_json() const;
    static TestSpec from_json(const std::string& text);
};

// ---------------------------------------------------------------------------
// Query families (Sigma known)
// ---------------------------------------------------------------------------

// One query per v in G(s): the truncated normalized second moment along
// Sigma^{-1} v. Bound R^2 log n.
std::vector<BoundedQuery> exhaustive_queries(int d, int s, const CovarianceModel& sigma, double R,
                                             long n, std::size_t cap = default_enum_cap());

// Coordinate queries x_j^2/sigma_j with truncation, j in [d]. Bound R^2 log n.
std::vector<BoundedQuery> diagonal_queries(const CovarianceModel& sigma, double R, long n);

// Decisions on completed transcripts. The transcript must cover the family.
int exhaustive_test(const Transcript& transcript, const TestSpec& spec);
int diagonal_test(const Transcript& transcript, const TestSpec& spec);

// ---------------------------------------------------------------------------
// Covering-net test (general mean)
// ---------------------------------------------------------------------------

struct CoveringNet {
    double delta = 0.5;
    std::vector<std::vector<int>> supports;
    std::vector<std::vector<Eigen::VectorXd>> groups;  // per-support net elements

    std::size_t size() const;
    std::vector<Eigen::VectorXd> flatten() const;
    std::size_t max_group_size() const;
};

// Greedy farthest-point cover of each supported rescaled unit sphere
// {v : v' Sigma^{-1} v = 1, supp(v) = S} in the Sigma^{-1} metric. Stops when
// 200 (1+2/delta)^s random probes per support are covered within delta; errors
// if a group would exceed the (1+2/delta)^s size bound.
CoveringNet covering_net(double delta, const CovarianceModel& sigma, int d, int s,
                         std::uint64_t seed = 0, std::size_t support_cap = default_enum_cap());

// Fraction of fresh random sphere probes covered within delta; a statistical
// validation of the covering property.
double net_probe_coverage(const CoveringNet& net, const CovarianceModel& sigma,
                          std::size_t probes_per_support, std::uint64_t seed);

// Two-stage queries: stage 1 estimates the mean along each net direction,
// stage 2 the second moment recentered at the realized stage-1 response.
std::vector<BoundedQuery> net_stage1_queries(const CoveringNet& net, const CovarianceModel& sigma,
                                             double R, long n);
std::vector<BoundedQuery> net_stage2_queries(const CoveringNet& net, const CovarianceModel& sigma,
                                             const std::vector<double>& stage1_responses, double R,
                                             long n);

// Runs both stages through the channel and returns the stage-2 sup statistic.
double net_statistic(QueryChannel& channel, const CoveringNet& net, const CovarianceModel& sigma,
                     double R, long n);
int net_test(const Transcript& transcript, const TestSpec& spec, std::size_t net_size);

// Coordinatewise two-stage variant: stage 1 x_j/sqrt(sigma_j), stage 2 the
// recentered second moment; budget 2d.
double net_diagonal_statistic(QueryChannel& channel, const CovarianceModel& sigma, double R,
                              long n);
int net_diagonal_test(const Transcript& transcript, const TestSpec& spec);

// ---------------------------------------------------------------------------
// Fast honest-oracle statistics (used by calibration and risk sweeps; equal to
// running the family through HonestOracle, which tests verify)
// ---------------------------------------------------------------------------

// max over v in G(s) of the sample mean of the exhaustive query. Identity
// covariance only; radius is the standardized truncation R sqrt(log n).
double gmm_exhaustive_statistic(const Eigen::MatrixXd& x, int s, double radius, int threads = 1);
double gmm_diagonal_statistic(const Eigen::MatrixXd& x, const CovarianceModel& sigma,
                              double radius);

// Largest gap |E[q] - E[q*]| between the truncated queries and their
// untruncated cores over the coordinate family and the matched sign-support
// query, under both instances. The thresholds assume this stays below 1/n;
// sweeps validate it and reject configurations where R is too small.
double max_truncation_bias(const GmmParams& null_instance, const GmmParams& alternative,
                           double R, long n);

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

// Empirical (1-xi)-quantile of a statistic under the null over >= 100 trials;
// null_statistic receives a per-trial seed derived by the splitting rule.
double calibrate_threshold(const std::function<double(std::uint64_t)>& null_statistic, double xi,
                           int trials, std::uint64_t seed, int threads = 1);

// ---------------------------------------------------------------------------
// Reductions from estimation / support recovery / clustering
// ---------------------------------------------------------------------------

using SqEstimator = std::function<Eigen::VectorXd(QueryChannel&)>;
using SupportSelector = std::function<std::vector<int>(QueryChannel&)>;
using ClusterAssigner = std::function<int(const Eigen::VectorXd&)>;  // returns 1 or 2

// 1{ dmu_hat' Sigma^{-1} dmu_hat >= gamma_n / 3 }
std::function<int(QueryChannel&)> estimator_to_detector(SqEstimator estimator,
                                                        CovarianceModel sigma, double gamma_n);

// 1{ selected support == reference support }
std::function<int(QueryChannel&)> support_to_detector(SupportSelector selector,
                                                      std::vector<int> reference_support);

// Builds the one-query test from a cluster assigner: asks the truncated
// projection restricted to cluster 1 and rejects when its response is large.
std::function<int(QueryChannel&)> clustering_to_detector(ClusterAssigner assigner,
                                                         Eigen::VectorXd v0, Eigen::VectorXd mu,
                                                         CovarianceModel sigma, double R, long n,
                                                         int d, double xi,
                                                         double threshold_constant = 4.0);

}  // namespace sqlab
