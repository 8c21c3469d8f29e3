#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqlab/models.hpp"
#include "sqlab/oracles.hpp"

namespace sqlab {

// Proximal-gradient demo parameters: l1-regularized least squares on a plain
// sparse linear model, gradients fetched coordinate-wise from the honest
// oracle.
struct DemoConfig {
    int d = 50;
    int s = 3;
    long n = 2000;
    double lambda = 0.0;  // 0 selects sqrt(log d / n)
    double step = 0.25;
    int iterations = 300;
    double noise = 0.1;
    double theta_magnitude = 1.0;
    double query_bound = 100.0;
};

struct ExperimentConfig {
    std::string model = "gmm";  // gmm | reg
    int d = 30;
    int s = 3;
    long n = 1000;
    double nu = 0.5;
    std::string sigma_spec = "identity";  // gmm: identity | diagonal
    Eigen::VectorXd sigma_diag;           // gmm diagonal entries when diagonal
    double sigma_noise = 1.0;             // reg noise scale
    std::vector<double> gamma_grid{1.0};
    int trials = 100;
    std::uint64_t seed = 0;
    std::string oracle = "honest";        // honest | adversarial
    std::string detector = "exhaustive";  // exhaustive | diagonal | net | coordinate
    std::string threshold_mode = "calibrated";
    double xi = 0.05;
    double R = 0.0;  // 0 selects the default (6 for gmm, truncation level for reg)
    int calibration_trials = 2000;
    bool emit_wall_ms = true;
    double net_delta = 0.5;
    int threads = 1;
    DemoConfig demo;

    void validate() const;
    double resolved_R() const;
    CovarianceModel covariance() const;
    std::string sigma_label() const;

    // Parses a JSON document; unknown keys are errors.
    static ExperimentConfig from_json_text(const std::string& text);
};

struct RiskRow {
    double gamma = 0.0;
    double type1_rate = 0.0;
    double type2_rate = 0.0;
    double risk = 0.0;
    long budget = 0;
    long wall_ms = 0;
};

// Per grid point: a null instance and one uniformly drawn alternative at that
// signal strength, each run `trials` times on fresh data through the
// configured oracle. Deterministic given (config, seed).
std::vector<RiskRow> run_sweep(const ExperimentConfig& config);

// CSV with the fixed column set; wall_ms is written as 0 when the config
// disables timing so output is byte-reproducible.
std::string sweep_csv(const ExperimentConfig& config, const std::vector<RiskRow>& rows);

// Lemma-style lower-bound certificate for the configured detector at
// gamma_grid[0].
CoverageCertificate run_coverage(const ExperimentConfig& config);

// Calibrates the configured detector's threshold under the null at
// gamma_grid[0] (regression nulls are marginal-matched to that gamma).
double run_calibration(const ExperimentConfig& config);

// Draws a uniform element of the sign-support family.
SignSupportVector random_sign_support(int d, int s, Rng& rng);

struct DemoResult {
    Eigen::VectorXd theta_star;
    Eigen::VectorXd estimate;
    Eigen::VectorXd least_squares_on_support;
    std::vector<double> objectives;  // penalized objective after each iteration
    long queries_used = 0;
};

DemoResult run_prox_gradient_demo(const DemoConfig& config, std::uint64_t seed);
std::string demo_trace_csv(const DemoResult& result);

}  // namespace sqlab
