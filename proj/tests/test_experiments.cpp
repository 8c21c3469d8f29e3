#include "doctest.h"

#include <cmath>

#include "sqlab/detectors_gmm.hpp"
#include "sqlab/experiments.hpp"
#include "sqlab/rng.hpp"

using namespace sqlab;

TEST_CASE("experiment configs parse strictly") {
    SUBCASE("a round trip through json keeps the fields") {
        const std::string text = R"({
            "model": "gmm", "d": 12, "s": 2, "n": 400, "nu": 0.5,
            "sigma": "identity", "gamma_grid": [0.5, 1.0, 2.0],
            "trials": 50, "seed": 9, "oracle": "honest",
            "detector": "diagonal", "threshold_mode": "calibrated",
            "xi": 0.05, "calibration_trials": 150
        })";
        const ExperimentConfig config = ExperimentConfig::from_json_text(text);
        CHECK(config.d == 12);
        CHECK(config.gamma_grid.size() == 3);
        CHECK(config.detector == "diagonal");
        CHECK(config.resolved_R() == 6.0);
    }
    SUBCASE("unknown keys are fail-fast errors") {
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"modle": "gmm"})"),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            ExperimentConfig::from_json_text(R"({"demo": {"stepsize": 0.1}})"),
            std::invalid_argument);
    }
    SUBCASE("the gamma grid must be strictly increasing and nonnegative") {
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"gamma_grid": [1.0, 1.0]})"),
                        std::invalid_argument);
        CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"gamma_grid": [-0.5, 1.0]})"),
                        std::invalid_argument);
    }
    SUBCASE("a diagonal sigma array selects the diagonal covariance") {
        const ExperimentConfig config = ExperimentConfig::from_json_text(
            R"({"d": 3, "s": 1, "sigma": [1.0, 2.0, 3.0], "detector": "diagonal"})");
        CHECK(config.covariance().kind() == CovarianceKind::Diagonal);
        CHECK(config.covariance().diagonal_entry(2) == 3.0);
    }
    SUBCASE("the regression default truncation comes from the calibration rule") {
        ExperimentConfig config;
        config.model = "reg";
        config.detector = "coordinate";
        config.n = 1000;
        CHECK(config.resolved_R() == doctest::Approx(5.47838702663).epsilon(1e-6));
    }
}

TEST_CASE("risk sweeps") {
    ExperimentConfig config;
    config.model = "gmm";
    config.d = 10;
    config.s = 2;
    config.n = 300;
    config.detector = "diagonal";
    config.threshold_mode = "calibrated";
    config.calibration_trials = 200;
    config.trials = 60;
    config.seed = 31;
    config.threads = 2;

    SUBCASE("at gamma = 0 the alternative equals the null and risk is about 1") {
        config.gamma_grid = {0.0};
        const std::vector<RiskRow> rows = run_sweep(config);
        REQUIRE(rows.size() == 1);
        CHECK(std::abs(rows[0].risk - 1.0) <= 3.0 * std::sqrt(1.0 / config.trials));
        CHECK(rows[0].budget == config.d);
    }

    SUBCASE("risk at gamma = 0 is 1 across detector/oracle pairings") {
        config.gamma_grid = {0.0};
        config.detector = "exhaustive";
        CHECK(std::abs(run_sweep(config)[0].risk - 1.0) <=
              3.0 * std::sqrt(1.0 / config.trials));

        config.detector = "diagonal";
        config.oracle = "adversarial";
        config.threshold_mode = "formula";
        // the adversarial oracle is deterministic, so the degenerate
        // alternative gives risk exactly 1
        CHECK(run_sweep(config)[0].risk == 1.0);
    }

    SUBCASE("a strong signal drives the honest-oracle risk down") {
        config.gamma_grid = {25.0};
        const std::vector<RiskRow> rows = run_sweep(config);
        CHECK(rows[0].risk <= 0.2);
    }

    SUBCASE("a truncation level too small for the configuration is rejected") {
        config.gamma_grid = {2.0};
        config.R = 1.5;  // the truncated second moment loses more than 1/n
        config.threshold_mode = "formula";
        CHECK_THROWS_AS(run_sweep(config), std::runtime_error);
    }

    SUBCASE("identical configs and seeds give byte-identical csv") {
        config.gamma_grid = {0.4, 1.8};
        config.emit_wall_ms = false;
        const std::string a = sweep_csv(config, run_sweep(config));
        const std::string b = sweep_csv(config, run_sweep(config));
        CHECK(a == b);
        CHECK(a.rfind("model,detector,oracle,d,s,n,nu,sigma,gamma,xi,threshold_mode,trials,"
                      "seed,type1,type2,risk,wall_ms\n",
                      0) == 0);
        CHECK(std::count(a.begin(), a.end(), '\n') == 3);
    }

    SUBCASE("an adversarial oracle with certified coverage failure pins risk at exactly 1") {
        // weak signal: nu(1-nu) beta^2 at half the smallest per-query tolerance
        const CovarianceModel sigma = CovarianceModel::identity(config.d);
        const OracleConfig oc(config.xi, config.n, config.d, finite_capacity(config.d));
        const GmmParams nul = GmmParams::null_instance(sigma);
        double min_tau = 1e300;
        for (const BoundedQuery& q : diagonal_queries(sigma, 6.0, config.n)) {
            min_tau = std::min(
                min_tau, tolerance(oc, q.bound, population_expectation(q, nul).value));
        }
        const double beta_sq = 0.5 * min_tau / (config.nu * (1.0 - config.nu));
        config.gamma_grid = {config.s * beta_sq};
        config.oracle = "adversarial";
        config.threshold_mode = "formula";

        const CoverageCertificate cert = run_coverage(config);
        REQUIRE(cert.witness.has_value());
        CHECK(cert.union_size == 0);
        CHECK(cert.transcripts_identical);

        const std::vector<RiskRow> rows = run_sweep(config);
        CHECK(rows[0].risk == 1.0);
        CHECK(rows[0].type1_rate + rows[0].type2_rate == 1.0);
    }

    SUBCASE("a strong signal leaves no witness") {
        // gamma = s beta^2 with nu(1-nu) beta^2 ~ 44, above every per-query
        // tolerance at this (n, d) while the means stay inside the truncation
        config.gamma_grid = {350.0};
        config.oracle = "adversarial";
        const CoverageCertificate cert = run_coverage(config);
        CHECK(cert.union_size == cert.gs_size);
        CHECK_FALSE(cert.witness.has_value());
    }
}

TEST_CASE("regression sweeps mirror the mixture ones") {
    ExperimentConfig config;
    config.model = "reg";
    config.d = 8;
    config.s = 2;
    config.n = 300;
    config.sigma_noise = 1.0;
    config.detector = "coordinate";
    config.threshold_mode = "calibrated";
    config.calibration_trials = 150;
    config.trials = 50;
    config.seed = 12;
    config.threads = 2;
    config.gamma_grid = {0.0, 3.0};
    const std::vector<RiskRow> rows = run_sweep(config);
    REQUIRE(rows.size() == 2);
    CHECK(std::abs(rows[0].risk - 1.0) <= 3.0 * std::sqrt(1.0 / config.trials));
    CHECK(rows[1].risk < rows[0].risk);
}

TEST_CASE("calibration runner returns a reproducible threshold") {
    ExperimentConfig config;
    config.model = "gmm";
    config.d = 8;
    config.s = 2;
    config.n = 200;
    config.detector = "diagonal";
    config.calibration_trials = 200;
    config.seed = 4;
    config.gamma_grid = {1.0};
    const double t1 = run_calibration(config);
    const double t2 = run_calibration(config);
    CHECK(t1 == t2);
    CHECK(t1 > 1.0);
}

TEST_CASE("proximal-gradient demo") {
    SUBCASE("a large penalty freezes the estimate at zero") {
        DemoConfig config;
        config.d = 15;
        config.s = 2;
        config.n = 300;
        config.lambda = 50.0;
        config.iterations = 20;
        const DemoResult result = run_prox_gradient_demo(config, 3);
        CHECK(result.estimate.cwiseAbs().maxCoeff() == 0.0);
        CHECK(result.queries_used == 20L * 15);
    }

    SUBCASE("population fixpoint under an orthogonal design is the thresholded truth") {
        // with exact gradients theta - theta* and unit step, one step from zero
        // lands on the soft threshold of theta* and stays there
        const int d = 5;
        Eigen::VectorXd theta_star(d);
        theta_star << 1.0, -0.4, 0.0, 0.2, 0.0;
        const double lambda = 0.3;
        auto soft = [lambda](const Eigen::VectorXd& u) {
            Eigen::VectorXd out(u.size());
            for (int j = 0; j < u.size(); ++j) {
                const double m = std::abs(u(j)) - lambda;
                out(j) = m > 0 ? (u(j) > 0 ? m : -m) : 0.0;
            }
            return out;
        };
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
        theta = soft(theta - (theta - theta_star));
        const Eigen::VectorXd once = theta;
        theta = soft(theta - (theta - theta_star));
        CHECK(theta == once);
        CHECK(once(0) == doctest::Approx(0.7));
        CHECK(once(1) == doctest::Approx(-0.1));
        CHECK(once(2) == 0.0);
        CHECK(once(3) == 0.0);  // below the threshold
    }

    SUBCASE("a small instance recovers the truth against the restricted least squares") {
        DemoConfig config;
        config.d = 20;
        config.s = 2;
        config.n = 800;
        config.iterations = 200;
        config.noise = 0.1;
        const DemoResult result = run_prox_gradient_demo(config, 11);
        CHECK((result.estimate - result.theta_star).norm() <= 0.15);
        CHECK((result.least_squares_on_support - result.theta_star).norm() <= 0.15);
        for (std::size_t i = 3; i < result.objectives.size(); ++i) {
            CHECK(result.objectives[i] <= result.objectives[i - 1] + 1e-12);
        }
        const std::string csv = demo_trace_csv(result);
        CHECK(csv.rfind("iteration,objective\n", 0) == 0);
    }

    SUBCASE("an unstable step size is reported as divergence") {
        DemoConfig config;
        config.d = 10;
        config.s = 2;
        config.n = 100;
        config.step = 4.0;          // far beyond 1/L
        config.query_bound = 1e9;   // keep gradients unclipped so the blowup is clean
        config.iterations = 100;
        CHECK_THROWS_AS(run_prox_gradient_demo(config, 1), std::runtime_error);
    }
}
