#include "sqlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "sqlab/detectors_gmm.hpp"
#include "sqlab/detectors_reg.hpp"
#include "sqlab/parallel.hpp"

namespace sqlab {

namespace {

constexpr std::uint64_t kDirectionStream = 0xD12EC7104ULL;
constexpr std::uint64_t kCalibrationStream = 0xCA11B2A7EULL;

std::uint64_t trial_seed(std::uint64_t master, int gamma_index, int hypothesis, long trial) {
    const std::uint64_t lane =
        (static_cast<std::uint64_t>(gamma_index) * 2 + hypothesis) << 32 |
        static_cast<std::uint64_t>(trial);
    return split_seed(master, lane);
}

std::string format_double(double x, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (model != "gmm" && model != "reg") {
        throw std::invalid_argument("config: model must be gmm or reg");
    }
    if (d < 1 || s < 1 || s > d) throw std::invalid_argument("config: need 1 <= s <= d");
    if (n < 1) throw std::invalid_argument("config: n must be positive");
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("config: nu in (0,1)");
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("config: xi in (0,1)");
    if (trials < 1) throw std::invalid_argument("config: trials >= 1");
    if (gamma_grid.empty()) throw std::invalid_argument("config: gamma_grid must be nonempty");
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
        if (gamma_grid[i] < 0.0) throw std::invalid_argument("config: gamma >= 0");
        if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1])) {
            throw std::invalid_argument("config: gamma_grid must be strictly increasing");
        }
    }
    if (oracle != "honest" && oracle != "adversarial") {
        throw std::invalid_argument("config: oracle must be honest or adversarial");
    }
    if (threshold_mode != "formula" && threshold_mode != "calibrated") {
        throw std::invalid_argument("config: threshold_mode must be formula or calibrated");
    }
    if (model == "gmm") {
        if (detector != "exhaustive" && detector != "diagonal" && detector != "net") {
            throw std::invalid_argument("config: gmm detector must be exhaustive, diagonal or net");
        }
        if (sigma_spec != "identity" && sigma_spec != "diagonal") {
            throw std::invalid_argument("config: sigma must be identity or a diagonal array");
        }
        if (sigma_spec == "diagonal" && sigma_diag.size() != d) {
            throw std::invalid_argument("config: diagonal sigma needs d entries");
        }
    } else {
        if (detector != "exhaustive" && detector != "coordinate") {
            throw std::invalid_argument("config: reg detector must be exhaustive or coordinate");
        }
        if (!(sigma_noise > 0.0)) throw std::invalid_argument("config: sigma must be positive");
    }
    if (threshold_mode == "calibrated" && calibration_trials < 100) {
        throw std::invalid_argument("config: calibration_trials >= 100");
    }
    if (threads < 1) throw std::invalid_argument("config: threads >= 1");
}

double ExperimentConfig::resolved_R() const {
    if (R > 0.0) return R;
    if (model == "gmm") return 6.0;
    return truncation_level(0.5, n, sigma_noise);
}

CovarianceModel ExperimentConfig::covariance() const {
    if (sigma_spec == "diagonal") return CovarianceModel::diagonal(sigma_diag);
    return CovarianceModel::identity(d);
}

std::string ExperimentConfig::sigma_label() const {
    if (model == "reg") return format_double(sigma_noise, 6);
    return sigma_spec;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    const std::set<std::string> known = {
        "model",     "d",       "s",           "n",           "nu",
        "sigma",     "gamma_grid", "trials",   "seed",        "oracle",
        "detector",  "threshold_mode", "xi",   "R",           "calibration_trials",
        "emit_wall_ms", "net_delta", "threads", "demo"};
    for (const auto& item : j.items()) {
        if (known.find(item.key()) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + item.key() + "'");
        }
    }
    ExperimentConfig c;
    if (j.contains("model")) c.model = j["model"].get<std::string>();
    if (j.contains("d")) c.d = j["d"].get<int>();
    if (j.contains("s")) c.s = j["s"].get<int>();
    if (j.contains("n")) c.n = j["n"].get<long>();
    if (j.contains("nu")) c.nu = j["nu"].get<double>();
    if (j.contains("sigma")) {
        const auto& sig = j["sigma"];
        if (sig.is_string()) {
            c.sigma_spec = sig.get<std::string>();
        } else if (sig.is_array()) {
            c.sigma_spec = "diagonal";
            c.sigma_diag.resize(sig.size());
            for (std::size_t i = 0; i < sig.size(); ++i) c.sigma_diag(i) = sig[i].get<double>();
        } else if (sig.is_number()) {
            c.sigma_noise = sig.get<double>();
        } else {
            throw std::invalid_argument("config: sigma must be a string, array or number");
        }
    }
    if (j.contains("gamma_grid")) {
        c.gamma_grid.clear();
        for (const auto& g : j["gamma_grid"]) c.gamma_grid.push_back(g.get<double>());
    }
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("oracle")) c.oracle = j["oracle"].get<std::string>();
    if (j.contains("detector")) c.detector = j["detector"].get<std::string>();
    if (j.contains("threshold_mode")) c.threshold_mode = j["threshold_mode"].get<std::string>();
    if (j.contains("xi")) c.xi = j["xi"].get<double>();
    if (j.contains("R")) c.R = j["R"].get<double>();
    if (j.contains("calibration_trials")) {
        c.calibration_trials = j["calibration_trials"].get<int>();
    }
    if (j.contains("emit_wall_ms")) c.emit_wall_ms = j["emit_wall_ms"].get<bool>();
    if (j.contains("net_delta")) c.net_delta = j["net_delta"].get<double>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("demo")) {
        const auto& dj = j["demo"];
        const std::set<std::string> demo_known = {"d",     "s",          "n",
                                                  "lambda", "step",      "iterations",
                                                  "noise",  "theta_magnitude", "query_bound"};
        for (const auto& item : dj.items()) {
            if (demo_known.find(item.key()) == demo_known.end()) {
                throw std::invalid_argument("config: unknown demo key '" + item.key() + "'");
            }
        }
        if (dj.contains("d")) c.demo.d = dj["d"].get<int>();
        if (dj.contains("s")) c.demo.s = dj["s"].get<int>();
        if (dj.contains("n")) c.demo.n = dj["n"].get<long>();
        if (dj.contains("lambda")) c.demo.lambda = dj["lambda"].get<double>();
        if (dj.contains("step")) c.demo.step = dj["step"].get<double>();
        if (dj.contains("iterations")) c.demo.iterations = dj["iterations"].get<int>();
        if (dj.contains("noise")) c.demo.noise = dj["noise"].get<double>();
        if (dj.contains("theta_magnitude")) {
            c.demo.theta_magnitude = dj["theta_magnitude"].get<double>();
        }
        if (dj.contains("query_bound")) c.demo.query_bound = dj["query_bound"].get<double>();
    }
    c.validate();
    return c;
}

SignSupportVector random_sign_support(int d, int s, Rng& rng) {
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < s) {
        chosen.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(d))));
    }
    SignSupportVector v;
    v.d = d;
    for (int idx : chosen) {
        v.support.push_back(idx);
        v.signs.push_back(static_cast<std::int8_t>(rng.sign() > 0 ? 1 : -1));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Detector assembly
// ---------------------------------------------------------------------------

namespace {

struct SweepDetector {
    long budget = 0;
    double capacity = 0.0;
    // honest-oracle statistic evaluated directly on a dataset
    std::function<double(const Eigen::MatrixXd&, int)> on_data;
    // statistic evaluated by issuing the query family through a channel
    std::function<double(QueryChannel&)> via_channel;
};

std::function<double(QueryChannel&)> family_sup_statistic(
    std::shared_ptr<std::vector<BoundedQuery>> family) {
    return [family = std::move(family)](QueryChannel& channel) {
        double best = -std::numeric_limits<double>::infinity();
        for (const BoundedQuery& q : *family) best = std::max(best, channel.ask(q));
        return best;
    };
}

SweepDetector build_detector(const ExperimentConfig& config) {
    const double R = config.resolved_R();
    const double radius = R * std::sqrt(std::log(static_cast<double>(config.n)));
    SweepDetector det;

    if (config.model == "gmm") {
        const CovarianceModel sigma = config.covariance();
        if (config.detector == "exhaustive") {
            det.budget = static_cast<long>(sign_support_count(config.d, config.s));
            det.capacity = finite_capacity(det.budget);
            auto family = std::make_shared<std::vector<BoundedQuery>>(
                exhaustive_queries(config.d, config.s, sigma, R, config.n));
            det.via_channel = family_sup_statistic(family);
            if (sigma.kind() == CovarianceKind::Identity) {
                const int s = config.s;
                det.on_data = [s, radius](const Eigen::MatrixXd& x, int threads) {
                    return gmm_exhaustive_statistic(x, s, radius, threads);
                };
            }
        } else if (config.detector == "diagonal") {
            det.budget = config.d;
            det.capacity = finite_capacity(config.d);
            auto family =
                std::make_shared<std::vector<BoundedQuery>>(diagonal_queries(sigma, R, config.n));
            det.via_channel = family_sup_statistic(family);
            det.on_data = [sigma, radius](const Eigen::MatrixXd& x, int) {
                return gmm_diagonal_statistic(x, sigma, radius);
            };
        } else {  // net
            auto net = std::make_shared<CoveringNet>(
                covering_net(config.net_delta, sigma, config.d, config.s, config.seed));
            det.budget = static_cast<long>(2 * net->size());
            det.capacity = finite_capacity(2 * net->size());
            const long n = config.n;
            det.via_channel = [net, sigma, R, n](QueryChannel& channel) {
                return net_statistic(channel, *net, sigma, R, n);
            };
        }
    } else {
        const double y_radius = config.sigma_noise * R;
        if (config.detector == "exhaustive") {
            det.budget = static_cast<long>(sign_support_count(config.d, config.s));
            det.capacity = finite_capacity(det.budget);
            auto family = std::make_shared<std::vector<BoundedQuery>>(reg_exhaustive_queries(
                config.d, config.s, config.sigma_noise, R, config.n));
            det.via_channel = family_sup_statistic(family);
            const int s = config.s;
            det.on_data = [s, y_radius, radius](const Eigen::MatrixXd& data, int threads) {
                return reg_exhaustive_statistic(data, s, y_radius, radius, threads);
            };
        } else {  // coordinate
            det.budget = config.d;
            det.capacity = finite_capacity(config.d);
            auto family = std::make_shared<std::vector<BoundedQuery>>(
                reg_coordinate_queries(config.d, config.sigma_noise, R, config.n));
            det.via_channel = family_sup_statistic(family);
            det.on_data = [y_radius, radius](const Eigen::MatrixXd& data, int) {
                return reg_coordinate_statistic(data, y_radius, radius);
            };
        }
    }
    return det;
}

double formula_threshold(const ExperimentConfig& config) {
    if (config.model == "gmm") {
        TestSpec spec;
        spec.family = "gmm-" + config.detector;
        spec.mode = ThresholdMode::Formula;
        spec.R = config.resolved_R();
        spec.xi = config.xi;
        spec.n = config.n;
        spec.d = config.d;
        spec.s = config.s;
        return spec.formula_threshold();
    }
    RegTestSpec spec;
    spec.family = "reg-" + config.detector;
    spec.mode = ThresholdMode::Formula;
    spec.R = config.resolved_R();
    spec.xi = config.xi;
    spec.n = config.n;
    spec.d = config.d;
    spec.s = config.s;
    spec.sigma_hint = config.sigma_noise;
    return spec.formula_threshold();
}

// calibrates under the given null instance using the honest oracle
template <typename Params>
double calibrate_under_null(const ExperimentConfig& config, const SweepDetector& det,
                            const Params& null_instance, std::uint64_t stream) {
    auto null_statistic = [&](std::uint64_t trial) {
        Eigen::MatrixXd data;
        if constexpr (std::is_same_v<Params, GmmParams>) {
            data = sample_gmm(null_instance, config.n, trial);
        } else {
            data = sample_reg(null_instance, config.n, trial);
        }
        if (det.on_data) return det.on_data(data, 1);
        HonestOracle oracle(std::move(data));
        OracleConfig oc(config.xi, config.n, det.budget, det.capacity);
        QueryChannel channel(oracle, oc);
        return det.via_channel(channel);
    };
    return calibrate_threshold(null_statistic, config.xi, config.calibration_trials,
                               split_seed(config.seed, stream), config.threads);
}

template <typename Params>
int run_one_trial(const ExperimentConfig& config, const SweepDetector& det, double threshold,
                  const Params& null_instance, const Params& instance, std::uint64_t seed) {
    double stat;
    if (config.oracle == "honest") {
        Eigen::MatrixXd data;
        if constexpr (std::is_same_v<Params, GmmParams>) {
            data = sample_gmm(instance, config.n, seed);
        } else {
            data = sample_reg(instance, config.n, seed);
        }
        if (det.on_data) {
            stat = det.on_data(data, 1);
        } else {
            HonestOracle oracle(std::move(data));
            OracleConfig oc(config.xi, config.n, det.budget, det.capacity);
            QueryChannel channel(oracle, oc);
            stat = det.via_channel(channel);
        }
    } else {
        OracleConfig oc(config.xi, config.n, det.budget, det.capacity);
        std::optional<Params> alt;
        if (&instance != &null_instance) alt = instance;
        AdversarialOracle<Params> oracle(null_instance, alt, oc);
        QueryChannel channel(oracle, oc);
        stat = det.via_channel(channel);
    }
    return stat >= threshold ? 1 : 0;
}

template <typename Params>
RiskRow run_gamma_row(const ExperimentConfig& config, const SweepDetector& det, double threshold,
                      int gamma_index, const Params& null_instance, const Params& alternative) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<int> null_reject(config.trials), alt_reject(config.trials);
    parallel_for(config.trials, config.threads, [&](long t) {
        null_reject[t] = run_one_trial(config, det, threshold, null_instance, null_instance,
                                       trial_seed(config.seed, gamma_index, 0, t));
    });
    parallel_for(config.trials, config.threads, [&](long t) {
        alt_reject[t] = run_one_trial(config, det, threshold, null_instance, alternative,
                                      trial_seed(config.seed, gamma_index, 1, t));
    });
    RiskRow row;
    row.gamma = config.gamma_grid[gamma_index];
    long r1 = 0, r2 = 0;
    for (int t = 0; t < config.trials; ++t) {
        r1 += null_reject[t];
        r2 += 1 - alt_reject[t];
    }
    row.type1_rate = static_cast<double>(r1) / config.trials;
    row.type2_rate = static_cast<double>(r2) / config.trials;
    row.risk = row.type1_rate + row.type2_rate;
    row.budget = det.budget;
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

std::vector<RiskRow> run_sweep(const ExperimentConfig& config) {
    config.validate();
    const SweepDetector det = build_detector(config);
    std::vector<RiskRow> rows;
    rows.reserve(config.gamma_grid.size());

    if (config.model == "gmm") {
        const CovarianceModel sigma = config.covariance();
        const GmmParams null_instance = GmmParams::null_instance(sigma);
        double threshold = 0.0;
        if (config.threshold_mode == "formula") {
            threshold = formula_threshold(config);
        } else {
            threshold = calibrate_under_null(config, det, null_instance, kCalibrationStream);
        }
        for (std::size_t g = 0; g < config.gamma_grid.size(); ++g) {
            Rng vrng(split_seed(config.seed, kDirectionStream + g));
            const SignSupportVector v = random_sign_support(config.d, config.s, vrng);
            const double c = sigma.quad_inverse(v.to_vector());
            const double beta = std::sqrt(config.gamma_grid[g] / c);
            const GmmParams alternative = GmmParams::two_point(v, beta, config.nu, sigma);
            const double bias =
                max_truncation_bias(null_instance, alternative, config.resolved_R(), config.n);
            if (bias > 1.0 / static_cast<double>(config.n)) {
                throw std::runtime_error(
                    "run_sweep: truncation level R is too small for gamma = " +
                    format_double(config.gamma_grid[g]) + " (bias " + format_double(bias) +
                    " exceeds 1/n)");
            }
            rows.push_back(run_gamma_row(config, det, threshold, static_cast<int>(g),
                                         null_instance, alternative));
        }
    } else {
        for (std::size_t g = 0; g < config.gamma_grid.size(); ++g) {
            Rng vrng(split_seed(config.seed, kDirectionStream + g));
            const SignSupportVector v = random_sign_support(config.d, config.s, vrng);
            const double beta =
                config.sigma_noise * std::sqrt(config.gamma_grid[g] / config.s);
            const RegParams alternative = RegParams::alternative(v, beta, config.sigma_noise);
            const RegParams null_instance =
                RegParams::matched_null(config.d, config.s, beta, config.sigma_noise);
            double threshold = 0.0;
            if (config.threshold_mode == "formula") {
                threshold = formula_threshold(config);
            } else {
                // the matched null depends on beta, so calibrate per grid point
                threshold =
                    calibrate_under_null(config, det, null_instance, kCalibrationStream + g);
            }
            rows.push_back(run_gamma_row(config, det, threshold, static_cast<int>(g),
                                         null_instance, alternative));
        }
    }
    return rows;
}

std::string sweep_csv(const ExperimentConfig& config, const std::vector<RiskRow>& rows) {
    std::string out =
        "model,detector,oracle,d,s,n,nu,sigma,gamma,xi,threshold_mode,trials,seed,type1,type2,"
        "risk,wall_ms\n";
    for (const RiskRow& row : rows) {
        char buf[512];
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%d,%ld,%s,%s,%s,%s,%s,%d,%llu,%.6f,%.6f,%.6f,%ld\n",
                      config.model.c_str(), config.detector.c_str(), config.oracle.c_str(),
                      config.d, config.s, config.n, format_double(config.nu, 6).c_str(),
                      config.sigma_label().c_str(), format_double(row.gamma).c_str(),
                      format_double(config.xi, 6).c_str(), config.threshold_mode.c_str(),
                      config.trials, static_cast<unsigned long long>(config.seed), row.type1_rate,
                      row.type2_rate, row.risk, config.emit_wall_ms ? row.wall_ms : 0L);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

CoverageCertificate run_coverage(const ExperimentConfig& config) {
    config.validate();
    const SweepDetector det = build_detector(config);
    const OracleConfig oc(config.xi, config.n, det.budget, det.capacity);
    const double gamma = config.gamma_grid.front();
    const std::vector<SignSupportVector> family =
        enumerate_sign_supports(config.d, config.s);
    Algorithm algorithm = [&det](QueryChannel& channel) { det.via_channel(channel); };

    if (config.model == "gmm") {
        const CovarianceModel sigma = config.covariance();
        const GmmParams null_instance = GmmParams::null_instance(sigma);
        AlternativeFactory<GmmParams> alternative = [gamma, sigma,
                                                     &config](const SignSupportVector& v) {
            const double c = sigma.quad_inverse(v.to_vector());
            return GmmParams::two_point(v, std::sqrt(gamma / c), config.nu, sigma);
        };
        return coverage_certificate(algorithm, family, null_instance, alternative, oc,
                                    config.threads);
    }
    const double beta = config.sigma_noise * std::sqrt(gamma / config.s);
    const RegParams null_instance =
        RegParams::matched_null(config.d, config.s, beta, config.sigma_noise);
    AlternativeFactory<RegParams> alternative = [beta, &config](const SignSupportVector& v) {
        return RegParams::alternative(v, beta, config.sigma_noise);
    };
    return coverage_certificate(algorithm, family, null_instance, alternative, oc, config.threads);
}

double run_calibration(const ExperimentConfig& config) {
    config.validate();
    const SweepDetector det = build_detector(config);
    if (config.model == "gmm") {
        return calibrate_under_null(config, det, GmmParams::null_instance(config.covariance()),
                                    kCalibrationStream);
    }
    const double beta =
        config.sigma_noise * std::sqrt(config.gamma_grid.front() / config.s);
    return calibrate_under_null(
        config, det, RegParams::matched_null(config.d, config.s, beta, config.sigma_noise),
        kCalibrationStream);
}

// ---------------------------------------------------------------------------
// Proximal-gradient demo
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& u, double lambda) {
    Eigen::VectorXd out(u.size());
    for (int j = 0; j < u.size(); ++j) {
        const double mag = std::abs(u(j)) - lambda;
        out(j) = mag > 0.0 ? (u(j) > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
}

}  // namespace

DemoResult run_prox_gradient_demo(const DemoConfig& config, std::uint64_t seed) {
    if (config.d < 1 || config.s < 1 || config.s > config.d || config.n < 2) {
        throw std::invalid_argument("demo: bad dimensions");
    }
    if (!(config.step > 0.0) || config.iterations < 1) {
        throw std::invalid_argument("demo: bad step or iteration count");
    }
    const double lambda =
        config.lambda > 0.0
            ? config.lambda
            : config.step * std::sqrt(std::log(static_cast<double>(config.d)) /
                                      static_cast<double>(config.n));

    DemoResult result;
    result.theta_star = Eigen::VectorXd::Zero(config.d);
    for (int k = 0; k < config.s; ++k) result.theta_star(k) = config.theta_magnitude;

    // dataset rows are [y, x']
    Rng rng(seed);
    Eigen::MatrixXd data(config.n, config.d + 1);
    for (long i = 0; i < config.n; ++i) {
        for (int j = 0; j < config.d; ++j) data(i, j + 1) = rng.gaussian();
        data(i, 0) = data.row(i).tail(config.d).dot(result.theta_star) +
                     config.noise * rng.gaussian();
    }

    HonestOracle oracle(data);
    const long budget = static_cast<long>(config.iterations) * config.d;
    OracleConfig oc(0.05, config.n, budget, finite_capacity(static_cast<std::size_t>(budget)));
    QueryChannel channel(oracle, oc);

    const Eigen::MatrixXd x = data.rightCols(config.d);
    const Eigen::VectorXd y = data.col(0);
    // the soft threshold at lambda after a step of size eta minimizes
    // L_n + (lambda/eta) |theta|_1
    const double penalty = lambda / config.step;
    auto objective = [&](const Eigen::VectorXd& theta) {
        return 0.5 * (y - x * theta).squaredNorm() / static_cast<double>(config.n) +
               penalty * theta.lpNorm<1>();
    };

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(config.d);
    double previous = objective(theta);
    int rising = 0;
    for (int it = 0; it < config.iterations; ++it) {
        Eigen::VectorXd grad(config.d);
        for (int j = 0; j < config.d; ++j) {
            BoundedQuery q;
            q.id = "grad:" + std::to_string(it) + ":" + std::to_string(j);
            q.bound = config.query_bound;
            q.family = FamilyTag::SqGradient;
            const Eigen::VectorXd theta_copy = theta;
            q.eval = [theta_copy, j](const Sample& p) {
                const auto xs = p.tail(p.size() - 1);
                return (theta_copy.dot(xs) - p(0)) * xs(j);
            };
            grad(j) = channel.ask(q);
        }
        theta = soft_threshold(theta - config.step * grad, lambda);
        const double value = objective(theta);
        result.objectives.push_back(value);
        if (!std::isfinite(value)) {
            throw std::runtime_error("demo: objective diverged to a non-finite value");
        }
        if (value > previous + 1e-12 * (1.0 + std::abs(previous))) {
            if (++rising >= 10) {
                throw std::runtime_error("demo: objective increased for 10 consecutive iterations");
            }
        } else {
            rising = 0;
        }
        previous = value;
    }
    result.estimate = theta;
    result.queries_used = static_cast<long>(channel.transcript().budget_used());

    // least squares restricted to the true support, the comparison oracle
    Eigen::MatrixXd xs(config.n, config.s);
    for (int k = 0; k < config.s; ++k) xs.col(k) = x.col(k);
    const Eigen::VectorXd coef = xs.colPivHouseholderQr().solve(y);
    result.least_squares_on_support = Eigen::VectorXd::Zero(config.d);
    for (int k = 0; k < config.s; ++k) result.least_squares_on_support(k) = coef(k);
    return result;
}

std::string demo_trace_csv(const DemoResult& result) {
    std::string out = "iteration,objective\n";
    for (std::size_t i = 0; i < result.objectives.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_double(result.objectives[i]) + "\n";
    }
    return out;
}

}  // namespace sqlab
