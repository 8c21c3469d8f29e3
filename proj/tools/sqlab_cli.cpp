#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sqlab/experiments.hpp"
#include "sqlab/verify.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::optional<std::string>& path, const std::string& text) {
    if (path.has_value()) {
        std::ofstream out(*path);
        if (!out) throw std::runtime_error("cannot open output file: " + *path);
        out << text;
    } else {
        std::cout << text;
    }
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

sqlab::ExperimentConfig load_config(const CommonFlags& flags) {
    sqlab::ExperimentConfig config = flags.config_path.empty()
                                         ? sqlab::ExperimentConfig{}
                                         : sqlab::ExperimentConfig::from_json_text(
                                               read_file(flags.config_path));
    if (flags.seed.has_value()) config.seed = *flags.seed;
    if (flags.threads.has_value()) config.threads = *flags.threads;
    config.validate();
    return config;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path, "JSON experiment config");
    if (config_required) opt->required();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&flags](std::uint64_t v) { flags.seed = v; }, "override the config seed");
    cmd->add_option_function<std::string>(
        "--out", [&flags](const std::string& v) { flags.out = v; }, "output path (default stdout)");
    cmd->add_option_function<int>(
        "--threads", [&flags](int v) { flags.threads = v; }, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statistical-query simulation lab"};
    app.require_subcommand(1);

    CommonFlags sweep_flags, coverage_flags, calibrate_flags, demo_flags, verify_flags;
    CLI::App* sweep = app.add_subcommand("sweep", "risk sweep over a signal-strength grid");
    add_common(sweep, sweep_flags, true);
    CLI::App* coverage = app.add_subcommand("coverage", "lower-bound coverage certificate");
    add_common(coverage, coverage_flags, true);
    CLI::App* calibrate = app.add_subcommand("calibrate", "null-calibrated threshold");
    add_common(calibrate, calibrate_flags, true);
    CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
    add_common(verify, verify_flags, false);
    CLI::App* demo = app.add_subcommand("demo-sgd", "proximal-gradient demo over the oracle");
    add_common(demo, demo_flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (sweep->parsed()) {
            const sqlab::ExperimentConfig config = load_config(sweep_flags);
            const std::vector<sqlab::RiskRow> rows = sqlab::run_sweep(config);
            write_output(sweep_flags.out, sqlab::sweep_csv(config, rows));
            return 0;
        }
        if (coverage->parsed()) {
            const sqlab::ExperimentConfig config = load_config(coverage_flags);
            const sqlab::CoverageCertificate cert = sqlab::run_coverage(config);
            write_output(coverage_flags.out, cert.to_json() + "\n");
            return (cert.witness.has_value() && cert.transcripts_identical) ? 0 : 1;
        }
        if (calibrate->parsed()) {
            const sqlab::ExperimentConfig config = load_config(calibrate_flags);
            const double threshold = sqlab::run_calibration(config);
            nlohmann::json j;
            j["model"] = config.model;
            j["detector"] = config.detector;
            j["xi"] = config.xi;
            j["calibration_trials"] = config.calibration_trials;
            j["R"] = config.resolved_R();
            j["threshold"] = threshold;
            write_output(calibrate_flags.out, j.dump(2) + "\n");
            return 0;
        }
        if (verify->parsed()) {
            const int threads = verify_flags.threads.value_or(1);
            const int failures = sqlab::run_verify(std::cout, threads);
            std::cout << (failures == 0 ? "verify: all checks passed\n"
                                        : "verify: " + std::to_string(failures) +
                                              " check(s) failed\n");
            return failures == 0 ? 0 : 1;
        }
        if (demo->parsed()) {
            const sqlab::ExperimentConfig config = load_config(demo_flags);
            const sqlab::DemoResult result =
                sqlab::run_prox_gradient_demo(config.demo, config.seed);
            write_output(demo_flags.out, sqlab::demo_trace_csv(result));
            nlohmann::json j;
            j["queries_used"] = result.queries_used;
            j["final_objective"] = result.objectives.back();
            j["estimate_error"] = (result.estimate - result.theta_star).norm();
            j["ls_on_support_error"] =
                (result.least_squares_on_support - result.theta_star).norm();
            std::cerr << j.dump(2) << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::length_error& e) {
        // enumeration caps are configuration limits, not internal faults
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
