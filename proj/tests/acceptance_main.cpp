// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sqlab/analysis.hpp"
#include "sqlab/detectors_gmm.hpp"
#include "sqlab/detectors_reg.hpp"
#include "sqlab/experiments.hpp"
#include "sqlab/models.hpp"
#include "sqlab/oracles.hpp"
#include "sqlab/parallel.hpp"
#include "sqlab/rng.hpp"

using namespace sqlab;

namespace {

constexpr int kThreads = 2;

struct Criterion {
    std::string id;
    std::string description;
    double budget_seconds;
    std::function<bool(std::string&)> run;
};

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

template <typename LrFn>
McEstimate likelihood_ratio_product(int overlap, int s, double extra_sd, LrFn&& lr, long n,
                                    std::uint64_t seed) {
    // draws (v1'X, v2'X) from the null plus an optional independent response
    Rng rng(seed);
    const double rho = static_cast<double>(overlap) / s;
    double acc = 0.0, acc_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double y = extra_sd > 0.0 ? extra_sd * rng.gaussian() : 0.0;
        const double g1 = rng.gaussian(), g2 = rng.gaussian();
        const double s1 = std::sqrt(double(s)) * g1;
        const double s2 = std::sqrt(double(s)) * (rho * g1 + std::sqrt(1.0 - rho * rho) * g2);
        const double prod = lr(s1, y) * lr(s2, y);
        acc += prod;
        acc_sq += prod * prod;
    }
    const double mean = acc / n;
    return {mean, std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n)};
}

// ---------------------------------------------------------------------------
// A1: closed-form cross moments vs 1e6-sample Monte Carlo on a random grid
// ---------------------------------------------------------------------------

bool criterion_a1(std::string& detail) {
    const long mc_n = 1'000'000;
    struct Point {
        int kind;  // 0 known, 1 unknown, 2 regression
        int s;
        int overlap;
        double beta, nu, sigma;
        std::uint64_t seed;
    };
    std::vector<Point> grid;
    Rng rng(20260810);
    for (int kind = 0; kind < 3; ++kind) {
        for (int i = 0; i < 20; ++i) {
            Point p;
            p.kind = kind;
            p.s = 1 + static_cast<int>(rng.below(3));
            p.overlap = static_cast<int>(rng.below(p.s + 1));
            p.nu = rng.uniform(0.2, 0.8);
            p.sigma = rng.uniform(0.8, 1.5);
            // singularity guards: s beta^2 < 1 and beta^4 overlap^2 < 1 for the
            // unknown-covariance kind; the regression kind is always safe
            p.beta = (kind == 1) ? rng.uniform(0.05, 0.45) : rng.uniform(0.1, 0.6);
            p.seed = rng.integer();
            grid.push_back(p);
        }
    }

    std::vector<std::string> failures(grid.size());
    parallel_for(static_cast<long>(grid.size()), kThreads, [&](long i) {
        const Point& p = grid[i];
        double closed = 0.0;
        McEstimate mc;
        if (p.kind == 0) {
            closed = chi2_cross_gmm_known_overlap(p.overlap, p.beta, p.nu);
            const double b1 = -p.beta * (1 - p.nu), b2 = p.beta * p.nu;
            mc = likelihood_ratio_product(
                p.overlap, p.s, 0.0,
                [&](double t, double) {
                    return p.nu * std::exp(b1 * t - 0.5 * b1 * b1 * p.s) +
                           (1 - p.nu) * std::exp(b2 * t - 0.5 * b2 * b2 * p.s);
                },
                mc_n, p.seed);
        } else if (p.kind == 1) {
            closed = chi2_cross_gmm_unknown_overlap(p.overlap, p.beta);
            const double sb2 = p.s * p.beta * p.beta;
            mc = likelihood_ratio_product(
                p.overlap, p.s, 0.0,
                [&](double t, double) {
                    return 1.0 / std::sqrt(1.0 - sb2) *
                           std::exp(-0.5 * p.beta * p.beta * t * t / (1.0 - sb2) -
                                    0.5 * sb2 / (1.0 - sb2)) *
                           std::cosh(p.beta * t / (1.0 - sb2));
                },
                mc_n, p.seed);
        } else {
            closed = chi2_cross_reg_overlap(p.overlap, p.beta, p.sigma, p.s);
            const double s0sq = p.sigma * p.sigma + p.s * p.beta * p.beta;
            const double c = 1.0 / (p.sigma * std::sqrt(2.0 * M_PI));
            mc = likelihood_ratio_product(
                p.overlap, p.s, std::sqrt(s0sq),
                [&](double sv, double y) {
                    const double m = p.beta * sv;
                    const double dens =
                        0.5 * c *
                        (std::exp(-0.5 * (y - m) * (y - m) / (p.sigma * p.sigma)) +
                         std::exp(-0.5 * (y + m) * (y + m) / (p.sigma * p.sigma)));
                    const double null_dens =
                        std::exp(-0.5 * y * y / s0sq) / std::sqrt(2.0 * M_PI * s0sq);
                    return dens / null_dens;
                },
                mc_n, p.seed);
        }
        if (std::abs(closed - mc.mean) > 5.0 * std::max(mc.se, 1e-10)) {
            std::ostringstream os;
            os << "kind " << p.kind << " overlap " << p.overlap << " beta " << p.beta
               << ": closed " << closed << " vs mc " << mc.mean << " (se " << mc.se << ")";
            failures[i] = os.str();
        }
    });
    for (const std::string& f : failures) {
        if (!f.empty()) {
            detail = f;
            return false;
        }
    }
    if (std::abs(chi2_cross_reg_overlap(2, 0.5, 1.0, 2) - 1.125) > 1e-15) {
        detail = "pinned regression value 1.125 drifted";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// A2: overlap combinatorics vs brute force, pinned tables, growth checks
// ---------------------------------------------------------------------------

bool criterion_a2(std::string& detail) {
    for (int d = 1; d <= 14; ++d) {
        for (int s = 1; s <= std::min(3, d); ++s) {
            const OverlapTable table = overlap_table(d, s);
            const auto family = enumerate_sign_supports(d, s);
            const SignSupportVector& ref = family.front();
            std::vector<unsigned long long> sizes(s + 1, 0);
            for (const auto& v : family) ++sizes[s - std::abs(ref.dot(v))];
            if (table.sizes != sizes) {
                detail = "table mismatch at d=" + std::to_string(d) + " s=" + std::to_string(s);
                return false;
            }
        }
    }
    if (overlap_table(4, 2).sizes != std::vector<unsigned long long>{2, 16, 6}) {
        detail = "pinned (d=4, s=2) table wrong";
        return false;
    }
    if (overlap_table(12, 2).sizes != std::vector<unsigned long long>{2, 80, 182}) {
        detail = "pinned (d=12, s=2) table wrong";
        return false;
    }
    if (!overlap_growth_check(overlap_table(12, 2)).holds) {
        detail = "growth bound should hold at (12, 2)";
        return false;
    }
    if (overlap_growth_check(overlap_table(4, 2)).holds) {
        detail = "growth bound should fail at (4, 2): recorded small-d counterexample";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// A3: truncation coefficient and Hermite identities
// ---------------------------------------------------------------------------

bool criterion_a3(std::string& detail) {
    if (truncation_bias_coefficient(0.0) != 2.0) {
        detail = "coefficient at zero must be exactly 2";
        return false;
    }
    for (double t = 0.0; t <= 10.0; t += 0.125) {
        if (std::abs(truncation_bias_coefficient(t) -
                     truncation_bias_coefficient_by_quadrature(t)) > 1e-8) {
            detail = "closed form vs quadrature exceeded 1e-8 at t = " + std::to_string(t);
            return false;
        }
    }
    const Eigen::VectorXd f = hermite_coeffs([](double w) { return w * w; }, 8);
    const Eigen::VectorXd g = hermite_coeffs([](double z) { return z * z - 1.0; }, 8);
    for (double zeta : {0.1, 0.45, 0.9}) {
        if (std::abs(hermite_cross_moment(f, g, zeta) - 2.0 * zeta * zeta) > 1e-8) {
            detail = "series value differs from 2 zeta^2";
            return false;
        }
    }
    if (!(truncation_bias_coefficient(2.7) > 0.5 && truncation_bias_coefficient(2.8) < 0.5)) {
        detail = "half crossing not bracketed by (2.7, 2.8)";
        return false;
    }
    const double r = truncation_level(0.5, 1000, 1.0);
    if (!(r / 2.0 > 2.7 && r / 2.0 < 2.8)) {
        detail = "bisection result escaped the bracket";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// A4: lower-bound certificate and exact risk one
// ---------------------------------------------------------------------------

bool criterion_a4(std::string& detail) {
    ExperimentConfig config;
    config.model = "gmm";
    config.d = 30;
    config.s = 3;
    config.n = 2000;
    config.nu = 0.5;
    config.xi = 0.05;
    config.detector = "diagonal";
    config.oracle = "adversarial";
    config.threshold_mode = "formula";
    config.trials = 200;
    config.seed = 8;
    config.threads = kThreads;

    // beta chosen so nu(1-nu) beta^2 is half the smallest per-query tolerance
    const CovarianceModel sigma = config.covariance();
    const GmmParams nul = GmmParams::null_instance(sigma);
    const OracleConfig oc(config.xi, config.n, config.d, finite_capacity(config.d));
    double min_tau = 1e300;
    for (const BoundedQuery& q : diagonal_queries(sigma, 6.0, config.n)) {
        min_tau =
            std::min(min_tau, tolerance(oc, q.bound, population_expectation(q, nul).value));
    }
    const double beta_sq = 0.5 * min_tau / (config.nu * (1.0 - config.nu));
    config.gamma_grid = {config.s * beta_sq};

    const CoverageCertificate cert = run_coverage(config);
    if (!cert.witness.has_value()) {
        detail = "no witness found";
        return false;
    }
    if (!cert.transcripts_identical) {
        detail = "transcripts differ under the null and the witness";
        return false;
    }
    const std::vector<RiskRow> rows = run_sweep(config);
    if (rows[0].risk != 1.0) {
        std::ostringstream os;
        os << "adversarial risk " << rows[0].risk << " != 1.00";
        detail = os.str();
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// A5 / A6: phase-transition ordering
// ---------------------------------------------------------------------------

struct SweepSummary {
    std::vector<double> gammas;
    std::vector<double> size;
    std::vector<double> power;
};

SweepSummary summarize(const ExperimentConfig& config) {
    SweepSummary s;
    for (const RiskRow& row : run_sweep(config)) {
        s.gammas.push_back(row.gamma);
        s.size.push_back(row.type1_rate);
        s.power.push_back(1.0 - row.type2_rate);
    }
    return s;
}

double first_gamma_with_power(const SweepSummary& s, double target) {
    for (std::size_t i = 0; i < s.gammas.size(); ++i) {
        if (s.power[i] >= target) return s.gammas[i];
    }
    return std::numeric_limits<double>::infinity();
}

int monotonicity_violations(const std::vector<double>& curve) {
    int violations = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i] < curve[i - 1]) ++violations;
    }
    return violations;
}

bool phase_transition_criterion(const std::string& model, const std::vector<double>& grid,
                                std::string& detail) {
    ExperimentConfig config;
    config.model = model;
    config.d = 30;
    config.s = 3;
    config.n = 1000;
    config.nu = 0.5;
    config.xi = 0.05;
    config.sigma_noise = 1.0;
    config.threshold_mode = "calibrated";
    config.calibration_trials = 2000;
    config.trials = 200;
    config.seed = 20260810;
    config.threads = kThreads;
    config.gamma_grid = grid;

    config.detector = "exhaustive";
    const SweepSummary fine = summarize(config);
    config.detector = (model == "gmm") ? "diagonal" : "coordinate";
    const SweepSummary coarse = summarize(config);

    for (std::size_t i = 0; i < fine.gammas.size(); ++i) {
        if (fine.size[i] > 0.08 || coarse.size[i] > 0.08) {
            std::ostringstream os;
            os << "size exceeded 0.08 at gamma " << fine.gammas[i] << " (exhaustive "
               << fine.size[i] << ", cheap " << coarse.size[i] << ")";
            detail = os.str();
            return false;
        }
    }
    const double g_fine = first_gamma_with_power(fine, 0.8);
    const double g_coarse = first_gamma_with_power(coarse, 0.8);
    if (std::isinf(g_fine)) {
        detail = "the exhaustive test never reached power 0.8 on the grid";
        return false;
    }
    if (!(g_fine <= g_coarse)) {
        std::ostringstream os;
        os << "ordering violated: exhaustive needs gamma " << g_fine
           << " but the tractable test already works at " << g_coarse;
        detail = os.str();
        return false;
    }
    if (monotonicity_violations(fine.power) > 1 || monotonicity_violations(coarse.power) > 1) {
        detail = "power curve monotonicity violated at more than one grid point";
        return false;
    }
    std::ostringstream os;
    os << "power-0.8 thresholds: exhaustive " << g_fine << ", tractable " << g_coarse;
    detail = os.str();
    return true;
}

std::vector<double> geometric_grid(double lo, double hi, int points) {
    std::vector<double> grid;
    for (int k = 0; k < points; ++k) {
        grid.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (points - 1)));
    }
    return grid;
}

bool criterion_a5(std::string& detail) {
    return phase_transition_criterion("gmm", geometric_grid(0.25, 6.4, 8), detail);
}

bool criterion_a6(std::string& detail) {
    const std::vector<double> grid = geometric_grid(0.05, 1.6, 8);
    if (!phase_transition_criterion("reg", grid, detail)) return false;
    const std::string ordering = detail;

    // truncation gap guarantees at the grid's largest beta, by quadrature
    const int d = 30, s = 3;
    const long n = 1000;
    const double sigma = 1.0;
    const double beta = sigma * std::sqrt(grid.back() / s);
    const double R = truncation_level(0.5, n, sigma);
    SignSupportVector v;
    v.d = d;
    v.support = {3, 14, 22};
    v.signs = {1, -1, 1};
    const RegParams alt = RegParams::alternative(v, beta, sigma);
    const RegParams nul = RegParams::matched_null(d, s, beta, sigma);

    BoundedQuery matched;
    matched.id = "matched";
    matched.bound = 1e12;
    matched.family = FamilyTag::RegExhaustive;
    matched.params.direction = v.to_vector();
    matched.params.radius = R * std::sqrt(std::log(double(n)));
    matched.params.y_radius = sigma * R;
    const double gap_exh = population_expectation(matched, alt).value -
                           population_expectation(matched, nul).value;
    if (!(gap_exh >= s * beta * beta)) {
        std::ostringstream os;
        os << "exhaustive truncation gap " << gap_exh << " below s beta^2 " << s * beta * beta;
        detail = os.str();
        return false;
    }

    BoundedQuery coord;
    coord.id = "coord";
    coord.bound = 1e12;
    coord.family = FamilyTag::RegCoordinate;
    coord.params.coordinate = 3;
    coord.params.radius = R * std::sqrt(std::log(double(n)));
    coord.params.y_radius = sigma * R;
    const double gap_coord = population_expectation(coord, alt).value -
                             population_expectation(coord, nul).value;
    if (!(gap_coord >= beta * beta)) {
        std::ostringstream os;
        os << "coordinate truncation gap " << gap_coord << " below beta^2 " << beta * beta;
        detail = os.str();
        return false;
    }
    detail = ordering;
    return true;
}

// ---------------------------------------------------------------------------
// A7: honest-oracle uniform deviation guarantee
// ---------------------------------------------------------------------------

bool criterion_a7(std::string& detail) {
    const int d = 20, s = 2;
    const long n = 2000;
    const double xi = 0.05;
    const int reps = 500;
    const double R = 6.0;
    const double radius = R * std::sqrt(std::log(double(n)));
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const GmmParams nul = GmmParams::null_instance(sigma);
    const std::size_t family_size = sign_support_count(d, s);
    const OracleConfig config(xi, n, static_cast<long>(family_size),
                              finite_capacity(family_size));

    // under the null every family query has the same mean and tolerance
    BoundedQuery probe;
    probe.id = "probe";
    probe.bound = R * R * std::log(double(n));
    probe.family = FamilyTag::GmmExhaustive;
    probe.params.direction = Eigen::VectorXd::Zero(d);
    probe.params.direction(0) = 1.0;
    probe.params.direction(1) = 1.0;
    probe.params.radius = radius;
    const double expectation = population_expectation(probe, nul).value;
    const double tau = tolerance(config, probe.bound, expectation);

    std::vector<std::uint8_t> violated(reps, 0);
    const double tcut_sq = radius * radius * s;
    parallel_for(reps, kThreads, [&](long rep) {
        const Eigen::MatrixXd x = sample_gmm(nul, n, split_seed(20260810, rep));
        for (int a = 0; a < d && !violated[rep]; ++a) {
            for (int b = a + 1; b < d && !violated[rep]; ++b) {
                // the two sign classes share |t|, and -v duplicates +v
                double acc_plus = 0.0, acc_minus = 0.0;
                for (long i = 0; i < n; ++i) {
                    const double tp = x(i, a) + x(i, b);
                    const double tm = x(i, a) - x(i, b);
                    if (tp * tp <= tcut_sq) acc_plus += tp * tp;
                    if (tm * tm <= tcut_sq) acc_minus += tm * tm;
                }
                const double zp = acc_plus / (s * double(n));
                const double zm = acc_minus / (s * double(n));
                if (std::abs(zp - expectation) > tau || std::abs(zm - expectation) > tau) {
                    violated[rep] = 1;
                }
            }
        }
    });
    int count = 0;
    for (auto v : violated) count += v;
    const double rate = static_cast<double>(count) / reps;
    const double bound = 2.0 * xi + 3.0 * std::sqrt(2.0 * xi / reps);
    std::ostringstream os;
    os << "violation rate " << rate << " vs bound " << bound;
    detail = os.str();
    return rate <= bound;
}

// ---------------------------------------------------------------------------
// A8: proximal-gradient demo recovery
// ---------------------------------------------------------------------------

bool criterion_a8(std::string& detail) {
    DemoConfig config;  // defaults: d=50, s=3, n=2000, 300 iterations
    const DemoResult result = run_prox_gradient_demo(config, 20260810);
    const double err = (result.estimate - result.theta_star).norm();
    const double ls_err = (result.least_squares_on_support - result.theta_star).norm();
    std::ostringstream os;
    os << "estimate error " << err << ", restricted-least-squares oracle error " << ls_err;
    detail = os.str();
    if (err > 0.1) return false;
    if (ls_err > 0.1) return false;
    for (std::size_t i = 3; i < result.objectives.size(); ++i) {
        if (result.objectives[i] > result.objectives[i - 1] + 1e-12) {
            detail = "objective increased after iteration 3";
            return false;
        }
    }
    if (result.queries_used != 300L * 50) {
        detail = "query accounting off";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {"A1", "analytic cross moments within 5 SE of 1e6-sample Monte Carlo", 120.0,
         criterion_a1},
        {"A2", "overlap combinatorics match enumeration (d <= 14, s <= 3)", 30.0, criterion_a2},
        {"A3", "truncation coefficient and Hermite identities", 10.0, criterion_a3},
        {"A4", "adversarial certificate yields identical transcripts and risk 1.00", 60.0,
         criterion_a4},
        {"A5", "mixture phase-transition ordering (calibrated thresholds)", 600.0, criterion_a5},
        {"A6", "regression mirror with truncation gap guarantees", 600.0, criterion_a6},
        {"A7", "honest-oracle uniform deviation guarantee over 500 replications", 120.0,
         criterion_a7},
        {"A8", "proximal-gradient demo recovers the sparse coefficients", 30.0, criterion_a8},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && elapsed > c.budget_seconds) {
            ok = false;
            detail = "runtime budget exceeded";
        }
        std::printf("%s %s %s (%.1fs)%s%s\n", c.id.c_str(), ok ? "PASS" : "FAIL",
                    c.description.c_str(), elapsed, detail.empty() ? "" : " -- ",
                    detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
