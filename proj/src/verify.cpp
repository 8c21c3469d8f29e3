#include "sqlab/verify.hpp"

#include <cmath>
#include <sstream>

#include "sqlab/analysis.hpp"
#include "sqlab/detectors_gmm.hpp"
#include "sqlab/detectors_reg.hpp"
#include "sqlab/experiments.hpp"
#include "sqlab/gaussian.hpp"
#include "sqlab/oracles.hpp"
#include "sqlab/quadrature.hpp"

namespace sqlab {

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// --- sq-core ---------------------------------------------------------------

bool check_tolerance_monotone(std::string& detail) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const double xi = rng.uniform(0.01, 0.9);
        const long n = 10 + static_cast<long>(rng.below(100000));
        const double cap = rng.uniform(0.0, 10.0);
        const double m = rng.uniform(0.5, 20.0);
        const double e = rng.uniform(-m, m);
        const OracleConfig base(xi, n, 1, cap);
        const double tau = tolerance(base, m, e);
        if (tolerance(OracleConfig(xi, 4 * n, 1, cap), m, e) > tau + 1e-15) {
            detail = "not nonincreasing in n";
            return false;
        }
        if (tolerance(OracleConfig(xi, n, 1, cap + 1.0), m, e) < tau - 1e-15) {
            detail = "not nondecreasing in capacity";
            return false;
        }
        if (tolerance(OracleConfig(xi / 2.0, n, 1, cap), m, e) < tau - 1e-15) {
            detail = "not nondecreasing in log(1/xi)";
            return false;
        }
        if (tolerance(base, m * 1.5, e) < tau - 1e-15) {
            detail = "not nondecreasing in bound";
            return false;
        }
        if (tolerance(base, m, -e) != tau) {
            detail = "not symmetric in expectation";
            return false;
        }
    }
    return true;
}

bool check_runner_determinism(std::string& detail) {
    const CovarianceModel sigma = CovarianceModel::identity(6);
    const GmmParams null_inst = GmmParams::null_instance(sigma);
    const Eigen::MatrixXd data = sample_gmm(null_inst, 50, 11);
    HonestOracle oracle(data);
    const std::vector<BoundedQuery> family = diagonal_queries(sigma, 6.0, 50);
    Algorithm alg = [&family](QueryChannel& ch) {
        for (const auto& q : family) ch.ask(q);
    };
    const OracleConfig config(0.05, 50, 6, finite_capacity(6));
    const Transcript t1 = run_algorithm(alg, oracle, config);
    const Transcript t2 = run_algorithm(alg, oracle, config);
    if (!(t1 == t2)) {
        detail = "replayed transcripts differ";
        return false;
    }
    return true;
}

// --- models ----------------------------------------------------------------

bool check_expectation_vs_monte_carlo(std::string& detail) {
    const int d = 8, s = 2;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    SignSupportVector v;
    v.d = d;
    v.support = {1, 4};
    v.signs = {1, -1};
    const GmmParams alt = GmmParams::two_point(v, 0.7, 0.5, sigma);
    const McOptions mc{200'000, 99};

    const std::vector<BoundedQuery> exh = exhaustive_queries(d, s, sigma, 3.0, 400);
    const std::vector<BoundedQuery> diag = diagonal_queries(sigma, 3.0, 400);
    const std::vector<const BoundedQuery*> picks = {&exh.front(), &exh.back(), &diag[1], &diag[4]};
    for (const BoundedQuery* q : picks) {
        const Expectation analytic = population_expectation(*q, alt);
        BoundedQuery custom = *q;
        custom.family = FamilyTag::Custom;  // force the Monte Carlo path
        const Expectation sampled = population_expectation(custom, alt, mc);
        const double slack = 5.0 * std::max(sampled.std_error, 1e-12);
        if (!close(analytic.value, sampled.value, slack)) {
            std::ostringstream os;
            os << q->id << ": analytic " << analytic.value << " vs mc " << sampled.value;
            detail = os.str();
            return false;
        }
    }
    const RegParams reg_alt = RegParams::alternative(v, 0.4, 1.0);
    const std::vector<BoundedQuery> reg = reg_coordinate_queries(d, 1.0, 6.0, 400);
    for (const BoundedQuery* q : {&reg[1], &reg[3]}) {
        const Expectation analytic = population_expectation(*q, reg_alt);
        BoundedQuery custom = *q;
        custom.family = FamilyTag::Custom;
        const Expectation sampled = population_expectation(custom, reg_alt, mc);
        const double slack = 5.0 * std::max(sampled.std_error, 1e-12);
        if (!close(analytic.value, sampled.value, slack)) {
            detail = q->id + ": regression analytic vs mc mismatch";
            return false;
        }
    }
    return true;
}

bool check_sign_support_enumeration(std::string& detail) {
    const auto g42 = enumerate_sign_supports(4, 2);
    if (g42.size() != 24) {
        detail = "G(2) at d=4 has wrong size";
        return false;
    }
    for (std::size_t i = 0; i + 1 < g42.size(); ++i) {
        if (!g42[i].lex_less(g42[i + 1])) {
            detail = "enumeration not strictly lexicographic";
            return false;
        }
    }
    if (enumerate_sign_supports(20, 2).size() != 760) {
        detail = "G(2) at d=20 has wrong size";
        return false;
    }
    if (enumerate_sign_supports(3, 3).size() != 8) {
        detail = "full-support case wrong";
        return false;
    }
    return true;
}

bool check_signal_strength(std::string& detail) {
    const CovarianceModel sigma = CovarianceModel::identity(10);
    const GmmParams nul = GmmParams::null_instance(sigma);
    if (signal_strength_known_cov(nul).value != 0.0) {
        detail = "null signal strength nonzero";
        return false;
    }
    SignSupportVector v;
    v.d = 10;
    v.support = {0, 3, 7};
    v.signs = {1, 1, -1};
    const GmmParams alt = GmmParams::two_point(v, 0.5, 0.3, sigma);
    if (!close(signal_strength_known_cov(alt).value, 3 * 0.25, 1e-12)) {
        detail = "two-point signal strength != s beta^2";
        return false;
    }
    return true;
}

// --- oracles ---------------------------------------------------------------

bool check_adversarial_validity(std::string& detail) {
    const int d = 6;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const GmmParams null_inst = GmmParams::null_instance(sigma);
    const std::vector<BoundedQuery> family = diagonal_queries(sigma, 6.0, 500);
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        SignSupportVector v = random_sign_support(d, 2, rng);
        const double beta = rng.uniform(0.0, 3.0);
        const GmmParams alt = GmmParams::two_point(v, beta, 0.5, sigma);
        const OracleConfig config(0.05, 500, d, finite_capacity(d));
        AdversarialOracle<GmmParams> oracle(null_inst, alt, config);
        for (const BoundedQuery& q : family) {
            const double z = oracle.respond(q);
            const double ev = population_expectation(q, alt).value;
            const double tau = tolerance(config, q.bound, std::clamp(ev, -q.bound, q.bound));
            if (std::abs(z - ev) > tau + 1e-12) {
                detail = "adversarial response outside tolerance of the true mean";
                return false;
            }
        }
    }
    return true;
}

bool check_certificate_monotone(std::string& detail) {
    const int d = 10, s = 2;
    const long n = 500;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const GmmParams null_inst = GmmParams::null_instance(sigma);
    const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s);
    const std::vector<BoundedQuery> queries = diagonal_queries(sigma, 6.0, n);
    Algorithm alg = [&queries](QueryChannel& ch) {
        for (const auto& q : queries) ch.ask(q);
    };
    const OracleConfig config(0.05, n, d, finite_capacity(d));
    bool previous_identical = false;
    // growing the signal can break transcript identity but never restore it
    for (double beta : {2.0, 1.0, 0.5, 0.25}) {
        AlternativeFactory<GmmParams> alt = [beta, &sigma](const SignSupportVector& v) {
            return GmmParams::two_point(v, beta, 0.5, sigma);
        };
        const CoverageCertificate cert =
            coverage_certificate(alg, family, null_inst, alt, config);
        if (previous_identical && !cert.transcripts_identical) {
            detail = "shrinking the signal flipped transcript identity to false";
            return false;
        }
        previous_identical = previous_identical || cert.transcripts_identical;
    }
    if (!previous_identical) {
        detail = "no tested signal level produced identical transcripts";
        return false;
    }
    return true;
}

bool check_distinguishable_partition(std::string& detail) {
    const int d = 8, s = 2;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const GmmParams null_inst = GmmParams::null_instance(sigma);
    const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s);
    const std::vector<BoundedQuery> queries = diagonal_queries(sigma, 6.0, 500);
    const OracleConfig config(0.2, 500, d, finite_capacity(d));
    AlternativeFactory<GmmParams> alt = [&sigma](const SignSupportVector& v) {
        return GmmParams::two_point(v, 12.0, 0.5, sigma);
    };
    const DistinguishableSet set =
        distinguishable_set(queries[3], family, null_inst, alt, config);
    if (set.c1.empty()) {
        detail = "expected a nonempty positive part at large signal";
        return false;
    }
    const std::size_t expected = 2 * sign_support_count(d - 1, s - 1);
    if (set.size() != expected) {
        std::ostringstream os;
        os << "expected " << expected << " members, got " << set.size();
        detail = os.str();
        return false;
    }
    for (const auto& v : set.c1) {
        for (const auto& w : set.c2) {
            if (v == w) {
                detail = "c1 and c2 overlap";
                return false;
            }
        }
    }
    return true;
}

// --- detectors (gmm) --------------------------------------------------------

bool check_budget_accounting(std::string& detail) {
    const int d = 8, s = 2;
    const long n = 200;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const Eigen::MatrixXd data = sample_gmm(GmmParams::null_instance(sigma), n, 5);
    HonestOracle oracle(data);

    const std::vector<BoundedQuery> exh = exhaustive_queries(d, s, sigma, 6.0, n);
    OracleConfig config_exh(0.05, n, static_cast<long>(exh.size()), finite_capacity(exh.size()));
    Transcript t = run_algorithm(
        [&exh](QueryChannel& ch) {
            for (const auto& q : exh) ch.ask(q);
        },
        oracle, config_exh);
    if (t.budget_used() != sign_support_count(d, s)) {
        detail = "exhaustive budget mismatch";
        return false;
    }

    const CoveringNet net = covering_net(0.5, sigma, d, 1, 3);
    OracleConfig config_net(0.05, n, static_cast<long>(2 * net.size()),
                            finite_capacity(2 * net.size()));
    QueryChannel channel(oracle, config_net);
    net_statistic(channel, net, sigma, 6.0, n);
    if (channel.transcript().budget_used() != 2 * net.size()) {
        detail = "net budget mismatch";
        return false;
    }
    return true;
}

bool check_truncation_bias(std::string& detail) {
    // acceptance configuration: d = 30, s = 3, n = 1000, R = 6
    const int d = 30, s = 3;
    const long n = 1000;
    const double R = 6.0;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    SignSupportVector v;
    v.d = d;
    v.support = {2, 11, 23};
    v.signs = {1, -1, 1};
    const double beta = std::sqrt(2.0 / s);  // gamma = 2 in the acceptance sweep range
    const GmmParams alt = GmmParams::two_point(v, beta, 0.5, sigma);
    const GmmParams nul = GmmParams::null_instance(sigma);

    std::vector<BoundedQuery> probes;
    const std::vector<BoundedQuery> diag = diagonal_queries(sigma, R, n);
    probes.push_back(diag[2]);
    probes.push_back(diag[5]);
    {
        BoundedQuery q;  // matched exhaustive query
        q.id = "probe";
        q.bound = R * R * std::log(static_cast<double>(n));
        q.family = FamilyTag::GmmExhaustive;
        q.params.direction = v.to_vector();
        q.params.radius = R * std::sqrt(std::log(static_cast<double>(n)));
        probes.push_back(q);
    }
    for (const BoundedQuery& q : probes) {
        BoundedQuery untruncated = q;
        untruncated.params.radius = std::numeric_limits<double>::infinity();
        for (const GmmParams* inst : {&nul, &alt}) {
            const double truncated = population_expectation(q, *inst).value;
            const double core = population_expectation(untruncated, *inst).value;
            if (std::abs(truncated - core) > 1.0 / static_cast<double>(n)) {
                std::ostringstream os;
                os << "bias " << std::abs(truncated - core) << " exceeds 1/n for " << q.id;
                detail = os.str();
                return false;
            }
        }
    }
    return true;
}

bool check_threshold_goldens(std::string& detail) {
    TestSpec spec;
    spec.family = "gmm-exhaustive";
    spec.R = 6.0;
    spec.xi = 0.05;
    spec.n = 1000;
    spec.d = 30;
    spec.s = 3;
    if (!close(spec.formula_threshold(), 62.477129204712412, 1e-9)) {
        detail = "exhaustive formula threshold drifted";
        return false;
    }
    spec.family = "gmm-diagonal";
    if (!close(spec.formula_threshold(), 40.779125126308233, 1e-9)) {
        detail = "diagonal formula threshold drifted";
        return false;
    }
    return true;
}

bool make_size_control_check(std::string& detail, int threads) {
    const int d = 12;
    const long n = 400;
    const double xi = 0.1;
    const int calibration = 600, fresh = 400;
    const CovarianceModel sigma = CovarianceModel::identity(d);
    const GmmParams nul = GmmParams::null_instance(sigma);
    const double radius = 6.0 * std::sqrt(std::log(static_cast<double>(n)));
    auto stat = [&](std::uint64_t seed) {
        return gmm_diagonal_statistic(sample_gmm(nul, n, seed), sigma, radius);
    };
    const double threshold = calibrate_threshold(stat, xi, calibration, 17, threads);
    int rejections = 0;
    for (int t = 0; t < fresh; ++t) {
        if (stat(split_seed(91, t)) >= threshold) ++rejections;
    }
    const double rate = static_cast<double>(rejections) / fresh;
    const double slack = 3.0 * std::sqrt(xi * (1.0 - xi) / fresh);
    if (rate > xi + slack) {
        std::ostringstream os;
        os << "fresh-run size " << rate << " exceeds " << xi + slack;
        detail = os.str();
        return false;
    }
    return true;
}

// --- detectors (reg) ---------------------------------------------------------

bool check_truncation_coefficient(std::string& detail) {
    if (truncation_bias_coefficient(0.0) != 2.0) {
        detail = "coefficient at zero must be exactly 2";
        return false;
    }
    for (double t = 0.0; t <= 10.0; t += 0.5) {
        const double closed = truncation_bias_coefficient(t);
        const double quad = truncation_bias_coefficient_by_quadrature(t);
        if (!close(closed, quad, 1e-8)) {
            std::ostringstream os;
            os << "closed form and quadrature differ at t = " << t;
            detail = os.str();
            return false;
        }
    }
    return true;
}

bool check_truncation_negative_control(std::string& detail) {
    // a deliberately corrupted closed form must be flagged by the quadrature
    auto corrupted = [](double t) {
        return 2.0 * ((t * t * t + 2.0 * t) * normal_pdf(t) + 2.2 * normal_upper_tail(t));
    };
    const double quad = truncation_bias_coefficient_by_quadrature(1.0);
    if (close(corrupted(1.0), quad, 1e-8)) {
        detail = "corrupted closed form was not detected";
        return false;
    }
    return true;
}

bool check_hermite_second_moment(std::string& detail) {
    const Eigen::VectorXd f = hermite_coeffs([](double w) { return w * w; }, 6);
    const Eigen::VectorXd g = hermite_coeffs([](double z) { return z * z - 1.0; }, 6);
    for (double zeta : {0.1, 0.35, 0.8}) {
        if (!close(hermite_cross_moment(f, g, zeta), 2.0 * zeta * zeta, 1e-8)) {
            detail = "series disagrees with 2 zeta^2";
            return false;
        }
    }
    return true;
}

bool check_reg_null_second_moment(std::string& detail) {
    const int d = 5;
    const RegParams nul = RegParams::matched_null(d, 2, 0.6, 1.0);
    const long n = 200'000;
    const Eigen::MatrixXd data = sample_reg(nul, n, 12345);
    const double sigma0_sq = nul.sigma0_sq();
    for (int j = 0; j < d; ++j) {
        double acc = 0.0, acc_sq = 0.0;
        for (long i = 0; i < n; ++i) {
            const double y = data(i, 0), xj = data(i, j + 1);
            const double term = y * y * xj * xj;
            acc += term;
            acc_sq += term * term;
        }
        const double mean = acc / n;
        const double se = std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n);
        if (!close(mean, sigma0_sq, 5.0 * se)) {
            detail = "null second moment diagonal is not sigma0^2";
            return false;
        }
    }
    return true;
}

// --- analysis -----------------------------------------------------------------

bool check_overlap_table(std::string& detail) {
    for (int d = 2; d <= 10; ++d) {
        for (int s = 1; s <= std::min(3, d); ++s) {
            const OverlapTable table = overlap_table(d, s);
            const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s);
            const SignSupportVector& ref = family.front();
            std::vector<unsigned long long> sizes(s + 1, 0);
            for (const auto& v : family) ++sizes[s - std::abs(ref.dot(v))];
            if (sizes != table.sizes) {
                std::ostringstream os;
                os << "table mismatch at d=" << d << " s=" << s;
                detail = os.str();
                return false;
            }
        }
    }
    const OverlapTable t4 = overlap_table(4, 2);
    if (t4.sizes != std::vector<unsigned long long>{2, 16, 6}) {
        detail = "pinned (4,2) sizes wrong";
        return false;
    }
    const OverlapTable t12 = overlap_table(12, 2);
    if (t12.sizes != std::vector<unsigned long long>{2, 80, 182}) {
        detail = "pinned (12,2) sizes wrong";
        return false;
    }
    return true;
}

bool check_mixture_grouping(std::string& detail) {
    const int d = 12, s = 2;
    const double beta = 0.2, sigma = 1.0;
    const long nfold = 50;
    auto cross = [&](int overlap) {
        return chi2_cross_reg_overlap(overlap, beta, sigma, s, nfold);
    };
    const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s);
    const double by_pairs = mixture_chi2_by_overlap(family, cross);
    const double grouped = mixture_chi2_grouped(overlap_table(d, s), cross);
    if (by_pairs != grouped) {
        detail = "grouped and enumerated mixture chi2 differ";
        return false;
    }
    return true;
}

bool check_cross_moments_mc(std::string& detail) {
    Rng rng(21);
    const long mc_n = 200'000;
    for (int trial = 0; trial < 4; ++trial) {
        const int d = 10, s = 2;
        SignSupportVector v1 = random_sign_support(d, s, rng);
        SignSupportVector v2 = random_sign_support(d, s, rng);
        const int overlap = v1.dot(v2);
        const double nu = 0.5;
        const double beta = rng.uniform(0.1, 0.6);
        {  // known covariance kind
            const double closed = chi2_cross_gmm_known_overlap(overlap, beta, nu);
            Rng mc(split_seed(500, trial));
            double acc = 0.0, acc_sq = 0.0;
            const double b1 = -beta * (1 - nu), b2 = beta * nu;
            for (long i = 0; i < mc_n; ++i) {
                // (v1'X, v2'X) is bivariate normal with variance s, covariance overlap
                const double g1 = mc.gaussian(), g2 = mc.gaussian();
                const double s1 = std::sqrt(static_cast<double>(s)) * g1;
                const double rho = overlap / static_cast<double>(s);
                const double s2 = std::sqrt(static_cast<double>(s)) *
                                  (rho * g1 + std::sqrt(1 - rho * rho) * g2);
                auto lr = [&](double t) {
                    return nu * std::exp(b1 * t - 0.5 * b1 * b1 * s) +
                           (1 - nu) * std::exp(b2 * t - 0.5 * b2 * b2 * s);
                };
                const double prod = lr(s1) * lr(s2);
                acc += prod;
                acc_sq += prod * prod;
            }
            const double mean = acc / mc_n;
            const double se = std::sqrt(std::max(0.0, acc_sq / mc_n - mean * mean) / mc_n);
            if (!close(closed, mean, 5.0 * std::max(se, 1e-9))) {
                detail = "known-covariance cross moment disagrees with Monte Carlo";
                return false;
            }
        }
        {  // unknown-covariance kind (guarded range)
            const double ub = 0.3;
            const double closed = chi2_cross_gmm_unknown_overlap(overlap, ub);
            const double sb2 = s * ub * ub;
            Rng mc(split_seed(700, trial));
            double acc = 0.0, acc_sq = 0.0;
            for (long i = 0; i < mc_n; ++i) {
                const double g1 = mc.gaussian(), g2 = mc.gaussian();
                const double s1 = std::sqrt(static_cast<double>(s)) * g1;
                const double rho = overlap / static_cast<double>(s);
                const double s2 = std::sqrt(static_cast<double>(s)) *
                                  (rho * g1 + std::sqrt(1 - rho * rho) * g2);
                auto lr = [&](double t) {
                    return 1.0 / std::sqrt(1.0 - sb2) *
                           std::exp(-0.5 * ub * ub * t * t / (1.0 - sb2) -
                                    0.5 * sb2 / (1.0 - sb2)) *
                           std::cosh(ub * t / (1.0 - sb2));
                };
                const double prod = lr(s1) * lr(s2);
                acc += prod;
                acc_sq += prod * prod;
            }
            const double mean = acc / mc_n;
            const double se = std::sqrt(std::max(0.0, acc_sq / mc_n - mean * mean) / mc_n);
            if (!close(closed, mean, 5.0 * std::max(se, 1e-9))) {
                detail = "unknown-covariance cross moment disagrees with Monte Carlo";
                return false;
            }
        }
        {  // regression kind
            const double sigma = 1.0;
            const double closed = chi2_cross_reg_overlap(overlap, beta, sigma, s);
            const double s0sq = sigma * sigma + s * beta * beta;
            Rng mc(split_seed(900, trial));
            double acc = 0.0, acc_sq = 0.0;
            for (long i = 0; i < mc_n; ++i) {
                const double y = std::sqrt(s0sq) * mc.gaussian();
                const double g1 = mc.gaussian(), g2 = mc.gaussian();
                const double s1 = std::sqrt(static_cast<double>(s)) * g1;
                const double rho = overlap / static_cast<double>(s);
                const double s2 = std::sqrt(static_cast<double>(s)) *
                                  (rho * g1 + std::sqrt(1 - rho * rho) * g2);
                const double c = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
                auto lr = [&](double sv) {
                    const double m = beta * sv;
                    const double dens =
                        0.5 * c *
                        (std::exp(-0.5 * (y - m) * (y - m) / (sigma * sigma)) +
                         std::exp(-0.5 * (y + m) * (y + m) / (sigma * sigma)));
                    const double null_dens =
                        std::exp(-0.5 * y * y / s0sq) / std::sqrt(2.0 * M_PI * s0sq);
                    return dens / null_dens;
                };
                const double prod = lr(s1) * lr(s2);
                acc += prod;
                acc_sq += prod * prod;
            }
            const double mean = acc / mc_n;
            const double se = std::sqrt(std::max(0.0, acc_sq / mc_n - mean * mean) / mc_n);
            if (!close(closed, mean, 5.0 * std::max(se, 1e-9))) {
                detail = "regression cross moment disagrees with Monte Carlo";
                return false;
            }
        }
    }
    return true;
}

bool check_hermite_unit_coefficients(std::string& detail) {
    for (int k = 0; k <= 6; ++k) {
        auto hk = [k](double x) {
            std::vector<double> h(k + 1);
            h[0] = 1.0;
            if (k >= 1) h[1] = x;
            for (int i = 1; i < k; ++i) {
                h[i + 1] = (x * h[i] - std::sqrt(static_cast<double>(i)) * h[i - 1]) /
                           std::sqrt(static_cast<double>(i + 1));
            }
            return h[k];
        };
        const Eigen::VectorXd coeffs = hermite_coeffs(hk, 8);
        for (int j = 0; j <= 8; ++j) {
            const double want = (j == k) ? 1.0 : 0.0;
            if (!close(coeffs(j), want, 1e-8)) {
                detail = "unit coefficient drifted at k=" + std::to_string(k);
                return false;
            }
        }
    }
    return true;
}

// --- experiments ----------------------------------------------------------------

bool check_sweep_determinism(std::string& detail, int threads) {
    ExperimentConfig config;
    config.model = "gmm";
    config.d = 10;
    config.s = 2;
    config.n = 200;
    config.detector = "diagonal";
    config.threshold_mode = "calibrated";
    config.calibration_trials = 150;
    config.trials = 40;
    config.gamma_grid = {0.5, 2.0};
    config.seed = 77;
    config.emit_wall_ms = false;
    config.threads = threads;
    const std::string a = sweep_csv(config, run_sweep(config));
    const std::string b = sweep_csv(config, run_sweep(config));
    if (a != b) {
        detail = "two sweeps with the same seed produced different CSV";
        return false;
    }
    return true;
}

bool check_risk_at_zero(std::string& detail, int threads) {
    ExperimentConfig config;
    config.model = "gmm";
    config.d = 10;
    config.s = 2;
    config.n = 200;
    config.detector = "diagonal";
    config.threshold_mode = "calibrated";
    config.calibration_trials = 200;
    config.trials = 100;
    config.gamma_grid = {0.0};
    config.seed = 5;
    config.threads = threads;
    const std::vector<RiskRow> rows = run_sweep(config);
    const double slack = 3.0 * std::sqrt(1.0 / config.trials);
    if (std::abs(rows[0].risk - 1.0) > slack) {
        std::ostringstream os;
        os << "risk at gamma=0 is " << rows[0].risk;
        detail = os.str();
        return false;
    }
    if (rows[0].budget != config.d) {
        detail = "declared budget mismatch in risk row";
        return false;
    }
    return true;
}

}  // namespace

std::vector<VerifyCheck> verify_suite(int threads) {
    return {
        {"tolerance-monotone-symmetric", "exact inequalities on a 200-point random grid",
         check_tolerance_monotone},
        {"runner-determinism", "bitwise transcript equality", check_runner_determinism},
        {"expectation-vs-monte-carlo", "5 standard errors at 2e5 samples",
         check_expectation_vs_monte_carlo},
        {"sign-support-enumeration", "exact counts and lexicographic order",
         check_sign_support_enumeration},
        {"signal-strength", "exact values", check_signal_strength},
        {"adversarial-validity", "|response - E| <= tau + 1e-12", check_adversarial_validity},
        {"certificate-monotone", "identity never flips false under smaller signal",
         check_certificate_monotone},
        {"distinguishable-partition", "exact set identity", check_distinguishable_partition},
        {"budget-accounting", "transcript length equals declared T", check_budget_accounting},
        {"truncation-bias", "|E[q] - E[q*]| <= 1/n at R = 6", check_truncation_bias},
        {"threshold-goldens", "1e-9 against frozen values", check_threshold_goldens},
        {"size-control", "type-I <= xi + 3 sqrt(xi(1-xi)/trials)",
         [threads](std::string& d) { return make_size_control_check(d, threads); }},
        {"truncation-coefficient", "closed form vs quadrature <= 1e-8 on t in [0,10]",
         check_truncation_coefficient},
        {"truncation-negative-control", "corrupted closed form must be flagged",
         check_truncation_negative_control},
        {"hermite-second-moment", "series equals 2 zeta^2 within 1e-8",
         check_hermite_second_moment},
        {"reg-null-second-moment", "5 standard errors at 2e5 samples",
         check_reg_null_second_moment},
        {"overlap-table", "exact match with enumeration, d <= 10", check_overlap_table},
        {"mixture-grouping", "bitwise equality of grouped and enumerated sums",
         check_mixture_grouping},
        {"cross-moments-vs-monte-carlo", "5 standard errors at 2e5 samples",
         check_cross_moments_mc},
        {"hermite-unit-coefficients", "1e-8", check_hermite_unit_coefficients},
        {"sweep-determinism", "byte-identical CSV",
         [threads](std::string& d) { return check_sweep_determinism(d, threads); }},
        {"risk-at-zero", "|risk - 1| <= 3 sqrt(1/trials)",
         [threads](std::string& d) { return check_risk_at_zero(d, threads); }},
    };
}

int run_verify(std::ostream& out, int threads) {
    int failures = 0;
    for (const VerifyCheck& check : verify_suite(threads)) {
        std::string detail;
        bool ok = false;
        try {
            ok = check.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        out << (ok ? "PASS " : "FAIL ") << check.name << " (" << check.tolerance << ")";
        if (!ok && !detail.empty()) out << " -- " << detail;
        out << "\n";
        failures += ok ? 0 : 1;
    }
    return failures;
}

}  // namespace sqlab
