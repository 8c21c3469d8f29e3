#include "doctest.h"

#include <cmath>

#include "sqlab/analysis.hpp"
#include "sqlab/models.hpp"
#include "sqlab/rng.hpp"
#include "sqlab/sq_core.hpp"

using namespace sqlab;

namespace {

SignSupportVector make_v(int d, std::vector<int> support, std::vector<int> signs) {
    SignSupportVector v;
    v.d = d;
    v.support = std::move(support);
    for (int s : signs) v.signs.push_back(static_cast<std::int8_t>(s));
    return v;
}

struct McEstimate {
    double mean;
    double se;
};

// Monte Carlo likelihood-ratio product oracles; each draws the pair of
// projections (v1'X, v2'X) (plus the response for the regression kind)
// directly from its null law.
McEstimate mc_cross_gmm_known(int overlap, int s, double beta, double nu, long n,
                              std::uint64_t seed) {
    Rng rng(seed);
    const double b1 = -beta * (1 - nu), b2 = beta * nu;
    const double rho = static_cast<double>(overlap) / s;
    double acc = 0.0, acc_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double g1 = rng.gaussian(), g2 = rng.gaussian();
        const double s1 = std::sqrt(double(s)) * g1;
        const double s2 = std::sqrt(double(s)) * (rho * g1 + std::sqrt(1 - rho * rho) * g2);
        auto lr = [&](double t) {
            return nu * std::exp(b1 * t - 0.5 * b1 * b1 * s) +
                   (1 - nu) * std::exp(b2 * t - 0.5 * b2 * b2 * s);
        };
        const double prod = lr(s1) * lr(s2);
        acc += prod;
        acc_sq += prod * prod;
    }
    const double mean = acc / n;
    return {mean, std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n)};
}

McEstimate mc_cross_gmm_unknown(int overlap, int s, double beta, long n, std::uint64_t seed) {
    Rng rng(seed);
    const double sb2 = s * beta * beta;
    const double rho = static_cast<double>(overlap) / s;
    double acc = 0.0, acc_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double g1 = rng.gaussian(), g2 = rng.gaussian();
        const double s1 = std::sqrt(double(s)) * g1;
        const double s2 = std::sqrt(double(s)) * (rho * g1 + std::sqrt(1 - rho * rho) * g2);
        auto lr = [&](double t) {
            return 1.0 / std::sqrt(1.0 - sb2) *
                   std::exp(-0.5 * beta * beta * t * t / (1.0 - sb2) - 0.5 * sb2 / (1.0 - sb2)) *
                   std::cosh(beta * t / (1.0 - sb2));
        };
        const double prod = lr(s1) * lr(s2);
        acc += prod;
        acc_sq += prod * prod;
    }
    const double mean = acc / n;
    return {mean, std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n)};
}

McEstimate mc_cross_reg(int overlap, int s, double beta, double sigma, long n,
                        std::uint64_t seed) {
    Rng rng(seed);
    const double s0sq = sigma * sigma + s * beta * beta;
    const double rho = static_cast<double>(overlap) / s;
    const double c = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    double acc = 0.0, acc_sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double y = std::sqrt(s0sq) * rng.gaussian();
        const double g1 = rng.gaussian(), g2 = rng.gaussian();
        const double s1 = std::sqrt(double(s)) * g1;
        const double s2 = std::sqrt(double(s)) * (rho * g1 + std::sqrt(1 - rho * rho) * g2);
        auto lr = [&](double sv) {
            const double m = beta * sv;
            const double dens = 0.5 * c *
                                (std::exp(-0.5 * (y - m) * (y - m) / (sigma * sigma)) +
                                 std::exp(-0.5 * (y + m) * (y + m) / (sigma * sigma)));
            const double null_dens = std::exp(-0.5 * y * y / s0sq) / std::sqrt(2 * M_PI * s0sq);
            return dens / null_dens;
        };
        const double prod = lr(s1) * lr(s2);
        acc += prod;
        acc_sq += prod * prod;
    }
    const double mean = acc / n;
    return {mean, std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n)};
}

}  // namespace

TEST_CASE("known-covariance cross moments") {
    SUBCASE("orthogonal directions give exactly 1") {
        CHECK(chi2_cross_gmm_known_overlap(0, 1.3, 0.3) == 1.0);
    }
    SUBCASE("the symmetric case collapses to a single cosh") {
        CHECK(chi2_cross_gmm_known_overlap(4, 1.0, 0.5) ==
              doctest::Approx(1.5430806348152438).epsilon(1e-14));
    }
    SUBCASE("symmetry and overlap dependence") {
        const SignSupportVector v1 = make_v(10, {0, 2, 5}, {1, -1, 1});
        const SignSupportVector v2 = make_v(10, {0, 2, 9}, {1, 1, -1});
        CHECK(chi2_cross_gmm_known(v1, v2, 0.7, 0.4) == chi2_cross_gmm_known(v2, v1, 0.7, 0.4));
        CHECK(chi2_cross_gmm_known(v1, v2, 0.7, 0.4) ==
              chi2_cross_gmm_known_overlap(v1.dot(v2), 0.7, 0.4));
    }
    SUBCASE("agrees with the likelihood-ratio Monte Carlo oracle") {
        for (const auto& [overlap, nu] : std::vector<std::pair<int, double>>{{2, 0.5}, {1, 0.3}}) {
            const double beta = 0.5;
            const double closed = chi2_cross_gmm_known_overlap(overlap, beta, nu);
            const McEstimate mc = mc_cross_gmm_known(overlap, 2, beta, nu, 400'000, 77);
            CHECK(std::abs(closed - mc.mean) <= 5.0 * mc.se);
        }
    }
}

TEST_CASE("unknown-covariance cross moments") {
    SUBCASE("orthogonal directions give exactly 1") {
        CHECK(chi2_cross_gmm_unknown_overlap(0, 0.4) == 1.0);
    }
    SUBCASE("frozen value at overlap 1, beta 0.3") {
        CHECK(chi2_cross_gmm_unknown_overlap(1, 0.3) ==
              doctest::Approx(1.0000111258313329).epsilon(1e-12));
    }
    SUBCASE("the singularity guard rejects beta^4 overlap^2 >= 1") {
        CHECK_THROWS_AS(chi2_cross_gmm_unknown_overlap(4, 0.8), std::domain_error);
    }
    SUBCASE("values are at least 1 on a guarded grid") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            const int overlap = static_cast<int>(rng.below(4));
            const double beta = rng.uniform(0.05, 0.5);
            if (std::pow(beta, 4) * overlap * overlap >= 1.0) continue;
            CHECK(chi2_cross_gmm_unknown_overlap(overlap, beta) >= 1.0 - 1e-12);
        }
    }
    SUBCASE("agrees with the likelihood-ratio Monte Carlo oracle") {
        // the high-overlap points matter: they separate the two-point law of
        // the sign product from a binomial one
        for (const auto& [s, overlap] : std::vector<std::pair<int, int>>{{2, 1}, {3, 2}, {3, 3}}) {
            const double beta = 0.3;
            const double closed = chi2_cross_gmm_unknown_overlap(overlap, beta);
            const McEstimate mc =
                mc_cross_gmm_unknown(overlap, s, beta, 400'000, 13 + overlap);
            CHECK(std::abs(closed - mc.mean) <= 5.0 * mc.se);
        }
    }
}

TEST_CASE("regression cross moments") {
    SUBCASE("orthogonal directions give exactly 1") {
        CHECK(chi2_cross_reg_overlap(0, 0.7, 1.0, 3) == 1.0);
    }
    SUBCASE("pinned single-sample value") {
        CHECK(chi2_cross_reg_overlap(2, 0.5, 1.0, 2) == doctest::Approx(1.125).epsilon(1e-15));
    }
    SUBCASE("the n-fold value is the stated power") {
        CHECK(chi2_cross_reg_overlap(2, 0.5, 1.0, 2, 3) ==
              doctest::Approx(1.423828125).epsilon(1e-15));
    }
    SUBCASE("the singularity guard") {
        CHECK_THROWS_AS(chi2_cross_reg_overlap(3, 2.0, 0.1, 1), std::domain_error);
    }
    SUBCASE("agrees with the marginal-matched likelihood-ratio Monte Carlo oracle") {
        const int s = 2, overlap = 2;
        const double beta = 0.5, sigma = 1.0;
        const double closed = chi2_cross_reg_overlap(overlap, beta, sigma, s);
        const McEstimate mc = mc_cross_reg(overlap, s, beta, sigma, 400'000, 3);
        CHECK(std::abs(closed - mc.mean) <= 5.0 * mc.se);
    }
}

TEST_CASE("overlap tables match brute-force enumeration") {
    for (int d = 2; d <= 14; ++d) {
        for (int s = 1; s <= std::min(3, d); ++s) {
            const OverlapTable table = overlap_table(d, s);
            const auto family = enumerate_sign_supports(d, s);
            const SignSupportVector& ref = family.front();
            std::vector<unsigned long long> sizes(s + 1, 0);
            for (const auto& v : family) ++sizes[s - std::abs(ref.dot(v))];
            REQUIRE(table.sizes == sizes);
            unsigned long long total = 0;
            for (auto c : table.sizes) total += c;
            CHECK(total == sign_support_count(d, s));
        }
    }
    CHECK(overlap_table(4, 2).sizes == std::vector<unsigned long long>{2, 16, 6});
    CHECK(overlap_table(12, 2).sizes == std::vector<unsigned long long>{2, 80, 182});
    // full support: only +-v reach the extreme overlap
    CHECK(overlap_table(3, 3).sizes[0] == 2);
}

TEST_CASE("growth check") {
    SUBCASE("holds at d = 12, s = 2") {
        const GrowthCheck check = overlap_growth_check(overlap_table(12, 2));
        CHECK(check.holds);
        REQUIRE(check.ratios.size() == 2);
        CHECK(check.ratios[0] == doctest::Approx(40.0));
        CHECK(check.ratios[1] == doctest::Approx(182.0 / 80.0));
        CHECK(check.bound == doctest::Approx(1.5));
    }
    SUBCASE("fails at d = 4, s = 2: the bound is asymptotic in d / s^2") {
        const GrowthCheck check = overlap_growth_check(overlap_table(4, 2));
        CHECK_FALSE(check.holds);
        CHECK(check.ratios[1] == doctest::Approx(6.0 / 16.0));
    }
    SUBCASE("holds whenever d >= 4 s^2 on a sweep") {
        Rng rng(8);
        for (int trial = 0; trial < 30; ++trial) {
            const int s = 1 + static_cast<int>(rng.below(3));
            const int d = 4 * s * s + static_cast<int>(rng.below(30));
            CHECK(overlap_growth_check(overlap_table(d, s)).holds);
        }
    }
}

TEST_CASE("hermite machinery") {
    SUBCASE("orthonormal basis functions have unit coefficients") {
        auto h2 = [](double x) { return (x * x - 1.0) / std::sqrt(2.0); };
        const Eigen::VectorXd c = hermite_coeffs(h2, 5);
        for (int k = 0; k <= 5; ++k) {
            CHECK(std::abs(c(k) - (k == 2 ? 1.0 : 0.0)) <= 1e-8);
        }
        const Eigen::VectorXd e2 = c;
        for (double zeta : {-0.5, 0.2, 0.9}) {
            CHECK(hermite_cross_moment(e2, e2, zeta) == doctest::Approx(zeta * zeta).epsilon(1e-8));
        }
    }

    SUBCASE("the square against the centered square gives 2 zeta^2") {
        const Eigen::VectorXd f = hermite_coeffs([](double w) { return w * w; }, 8);
        const Eigen::VectorXd g = hermite_coeffs([](double z) { return z * z - 1.0; }, 8);
        for (double zeta : {0.05, 0.4, 0.95}) {
            CHECK(hermite_cross_moment(f, g, zeta) ==
                  doctest::Approx(2.0 * zeta * zeta).epsilon(1e-8));
        }
    }

    SUBCASE("piecewise coefficients of the truncated square match Monte Carlo") {
        const double t = 1.3, zeta = 0.6;
        auto f = [t](double w) { return (std::abs(w) > t) ? w * w : 0.0; };
        const Eigen::VectorXd fc = hermite_coeffs_piecewise(f, 30, {-t, t});
        // the centered square has no components beyond H_2, so a short series
        // avoids the cancellation noise of high-order coefficients
        const Eigen::VectorXd gc = hermite_coeffs([](double z) { return z * z - 1.0; }, 8);
        const double series = hermite_cross_moment(fc, gc, zeta);

        Rng rng(5);
        const long n = 1'000'000;
        double acc = 0.0, acc_sq = 0.0;
        for (long i = 0; i < n; ++i) {
            const double w = rng.gaussian();
            const double z = zeta * w + std::sqrt(1 - zeta * zeta) * rng.gaussian();
            const double value = f(w) * (z * z - 1.0);
            acc += value;
            acc_sq += value * value;
        }
        const double mean = acc / n;
        const double se = std::sqrt(std::max(0.0, acc_sq / n - mean * mean) / n);
        CHECK(std::abs(series - mean) <= 5.0 * se);

        // the H2 coefficient recovers the truncation bias coefficient / sqrt(2)
        CHECK(fc(2) * std::sqrt(2.0) ==
              doctest::Approx(2.0 * ((t * t * t + 2 * t) * 0.3989422804014327 *
                                         std::exp(-0.5 * t * t) +
                                     2 * 0.5 * std::erfc(t / std::sqrt(2.0))))
                  .epsilon(1e-9));
    }

    SUBCASE("gauss-hermite flags discontinuous integrands as insufficient") {
        auto f = [](double w) { return (std::abs(w) > 1.3) ? w * w : 0.0; };
        CHECK_THROWS_AS(hermite_coeffs(f, 12), std::runtime_error);
    }

    SUBCASE("correlations beyond 1 are rejected") {
        const Eigen::VectorXd c = hermite_coeffs([](double) { return 1.0; }, 2);
        CHECK_THROWS_AS(hermite_cross_moment(c, c, 1.5), std::invalid_argument);
    }
}

TEST_CASE("risk bounds") {
    SUBCASE("indistinguishable mixtures force risk 1") {
        CHECK(lecam_risk_lower_bound(0.0) == 1.0);
        CHECK(lecam_risk_lower_bound(0.04) == doctest::Approx(0.9));
        CHECK_THROWS_AS(lecam_risk_lower_bound(-1.0), std::invalid_argument);
    }

    SUBCASE("singleton member sets reduce to the self cross moment") {
        const SignSupportVector v = make_v(6, {0, 4}, {1, -1});
        auto cross = [](const SignSupportVector& a, const SignSupportVector& b) {
            return chi2_cross_reg(a, b, 0.4, 1.0, 2, 10);
        };
        const double self = chi2_cross_reg(v, v, 0.4, 1.0, 2, 10);
        CHECK(mixture_chi2({v}, cross) == doctest::Approx(self - 1.0).epsilon(1e-14));
    }

    SUBCASE("grouped and enumerated sums over the full family agree exactly") {
        const int d = 12, s = 2;
        auto cross = [](int overlap) { return chi2_cross_reg_overlap(overlap, 0.2, 1.0, 2, 50); };
        const auto family = enumerate_sign_supports(d, s);
        const double grouped = mixture_chi2_grouped(overlap_table(d, s), cross);
        const double enumerated = mixture_chi2_by_overlap(family, cross);
        CHECK(grouped == enumerated);  // identical integer-weighted summands
        const double naive = mixture_chi2(family, [](const SignSupportVector& a,
                                                     const SignSupportVector& b) {
            return chi2_cross_reg(a, b, 0.2, 1.0, 2, 50);
        });
        CHECK(naive == doctest::Approx(grouped).epsilon(1e-12));
        CHECK(lecam_risk_lower_bound(grouped) <= 1.0);
    }

    SUBCASE("divergence floor values") {
        CHECK(chi2_divergence_floor(1, std::exp(-1.0), 1) ==
              doctest::Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(chi2_divergence_floor(10000, 0.01, 10000) ==
              doctest::Approx(9.21034037197618e-4).epsilon(1e-12));
        CHECK(chi2_divergence_floor(100, 0.05, 50) > chi2_divergence_floor(10, 0.05, 50));
        CHECK(chi2_divergence_floor(100, 0.05, 500) < chi2_divergence_floor(100, 0.05, 50));
    }
}

TEST_CASE("the grouped mixture pipeline scales to d in the hundreds") {
    // exact agreement with pair enumeration where enumeration is feasible
    {
        const int d = 16, s = 3;
        auto cross = [](int overlap) {
            return chi2_cross_reg_overlap(overlap, 0.15, 1.0, 3, 40);
        };
        const auto family = enumerate_sign_supports(d, s);
        CHECK(mixture_chi2_grouped(overlap_table(d, s), cross) ==
              mixture_chi2_by_overlap(family, cross));
    }
    // at d = 200 the enumeration has ~10^7 members and ~10^14 pairs; the
    // grouped path needs only the s+1 overlap classes
    {
        const int d = 200, s = 3;
        const double beta = 0.2, sigma = 1.0;
        const OverlapTable table = overlap_table(d, s);
        unsigned long long total = 0;
        for (auto c : table.sizes) total += c;
        CHECK(total == sign_support_count(d, s));

        double previous = 0.0;
        for (long nfold : {50L, 200L, 800L}) {
            const double chi2 = mixture_chi2_grouped(table, [&](int overlap) {
                return chi2_cross_reg_overlap(overlap, beta, sigma, s, nfold);
            });
            CHECK(chi2 > previous);  // more samples separate the mixture further
            previous = chi2;
            const double risk = lecam_risk_lower_bound(chi2);
            CHECK(risk <= 1.0);
        }
        // weak signal: the mixture stays nearly indistinguishable and the
        // two-point bound certifies near-unit risk
        const double weak = mixture_chi2_grouped(table, [&](int overlap) {
            return chi2_cross_reg_overlap(overlap, 0.05, sigma, s, 50);
        });
        CHECK(lecam_risk_lower_bound(weak) >= 0.99);
    }
}

TEST_CASE("a distinguishing gap also dominates the null-anchored deviation bound") {
    // property behind the divergence floor: if a query separates P_v from the
    // null by its tolerance, the same gap is at least
    // sqrt(log(T/xi) (M^2 - E_0^2) / (6n))
    Rng rng(31);
    int activations = 0;
    for (int trial = 0; trial < 4000; ++trial) {
        const double m = rng.uniform(0.5, 10.0);
        const double e0 = rng.uniform(-m, m);
        const double ev = rng.uniform(-m, m);
        const long t_budget = 1 + static_cast<long>(rng.below(1000));
        const double xi = rng.uniform(0.01, 0.5);
        const long n = 10 + static_cast<long>(rng.below(100000));
        const OracleConfig config(xi, n, t_budget, std::log(static_cast<double>(t_budget)));
        const double tau = tolerance(config, m, ev);
        if (std::abs(e0 - ev) < tau) continue;
        ++activations;
        const double floor = std::sqrt(std::log(t_budget / xi) * (m * m - e0 * e0) / (6.0 * n));
        CHECK(std::abs(e0 - ev) >= floor - 1e-12);
    }
    CHECK(activations > 500);  // the premise fired often enough to mean something
}
