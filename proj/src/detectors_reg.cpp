#include "sqlab/detectors_reg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "sqlab/gaussian.hpp"
#include "sqlab/parallel.hpp"
#include "sqlab/quadrature.hpp"

namespace sqlab {

double RegTestSpec::formula_threshold() const {
    const double logn = std::log(static_cast<double>(n));
    const double nn = static_cast<double>(n);
    const double s2 = sigma_hint * sigma_hint;
    if (family == "reg-exhaustive") {
        return C_const * s2 * logn * std::sqrt((s * std::log(2.0 * d) + std::log(1.0 / xi)) / nn);
    }
    if (family == "reg-coordinate") {
        return C_const * s2 * logn * std::sqrt(std::log(d / xi) / nn);
    }
    throw std::invalid_argument("RegTestSpec: unknown family " + family);
}

std::string RegTestSpec::to_json() const {
    nlohmann::json j;
    j["family"] = family;
    j["threshold_mode"] = (mode == ThresholdMode::Formula ? "formula" : "calibrated");
    j["calibrated_threshold"] = calibrated_threshold;
    j["R"] = R;
    j["C"] = C_const;
    j["xi"] = xi;
    j["n"] = n;
    j["d"] = d;
    j["s"] = s;
    j["sigma_hint"] = sigma_hint;
    return j.dump();
}

RegTestSpec RegTestSpec::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RegTestSpec spec;
    spec.family = j.at("family").get<std::string>();
    const std::string mode = j.at("threshold_mode").get<std::string>();
    if (mode == "formula") spec.mode = ThresholdMode::Formula;
    else if (mode == "calibrated") spec.mode = ThresholdMode::Calibrated;
    else throw std::invalid_argument("RegTestSpec: bad threshold_mode " + mode);
    spec.calibrated_threshold = j.at("calibrated_threshold").get<double>();
    spec.R = j.at("R").get<double>();
    spec.C_const = j.at("C").get<double>();
    spec.xi = j.at("xi").get<double>();
    spec.n = j.at("n").get<long>();
    spec.d = j.at("d").get<int>();
    spec.s = j.at("s").get<int>();
    spec.sigma_hint = j.at("sigma_hint").get<double>();
    return spec;
}

namespace {

// |y^2 (z^2-1)| <= sigma^2 R^2 max(R^2 log n - 1, 1) under both truncations
double reg_query_bound(double sigma_hint, double R, long n) {
    const double z_sq = R * R * std::log(static_cast<double>(n));
    return sigma_hint * sigma_hint * R * R * std::max(z_sq - 1.0, 1.0);
}

}  // namespace

std::vector<BoundedQuery> reg_exhaustive_queries(int d, int s, double sigma_hint, double R, long n,
                                                 std::size_t cap) {
    if (!(R > 0.0) || !(sigma_hint > 0.0)) {
        throw std::invalid_argument("reg_exhaustive_queries: R and sigma must be positive");
    }
    const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s, cap);
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    const double y_radius = sigma_hint * R;
    const double bound = reg_query_bound(sigma_hint, R, n);
    const double inv_s = 1.0 / static_cast<double>(s);
    const double inv_sqrt_s = std::sqrt(inv_s);

    std::vector<BoundedQuery> out;
    out.reserve(family.size());
    for (const SignSupportVector& v : family) {
        BoundedQuery q;
        q.id = "reg-exh:" + v.label();
        q.bound = bound;
        q.family = FamilyTag::RegExhaustive;
        q.params.direction = v.to_vector();
        q.params.radius = radius;
        q.params.y_radius = y_radius;
        const std::vector<int> support = v.support;
        const std::vector<std::int8_t> signs = v.signs;
        q.eval = [support, signs, inv_s, inv_sqrt_s, radius, y_radius](const Sample& p) {
            const double y = p(0);
            if (std::abs(y) > y_radius) return 0.0;
            double t = 0.0;
            for (std::size_t k = 0; k < support.size(); ++k) {
                t += signs[k] * p(support[k] + 1);
            }
            const double z = t * inv_sqrt_s;
            if (std::abs(z) > radius) return 0.0;
            return y * y * (z * z - 1.0);
        };
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<BoundedQuery> reg_coordinate_queries(int d, double sigma_hint, double R, long n) {
    if (!(R > 0.0) || !(sigma_hint > 0.0)) {
        throw std::invalid_argument("reg_coordinate_queries: R and sigma must be positive");
    }
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    const double y_radius = sigma_hint * R;
    const double bound = reg_query_bound(sigma_hint, R, n);
    std::vector<BoundedQuery> out;
    out.reserve(d);
    for (int j = 0; j < d; ++j) {
        BoundedQuery q;
        q.id = "reg-coord:" + std::to_string(j);
        q.bound = bound;
        q.family = FamilyTag::RegCoordinate;
        q.params.coordinate = j;
        q.params.radius = radius;
        q.params.y_radius = y_radius;
        q.eval = [j, radius, y_radius](const Sample& p) {
            const double y = p(0);
            if (std::abs(y) > y_radius) return 0.0;
            const double z = p(j + 1);
            if (std::abs(z) > radius) return 0.0;
            return y * y * (z * z - 1.0);
        };
        out.push_back(std::move(q));
    }
    return out;
}

namespace {

double sup_response(const Transcript& transcript) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [id, z] : transcript.entries) best = std::max(best, z);
    return best;
}

}  // namespace

int reg_exhaustive_test(const Transcript& transcript, const RegTestSpec& spec) {
    const std::size_t expected = sign_support_count(spec.d, spec.s);
    if (transcript.entries.size() != expected) {
        throw std::invalid_argument("reg_exhaustive_test: transcript does not cover the family");
    }
    return sup_response(transcript) >= spec.threshold() ? 1 : 0;
}

int reg_coordinate_test(const Transcript& transcript, const RegTestSpec& spec) {
    if (transcript.entries.size() != static_cast<std::size_t>(spec.d)) {
        throw std::invalid_argument("reg_coordinate_test: transcript does not cover the family");
    }
    return sup_response(transcript) >= spec.threshold() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Truncation calibration
// ---------------------------------------------------------------------------

double truncation_bias_coefficient(double t) {
    if (t < 0.0) throw std::invalid_argument("truncation_bias_coefficient: t >= 0 required");
    return 2.0 * ((t * t * t + 2.0 * t) * normal_pdf(t) + 2.0 * normal_upper_tail(t));
}

double truncation_bias_coefficient_by_quadrature(double t, double abs_tol) {
    const double hi = std::max(t + 45.0, 50.0);
    return 2.0 * adaptive_integrate(
                     [](double w) { return w * w * (w * w - 1.0) * normal_pdf(w); }, t, hi,
                     abs_tol / 2.0);
}

double truncation_level(double target, long n, double sigma) {
    if (!(target > 0.0 && target < 2.0)) {
        throw std::invalid_argument("truncation_level: target must lie in (0, 2)");
    }
    if (n < 2 || !(sigma > 0.0)) {
        throw std::invalid_argument("truncation_level: need n >= 2 and sigma > 0");
    }
    // bisection for t* = inf{t >= 1 : coefficient <= target}; the coefficient
    // peaks at t = 1 and decreases beyond, so the bracket has a sign change
    double lo = 1.0, hi = 64.0;
    if (truncation_bias_coefficient(lo) <= target) {
        throw std::runtime_error("truncation_level: bisection bracket failure at t = 1");
    }
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (truncation_bias_coefficient(mid) > target) lo = mid;
        else hi = mid;
    }
    const double t_star = 0.5 * (lo + hi);

    // smallest half-integer R with sqrt(12) sigma^2 n^{-R^2/4} <= 1/n
    const double logn = std::log(static_cast<double>(n));
    const double constant = std::sqrt(12.0) * sigma * sigma;
    double r_tail = 0.5;
    while (constant * std::exp(-r_tail * r_tail / 4.0 * logn) > 1.0 / static_cast<double>(n)) {
        r_tail += 0.5;
        if (r_tail > 128.0) throw std::runtime_error("truncation_level: tail bound unreachable");
    }
    return std::max(2.0 * t_star, r_tail);
}

// ---------------------------------------------------------------------------
// Fast statistics
// ---------------------------------------------------------------------------

double reg_exhaustive_statistic(const Eigen::MatrixXd& data, int s, double y_radius, double radius,
                                int threads) {
    const int d = static_cast<int>(data.cols()) - 1;
    const long n = data.rows();
    std::vector<std::vector<int>> supports;
    {
        std::vector<int> idx(s);
        for (int i = 0; i < s; ++i) idx[i] = i;
        for (;;) {
            supports.push_back(idx);
            int k = s - 1;
            while (k >= 0 && idx[k] == d - s + k) --k;
            if (k < 0) break;
            ++idx[k];
            for (int j = k + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
        }
    }

    // y^2 with the response truncation folded in
    Eigen::ArrayXd ysq(n);
    for (long i = 0; i < n; ++i) {
        const double y = data(i, 0);
        ysq(i) = std::abs(y) <= y_radius ? y * y : 0.0;
    }
    const double inv_s = 1.0 / static_cast<double>(s);
    const double tcut_sq = radius * radius * s;  // cutoff on the unnormalized sum
    const long patterns = 1L << (s - 1);

    std::vector<double> per_support(supports.size());
    parallel_for(static_cast<long>(supports.size()), threads, [&](long gi) {
        const std::vector<int>& sup = supports[gi];
        Eigen::ArrayXd t = data.col(sup[0] + 1).array();
        for (int k = 1; k < s; ++k) t += data.col(sup[k] + 1).array();
        std::vector<int> signs(s, 1);

        double best = -std::numeric_limits<double>::infinity();
        long prev_gray = 0;
        for (long g = 0;; ++g) {
            double acc = 0.0;
            const double* tp = t.data();
            const double* yp = ysq.data();
            for (long i = 0; i < n; ++i) {
                const double tt = tp[i] * tp[i];
                if (tt <= tcut_sq) acc += yp[i] * (tt * inv_s - 1.0);
            }
            best = std::max(best, acc / static_cast<double>(n));
            if (g + 1 >= patterns) break;
            const long gray = (g + 1) ^ ((g + 1) >> 1);
            const long changed = gray ^ prev_gray;
            prev_gray = gray;
            int bit = 0;
            while (!((changed >> bit) & 1)) ++bit;
            const int coord = bit + 1;
            signs[coord] = -signs[coord];
            t += (2.0 * signs[coord]) * data.col(sup[coord] + 1).array();
        }
        per_support[gi] = best;
    });
    double best = -std::numeric_limits<double>::infinity();
    for (double v : per_support) best = std::max(best, v);
    return best;
}

double reg_coordinate_statistic(const Eigen::MatrixXd& data, double y_radius, double radius) {
    const int d = static_cast<int>(data.cols()) - 1;
    const long n = data.rows();
    const double r_sq = radius * radius;
    Eigen::ArrayXd ysq(n);
    for (long i = 0; i < n; ++i) {
        const double y = data(i, 0);
        ysq(i) = std::abs(y) <= y_radius ? y * y : 0.0;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        const double* col = data.col(j + 1).data();
        const double* yp = ysq.data();
        for (long i = 0; i < n; ++i) {
            const double zz = col[i] * col[i];
            if (zz <= r_sq) acc += yp[i] * (zz - 1.0);
        }
        best = std::max(best, acc / static_cast<double>(n));
    }
    return best;
}

std::function<int(QueryChannel&)> reg_estimator_to_detector(RegSqEstimator estimator, double sigma,
                                                            double gamma_n) {
    const double sigma_sq = sigma * sigma;
    return [estimator = std::move(estimator), sigma_sq, gamma_n](QueryChannel& channel) {
        const Eigen::VectorXd beta_hat = estimator(channel);
        return beta_hat.squaredNorm() / sigma_sq >= 5.0 / 8.0 * gamma_n ? 1 : 0;
    };
}

}  // namespace sqlab
