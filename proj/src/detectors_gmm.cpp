#include "sqlab/detectors_gmm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "sqlab/parallel.hpp"
#include "sqlab/rng.hpp"

namespace sqlab {

namespace {

std::string support_label(const std::vector<int>& support) {
    std::string out;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(support[i]);
    }
    return out;
}

void for_each_combination(int d, int s, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> idx(s);
    for (int i = 0; i < s; ++i) idx[i] = i;
    for (;;) {
        fn(idx);
        int k = s - 1;
        while (k >= 0 && idx[k] == d - s + k) --k;
        if (k < 0) return;
        ++idx[k];
        for (int j = k + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
    }
}

std::vector<std::vector<int>> all_combinations(int d, int s, std::size_t cap) {
    unsigned long long count = 1;
    for (int i = 0; i < s; ++i) count = count * (d - i) / (i + 1);
    if (count > cap) {
        throw std::length_error("support enumeration exceeds cap " + std::to_string(cap));
    }
    std::vector<std::vector<int>> out;
    out.reserve(count);
    for_each_combination(d, s, [&](const std::vector<int>& idx) { out.push_back(idx); });
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TestSpec
// ---------------------------------------------------------------------------

double TestSpec::formula_threshold() const {
    const double logn = std::log(static_cast<double>(n));
    const double r2 = R * R;
    const double nn = static_cast<double>(n);
    if (family == "gmm-exhaustive") {
        return 1.0 + 2.0 * r2 * logn * std::sqrt((s * std::log(2.0 * d) + std::log(1.0 / xi)) / nn);
    }
    if (family == "gmm-diagonal") {
        return 1.0 + 2.0 * r2 * logn * std::sqrt(std::log(d / xi) / nn);
    }
    if (family == "gmm-net") {
        return 1.0 +
               16.0 * r2 * logn *
                   std::sqrt(2.0 * (s * std::log(5.0 * d) + std::log(1.0 / xi)) / nn);
    }
    if (family == "gmm-net-diagonal") {
        return 1.0 + 16.0 * r2 * logn * std::sqrt(std::log(2.0 * d / xi) / nn);
    }
    throw std::invalid_argument("TestSpec: unknown family " + family);
}

std::string TestSpec::to_json() const {
    nlohmann::json j;
    j["family"] = family;
    j["threshold_mode"] = (mode == ThresholdMode::Formula ? "formula" : "calibrated");
    j["calibrated_threshold"] = calibrated_threshold;
    j["R"] = R;
    j["xi"] = xi;
    j["n"] = n;
    j["d"] = d;
    j["s"] = s;
    return j.dump();
}

TestSpec TestSpec::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    TestSpec spec;
    spec.family = j.at("family").get<std::string>();
    const std::string mode = j.at("threshold_mode").get<std::string>();
    if (mode == "formula") spec.mode = ThresholdMode::Formula;
    else if (mode == "calibrated") spec.mode = ThresholdMode::Calibrated;
    else throw std::invalid_argument("TestSpec: bad threshold_mode " + mode);
    spec.calibrated_threshold = j.at("calibrated_threshold").get<double>();
    spec.R = j.at("R").get<double>();
    spec.xi = j.at("xi").get<double>();
    spec.n = j.at("n").get<long>();
    spec.d = j.at("d").get<int>();
    spec.s = j.at("s").get<int>();
    return spec;
}

// ---------------------------------------------------------------------------
// Query families
// ---------------------------------------------------------------------------

std::vector<BoundedQuery> exhaustive_queries(int d, int s, const CovarianceModel& sigma, double R,
                                             long n, std::size_t cap) {
    if (!(R > 0.0)) throw std::invalid_argument("exhaustive_queries: R must be positive");
    const std::vector<SignSupportVector> family = enumerate_sign_supports(d, s, cap);
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    const double bound = R * R * std::log(static_cast<double>(n));

    std::vector<BoundedQuery> out;
    out.reserve(family.size());
    for (const SignSupportVector& v : family) {
        BoundedQuery q;
        q.id = "gmm-exh:" + v.label();
        q.bound = bound;
        q.family = FamilyTag::GmmExhaustive;
        q.params.direction = v.to_vector();
        q.params.radius = radius;
        const Eigen::VectorXd w = sigma.apply_inverse(q.params.direction);
        const double c = q.params.direction.dot(w);
        const double inv_sqrt_c = 1.0 / std::sqrt(c);
        q.eval = [w, inv_sqrt_c, radius](const Sample& x) {
            const double u = w.dot(x) * inv_sqrt_c;
            return (std::abs(u) <= radius) ? u * u : 0.0;
        };
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<BoundedQuery> diagonal_queries(const CovarianceModel& sigma, double R, long n) {
    if (!(R > 0.0)) throw std::invalid_argument("diagonal_queries: R must be positive");
    const int d = sigma.dim();
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    const double bound = R * R * std::log(static_cast<double>(n));
    std::vector<BoundedQuery> out;
    out.reserve(d);
    for (int j = 0; j < d; ++j) {
        BoundedQuery q;
        q.id = "gmm-diag:" + std::to_string(j);
        q.bound = bound;
        q.family = FamilyTag::GmmDiagonal;
        q.params.coordinate = j;
        q.params.radius = radius;
        const double inv_sqrt_sj = 1.0 / std::sqrt(sigma.diagonal_entry(j));
        q.eval = [j, inv_sqrt_sj, radius](const Sample& x) {
            const double u = x(j) * inv_sqrt_sj;
            return (std::abs(u) <= radius) ? u * u : 0.0;
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

int exhaustive_test(const Transcript& transcript, const TestSpec& spec) {
    const std::size_t expected = sign_support_count(spec.d, spec.s);
    if (transcript.entries.size() != expected) {
        throw std::invalid_argument("exhaustive_test: transcript does not cover the family");
    }
    return sup_response(transcript) >= spec.threshold() ? 1 : 0;
}

int diagonal_test(const Transcript& transcript, const TestSpec& spec) {
    if (transcript.entries.size() != static_cast<std::size_t>(spec.d)) {
        throw std::invalid_argument("diagonal_test: transcript does not cover the family");
    }
    return sup_response(transcript) >= spec.threshold() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Covering net
// ---------------------------------------------------------------------------

std::size_t CoveringNet::size() const {
    std::size_t total = 0;
    for (const auto& g : groups) total += g.size();
    return total;
}

std::vector<Eigen::VectorXd> CoveringNet::flatten() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(size());
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
}

std::size_t CoveringNet::max_group_size() const {
    std::size_t best = 0;
    for (const auto& g : groups) best = std::max(best, g.size());
    return best;
}

CoveringNet covering_net(double delta, const CovarianceModel& sigma, int d, int s,
                         std::uint64_t seed, std::size_t support_cap) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("covering_net: delta in (0,1)");
    if (s < 1 || s > d) throw std::invalid_argument("covering_net: need 1 <= s <= d");
    const std::size_t group_bound =
        static_cast<std::size_t>(std::floor(std::pow(1.0 + 2.0 / delta, s) + 1e-9));
    const std::size_t probe_count = 200 * group_bound;
    const double delta_sq = delta * delta;

    CoveringNet net;
    net.delta = delta;
    net.supports = all_combinations(d, s, support_cap);
    net.groups.resize(net.supports.size());

    for (std::size_t gi = 0; gi < net.supports.size(); ++gi) {
        const std::vector<int>& support = net.supports[gi];
        const Eigen::MatrixXd a = sigma.inverse_submatrix(support);
        Rng rng(split_seed(seed, gi));

        // probes on the rescaled sphere restricted to this support
        Eigen::MatrixXd probes(s, probe_count);
        for (std::size_t p = 0; p < probe_count; ++p) {
            Eigen::VectorXd g(s);
            for (int k = 0; k < s; ++k) g(k) = rng.gaussian();
            const double norm = std::sqrt(g.dot(a * g));
            probes.col(p) = g / norm;
        }

        std::vector<Eigen::VectorXd> centers;
        Eigen::VectorXd min_dist =
            Eigen::VectorXd::Constant(probe_count, std::numeric_limits<double>::infinity());
        // first center: the first probe
        std::size_t next = 0;
        for (;;) {
            if (centers.size() >= group_bound) {
                throw std::runtime_error("covering_net: greedy cover exceeded the (1+2/delta)^s "
                                         "size bound on support " +
                                         support_label(support));
            }
            const Eigen::VectorXd c = probes.col(next);
            centers.push_back(c);
            double worst = -1.0;
            for (std::size_t p = 0; p < probe_count; ++p) {
                const Eigen::VectorXd diff = probes.col(p) - c;
                const double dist = diff.dot(a * diff);
                if (dist < min_dist(p)) min_dist(p) = dist;
                if (min_dist(p) > worst) {
                    worst = min_dist(p);
                    next = p;
                }
            }
            if (worst <= delta_sq) break;
        }

        std::vector<Eigen::VectorXd>& group = net.groups[gi];
        group.reserve(centers.size());
        for (const Eigen::VectorXd& c : centers) {
            Eigen::VectorXd full = Eigen::VectorXd::Zero(d);
            for (int k = 0; k < s; ++k) full(support[k]) = c(k);
            group.push_back(std::move(full));
        }
    }
    return net;
}

double net_probe_coverage(const CoveringNet& net, const CovarianceModel& sigma,
                          std::size_t probes_per_support, std::uint64_t seed) {
    std::size_t covered = 0, total = 0;
    const double delta_sq = net.delta * net.delta;
    for (std::size_t gi = 0; gi < net.supports.size(); ++gi) {
        const std::vector<int>& support = net.supports[gi];
        const int s = static_cast<int>(support.size());
        const Eigen::MatrixXd a = sigma.inverse_submatrix(support);
        Rng rng(split_seed(seed ^ 0xA5A5A5A5ULL, gi));
        for (std::size_t p = 0; p < probes_per_support; ++p) {
            Eigen::VectorXd g(s);
            for (int k = 0; k < s; ++k) g(k) = rng.gaussian();
            g /= std::sqrt(g.dot(a * g));
            double best = std::numeric_limits<double>::infinity();
            for (const Eigen::VectorXd& c : net.groups[gi]) {
                Eigen::VectorXd cc(s);
                for (int k = 0; k < s; ++k) cc(k) = c(support[k]);
                const Eigen::VectorXd diff = g - cc;
                best = std::min(best, diff.dot(a * diff));
            }
            ++total;
            covered += (best <= delta_sq);
        }
    }
    return total ? static_cast<double>(covered) / total : 1.0;
}

namespace {

BoundedQuery make_net_query(const Eigen::VectorXd& v, const CovarianceModel& sigma, double R,
                            long n, int stage, double center, const std::string& id) {
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    BoundedQuery q;
    q.id = id;
    q.family = stage == 1 ? FamilyTag::GmmNetStage1 : FamilyTag::GmmNetStage2;
    q.params.direction = v;
    q.params.radius = radius;
    q.params.center = center;
    const Eigen::VectorXd w = sigma.apply_inverse(v);
    if (stage == 1) {
        q.bound = radius;
        q.eval = [w, radius](const Sample& x) {
            const double t = w.dot(x);
            return (std::abs(t) <= radius) ? t : 0.0;
        };
    } else {
        q.bound = 4.0 * R * R * std::log(static_cast<double>(n));
        q.eval = [w, radius, center](const Sample& x) {
            const double t = w.dot(x);
            if (std::abs(t) > radius) return 0.0;
            const double u = t - center;
            return u * u;
        };
    }
    return q;
}

}  // namespace

std::vector<BoundedQuery> net_stage1_queries(const CoveringNet& net, const CovarianceModel& sigma,
                                             double R, long n) {
    std::vector<BoundedQuery> out;
    const std::vector<Eigen::VectorXd> elems = net.flatten();
    out.reserve(elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i) {
        out.push_back(
            make_net_query(elems[i], sigma, R, n, 1, 0.0, "net1:" + std::to_string(i)));
    }
    return out;
}

std::vector<BoundedQuery> net_stage2_queries(const CoveringNet& net, const CovarianceModel& sigma,
                                             const std::vector<double>& stage1_responses, double R,
                                             long n) {
    const std::vector<Eigen::VectorXd> elems = net.flatten();
    if (stage1_responses.size() != elems.size()) {
        throw std::invalid_argument("net_stage2_queries: need one stage-1 response per element");
    }
    std::vector<BoundedQuery> out;
    out.reserve(elems.size());
    for (std::size_t i = 0; i < elems.size(); ++i) {
        out.push_back(make_net_query(elems[i], sigma, R, n, 2, stage1_responses[i],
                                     "net2:" + std::to_string(i)));
    }
    return out;
}

double net_statistic(QueryChannel& channel, const CoveringNet& net, const CovarianceModel& sigma,
                     double R, long n) {
    const std::vector<BoundedQuery> stage1 = net_stage1_queries(net, sigma, R, n);
    std::vector<double> responses;
    responses.reserve(stage1.size());
    for (const BoundedQuery& q : stage1) responses.push_back(channel.ask(q));
    const std::vector<BoundedQuery> stage2 = net_stage2_queries(net, sigma, responses, R, n);
    double best = -std::numeric_limits<double>::infinity();
    for (const BoundedQuery& q : stage2) best = std::max(best, channel.ask(q));
    return best;
}

int net_test(const Transcript& transcript, const TestSpec& spec, std::size_t net_size) {
    if (transcript.entries.size() != 2 * net_size) {
        throw std::invalid_argument("net_test: transcript does not cover both stages");
    }
    for (std::size_t i = 0; i < transcript.entries.size(); ++i) {
        const bool stage2 = transcript.entries[i].first.rfind("net2:", 0) == 0;
        if (stage2 != (i >= net_size)) {
            throw std::invalid_argument("net_test: stage ordering violation");
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = net_size; i < transcript.entries.size(); ++i) {
        best = std::max(best, transcript.entries[i].second);
    }
    return best >= spec.threshold() ? 1 : 0;
}

double net_diagonal_statistic(QueryChannel& channel, const CovarianceModel& sigma, double R,
                              long n) {
    const int d = sigma.dim();
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    // the direction whose whitened projection is x_j / sqrt(sigma_j):
    // v = Sigma e_j / sqrt(sigma_j), which has v' Sigma^{-1} v = 1
    auto direction = [&](int j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e(j) = 1.0;
        return (sigma.apply(e) / std::sqrt(sigma.diagonal_entry(j))).eval();
    };
    std::vector<double> responses(d);
    for (int j = 0; j < d; ++j) {
        BoundedQuery q;
        q.id = "netdiag1:" + std::to_string(j);
        q.family = FamilyTag::GmmNetStage1;
        q.bound = radius;
        q.params.direction = direction(j);
        q.params.radius = radius;
        const double inv_sqrt_sj = 1.0 / std::sqrt(sigma.diagonal_entry(j));
        q.eval = [j, inv_sqrt_sj, radius](const Sample& x) {
            const double t = x(j) * inv_sqrt_sj;
            return (std::abs(t) <= radius) ? t : 0.0;
        };
        responses[j] = channel.ask(q);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        BoundedQuery q;
        q.id = "netdiag2:" + std::to_string(j);
        q.family = FamilyTag::GmmNetStage2;
        q.bound = 4.0 * R * R * std::log(static_cast<double>(n));
        q.params.direction = direction(j);
        q.params.radius = radius;
        q.params.center = responses[j];
        const double inv_sqrt_sj = 1.0 / std::sqrt(sigma.diagonal_entry(j));
        const double center = responses[j];
        q.eval = [j, inv_sqrt_sj, radius, center](const Sample& x) {
            const double t = x(j) * inv_sqrt_sj;
            if (std::abs(t) > radius) return 0.0;
            const double u = t - center;
            return u * u;
        };
        best = std::max(best, channel.ask(q));
    }
    return best;
}

int net_diagonal_test(const Transcript& transcript, const TestSpec& spec) {
    if (transcript.entries.size() != 2 * static_cast<std::size_t>(spec.d)) {
        throw std::invalid_argument("net_diagonal_test: transcript does not cover both stages");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = spec.d; i < transcript.entries.size(); ++i) {
        best = std::max(best, transcript.entries[i].second);
    }
    return best >= spec.threshold() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Fast statistics
// ---------------------------------------------------------------------------

double gmm_exhaustive_statistic(const Eigen::MatrixXd& x, int s, double radius, int threads) {
    const int d = static_cast<int>(x.cols());
    const long n = x.rows();
    const std::vector<std::vector<int>> supports = all_combinations(d, s, default_enum_cap());
    const double inv_sqrt_s = 1.0 / std::sqrt(static_cast<double>(s));
    const double tcut = radius / inv_sqrt_s;  // cutoff on the unnormalized sum
    const double tcut_sq = tcut * tcut;
    const double inv_s = 1.0 / static_cast<double>(s);
    const long patterns = 1L << (s - 1);  // global sign flips leave the query invariant

    std::vector<double> per_support(supports.size());
    parallel_for(static_cast<long>(supports.size()), threads, [&](long gi) {
        const std::vector<int>& sup = supports[gi];
        Eigen::ArrayXd t = x.col(sup[0]).array();
        for (int k = 1; k < s; ++k) t += x.col(sup[k]).array();
        std::vector<int> signs(s, 1);

        double best = -std::numeric_limits<double>::infinity();
        long prev_gray = 0;
        for (long g = 0;; ++g) {
            // mean of the clipped normalized square at the current signs
            double acc = 0.0;
            const double* tp = t.data();
            for (long i = 0; i < n; ++i) {
                const double tt = tp[i] * tp[i];
                if (tt <= tcut_sq) acc += tt;
            }
            best = std::max(best, acc * inv_s / static_cast<double>(n));
            if (g + 1 >= patterns) break;
            const long gray = (g + 1) ^ ((g + 1) >> 1);
            const long changed = gray ^ prev_gray;
            prev_gray = gray;
            int bit = 0;
            while (!((changed >> bit) & 1)) ++bit;
            const int coord = bit + 1;  // coordinate 0 keeps a fixed sign
            signs[coord] = -signs[coord];
            t += (2.0 * signs[coord]) * x.col(sup[coord]).array();
        }
        per_support[gi] = best;
    });
    double best = -std::numeric_limits<double>::infinity();
    for (double v : per_support) best = std::max(best, v);
    return best;
}

double gmm_diagonal_statistic(const Eigen::MatrixXd& x, const CovarianceModel& sigma,
                              double radius) {
    const int d = static_cast<int>(x.cols());
    const long n = x.rows();
    const double r_sq = radius * radius;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        const double inv_sj = 1.0 / sigma.diagonal_entry(j);
        double acc = 0.0;
        const double* col = x.col(j).data();
        for (long i = 0; i < n; ++i) {
            const double u2 = col[i] * col[i] * inv_sj;
            if (u2 <= r_sq) acc += u2;
        }
        best = std::max(best, acc / static_cast<double>(n));
    }
    return best;
}

double max_truncation_bias(const GmmParams& null_instance, const GmmParams& alternative,
                           double R, long n) {
    const CovarianceModel& sigma = null_instance.sigma;
    const double radius = R * std::sqrt(std::log(static_cast<double>(n)));
    const double bound = R * R * std::log(static_cast<double>(n));

    std::vector<BoundedQuery> probes = diagonal_queries(sigma, R, n);
    if (!alternative.is_null()) {
        BoundedQuery matched;
        matched.id = "matched";
        matched.bound = bound;
        matched.family = FamilyTag::GmmExhaustive;
        matched.params.direction = alternative.delta_mu().cwiseSign();
        matched.params.radius = radius;
        probes.push_back(std::move(matched));
    }

    double worst = 0.0;
    for (const BoundedQuery& q : probes) {
        BoundedQuery core = q;
        core.params.radius = std::numeric_limits<double>::infinity();
        for (const GmmParams* inst : {&null_instance, &alternative}) {
            const double bias = std::abs(population_expectation(q, *inst).value -
                                         population_expectation(core, *inst).value);
            worst = std::max(worst, bias);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

double calibrate_threshold(const std::function<double(std::uint64_t)>& null_statistic, double xi,
                           int trials, std::uint64_t seed, int threads) {
    if (trials < 100) throw std::invalid_argument("calibrate_threshold: need trials >= 100");
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("calibrate_threshold: xi in (0,1)");
    std::vector<double> stats(trials);
    parallel_for(trials, threads, [&](long t) { stats[t] = null_statistic(split_seed(seed, t)); });
    std::sort(stats.begin(), stats.end());
    const int k = static_cast<int>(std::ceil((1.0 - xi) * trials));
    return stats[std::min(trials - 1, std::max(0, k - 1))];
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

std::function<int(QueryChannel&)> estimator_to_detector(SqEstimator estimator,
                                                        CovarianceModel sigma, double gamma_n) {
    return [estimator = std::move(estimator), sigma = std::move(sigma),
            gamma_n](QueryChannel& channel) {
        const Eigen::VectorXd dmu = estimator(channel);
        return sigma.quad_inverse(dmu) >= gamma_n / 3.0 ? 1 : 0;
    };
}

std::function<int(QueryChannel&)> support_to_detector(SupportSelector selector,
                                                      std::vector<int> reference_support) {
    std::sort(reference_support.begin(), reference_support.end());
    return [selector = std::move(selector),
            reference = std::move(reference_support)](QueryChannel& channel) {
        std::vector<int> selected = selector(channel);
        std::sort(selected.begin(), selected.end());
        return selected == reference ? 1 : 0;
    };
}

std::function<int(QueryChannel&)> clustering_to_detector(ClusterAssigner assigner,
                                                         Eigen::VectorXd v0, Eigen::VectorXd mu,
                                                         CovarianceModel sigma, double R, long n,
                                                         int d, double xi,
                                                         double threshold_constant) {
    const double logn = std::log(static_cast<double>(n));
    const double radius = R * std::sqrt(logn);
    const double threshold =
        threshold_constant * std::sqrt(logn * std::log(d / xi) / static_cast<double>(n));
    Eigen::VectorXd w = sigma.apply_inverse(v0);
    return [assigner = std::move(assigner), w = std::move(w), mu = std::move(mu), radius,
            threshold](QueryChannel& channel) {
        BoundedQuery q;
        q.id = "cluster-projection";
        q.bound = radius;
        q.family = FamilyTag::Custom;
        // capture by value: oracles may keep a copy of the query alive
        q.eval = [assigner, w, mu, radius](const Sample& x) {
            const double g = w.dot(x - mu);
            if (std::abs(g) > radius) return 0.0;
            return assigner(x) == 1 ? g : 0.0;
        };
        const double z = channel.ask(q);
        return std::abs(z) > threshold ? 1 : 0;
    };
}

}  // namespace sqlab
