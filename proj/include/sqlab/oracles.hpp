#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sqlab/models.hpp"
#include "sqlab/rng.hpp"
#include "sqlab/sq_core.hpp"

namespace sqlab {

// ---------------------------------------------------------------------------
// Concrete oracles
// ---------------------------------------------------------------------------

// Answers every query with the sample mean of the (clipped) query over a
// fixed dataset.
class HonestOracle : public Oracle {
public:
    explicit HonestOracle(Eigen::MatrixXd data, bool strict = false)
        : data_(std::move(data)), strict_(strict) {
        if (data_.rows() == 0) throw std::invalid_argument("HonestOracle: empty dataset");
    }

    double respond(const BoundedQuery& query) const override {
        double acc = 0.0;
        for (long i = 0; i < data_.rows(); ++i) {
            acc += query.evaluate(data_.row(i).transpose(), strict_);
        }
        return acc / static_cast<double>(data_.rows());
    }

    const Eigen::MatrixXd& data() const { return data_; }

private:
    Eigen::MatrixXd data_;
    bool strict_;
};

// Answers E[q] plus a deterministic perturbation bounded by the tolerance,
// derived from (seed, query id); a valid oracle with probability one.
template <typename Params>
class PerturbedPopulationOracle : public Oracle {
public:
    PerturbedPopulationOracle(Params instance, OracleConfig config, std::uint64_t seed,
                              double fraction = 0.5)
        : instance_(std::move(instance)), config_(config), seed_(seed), fraction_(fraction) {}

    double respond(const BoundedQuery& query) const override {
        const Expectation e = population_expectation(query, instance_);
        const double tau = tolerance(config_, query.bound, e.value);
        std::uint64_t h = seed_;
        for (char c : query.id) h = splitmix64(h) ^ static_cast<std::uint64_t>(c);
        Rng rng(splitmix64(h));
        return e.value + fraction_ * tau * rng.uniform(-1.0, 1.0);
    }

private:
    Params instance_;
    OracleConfig config_;
    std::uint64_t seed_;
    double fraction_;
};

// The lower-bound oracle: under the null it answers the null expectation;
// under an alternative it answers the null expectation whenever that response
// is within the tolerance of the true expectation, and the true expectation
// otherwise. Deterministic, stateless, and valid for every instance.
template <typename Params>
class AdversarialOracle : public Oracle {
public:
    AdversarialOracle(Params null_instance, std::optional<Params> true_instance,
                      OracleConfig config, McOptions mc = {})
        : null_(std::move(null_instance)), true_(std::move(true_instance)), config_(config),
          mc_(mc) {}

    double respond(const BoundedQuery& query) const override {
        const Expectation e0 = population_expectation(query, null_, mc_);
        if (!true_.has_value()) return e0.value;
        const Expectation ev = population_expectation(query, *true_, mc_);
        const double tau = tolerance(config_, query.bound, ev.value);
        return std::abs(e0.value - ev.value) <= tau ? e0.value : ev.value;
    }

private:
    Params null_;
    std::optional<Params> true_;
    OracleConfig config_;
    McOptions mc_;
};

// ---------------------------------------------------------------------------
// Distinguishable sets and coverage certificates
// ---------------------------------------------------------------------------

// Alternatives whose population mean under the query deviates from the null
// mean by at least the tolerance. c1 holds the positive deviations, c2 the
// rest; together they partition the set.
struct DistinguishableSet {
    std::string query_id;
    std::vector<SignSupportVector> c1;
    std::vector<SignSupportVector> c2;

    std::size_t size() const { return c1.size() + c2.size(); }
    std::vector<SignSupportVector> members() const;
    bool approximate = false;  // true iff any expectation came from Monte Carlo
};

template <typename Params>
using AlternativeFactory = std::function<Params(const SignSupportVector&)>;

DistinguishableSet distinguishable_set(const BoundedQuery& query,
                                       const std::vector<SignSupportVector>& family,
                                       const GmmParams& null_instance,
                                       const AlternativeFactory<GmmParams>& alternative,
                                       const OracleConfig& config, int threads = 1);
DistinguishableSet distinguishable_set(const BoundedQuery& query,
                                       const std::vector<SignSupportVector>& family,
                                       const RegParams& null_instance,
                                       const AlternativeFactory<RegParams>& alternative,
                                       const OracleConfig& config, int threads = 1);

struct CoverageCertificate {
    std::vector<std::string> queries;     // realized query ids, in issue order
    std::size_t union_size = 0;           // | union_t C(q_t) |
    std::size_t gs_size = 0;              // | G(s) |
    std::optional<SignSupportVector> witness;  // lexicographically first uncovered v
    bool transcripts_identical = false;
    bool approximate = false;

    std::string to_json() const;
};

// Realizes the algorithm's queries against the null-instance adversarial
// oracle, takes the union of their distinguishable sets over the family,
// reports the first uncovered alternative if one exists, and replays the
// algorithm under that alternative to check transcript equality.
CoverageCertificate coverage_certificate(const Algorithm& algorithm,
                                         const std::vector<SignSupportVector>& family,
                                         const GmmParams& null_instance,
                                         const AlternativeFactory<GmmParams>& alternative,
                                         const OracleConfig& config, int threads = 1);
CoverageCertificate coverage_certificate(const Algorithm& algorithm,
                                         const std::vector<SignSupportVector>& family,
                                         const RegParams& null_instance,
                                         const AlternativeFactory<RegParams>& alternative,
                                         const OracleConfig& config, int threads = 1);

}  // namespace sqlab
