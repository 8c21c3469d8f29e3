#include "sqlab/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sqlab/parallel.hpp"

namespace sqlab {

std::vector<SignSupportVector> DistinguishableSet::members() const {
    std::vector<SignSupportVector> all = c1;
    all.insert(all.end(), c2.begin(), c2.end());
    return all;
}

namespace {

// membership of one alternative in C(q), with the C1/C2 split
struct Membership {
    std::int8_t status = 0;  // 0 outside, 1 in C1, 2 in C2
    bool approximate = false;
};

template <typename Params>
Membership classify(const BoundedQuery& query, double e_null, bool e_null_exact,
                    const Params& alternative, const OracleConfig& config) {
    const Expectation ev = population_expectation(query, alternative);
    // clipped queries have |E| <= bound; clamp quadrature overshoot
    const double e_alt = std::clamp(ev.value, -query.bound, query.bound);
    const double tau = tolerance(config, query.bound, e_alt);
    const double gap = e_alt - e_null;
    Membership m;
    m.approximate = !ev.exact || !e_null_exact;
    if (std::abs(gap) >= tau) m.status = gap > tau ? 1 : 2;
    return m;
}

template <typename Params>
DistinguishableSet distinguishable_set_impl(const BoundedQuery& query,
                                            const std::vector<SignSupportVector>& family,
                                            const Params& null_instance,
                                            const AlternativeFactory<Params>& alternative,
                                            const OracleConfig& config, int threads) {
    const Expectation e0 = population_expectation(query, null_instance);
    const double e_null = std::clamp(e0.value, -query.bound, query.bound);

    std::vector<Membership> marks(family.size());
    parallel_for(static_cast<long>(family.size()), threads, [&](long i) {
        marks[i] = classify(query, e_null, e0.exact, alternative(family[i]), config);
    });

    DistinguishableSet out;
    out.query_id = query.id;
    for (std::size_t i = 0; i < family.size(); ++i) {
        out.approximate = out.approximate || marks[i].approximate;
        if (marks[i].status == 1) out.c1.push_back(family[i]);
        else if (marks[i].status == 2) out.c2.push_back(family[i]);
    }
    return out;
}

// captures the queries an algorithm issues while delegating responses
class RecordingOracle : public Oracle {
public:
    explicit RecordingOracle(const Oracle& inner) : inner_(inner) {}
    double respond(const BoundedQuery& query) const override {
        log_.push_back(query);
        return inner_.respond(query);
    }
    const std::vector<BoundedQuery>& log() const { return log_; }

private:
    const Oracle& inner_;
    mutable std::vector<BoundedQuery> log_;
};

template <typename Params>
CoverageCertificate coverage_certificate_impl(const Algorithm& algorithm,
                                              const std::vector<SignSupportVector>& family,
                                              const Params& null_instance,
                                              const AlternativeFactory<Params>& alternative,
                                              const OracleConfig& config, int threads) {
    CoverageCertificate cert;
    cert.gs_size = family.size();

    AdversarialOracle<Params> null_oracle(null_instance, std::nullopt, config);
    RecordingOracle recorder(null_oracle);
    const Transcript null_transcript = run_algorithm(algorithm, recorder, config);

    std::vector<std::uint8_t> covered(family.size(), 0);
    std::vector<std::uint8_t> approx_flags(family.size(), 0);
    for (const BoundedQuery& query : recorder.log()) {
        cert.queries.push_back(query.id);
        const Expectation e0 = population_expectation(query, null_instance);
        const double e_null = std::clamp(e0.value, -query.bound, query.bound);
        parallel_for(static_cast<long>(family.size()), threads, [&](long i) {
            const Membership m = classify(query, e_null, e0.exact, alternative(family[i]), config);
            if (m.status != 0) covered[i] = 1;
            if (m.approximate) approx_flags[i] = 1;
        });
        cert.approximate = cert.approximate || !e0.exact;
    }
    for (std::size_t i = 0; i < family.size(); ++i) {
        cert.union_size += covered[i];
        cert.approximate = cert.approximate || approx_flags[i];
    }

    if (cert.union_size < family.size()) {
        // lexicographically first uncovered alternative
        const SignSupportVector* best = nullptr;
        for (std::size_t i = 0; i < family.size(); ++i) {
            if (covered[i]) continue;
            if (best == nullptr || family[i].lex_less(*best)) best = &family[i];
        }
        cert.witness = *best;
        AdversarialOracle<Params> alt_oracle(null_instance, alternative(*cert.witness), config);
        const Transcript alt_transcript = run_algorithm(algorithm, alt_oracle, config);
        cert.transcripts_identical = (null_transcript == alt_transcript);
    }
    return cert;
}

}  // namespace

DistinguishableSet distinguishable_set(const BoundedQuery& query,
                                       const std::vector<SignSupportVector>& family,
                                       const GmmParams& null_instance,
                                       const AlternativeFactory<GmmParams>& alternative,
                                       const OracleConfig& config, int threads) {
    return distinguishable_set_impl(query, family, null_instance, alternative, config, threads);
}

DistinguishableSet distinguishable_set(const BoundedQuery& query,
                                       const std::vector<SignSupportVector>& family,
                                       const RegParams& null_instance,
                                       const AlternativeFactory<RegParams>& alternative,
                                       const OracleConfig& config, int threads) {
    return distinguishable_set_impl(query, family, null_instance, alternative, config, threads);
}

CoverageCertificate coverage_certificate(const Algorithm& algorithm,
                                         const std::vector<SignSupportVector>& family,
                                         const GmmParams& null_instance,
                                         const AlternativeFactory<GmmParams>& alternative,
                                         const OracleConfig& config, int threads) {
    return coverage_certificate_impl(algorithm, family, null_instance, alternative, config,
                                     threads);
}

CoverageCertificate coverage_certificate(const Algorithm& algorithm,
                                         const std::vector<SignSupportVector>& family,
                                         const RegParams& null_instance,
                                         const AlternativeFactory<RegParams>& alternative,
                                         const OracleConfig& config, int threads) {
    return coverage_certificate_impl(algorithm, family, null_instance, alternative, config,
                                     threads);
}

std::string CoverageCertificate::to_json() const {
    nlohmann::json j;
    j["queries"] = queries;
    j["union_size"] = union_size;
    j["gs_size"] = gs_size;
    if (witness.has_value()) {
        nlohmann::json w;
        w["d"] = witness->d;
        w["support"] = witness->support;
        std::vector<int> signs(witness->signs.begin(), witness->signs.end());
        w["signs"] = signs;
        w["label"] = witness->label();
        j["witness"] = w;
    } else {
        j["witness"] = nullptr;
    }
    j["transcripts_identical"] = transcripts_identical;
    j["approximate"] = approximate;
    return j.dump(2);
}

}  // namespace sqlab
