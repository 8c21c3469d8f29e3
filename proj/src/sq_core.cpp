#include "sqlab/sq_core.hpp"

#include <cmath>

namespace sqlab {

const char* family_name(FamilyTag tag) {
    switch (tag) {
        case FamilyTag::GmmExhaustive: return "gmm-exhaustive";
        case FamilyTag::GmmDiagonal: return "gmm-diagonal";
        case FamilyTag::GmmNetStage1: return "gmm-net-stage1";
        case FamilyTag::GmmNetStage2: return "gmm-net-stage2";
        case FamilyTag::RegExhaustive: return "reg-exhaustive";
        case FamilyTag::RegCoordinate: return "reg-coordinate";
        case FamilyTag::SqGradient: return "sq-gradient";
        case FamilyTag::Custom: return "custom";
    }
    return "unknown";
}

void OracleConfig::validate() const {
    // xi = 0 would promise a fixed-tolerance oracle that no sample average can
    // implement, so it is rejected at construction.
    if (!(xi > 0.0 && xi < 1.0)) {
        throw std::invalid_argument("OracleConfig: xi must lie in (0,1)");
    }
    if (n < 1) throw std::invalid_argument("OracleConfig: n must be positive");
    if (budget < 1) throw std::invalid_argument("OracleConfig: budget must be positive");
    if (!(capacity >= 0.0)) throw std::invalid_argument("OracleConfig: capacity must be >= 0");
}

double tolerance(const OracleConfig& config, double bound, double expectation) {
    config.validate();
    if (!(bound > 0.0)) throw std::invalid_argument("tolerance: bound must be positive");
    if (std::abs(expectation) > bound) {
        throw std::domain_error("tolerance: |expectation| exceeds the query bound");
    }
    const double kappa = config.capacity + std::log(1.0 / config.xi);
    const double n = static_cast<double>(config.n);
    const double term1 = kappa * bound / n;
    const double variance_bound = bound * bound - expectation * expectation;
    const double term2 = std::sqrt(2.0 * kappa * variance_bound / n);
    return std::max(term1, term2);
}

double finite_capacity(std::size_t class_size) {
    if (class_size == 0) throw std::domain_error("finite_capacity: empty query class");
    return std::log(static_cast<double>(class_size));
}

Transcript run_algorithm(const Algorithm& algorithm, const Oracle& oracle,
                         const OracleConfig& config) {
    QueryChannel channel(oracle, config);
    algorithm(channel);
    return channel.transcript();
}

}  // namespace sqlab
