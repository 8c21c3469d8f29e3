#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sqlab {

// A sample point. Gaussian-mixture samples are d-vectors; regression samples
// are (d+1)-vectors with the response stacked first: sample(0) = y,
// sample.tail(d) = x.
using Sample = Eigen::VectorXd;

enum class FamilyTag {
    GmmExhaustive,
    GmmDiagonal,
    GmmNetStage1,
    GmmNetStage2,
    RegExhaustive,
    RegCoordinate,
    SqGradient,
    Custom,
};

const char* family_name(FamilyTag tag);

// Analytic parameters of a registered query, used by the population
// expectation engine. Which fields are meaningful depends on the family.
struct QueryParams {
    Eigen::VectorXd direction;  // v for sign-support and net queries
    int coordinate = -1;        // j for diagonal / coordinate families
    double radius = std::numeric_limits<double>::infinity();    // |standardized x-part| cutoff
    double y_radius = std::numeric_limits<double>::infinity();  // |y| cutoff (regression)
    double center = 0.0;        // subtracted first-stage response (net stage 2)
};

// A named bounded real-valued function on the sample space. Evaluation clips
// to [-bound, bound]; in strict mode an out-of-bound raw value is an error.
struct BoundedQuery {
    std::string id;
    double bound = 0.0;
    FamilyTag family = FamilyTag::Custom;
    QueryParams params;
    std::function<double(const Sample&)> eval;

    double evaluate(const Sample& x, bool strict = false) const {
        const double raw = eval(x);
        if (raw > bound || raw < -bound) {
            if (strict) {
                throw std::domain_error("BoundedQuery: |" + id + "| exceeded bound " +
                                        std::to_string(bound));
            }
            return raw > bound ? bound : -bound;
        }
        return raw;
    }
};

// The tuple (xi, n, T, eta(Q)) governing oracle responses.
struct OracleConfig {
    double xi = 0.05;       // tail probability, strictly inside (0,1)
    long n = 1;             // sample size
    long budget = 1;        // query budget T
    double capacity = 0.0;  // eta(Q) >= 0

    OracleConfig() = default;
    OracleConfig(double xi_, long n_, long budget_, double capacity_)
        : xi(xi_), n(n_), budget(budget_), capacity(capacity_) {
        validate();
    }
    void validate() const;
};

// tau_q: max{ (eta + log(1/xi)) M / n , sqrt( 2 (eta + log(1/xi)) (M^2 - E^2) / n ) }.
double tolerance(const OracleConfig& config, double bound, double expectation);

// eta(Q) = log |Q| for a finite query class.
double finite_capacity(std::size_t class_size);

// Ordered (query id, response) log; the only information a test may use.
struct Transcript {
    std::vector<std::pair<std::string, double>> entries;

    std::size_t budget_used() const { return entries.size(); }
    bool operator==(const Transcript& other) const { return entries == other.entries; }
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual double respond(const BoundedQuery& query) const = 0;
};

class BudgetExhausted : public std::runtime_error {
public:
    explicit BudgetExhausted(long budget)
        : std::runtime_error("query budget exhausted at T = " + std::to_string(budget)) {}
};

// Hands queries to an oracle one at a time, enforcing the budget and logging
// the transcript. Confined to a single algorithm run.
class QueryChannel {
public:
    QueryChannel(const Oracle& oracle, const OracleConfig& config)
        : oracle_(oracle), config_(config) {}

    double ask(const BoundedQuery& query) {
        if (static_cast<long>(transcript_.entries.size()) >= config_.budget) {
            throw BudgetExhausted(config_.budget);
        }
        const double response = oracle_.respond(query);
        transcript_.entries.emplace_back(query.id, response);
        return response;
    }

    const Transcript& transcript() const { return transcript_; }
    const OracleConfig& config() const { return config_; }

private:
    const Oracle& oracle_;
    OracleConfig config_;
    Transcript transcript_;
};

using Algorithm = std::function<void(QueryChannel&)>;

// Runs the algorithm against the oracle under the budget in `config` and
// returns the transcript. Budget exhaustion propagates as BudgetExhausted.
Transcript run_algorithm(const Algorithm& algorithm, const Oracle& oracle,
                         const OracleConfig& config);

}  // namespace sqlab
