#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqlab/sq_core.hpp"

namespace sqlab {

// ---------------------------------------------------------------------------
// Covariance
// ---------------------------------------------------------------------------

enum class CovarianceKind { Identity, Diagonal, Dense };

// SPD covariance with a structural tag. Dense matrices are supported up to
// d = 64 and keep an explicit Cholesky factor and inverse; identity and
// diagonal support any dimension.
class CovarianceModel {
public:
    CovarianceModel() = default;  // empty; assign a factory result before use
    static CovarianceModel identity(int d);
    static CovarianceModel diagonal(Eigen::VectorXd diag);
    static CovarianceModel dense(Eigen::MatrixXd sigma);

    CovarianceKind kind() const { return kind_; }
    int dim() const { return d_; }

    double diagonal_entry(int j) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;          // Sigma v
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;  // Sigma^{-1} v
    double quad_inverse(const Eigen::VectorXd& v) const;            // v' Sigma^{-1} v
    // (Sigma^{-1})_{S,S} for a support index set S
    Eigen::MatrixXd inverse_submatrix(const std::vector<int>& support) const;
    // L g for Sigma = L L', used by the samplers
    Eigen::VectorXd transform(const Eigen::VectorXd& g) const;

    double min_eigenvalue() const { return lambda_min_; }
    double max_eigenvalue() const { return lambda_max_; }

private:
    CovarianceKind kind_ = CovarianceKind::Identity;
    int d_ = 0;
    Eigen::VectorXd diag_;      // diagonal entries (all kinds)
    Eigen::MatrixXd dense_;     // dense only
    Eigen::MatrixXd chol_;      // lower Cholesky factor, dense only
    Eigen::MatrixXd inverse_;   // dense only
    double lambda_min_ = 1.0;
    double lambda_max_ = 1.0;
};

// ---------------------------------------------------------------------------
// Sign-support vectors
// ---------------------------------------------------------------------------

// An element of {-1,0,1}^d with exactly s nonzero entries, stored sparsely.
struct SignSupportVector {
    int d = 0;
    std::vector<int> support;       // ascending indices
    std::vector<std::int8_t> signs; // parallel to support, each +1/-1

    int sparsity() const { return static_cast<int>(support.size()); }
    Eigen::VectorXd to_vector() const;
    int entry(int j) const;
    // <v, w>
    int dot(const SignSupportVector& w) const;
    // lexicographic order on the dense entries with -1 < 0 < 1
    bool lex_less(const SignSupportVector& w) const;
    bool operator==(const SignSupportVector& w) const {
        return d == w.d && support == w.support && signs == w.signs;
    }
    std::string label() const;  // e.g. "+0-3+6"

    static SignSupportVector from_vector(const Eigen::VectorXd& v);
};

std::size_t sign_support_count(int d, int s);  // 2^s * C(d,s), overflow-checked

// Enumeration cap; the SQLAB_ENUM_CAP environment variable overrides the
// default of 10^6.
std::size_t default_enum_cap();

// All of {-1,0,1}^d with s nonzeros, in lexicographic order (-1 < 0 < 1).
std::vector<SignSupportVector> enumerate_sign_supports(
    int d, int s, std::size_t cap = default_enum_cap());

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

// Two-component Gaussian mixture nu N(mu1, Sigma) + (1-nu) N(mu2, Sigma).
// Null instances have mu1 = mu2.
struct GmmParams {
    double nu = 0.5;
    Eigen::VectorXd mu1;
    Eigen::VectorXd mu2;
    CovarianceModel sigma;

    int dim() const { return sigma.dim(); }
    Eigen::VectorXd delta_mu() const { return mu2 - mu1; }
    int sparsity() const;
    bool is_null() const { return mu1 == mu2; }
    void validate() const;

    static GmmParams null_instance(CovarianceModel sigma,
                                   std::optional<Eigen::VectorXd> mu = std::nullopt);
    // The symmetric hard instance mu1 = -beta (1-nu) v, mu2 = beta nu v.
    static GmmParams two_point(const SignSupportVector& v, double beta, double nu,
                               CovarianceModel sigma);
};

// Symmetric mixture of regressions y = eta * beta v'x + eps with x ~ N(0, I),
// eta Rademacher, eps ~ N(0, sigma^2). The matched null draws y ~ N(0,
// sigma0^2) independent of x with sigma0^2 = sigma^2 + s beta^2, so the
// marginal law of y is the same under both hypotheses.
struct RegParams {
    int d = 0;
    int s = 0;
    double beta = 0.0;
    SignSupportVector direction;  // empty for null instances
    double sigma = 1.0;
    bool null = false;

    double sigma0_sq() const { return sigma * sigma + s * beta * beta; }
    void validate() const;

    static RegParams alternative(const SignSupportVector& v, double beta, double sigma);
    static RegParams matched_null(int d, int s, double beta, double sigma);
};

enum class SignalKind { GmmKnownCov, GmmUnknownCov, Regression };

struct SignalStrength {
    double value = 0.0;
    SignalKind kind = SignalKind::GmmKnownCov;
};

SignalStrength signal_strength_known_cov(const GmmParams& params);
SignalStrength signal_strength_unknown_cov(const GmmParams& params);
SignalStrength signal_strength(const RegParams& params);

// ---------------------------------------------------------------------------
// Samplers (row-per-sample matrices; regression rows are [y, x'])
// ---------------------------------------------------------------------------

Eigen::MatrixXd sample_gmm(const GmmParams& params, long n, std::uint64_t seed);
Eigen::MatrixXd sample_reg(const RegParams& params, long n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Population expectations
// ---------------------------------------------------------------------------

struct Expectation {
    double value = 0.0;
    double std_error = 0.0;  // zero unless estimated by Monte Carlo
    bool exact = true;
};

struct McOptions {
    long samples = 1'000'000;
    std::uint64_t seed = 0;
};

// E[q(X)] under the instance. Registered families are evaluated analytically
// (closed-form untruncated cores; truncation corrections by one-dimensional
// adaptive quadrature to absolute accuracy 1e-10). Custom queries fall back to
// Monte Carlo and report a standard error.
Expectation population_expectation(const BoundedQuery& query, const GmmParams& instance,
                                   const McOptions& mc = {});
Expectation population_expectation(const BoundedQuery& query, const RegParams& instance,
                                   const McOptions& mc = {});

}  // namespace sqlab
