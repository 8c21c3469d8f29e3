#include "sqlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "sqlab/gaussian.hpp"
#include "sqlab/quadrature.hpp"
#include "sqlab/rng.hpp"

namespace sqlab {

namespace {
constexpr double kLambdaFloor = 1e-8;
constexpr double kLambdaCeil = 1e8;
constexpr double kQuadTol = 1e-10;
constexpr int kDenseDimCap = 64;
}  // namespace

// ---------------------------------------------------------------------------
// CovarianceModel
// ---------------------------------------------------------------------------

CovarianceModel CovarianceModel::identity(int d) {
    if (d < 1) throw std::invalid_argument("CovarianceModel: dimension must be positive");
    CovarianceModel m;
    m.kind_ = CovarianceKind::Identity;
    m.d_ = d;
    m.diag_ = Eigen::VectorXd::Ones(d);
    return m;
}

CovarianceModel CovarianceModel::diagonal(Eigen::VectorXd diag) {
    if (diag.size() < 1) throw std::invalid_argument("CovarianceModel: empty diagonal");
    CovarianceModel m;
    m.kind_ = CovarianceKind::Diagonal;
    m.d_ = static_cast<int>(diag.size());
    m.lambda_min_ = diag.minCoeff();
    m.lambda_max_ = diag.maxCoeff();
    if (m.lambda_min_ < kLambdaFloor || m.lambda_max_ > kLambdaCeil) {
        throw std::invalid_argument("CovarianceModel: diagonal entries outside eigenvalue bounds");
    }
    m.diag_ = std::move(diag);
    return m;
}

CovarianceModel CovarianceModel::dense(Eigen::MatrixXd sigma) {
    const int d = static_cast<int>(sigma.rows());
    if (d < 1 || sigma.cols() != d) throw std::invalid_argument("CovarianceModel: non-square");
    if (d > kDenseDimCap) {
        throw std::invalid_argument("CovarianceModel: dense covariance supported only for d <= 64");
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-12)) {
        throw std::invalid_argument("CovarianceModel: covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lmin < kLambdaFloor || lmax > kLambdaCeil) {
        throw std::invalid_argument("CovarianceModel: eigenvalues outside SPD bounds");
    }
    CovarianceModel m;
    m.kind_ = CovarianceKind::Dense;
    m.d_ = d;
    m.diag_ = sigma.diagonal();
    m.chol_ = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
    m.inverse_ = sigma.inverse();
    m.dense_ = std::move(sigma);
    m.lambda_min_ = lmin;
    m.lambda_max_ = lmax;
    return m;
}

double CovarianceModel::diagonal_entry(int j) const {
    if (j < 0 || j >= d_) throw std::out_of_range("CovarianceModel: index");
    return diag_(j);
}

Eigen::VectorXd CovarianceModel::apply(const Eigen::VectorXd& v) const {
    if (v.size() != d_) throw std::invalid_argument("CovarianceModel: dimension mismatch");
    switch (kind_) {
        case CovarianceKind::Identity: return v;
        case CovarianceKind::Diagonal: return v.cwiseProduct(diag_);
        case CovarianceKind::Dense: return dense_ * v;
    }
    return v;
}

Eigen::VectorXd CovarianceModel::apply_inverse(const Eigen::VectorXd& v) const {
    if (v.size() != d_) throw std::invalid_argument("CovarianceModel: dimension mismatch");
    switch (kind_) {
        case CovarianceKind::Identity: return v;
        case CovarianceKind::Diagonal: return v.cwiseQuotient(diag_);
        case CovarianceKind::Dense: return inverse_ * v;
    }
    return v;
}

double CovarianceModel::quad_inverse(const Eigen::VectorXd& v) const {
    return v.dot(apply_inverse(v));
}

Eigen::MatrixXd CovarianceModel::inverse_submatrix(const std::vector<int>& support) const {
    const int s = static_cast<int>(support.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s, s);
    for (int a = 0; a < s; ++a) {
        if (support[a] < 0 || support[a] >= d_) throw std::out_of_range("inverse_submatrix");
        for (int b = 0; b < s; ++b) {
            switch (kind_) {
                case CovarianceKind::Identity: out(a, b) = (a == b) ? 1.0 : 0.0; break;
                case CovarianceKind::Diagonal:
                    out(a, b) = (a == b) ? 1.0 / diag_(support[a]) : 0.0;
                    break;
                case CovarianceKind::Dense: out(a, b) = inverse_(support[a], support[b]); break;
            }
        }
    }
    return out;
}

Eigen::VectorXd CovarianceModel::transform(const Eigen::VectorXd& g) const {
    if (g.size() != d_) throw std::invalid_argument("CovarianceModel: dimension mismatch");
    switch (kind_) {
        case CovarianceKind::Identity: return g;
        case CovarianceKind::Diagonal: return diag_.cwiseSqrt().cwiseProduct(g);
        case CovarianceKind::Dense: return chol_ * g;
    }
    return g;
}

// ---------------------------------------------------------------------------
// SignSupportVector
// ---------------------------------------------------------------------------

Eigen::VectorXd SignSupportVector::to_vector() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < support.size(); ++i) v(support[i]) = signs[i];
    return v;
}

int SignSupportVector::entry(int j) const {
    auto it = std::lower_bound(support.begin(), support.end(), j);
    if (it == support.end() || *it != j) return 0;
    return signs[static_cast<std::size_t>(it - support.begin())];
}

int SignSupportVector::dot(const SignSupportVector& w) const {
    int acc = 0;
    std::size_t i = 0, k = 0;
    while (i < support.size() && k < w.support.size()) {
        if (support[i] < w.support[k]) {
            ++i;
        } else if (support[i] > w.support[k]) {
            ++k;
        } else {
            acc += static_cast<int>(signs[i]) * static_cast<int>(w.signs[k]);
            ++i;
            ++k;
        }
    }
    return acc;
}

bool SignSupportVector::lex_less(const SignSupportVector& w) const {
    for (int j = 0; j < d; ++j) {
        const int a = entry(j), b = w.entry(j);
        if (a != b) return a < b;
    }
    return false;
}

std::string SignSupportVector::label() const {
    std::string out;
    for (std::size_t i = 0; i < support.size(); ++i) {
        out += (signs[i] > 0 ? '+' : '-');
        out += std::to_string(support[i]);
    }
    return out.empty() ? std::string("0") : out;
}

SignSupportVector SignSupportVector::from_vector(const Eigen::VectorXd& v) {
    SignSupportVector out;
    out.d = static_cast<int>(v.size());
    for (int j = 0; j < out.d; ++j) {
        if (v(j) == 0.0) continue;
        if (v(j) != 1.0 && v(j) != -1.0) {
            throw std::invalid_argument("SignSupportVector: entries must be in {-1,0,1}");
        }
        out.support.push_back(j);
        out.signs.push_back(static_cast<std::int8_t>(v(j) > 0 ? 1 : -1));
    }
    return out;
}

std::size_t sign_support_count(int d, int s) {
    if (s < 0 || d < 0 || s > d) throw std::invalid_argument("sign_support_count: need 0 <= s <= d");
    unsigned long long count = 1;
    for (int i = 0; i < s; ++i) {
        unsigned __int128 next = static_cast<unsigned __int128>(count) * (d - i);
        next /= (i + 1);
        // multiply by 2 for the sign of this coordinate
        next *= 2;
        if (next > ~0ULL) throw std::overflow_error("sign_support_count: overflow");
        count = static_cast<unsigned long long>(next);
    }
    // the loop above computed prod 2(d-i)/(i+1); binomial times 2^s is exact
    // because each partial binomial prefix is an integer
    return static_cast<std::size_t>(count);
}

std::size_t default_enum_cap() {
    static const std::size_t cap = [] {
        if (const char* env = std::getenv("SQLAB_ENUM_CAP")) {
            const long long parsed = std::atoll(env);
            if (parsed > 0) return static_cast<std::size_t>(parsed);
        }
        return static_cast<std::size_t>(1'000'000);
    }();
    return cap;
}

namespace {

void enumerate_rec(int d, int pos, int remaining, SignSupportVector& buf,
                   std::vector<SignSupportVector>& out) {
    if (remaining == 0) {
        out.push_back(buf);
        return;
    }
    if (d - pos < remaining) return;
    // branch in entry order -1 < 0 < +1 so output is lexicographic
    buf.support.push_back(pos);
    buf.signs.push_back(-1);
    enumerate_rec(d, pos + 1, remaining - 1, buf, out);
    buf.support.pop_back();
    buf.signs.pop_back();

    enumerate_rec(d, pos + 1, remaining, buf, out);

    buf.support.push_back(pos);
    buf.signs.push_back(1);
    enumerate_rec(d, pos + 1, remaining - 1, buf, out);
    buf.support.pop_back();
    buf.signs.pop_back();
}

}  // namespace

std::vector<SignSupportVector> enumerate_sign_supports(int d, int s, std::size_t cap) {
    if (s < 1 || s > d) throw std::invalid_argument("enumerate_sign_supports: need 1 <= s <= d");
    const std::size_t total = sign_support_count(d, s);
    if (total > cap) {
        throw std::length_error("enumerate_sign_supports: family size " + std::to_string(total) +
                                " exceeds cap " + std::to_string(cap));
    }
    std::vector<SignSupportVector> out;
    out.reserve(total);
    SignSupportVector buf;
    buf.d = d;
    enumerate_rec(d, 0, s, buf, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

int GmmParams::sparsity() const {
    const Eigen::VectorXd dm = delta_mu();
    int s = 0;
    for (int j = 0; j < dm.size(); ++j) s += (dm(j) != 0.0);
    return s;
}

void GmmParams::validate() const {
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("GmmParams: nu must lie in (0,1)");
    if (mu1.size() != dim() || mu2.size() != dim()) {
        throw std::invalid_argument("GmmParams: mean dimension mismatch");
    }
}

GmmParams GmmParams::null_instance(CovarianceModel sigma, std::optional<Eigen::VectorXd> mu) {
    GmmParams p;
    const int d = sigma.dim();
    p.sigma = std::move(sigma);
    p.mu1 = mu.value_or(Eigen::VectorXd::Zero(d));
    p.mu2 = p.mu1;
    p.validate();
    return p;
}

GmmParams GmmParams::two_point(const SignSupportVector& v, double beta, double nu,
                               CovarianceModel sigma) {
    if (beta < 0.0) throw std::invalid_argument("GmmParams: beta must be nonnegative");
    if (v.d != sigma.dim()) throw std::invalid_argument("GmmParams: direction dimension mismatch");
    GmmParams p;
    p.nu = nu;
    const Eigen::VectorXd vv = v.to_vector();
    p.mu1 = -beta * (1.0 - nu) * vv;
    p.mu2 = beta * nu * vv;
    p.sigma = std::move(sigma);
    p.validate();
    return p;
}

void RegParams::validate() const {
    if (d < 1 || s < 0 || s > d) throw std::invalid_argument("RegParams: bad dimensions");
    if (!(sigma > 0.0)) throw std::invalid_argument("RegParams: sigma must be positive");
    if (beta < 0.0) throw std::invalid_argument("RegParams: beta must be nonnegative");
    if (!null && direction.sparsity() != s) {
        throw std::invalid_argument("RegParams: direction sparsity mismatch");
    }
}

RegParams RegParams::alternative(const SignSupportVector& v, double beta, double sigma) {
    RegParams p;
    p.d = v.d;
    p.s = v.sparsity();
    p.beta = beta;
    p.direction = v;
    p.sigma = sigma;
    p.null = false;
    p.validate();
    return p;
}

RegParams RegParams::matched_null(int d, int s, double beta, double sigma) {
    RegParams p;
    p.d = d;
    p.s = s;
    p.beta = beta;
    p.sigma = sigma;
    p.null = true;
    p.validate();
    return p;
}

SignalStrength signal_strength_known_cov(const GmmParams& params) {
    const Eigen::VectorXd dm = params.delta_mu();
    return {params.sigma.quad_inverse(dm), SignalKind::GmmKnownCov};
}

SignalStrength signal_strength_unknown_cov(const GmmParams& params) {
    const Eigen::VectorXd dm = params.delta_mu();
    const double num = std::pow(dm.squaredNorm(), 2);
    if (num == 0.0) return {0.0, SignalKind::GmmUnknownCov};
    const double denom = dm.dot(params.sigma.apply(dm));
    return {num / denom, SignalKind::GmmUnknownCov};
}

SignalStrength signal_strength(const RegParams& params) {
    if (params.null) return {0.0, SignalKind::Regression};
    const double b2 = params.beta * params.beta * params.s;
    return {b2 / (params.sigma * params.sigma), SignalKind::Regression};
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

Eigen::MatrixXd sample_gmm(const GmmParams& params, long n, std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("sample_gmm: n must be positive");
    const int d = params.dim();
    Rng rng(seed);
    Eigen::MatrixXd out(n, d);
    Eigen::VectorXd g(d);
    const bool is_null = params.is_null();
    for (long i = 0; i < n; ++i) {
        const bool first = is_null ? true : (rng.uniform() < params.nu);
        for (int j = 0; j < d; ++j) g(j) = rng.gaussian();
        out.row(i) = (first ? params.mu1 : params.mu2) + params.sigma.transform(g);
    }
    return out;
}

Eigen::MatrixXd sample_reg(const RegParams& params, long n, std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("sample_reg: n must be positive");
    Rng rng(seed);
    Eigen::MatrixXd out(n, params.d + 1);
    const double sigma0 = std::sqrt(params.sigma0_sq());
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < params.d; ++j) out(i, j + 1) = rng.gaussian();
        if (params.null) {
            out(i, 0) = sigma0 * rng.gaussian();
        } else {
            double sv = 0.0;
            for (std::size_t k = 0; k < params.direction.support.size(); ++k) {
                sv += params.direction.signs[k] * out(i, params.direction.support[k] + 1);
            }
            out(i, 0) = rng.sign() * params.beta * sv + params.sigma * rng.gaussian();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Population expectations
// ---------------------------------------------------------------------------

namespace {

bool is_gmm_family(FamilyTag tag) {
    return tag == FamilyTag::GmmExhaustive || tag == FamilyTag::GmmDiagonal ||
           tag == FamilyTag::GmmNetStage1 || tag == FamilyTag::GmmNetStage2;
}

bool is_reg_family(FamilyTag tag) {
    return tag == FamilyTag::RegExhaustive || tag == FamilyTag::RegCoordinate;
}

// E[f(W)] for W ~ N(mean, 1) restricted to |w| <= radius.
double truncated_component(const std::function<double(double)>& f, double mean, double radius) {
    const double lo = std::max(-radius, mean - 40.0);
    const double hi = std::min(radius, mean + 40.0);
    if (lo >= hi) return 0.0;
    return adaptive_integrate([&](double w) { return f(w) * normal_pdf(w - mean); }, lo, hi,
                              kQuadTol);
}

template <typename Sampler>
Expectation monte_carlo_expectation(const BoundedQuery& query, const Sampler& draw,
                                    const McOptions& mc) {
    // stream in batches so the sample matrix never grows with mc.samples
    constexpr long kBatch = 65536;
    double sum = 0.0, sumsq = 0.0;
    long remaining = mc.samples;
    std::uint64_t batch_index = 0;
    while (remaining > 0) {
        const long take = std::min(kBatch, remaining);
        Eigen::MatrixXd batch = draw(take, split_seed(mc.seed, batch_index++));
        for (long i = 0; i < batch.rows(); ++i) {
            const double q = query.evaluate(batch.row(i).transpose());
            sum += q;
            sumsq += q * q;
        }
        remaining -= take;
    }
    const double n = static_cast<double>(mc.samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    return {mean, std::sqrt(var / n), false};
}

double gmm_component_value(const BoundedQuery& query, const GmmParams& inst,
                           const Eigen::VectorXd& mu) {
    const double r = query.params.radius;
    switch (query.family) {
        case FamilyTag::GmmExhaustive: {
            const Eigen::VectorXd& v = query.params.direction;
            const double c = inst.sigma.quad_inverse(v);
            if (!(c > 0.0)) throw std::invalid_argument("population_expectation: zero direction");
            const double a = v.dot(inst.sigma.apply_inverse(mu)) / std::sqrt(c);
            if (std::isinf(r)) return 1.0 + a * a;
            return truncated_component([](double w) { return w * w; }, a, r);
        }
        case FamilyTag::GmmDiagonal: {
            const int j = query.params.coordinate;
            const double sj = inst.sigma.diagonal_entry(j);
            const double a = mu(j) / std::sqrt(sj);
            if (std::isinf(r)) return 1.0 + a * a;
            return truncated_component([](double w) { return w * w; }, a, r);
        }
        case FamilyTag::GmmNetStage1: {
            const Eigen::VectorXd& v = query.params.direction;
            const double c = inst.sigma.quad_inverse(v);
            const double sc = std::sqrt(c);
            const double a = v.dot(inst.sigma.apply_inverse(mu)) / sc;
            if (std::isinf(r)) return sc * a;
            return sc * truncated_component([](double w) { return w; }, a, r);
        }
        case FamilyTag::GmmNetStage2: {
            const Eigen::VectorXd& v = query.params.direction;
            const double c = inst.sigma.quad_inverse(v);
            const double sc = std::sqrt(c);
            const double a = v.dot(inst.sigma.apply_inverse(mu)) / sc;
            const double z = query.params.center;
            if (std::isinf(r)) return c + (sc * a - z) * (sc * a - z);
            return truncated_component(
                [sc, z](double w) {
                    const double u = sc * w - z;
                    return u * u;
                },
                a, r);
        }
        default: break;
    }
    throw std::invalid_argument("population_expectation: unsupported family");
}

}  // namespace

Expectation population_expectation(const BoundedQuery& query, const GmmParams& instance,
                                   const McOptions& mc) {
    instance.validate();
    if (is_reg_family(query.family)) {
        throw std::invalid_argument(
            "population_expectation: regression query paired with a mixture instance");
    }
    if (!is_gmm_family(query.family)) {
        return monte_carlo_expectation(
            query, [&](long n, std::uint64_t seed) { return sample_gmm(instance, n, seed); }, mc);
    }
    const double v1 = gmm_component_value(query, instance, instance.mu1);
    if (instance.is_null()) return {v1, 0.0, true};
    const double v2 = gmm_component_value(query, instance, instance.mu2);
    return {instance.nu * v1 + (1.0 - instance.nu) * v2, 0.0, true};
}

Expectation population_expectation(const BoundedQuery& query, const RegParams& instance,
                                   const McOptions& mc) {
    instance.validate();
    if (is_gmm_family(query.family)) {
        throw std::invalid_argument(
            "population_expectation: mixture query paired with a regression instance");
    }
    if (!is_reg_family(query.family)) {
        return monte_carlo_expectation(
            query, [&](long n, std::uint64_t seed) { return sample_reg(instance, n, seed); }, mc);
    }

    const double sigma0 = std::sqrt(instance.sigma0_sq());
    double zeta = 0.0;
    if (!instance.null) {
        if (query.family == FamilyTag::RegExhaustive) {
            const SignSupportVector vq = SignSupportVector::from_vector(query.params.direction);
            const int overlap = instance.direction.dot(vq);
            const int s = vq.sparsity();
            zeta = instance.beta * overlap / (sigma0 * std::sqrt(static_cast<double>(s)));
        } else {
            zeta = instance.beta * instance.direction.entry(query.params.coordinate) / sigma0;
        }
    }

    const double ry = query.params.y_radius / sigma0;  // standardized |y| cutoff
    const double rz = query.params.radius;
    if (std::isinf(ry) && std::isinf(rz)) {
        return {sigma0 * sigma0 * 2.0 * zeta * zeta, 0.0, true};
    }

    const double tau_sq = std::max(0.0, 1.0 - zeta * zeta);
    const double tau = std::sqrt(tau_sq);
    auto inner_second_moment = [&](double z) {
        const double mean = zeta * z;
        if (std::isinf(ry)) return mean * mean + tau_sq;
        if (tau == 0.0) return (std::abs(mean) <= ry) ? mean * mean : 0.0;
        const double alpha = (-ry - mean) / tau;
        const double beta = (ry - mean) / tau;
        const double m0 = normal_cdf(beta) - normal_cdf(alpha);
        const double pa = (alpha > -40.0 && alpha < 40.0) ? normal_pdf(alpha) : 0.0;
        const double pb = (beta > -40.0 && beta < 40.0) ? normal_pdf(beta) : 0.0;
        const double m1 = pa - pb;
        const double m2 = m0 + alpha * pa - beta * pb;
        return mean * mean * m0 + 2.0 * mean * tau * m1 + tau_sq * m2;
    };

    const double zlim = std::isinf(rz) ? 40.0 : std::min(rz, 40.0);
    const double value = adaptive_integrate(
        [&](double z) { return (z * z - 1.0) * inner_second_moment(z) * normal_pdf(z); }, -zlim,
        zlim, kQuadTol);
    return {sigma0 * sigma0 * value, 0.0, true};
}

}  // namespace sqlab
