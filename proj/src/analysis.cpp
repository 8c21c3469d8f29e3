#include "sqlab/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "sqlab/quadrature.hpp"

namespace sqlab {

// ---------------------------------------------------------------------------
// Cross moments
// ---------------------------------------------------------------------------

double chi2_cross_gmm_known_overlap(int overlap, double beta, double nu) {
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("chi2_cross_gmm_known: nu in (0,1)");
    const double b2m = beta * beta * static_cast<double>(overlap);
    const double u1 = (1.0 - nu) * (1.0 - nu);  // probability nu^2
    const double u2 = nu * (1.0 - nu);          // probability 2 nu (1-nu), sign irrelevant
    const double u3 = nu * nu;                  // probability (1-nu)^2
    return nu * nu * std::cosh(b2m * u1) + 2.0 * nu * (1.0 - nu) * std::cosh(b2m * u2) +
           (1.0 - nu) * (1.0 - nu) * std::cosh(b2m * u3);
}

double chi2_cross_gmm_known(const SignSupportVector& v1, const SignSupportVector& v2, double beta,
                            double nu) {
    return chi2_cross_gmm_known_overlap(v1.dot(v2), beta, nu);
}

double chi2_cross_gmm_unknown_overlap(int overlap, double beta) {
    const int m = std::abs(overlap);
    const double b4 = std::pow(beta, 4);
    if (!(b4 * m * m < 1.0)) {
        throw std::domain_error("chi2_cross_gmm_unknown: beta^4 overlap^2 must be < 1");
    }
    // The two mixing signs enter only through their product, so W sits at
    // +-overlap with equal probability; the integrand is even in W, leaving a
    // single exact atom to evaluate. (A Monte Carlo likelihood-ratio oracle
    // pins this two-point law; see the verification suite.)
    const double w2b4 = b4 * static_cast<double>(m) * m;
    const double denom = 1.0 - w2b4;
    return 1.0 / std::sqrt(denom) * std::exp(-w2b4 / denom) *
           std::cosh(beta * beta * m / denom);
}

double chi2_cross_gmm_unknown(const SignSupportVector& v1, const SignSupportVector& v2,
                              double beta) {
    return chi2_cross_gmm_unknown_overlap(v1.dot(v2), beta);
}

double chi2_cross_reg_overlap(int overlap, double beta, double sigma, int s, long nfold) {
    if (nfold < 1) throw std::invalid_argument("chi2_cross_reg: nfold >= 1");
    const double sigma0_sq = sigma * sigma + s * beta * beta;
    const double num = std::pow(beta, 4) * static_cast<double>(overlap) * overlap;
    if (!(num < sigma0_sq * sigma0_sq)) {
        throw std::domain_error("chi2_cross_reg: beta^2 |overlap| must be < sigma^2 + s beta^2");
    }
    const double base = 1.0 / (1.0 - num / (sigma0_sq * sigma0_sq));
    return nfold == 1 ? base : std::pow(base, static_cast<double>(nfold));
}

double chi2_cross_reg(const SignSupportVector& v1, const SignSupportVector& v2, double beta,
                      double sigma, int s, long nfold) {
    return chi2_cross_reg_overlap(v1.dot(v2), beta, sigma, s, nfold);
}

// ---------------------------------------------------------------------------
// Overlap combinatorics
// ---------------------------------------------------------------------------

namespace {

unsigned long long checked_mul(unsigned long long a, unsigned long long b) {
    const unsigned __int128 r = static_cast<unsigned __int128>(a) * b;
    if (r > ~0ULL) throw std::overflow_error("overlap_table: count overflow");
    return static_cast<unsigned long long>(r);
}

unsigned long long checked_add(unsigned long long a, unsigned long long b) {
    if (a > ~0ULL - b) throw std::overflow_error("overlap_table: count overflow");
    return a + b;
}

unsigned long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned long long r = 1;
    for (int i = 0; i < k; ++i) {
        r = checked_mul(r, static_cast<unsigned long long>(n - i));
        r /= (i + 1);
    }
    return r;
}

unsigned long long pow2_checked(int e) {
    if (e >= 64) throw std::overflow_error("overlap_table: count overflow");
    return 1ULL << e;
}

}  // namespace

OverlapTable overlap_table(int d, int s) {
    if (s < 1 || s > d) throw std::invalid_argument("overlap_table: need 1 <= s <= d");
    OverlapTable t;
    t.d = d;
    t.s = s;
    t.n_ab.assign(s + 1, std::vector<unsigned long long>(s + 1, 0));
    for (int a = 0; a <= s; ++a) {
        for (int b = 0; a + b <= s; ++b) {
            unsigned long long v = checked_mul(binomial(s, a), binomial(s - a, b));
            v = checked_mul(v, binomial(d - s, s - a - b));
            v = checked_mul(v, pow2_checked(s - a - b));
            t.n_ab[a][b] = v;
        }
    }
    t.m.assign(s + 1, 0);
    for (int k = 0; k <= s; ++k) {
        for (int i = 0; k + 2 * i <= s; ++i) {
            t.m[k] = checked_add(t.m[k], t.n_ab[k + i][i]);
        }
    }
    t.sizes.assign(s + 1, 0);
    t.sizes[s] = t.m[0];
    for (int j = 0; j < s; ++j) {
        t.sizes[j] = checked_mul(t.m[s - j], 2);  // signed overlaps +-(s-j)
    }
    return t;
}

GrowthCheck overlap_growth_check(const OverlapTable& table) {
    GrowthCheck check;
    check.bound = static_cast<double>(table.d) / (2.0 * table.s * table.s);
    check.holds = true;
    for (int j = 0; j < table.s; ++j) {
        const double ratio = static_cast<double>(table.sizes[j + 1]) /
                             static_cast<double>(table.sizes[j]);
        check.ratios.push_back(ratio);
        if (!(ratio >= check.bound)) check.holds = false;
    }
    return check;
}

// ---------------------------------------------------------------------------
// Hermite machinery
// ---------------------------------------------------------------------------

namespace {

// orthonormal Hermite values H~_0..H~_K at x (standard normal weight)
void hermite_values(double x, int K, std::vector<double>& out) {
    out.resize(K + 1);
    out[0] = 1.0;
    if (K >= 1) out[1] = x;
    for (int k = 1; k < K; ++k) {
        out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                     std::sqrt(static_cast<double>(k + 1));
    }
}

Eigen::VectorXd hermite_coeffs_gh(const std::function<double(double)>& f, int K, int order) {
    const GaussHermiteRule rule = gauss_hermite_rule(order);
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(K + 1);
    std::vector<double> h;
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    for (int i = 0; i < order; ++i) {
        const double x = rule.nodes(i) * M_SQRT2;
        const double fx = f(x);
        if (fx == 0.0) continue;
        hermite_values(x, K, h);
        const double wf = rule.weights(i) * inv_sqrt_pi * fx;
        for (int k = 0; k <= K; ++k) coeffs(k) += wf * h[k];
    }
    return coeffs;
}

}  // namespace

Eigen::VectorXd hermite_coeffs(const std::function<double(double)>& f, int K, int quad_order,
                               double consistency_tol) {
    if (K < 0) throw std::invalid_argument("hermite_coeffs: K >= 0 required");
    int order = quad_order > 0 ? quad_order : std::max(4 * K, 64);
    if (order < 4 * K) order = 4 * K;
    const Eigen::VectorXd a = hermite_coeffs_gh(f, K, order);
    const Eigen::VectorXd b = hermite_coeffs_gh(f, K, 2 * order);
    if ((a - b).cwiseAbs().maxCoeff() > consistency_tol) {
        throw std::runtime_error("hermite_coeffs: quadrature order insufficient for this function");
    }
    return b;
}

Eigen::VectorXd hermite_coeffs_piecewise(const std::function<double(double)>& f, int K,
                                         const std::vector<double>& breakpoints, double abs_tol) {
    std::vector<double> cuts = breakpoints;
    cuts.push_back(-42.0);
    cuts.push_back(42.0);
    std::sort(cuts.begin(), cuts.end());
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(K + 1);
    std::vector<double> h;
    for (int k = 0; k <= K; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = std::max(cuts[i], -42.0);
            const double hi = std::min(cuts[i + 1], 42.0);
            if (lo >= hi) continue;
            acc += adaptive_integrate(
                [&](double x) {
                    hermite_values(x, k, h);
                    return f(x) * h[k] * std::exp(-0.5 * x * x) * 0.3989422804014326779;
                },
                lo, hi, abs_tol / cuts.size());
        }
        coeffs(k) = acc;
    }
    return coeffs;
}

double hermite_cross_moment(const Eigen::VectorXd& f_coeffs, const Eigen::VectorXd& g_coeffs,
                            double zeta) {
    if (std::abs(zeta) > 1.0) throw std::invalid_argument("hermite_cross_moment: |zeta| <= 1");
    const int K = static_cast<int>(std::min(f_coeffs.size(), g_coeffs.size())) - 1;
    double acc = 0.0, zk = 1.0;
    for (int k = 0; k <= K; ++k) {
        acc += f_coeffs(k) * g_coeffs(k) * zk;
        zk *= zeta;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Risk bounds
// ---------------------------------------------------------------------------

double lecam_risk_lower_bound(double chi2) {
    if (chi2 < 0.0) throw std::invalid_argument("lecam_risk_lower_bound: chi2 >= 0");
    return 1.0 - 0.5 * std::sqrt(chi2);
}

namespace {

double combine_overlap_counts(const std::vector<unsigned long long>& pair_counts,
                              unsigned long long total_members,
                              const std::function<double(int)>& cross_by_overlap) {
    double acc = 0.0;
    for (std::size_t mth = 0; mth < pair_counts.size(); ++mth) {
        if (pair_counts[mth] == 0) continue;
        acc += static_cast<double>(pair_counts[mth]) * cross_by_overlap(static_cast<int>(mth));
    }
    const double size = static_cast<double>(total_members);
    return acc / (size * size) - 1.0;
}

}  // namespace

double mixture_chi2(const std::vector<SignSupportVector>& members,
                    const std::function<double(const SignSupportVector&, const SignSupportVector&)>&
                        cross_moment) {
    if (members.empty()) throw std::invalid_argument("mixture_chi2: empty member set");
    double acc = 0.0;
    for (const SignSupportVector& v1 : members) {
        for (const SignSupportVector& v2 : members) acc += cross_moment(v1, v2);
    }
    const double size = static_cast<double>(members.size());
    return acc / (size * size) - 1.0;
}

double mixture_chi2_by_overlap(const std::vector<SignSupportVector>& members,
                               const std::function<double(int)>& cross_by_overlap) {
    if (members.empty()) throw std::invalid_argument("mixture_chi2_by_overlap: empty member set");
    const int s = members.front().sparsity();
    std::vector<unsigned long long> pair_counts(s + 1, 0);
    for (const SignSupportVector& v1 : members) {
        for (const SignSupportVector& v2 : members) {
            const int m = std::abs(v1.dot(v2));
            pair_counts.at(m) = checked_add(pair_counts.at(m), 1);
        }
    }
    return combine_overlap_counts(pair_counts, members.size(), cross_by_overlap);
}

double mixture_chi2_grouped(const OverlapTable& table,
                            const std::function<double(int)>& cross_by_overlap) {
    // ordered pairs of the full family: |G| choices of v times sizes[j]
    // partners at overlap s - j
    unsigned long long total = 0;
    for (unsigned long long c : table.sizes) total = checked_add(total, c);
    std::vector<unsigned long long> pair_counts(table.s + 1, 0);
    for (int j = 0; j <= table.s; ++j) {
        pair_counts[table.s - j] = checked_mul(table.sizes[j], total);
    }
    return combine_overlap_counts(pair_counts, total, cross_by_overlap);
}

double chi2_divergence_floor(long T, double xi, long n) {
    if (T < 1 || n < 1) throw std::invalid_argument("chi2_divergence_floor: T, n >= 1");
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("chi2_divergence_floor: xi in (0,1)");
    return 2.0 * std::log(static_cast<double>(T) / xi) / (3.0 * static_cast<double>(n));
}

}  // namespace sqlab
