#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sqlab/models.hpp"

namespace sqlab {

// ---------------------------------------------------------------------------
// Closed-form chi-square cross moments E_P0[ (dP_v1/dP0)(dP_v2/dP0) ]
// ---------------------------------------------------------------------------

// Known-covariance mixture instances mu = -beta(1-nu)v / beta nu v, Sigma = I.
double chi2_cross_gmm_known(const SignSupportVector& v1, const SignSupportVector& v2, double beta,
                            double nu);
double chi2_cross_gmm_known_overlap(int overlap, double beta, double nu);

// Unknown-covariance instances mu = -+ beta v with Sigma = I - beta^2 v v'.
// Requires beta^4 overlap^2 < 1.
double chi2_cross_gmm_unknown(const SignSupportVector& v1, const SignSupportVector& v2,
                              double beta);
double chi2_cross_gmm_unknown_overlap(int overlap, double beta);

// Regression instances beta v against the marginal-matched null; the n-fold
// product measure raises the single-sample value to the n-th power. Requires
// beta^2 |overlap| < sigma^2 + s beta^2.
double chi2_cross_reg(const SignSupportVector& v1, const SignSupportVector& v2, double beta,
                      double sigma, int s, long nfold = 1);
double chi2_cross_reg_overlap(int overlap, double beta, double sigma, int s, long nfold = 1);

// ---------------------------------------------------------------------------
// Overlap combinatorics of the sign-support family
// ---------------------------------------------------------------------------

// Counts of alternatives at each overlap with a fixed reference vector:
// sizes[j] = #{v' : |<v, v'>| = s - j}. Built from the closed-form blocks
// n_ab[a][b] (a ones kept, b flipped, rest moved off-support) and the signed
// overlap counts m[k] = #{v' : <v, v'> = k}.
struct OverlapTable {
    int d = 0;
    int s = 0;
    std::vector<std::vector<unsigned long long>> n_ab;
    std::vector<unsigned long long> m;      // k = 0..s
    std::vector<unsigned long long> sizes;  // j = 0..s
};

OverlapTable overlap_table(int d, int s);

struct GrowthCheck {
    bool holds = false;
    double bound = 0.0;            // d / (2 s^2)
    std::vector<double> ratios;    // sizes[j+1] / sizes[j]
};

// Checks sizes[j+1]/sizes[j] >= d/(2 s^2) for every j.
GrowthCheck overlap_growth_check(const OverlapTable& table);

// ---------------------------------------------------------------------------
// Hermite expansion machinery
// ---------------------------------------------------------------------------

// Coefficients of f against the orthonormal Hermite basis for the standard
// normal weight, k = 0..K, by Gauss-Hermite quadrature of order >= 4K.
// Quadrature with the doubled order must agree to consistency_tol, otherwise
// the order is insufficient for f and an error is thrown.
Eigen::VectorXd hermite_coeffs(const std::function<double(double)>& f, int K, int quad_order = 0,
                               double consistency_tol = 1e-8);

// Same coefficients by adaptive quadrature split at the given breakpoints;
// handles discontinuous f exactly.
Eigen::VectorXd hermite_coeffs_piecewise(const std::function<double(double)>& f, int K,
                                         const std::vector<double>& breakpoints,
                                         double abs_tol = 1e-10);

// E[f(W) g(Z)] = sum_k a_k b_k zeta^k for unit-variance jointly Gaussian
// (W, Z) with correlation zeta.
double hermite_cross_moment(const Eigen::VectorXd& f_coeffs, const Eigen::VectorXd& g_coeffs,
                            double zeta);

// ---------------------------------------------------------------------------
// Risk bounds
// ---------------------------------------------------------------------------

// Testing risk of any procedure is at least 1 - sqrt(chi2)/2.
double lecam_risk_lower_bound(double chi2);

// Mixture chi-square |C|^{-2} sum_{v,v'} cross(v,v') - 1, by the naive double
// sum over an arbitrary member set.
double mixture_chi2(const std::vector<SignSupportVector>& members,
                    const std::function<double(const SignSupportVector&, const SignSupportVector&)>&
                        cross_moment);

// Same value over the full family via per-overlap weights; counts come from
// pair enumeration (by_overlap) or from the closed-form table (grouped).
double mixture_chi2_by_overlap(const std::vector<SignSupportVector>& members,
                               const std::function<double(int)>& cross_by_overlap);
double mixture_chi2_grouped(const OverlapTable& table,
                            const std::function<double(int)>& cross_by_overlap);

// The divergence any distinguishing query family forces between the null and
// the mixture over a distinguishable set: 2 log(T/xi) / (3n).
double chi2_divergence_floor(long T, double xi, long n);

}  // namespace sqlab
