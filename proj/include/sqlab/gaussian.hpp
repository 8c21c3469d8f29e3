#pragma once

#include <cmath>

namespace sqlab {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// upper tail P(Z > t)
inline double normal_upper_tail(double t) { return 0.5 * std::erfc(t * 0.70710678118654752440); }

// Moments of Z ~ N(mean, 1) restricted to [lo, hi]:
//   E[Z^k 1{lo <= Z <= hi}] for k = 0, 1, 2.
// Fast paths for the quadrature-based expectation engine; validated against
// adaptive quadrature in the test suite.
inline double truncated_moment0(double mean, double lo, double hi) {
    return normal_cdf(hi - mean) - normal_cdf(lo - mean);
}

inline double truncated_moment1(double mean, double lo, double hi) {
    const double a = lo - mean, b = hi - mean;
    return mean * truncated_moment0(mean, lo, hi) + normal_pdf(a) - normal_pdf(b);
}

inline double truncated_moment2(double mean, double lo, double hi) {
    const double a = lo - mean, b = hi - mean;
    const double p = truncated_moment0(mean, lo, hi);
    return (1.0 + mean * mean) * p + (lo + mean) * normal_pdf(a) - (hi + mean) * normal_pdf(b);
}

}  // namespace sqlab
