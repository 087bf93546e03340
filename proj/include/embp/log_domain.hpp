#ifndef EMBP_LOG_DOMAIN_HPP
#define EMBP_LOG_DOMAIN_HPP

#include <cmath>
#include <limits>
#include <span>

namespace embp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Log-domain floor used before log-subtractions (extrinsic ratios).
inline constexpr double kLogFloor = -700.0;

inline double logsumexp2(double a, double b) {
    if (a < b) std::swap(a, b);
    if (a == kNegInf) return kNegInf;
    return a + std::log1p(std::exp(b - a));
}

inline double logsumexp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/// In-place normalization so that logsumexp(v) == 0.
inline void log_normalize(std::span<double> v) {
    const double z = logsumexp(v);
    for (double& x : v) x -= z;
}

} // namespace embp

#endif
