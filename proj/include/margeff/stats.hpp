#pragma once

#include <cmath>

namespace margeff {

inline double expit(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

double normal_cdf(double x) noexcept;

/// Inverse standard normal CDF. Acklam's rational approximation followed by
/// one Halley step against erfc; absolute error well below 1e-12 on (0, 1).
/// Returns -inf / +inf at 0 / 1 and NaN outside [0, 1].
double normal_quantile(double p) noexcept;

}  // namespace margeff
