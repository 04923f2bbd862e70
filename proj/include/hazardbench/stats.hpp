#pragma once

#include <cmath>

namespace hazardbench {

// Standard normal CDF through the complementary error function.  erfc is a
// rational/polynomial approximation in libm with error well below 1e-7,
// which is what the Wald p-values here need.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided Wald p-value for z = beta / se.  Evaluates to exactly 1 at z = 0.
inline double wald_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// 97.5% quantile of the standard normal, as conventionally rounded for
// 95% confidence intervals.
inline constexpr double kZ975 = 1.96;

}  // namespace hazardbench
