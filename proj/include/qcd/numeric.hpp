#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

namespace qcd {

/// Time index. Change points use -1 for "before the first observation".
using Index = std::int64_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; either argument may be -inf.
inline double log_add_exp(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

/// log(1 + exp(x)).
inline double log1p_exp(double x) noexcept {
  if (x > 35.0) return x + std::exp(-x);
  return std::log1p(std::exp(x));
}

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// log(sum_i exp(v_i)); returns -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> values) noexcept;

/// Hurwitz zeta sum_{j>=0} (j + a)^{-s} for s > 1, a >= 1, by partial summation
/// plus an Euler-Maclaurin tail. Absolute error is well below 1e-14 relative.
double hurwitz_zeta(double s, double a);

}  // namespace qcd
