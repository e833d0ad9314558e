#include "qcd/numeric.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace qcd {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double log_sum_exp(std::span<const double> values) noexcept {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

double hurwitz_zeta(double s, double a) {
  if (!(s > 1.0) || !(a >= 1.0)) throw std::domain_error("hurwitz_zeta: need s > 1 and a >= 1");
  // Sum the first terms exactly, then Euler-Maclaurin from M on. Terms of the
  // correction series decay like M^{-2j}, so M = 64 leaves the truncation far
  // below double precision for any s we use.
  constexpr int kHead = 64;
  double head = 0.0;
  const double m = a + kHead;
  for (int j = kHead - 1; j >= 0; --j) head += std::pow(a + j, -s);

  // B_{2j}/(2j)! for j = 1..6
  static constexpr double kBernoulli[] = {1.0 / 12.0,        -1.0 / 720.0,        1.0 / 30240.0,
                                          -1.0 / 1209600.0,   1.0 / 47900160.0,   -691.0 / 1307674368000.0};
  double tail = std::pow(m, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(m, -s);
  // d^{2j-1}/dx^{2j-1} x^{-s} = -s(s+1)...(s+2j-2) x^{-s-2j+1}
  double rising = s;  // s(s+1)...(s+2j-2)
  double power = std::pow(m, -s - 1.0);
  for (int j = 0; j < 6; ++j) {
    tail += kBernoulli[j] * rising * power;
    rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
    power /= m * m;
  }
  return head + tail;
}

}  // namespace qcd
