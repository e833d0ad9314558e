#include "qcd/likelihood.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qcd/numeric.hpp"

namespace qcd {

namespace {

void check_order(std::size_t n, int max_order) {
  if (max_order < 1 || static_cast<std::size_t>(max_order) > n)
    throw std::invalid_argument("elementary_symmetric: order " + std::to_string(max_order) + " outside [1, " +
                                std::to_string(n) + "]");
}

}  // namespace

SubsetWeights SubsetWeights::make(std::vector<double> p, int max_affected) {
  if (p.empty()) throw std::invalid_argument("subset weights: no streams");
  for (double v : p)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("subset weights: p_i must be positive and finite");
  SubsetWeights w;
  w.normalizer = qcd::normalizer(p, max_affected);
  w.p = std::move(p);
  w.max_affected = max_affected;
  return w;
}

SubsetWeights SubsetWeights::uniform(int streams, int max_affected, double p_i) {
  return make(std::vector<double>(static_cast<std::size_t>(streams), p_i), max_affected);
}

double SubsetWeights::log_normalizer() const { return std::log(normalizer); }

double SubsetWeights::weight(std::uint32_t mask) const {
  double w = normalizer;
  for (int i = 0; i < streams(); ++i)
    if (mask & (1u << i)) w *= p[static_cast<std::size_t>(i)];
  return w;
}

std::vector<double> elementary_symmetric(std::span<const double> values, int max_order) {
  check_order(values.size(), max_order);
  std::vector<double> e(static_cast<std::size_t>(max_order) + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t top = std::min<std::size_t>(i + 1, static_cast<std::size_t>(max_order));
    for (std::size_t j = top; j >= 1; --j) e[j] += values[i] * e[j - 1];
  }
  return e;
}

std::vector<double> log_elementary_symmetric(std::span<const double> log_values, int max_order) {
  check_order(log_values.size(), max_order);
  std::vector<double> e(static_cast<std::size_t>(max_order) + 1, kNegInf);
  e[0] = 0.0;
  for (std::size_t i = 0; i < log_values.size(); ++i) {
    const std::size_t top = std::min<std::size_t>(i + 1, static_cast<std::size_t>(max_order));
    for (std::size_t j = top; j >= 1; --j) e[j] = log_add_exp(e[j], log_values[i] + e[j - 1]);
  }
  return e;
}

double normalizer(std::span<const double> p, int max_affected) {
  for (double v : p)
    if (!(v > 0.0)) throw std::invalid_argument("normalizer: p_i must be positive");
  const auto e = elementary_symmetric(p, max_affected);
  double total = 0.0;
  for (std::size_t j = 1; j < e.size(); ++j) total += e[j];
  return 1.0 / total;
}

double mixture_lr_dp(std::span<const double> stream_log_lrs, const SubsetWeights& weights) {
  if (stream_log_lrs.size() != weights.p.size()) throw std::invalid_argument("mixture_lr_dp: size mismatch");
  // Small fixed buffer avoids allocation in the hot path.
  constexpr std::size_t kStack = 64;
  const int k = weights.max_affected;
  double stack[kStack];
  std::vector<double> heap;
  double* e = stack;
  if (static_cast<std::size_t>(k) + 1 > kStack) {
    heap.resize(static_cast<std::size_t>(k) + 1);
    e = heap.data();
  }
  e[0] = 0.0;
  for (int j = 1; j <= k; ++j) e[j] = kNegInf;
  for (std::size_t i = 0; i < stream_log_lrs.size(); ++i) {
    const double a = std::log(weights.p[i]) + stream_log_lrs[i];
    if (std::isnan(a)) throw std::invalid_argument("mixture_lr_dp: non-finite log LR");
    const int top = std::min<int>(static_cast<int>(i) + 1, k);
    for (int j = top; j >= 1; --j) e[j] = log_add_exp(e[j], a + e[j - 1]);
  }
  return weights.log_normalizer() + log_sum_exp(std::span<const double>(e + 1, static_cast<std::size_t>(k)));
}

double mixture_lr_enumerate(std::span<const double> stream_log_lrs, const SubsetWeights& weights) {
  const int n = weights.streams();
  if (n > kMaxEnumerationOracle)
    throw std::invalid_argument("mixture_lr_enumerate: N = " + std::to_string(n) + " exceeds " +
                                std::to_string(kMaxEnumerationOracle));
  if (static_cast<int>(stream_log_lrs.size()) != n) throw std::invalid_argument("mixture_lr_enumerate: size mismatch");
  std::vector<double> terms;
  for (std::uint32_t mask : enumerate_subsets(n, weights.max_affected)) {
    double t = std::log(weights.weight(mask));
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) t += stream_log_lrs[static_cast<std::size_t>(i)];
    terms.push_back(t);
  }
  return log_sum_exp(terms);
}

std::vector<std::uint32_t> enumerate_subsets(int streams, int max_affected) {
  if (streams < 1 || streams > kMaxEnumerationOracle) throw std::invalid_argument("enumerate_subsets: bad stream count");
  std::vector<std::uint32_t> out;
  const std::uint32_t end = 1u << streams;
  for (std::uint32_t mask = 1; mask < end; ++mask)
    if (std::popcount(mask) <= max_affected) out.push_back(mask);
  return out;
}

std::vector<int> mask_to_streams(std::uint32_t mask) {
  std::vector<int> out;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1u) out.push_back(i);
  return out;
}

std::vector<int> sample_subset(const SubsetWeights& weights, Rng& rng) {
  const int n = weights.streams();
  const int k = weights.max_affected;
  // suffix[i][m] = log e_m(p_i, ..., p_{N-1})
  std::vector<std::vector<double>> suffix(static_cast<std::size_t>(n) + 1,
                                          std::vector<double>(static_cast<std::size_t>(k) + 1, kNegInf));
  suffix[static_cast<std::size_t>(n)][0] = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double lp = std::log(weights.p[static_cast<std::size_t>(i)]);
    auto& cur = suffix[static_cast<std::size_t>(i)];
    const auto& nxt = suffix[static_cast<std::size_t>(i) + 1];
    cur[0] = 0.0;
    for (int m = 1; m <= k; ++m) cur[static_cast<std::size_t>(m)] = log_add_exp(nxt[static_cast<std::size_t>(m)], lp + nxt[static_cast<std::size_t>(m) - 1]);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Size first, with probability C e_j(p).
  const auto& full = suffix[0];
  const double log_total = log_sum_exp(std::span<const double>(full.data() + 1, static_cast<std::size_t>(k)));
  double u = unif(rng);
  int need = k;
  for (int m = 1; m <= k; ++m) {
    const double prob = std::exp(full[static_cast<std::size_t>(m)] - log_total);
    if (u < prob) {
      need = m;
      break;
    }
    u -= prob;
  }

  std::vector<int> subset;
  for (int i = 0; i < n && need > 0; ++i) {
    const double lp = std::log(weights.p[static_cast<std::size_t>(i)]);
    const double take = lp + suffix[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(need) - 1] -
                        suffix[static_cast<std::size_t>(i)][static_cast<std::size_t>(need)];
    if (unif(rng) < std::exp(take)) {
      subset.push_back(i);
      --need;
    }
  }
  return subset;
}

}  // namespace qcd
