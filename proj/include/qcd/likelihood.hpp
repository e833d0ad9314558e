#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcd/model.hpp"

namespace qcd {

/// Largest stream count for which subsets are enumerated explicitly.
inline constexpr int kMaxEnumerableStreams = 12;
/// Hard limit for the exponential enumeration oracle.
inline constexpr int kMaxEnumerationOracle = 25;

/// Factorized subset weights p_B = C(P_K) prod_{i in B} p_i over all nonempty
/// subsets of size at most K.
struct SubsetWeights {
  std::vector<double> p;
  int max_affected = 1;  // K
  double normalizer = 1.0;

  /// Throws on nonpositive p_i or K outside [1, N].
  static SubsetWeights make(std::vector<double> p, int max_affected);
  static SubsetWeights uniform(int streams, int max_affected, double p_i = 1.0);

  int streams() const { return static_cast<int>(p.size()); }
  double log_normalizer() const;
  /// p_B for a subset given as a bit mask (N <= 25).
  double weight(std::uint32_t mask) const;
};

/// e_0..e_K of the inputs; e_0 = 1.
std::vector<double> elementary_symmetric(std::span<const double> values, int max_order);

/// log e_0..log e_K of exp(log_values); all values must be positive.
std::vector<double> log_elementary_symmetric(std::span<const double> log_values, int max_order);

/// C(P_K) = 1 / sum_{j=1}^{K} e_j(p).
double normalizer(std::span<const double> p, int max_affected);

/// log Lambda = log( C(P_K) sum_{j=1}^K e_j(p_1 LR_1, ..., p_N LR_N) ),
/// polynomial in N and evaluated entirely in the log domain.
double mixture_lr_dp(std::span<const double> stream_log_lrs, const SubsetWeights& weights);

/// Same quantity by explicit enumeration of every subset (N <= 25).
double mixture_lr_enumerate(std::span<const double> stream_log_lrs, const SubsetWeights& weights);

/// Bit masks of every subset in P_K, in increasing numeric order (N <= 25).
std::vector<std::uint32_t> enumerate_subsets(int streams, int max_affected);

std::vector<int> mask_to_streams(std::uint32_t mask);

/// Draws B with probability p_B using suffix elementary-symmetric tables, so
/// it works for any N.
std::vector<int> sample_subset(const SubsetWeights& weights, Rng& rng);

}  // namespace qcd
