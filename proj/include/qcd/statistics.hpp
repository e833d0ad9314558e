#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qcd/likelihood.hpp"
#include "qcd/model.hpp"

namespace qcd {

class StreamLLR;

/// Discretized mixing measure over the post-change parameter. Each point holds
/// one theta per stream.
struct GridSpec {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;

  /// The same scalar theta on every stream at each point.
  static GridSpec scalar(std::span<const double> thetas, std::span<const double> weights, int streams);
  static GridSpec uniform_scalar(std::span<const double> thetas, int streams);
  /// A single point with weight one.
  static GridSpec degenerate(std::vector<double> point);

  std::size_t size() const { return points.size(); }
  /// Throws unless weights are positive, sum to 1 within 1e-12, points are
  /// distinct and each has `streams` entries.
  void validate(int streams) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Precomputed log pi_k and log P(nu >= n). Immutable, so one table is shared
/// by every replication.
class PriorTable {
 public:
  PriorTable(const PriorSpec& prior, Index length);
  const PriorSpec& prior() const { return prior_; }
  double log_mass(Index k) const;
  double log_tail(Index n) const;
  double log_head() const { return log_head_; }  // log q

 private:
  PriorSpec prior_;
  std::vector<double> log_mass_;
  std::vector<double> log_tail_;
  double log_head_;
};

/// Per-stream per-grid-point log LR_{i,theta_g}(k, n) for a contiguous range of
/// candidate change points k. k_begin == -1 adds the head term (mass q for the
/// Shiryaev statistic, head start omega for SR), which uses LR(0, n).
struct LogLRWindow {
  Index n = 0;
  Index k_begin = -1;
  Index k_end = 0;  // exclusive; normally n
  int streams = 0;
  std::size_t grid = 0;
  /// Rows for k = max(k_begin, 0) .. k_end-1, each grid x streams.
  std::vector<double> values;

  std::span<const double> row(Index k, std::size_t g) const;
};

/// log Lambda_{p,W}(k, n) from a grid x streams block of stream log LRs.
double log_double_mixture(std::span<const double> block, const SubsetWeights& weights, const GridSpec& grid);

/// Direct summation of the (window-limited) double-mixture Shiryaev statistic.
/// Returns the log value.
double shiryaev_direct(const LogLRWindow& window, const PriorTable& prior, const SubsetWeights& weights,
                       const GridSpec& grid);

/// Direct summation of the (window-limited) double-mixture SR statistic.
double sr_direct(const LogLRWindow& window, double omega, const SubsetWeights& weights, const GridSpec& grid);

/// Upper clamp for stored log statistics.
inline constexpr double kLogSaturation = 700.0;

struct StatisticOptions {
  bool shiryaev = true;
  bool sr = true;
  double omega = 0.0;
  std::optional<Index> window_m1;
  Index window_m0 = 0;
  /// Use the direct path even where the recursion is available.
  bool force_direct = false;
};

/// Running double-mixture Shiryaev and SR statistics.
///
/// With at most kMaxEnumerableStreams streams and k-independent increments the
/// exact per-(subset, grid point) recursions
///   S_B(n) = L_B(n) (S_B(n-1) P(nu >= n-1) + pi_{n-1}) / P(nu >= n)
///   R_B(n) = L_B(n) (1 + R_B(n-1))
/// are carried. Otherwise, and for the window-limited regime n > m1, the
/// statistics are summed directly from cumulative per-stream log LRs.
class DetectorState {
 public:
  DetectorState(std::shared_ptr<const PriorTable> prior, SubsetWeights weights, GridSpec grid,
                StatisticOptions options, bool k_independent = true);

  void reset();
  /// Consumes the grid x streams block of log L_{i,theta_g}(n) for the next n.
  void update(std::span<const double> increments);

  Index n() const { return n_; }
  double log_shiryaev() const { return log_s_; }
  double log_sr() const { return log_r_; }
  bool saturated() const { return saturated_; }
  bool recursive() const { return recursive_; }
  bool windowed_regime() const { return options_.window_m1 && n_ > *options_.window_m1; }

  /// Stream log LRs for change points k in [k_begin, n) built from the stored
  /// cumulative sums. Requires the direct path to hold those k.
  LogLRWindow window(Index k_begin) const;

  const SubsetWeights& weights() const { return weights_; }
  const GridSpec& grid() const { return grid_; }
  const PriorTable& prior() const { return *prior_; }

 private:
  void update_recursive(std::span<const double> increments);
  void update_direct(std::span<const double> increments);
  double clamp(double v);

  std::shared_ptr<const PriorTable> prior_;
  SubsetWeights weights_;
  GridSpec grid_;
  StatisticOptions options_;
  int streams_;
  bool recursive_;
  bool need_direct_;

  Index n_ = 0;
  double log_s_ = kNegInf;
  double log_r_ = kNegInf;
  bool saturated_ = false;

  // recursive path
  std::vector<std::uint32_t> masks_;
  std::vector<double> log_pw_;  // log p_B + log w_g, per (B, g)
  std::vector<double> rec_s_;   // per (B, g)
  std::vector<double> rec_r_;
  std::vector<double> subset_sum_;
  std::vector<double> scratch_;

  // direct path: cumulative sums cum(k), k = cum_first_ .. n
  std::deque<std::vector<double>> cum_;
  Index cum_first_ = 0;
};

/// Evaluates each stream source at every grid point for its latest observation.
void compute_increments(std::span<const std::unique_ptr<StreamLLR>> sources, const GridSpec& grid,
                        std::span<double> out);

}  // namespace qcd
