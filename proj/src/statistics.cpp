#include "qcd/statistics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "qcd/numeric.hpp"
#include "qcd/scenarios.hpp"

namespace qcd {

GridSpec GridSpec::scalar(std::span<const double> thetas, std::span<const double> weights, int streams) {
  if (thetas.size() != weights.size()) throw std::invalid_argument("grid: theta and weight counts differ");
  GridSpec g;
  for (double t : thetas) g.points.emplace_back(static_cast<std::size_t>(streams), t);
  g.weights.assign(weights.begin(), weights.end());
  g.validate(streams);
  return g;
}

GridSpec GridSpec::uniform_scalar(std::span<const double> thetas, int streams) {
  std::vector<double> w(thetas.size(), 1.0 / static_cast<double>(thetas.size()));
  return scalar(thetas, w, streams);
}

GridSpec GridSpec::degenerate(std::vector<double> point) {
  GridSpec g;
  g.points.push_back(std::move(point));
  g.weights = {1.0};
  return g;
}

void GridSpec::validate(int streams) const {
  if (points.empty()) throw std::invalid_argument("grid: no points");
  if (points.size() != weights.size()) throw std::invalid_argument("grid: point and weight counts differ");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("grid: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("grid: weights must sum to 1");
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (static_cast<int>(points[a].size()) != streams)
      throw std::invalid_argument("grid: each point needs one theta per stream");
    for (double t : points[a])
      if (!std::isfinite(t)) throw std::invalid_argument("grid: theta must be finite");
    for (std::size_t b = 0; b < a; ++b)
      if (points[a] == points[b]) throw std::invalid_argument("grid: duplicate points");
  }
}

// ---------------------------------------------------------------------------

PriorTable::PriorTable(const PriorSpec& prior, Index length) : prior_(prior) {
  prior_.validate();
  length = std::max<Index>(length, 1);
  log_mass_.resize(static_cast<std::size_t>(length));
  log_tail_.resize(static_cast<std::size_t>(length) + 1);
  for (Index k = 0; k < length; ++k) log_mass_[static_cast<std::size_t>(k)] = log_prior_mass(prior_, k);
  for (Index n = 0; n <= length; ++n) log_tail_[static_cast<std::size_t>(n)] = log_prior_tail(prior_, n);
  log_head_ = prior_.q > 0.0 ? std::log(prior_.q) : kNegInf;
}

double PriorTable::log_mass(Index k) const {
  if (k >= 0 && static_cast<std::size_t>(k) < log_mass_.size()) return log_mass_[static_cast<std::size_t>(k)];
  return log_prior_mass(prior_, k);
}

double PriorTable::log_tail(Index n) const {
  if (n >= 0 && static_cast<std::size_t>(n) < log_tail_.size()) return log_tail_[static_cast<std::size_t>(n)];
  return log_prior_tail(prior_, n);
}

// ---------------------------------------------------------------------------

std::span<const double> LogLRWindow::row(Index k, std::size_t g) const {
  const Index first = std::max<Index>(k_begin, 0);
  const std::size_t block = grid * static_cast<std::size_t>(streams);
  const std::size_t offset = static_cast<std::size_t>(k - first) * block + g * static_cast<std::size_t>(streams);
  return {values.data() + offset, static_cast<std::size_t>(streams)};
}

double log_double_mixture(std::span<const double> block, const SubsetWeights& weights, const GridSpec& grid) {
  const auto n = static_cast<std::size_t>(weights.streams());
  double acc = kNegInf;
  for (std::size_t g = 0; g < grid.size(); ++g)
    acc = log_add_exp(acc, std::log(grid.weights[g]) + mixture_lr_dp(block.subspan(g * n, n), weights));
  return acc;
}

namespace {

void check_window(const LogLRWindow& w, const SubsetWeights& weights, const GridSpec& grid) {
  if (w.n < 1) throw std::invalid_argument("direct statistic: n must be >= 1");
  if (w.k_begin < -1 || w.k_end > w.n || w.k_begin > w.k_end)
    throw std::invalid_argument("direct statistic: change-point range outside [-1, n)");
  if (w.streams != weights.streams() || w.grid != grid.size())
    throw std::invalid_argument("direct statistic: window shape does not match weights/grid");
  const Index first = std::max<Index>(w.k_begin, 0);
  const auto rows = static_cast<std::size_t>(std::max<Index>(w.k_end - first, 0));
  if (w.values.size() < rows * w.grid * static_cast<std::size_t>(w.streams))
    throw std::invalid_argument("direct statistic: window shorter than the requested range");
  if (w.k_begin == -1 && w.k_end < 1) throw std::invalid_argument("direct statistic: head term needs LR(0, n)");
}

std::span<const double> block_at(const LogLRWindow& w, Index k) {
  const Index first = std::max<Index>(w.k_begin, 0);
  const std::size_t block = w.grid * static_cast<std::size_t>(w.streams);
  return {w.values.data() + static_cast<std::size_t>(k - first) * block, block};
}

}  // namespace

double shiryaev_direct(const LogLRWindow& window, const PriorTable& prior, const SubsetWeights& weights,
                       const GridSpec& grid) {
  check_window(window, weights, grid);
  double acc = kNegInf;
  const Index first = std::max<Index>(window.k_begin, 0);
  if (window.k_begin == -1 && prior.log_head() > kNegInf)
    acc = prior.log_head() + log_double_mixture(block_at(window, 0), weights, grid);
  for (Index k = first; k < window.k_end; ++k) {
    const double lm = prior.log_mass(k);
    if (lm == kNegInf) continue;
    acc = log_add_exp(acc, lm + log_double_mixture(block_at(window, k), weights, grid));
  }
  const double lt = prior.log_tail(window.n);
  if (lt == kNegInf) return acc == kNegInf ? kNegInf : std::numeric_limits<double>::infinity();
  return acc - lt;
}

double sr_direct(const LogLRWindow& window, double omega, const SubsetWeights& weights, const GridSpec& grid) {
  check_window(window, weights, grid);
  if (!(omega >= 0.0)) throw std::invalid_argument("sr_direct: omega must be nonnegative");
  double acc = kNegInf;
  const Index first = std::max<Index>(window.k_begin, 0);
  if (window.k_begin == -1 && omega > 0.0)
    acc = std::log(omega) + log_double_mixture(block_at(window, 0), weights, grid);
  for (Index k = first; k < window.k_end; ++k)
    acc = log_add_exp(acc, log_double_mixture(block_at(window, k), weights, grid));
  return acc;
}

// ---------------------------------------------------------------------------

DetectorState::DetectorState(std::shared_ptr<const PriorTable> prior, SubsetWeights weights, GridSpec grid,
                             StatisticOptions options, bool k_independent)
    : prior_(std::move(prior)),
      weights_(std::move(weights)),
      grid_(std::move(grid)),
      options_(options),
      streams_(weights_.streams()) {
  if (!prior_) throw std::invalid_argument("detector state: missing prior table");
  grid_.validate(streams_);
  if (!k_independent)
    throw std::invalid_argument(
        "detector state: k-dependent increments cannot use the recursion or cumulative sums; "
        "evaluate shiryaev_direct/sr_direct on per-k windows instead");
  if (!(options_.omega >= 0.0)) throw std::invalid_argument("detector state: omega must be nonnegative");
  if (options_.window_m1) {
    if (*options_.window_m1 < 0) throw std::invalid_argument("detector state: window m1 must be nonnegative");
    if (options_.window_m0 < 0 || options_.window_m0 > *options_.window_m1)
      throw std::invalid_argument("detector state: need 0 <= m0 <= m1");
  }
  recursive_ = !options_.force_direct && streams_ <= kMaxEnumerableStreams;
  need_direct_ = !recursive_ || options_.window_m1.has_value();

  if (recursive_) {
    masks_ = enumerate_subsets(streams_, weights_.max_affected);
    const std::size_t g = grid_.size();
    log_pw_.resize(masks_.size() * g);
    for (std::size_t b = 0; b < masks_.size(); ++b)
      for (std::size_t j = 0; j < g; ++j) log_pw_[b * g + j] = std::log(weights_.weight(masks_[b])) + std::log(grid_.weights[j]);
    rec_s_.resize(masks_.size() * g);
    rec_r_.resize(masks_.size() * g);
    subset_sum_.resize(std::size_t{1} << streams_);
    scratch_.resize(masks_.size() * g);
  }
  reset();
}

void DetectorState::reset() {
  n_ = 0;
  saturated_ = false;
  const double q = prior_->prior().q;
  log_s_ = q > 0.0 ? std::log(q) - std::log1p(-q) : kNegInf;
  log_r_ = options_.omega > 0.0 ? std::log(options_.omega) : kNegInf;
  std::fill(rec_s_.begin(), rec_s_.end(), log_s_);
  std::fill(rec_r_.begin(), rec_r_.end(), log_r_);
  cum_.clear();
  cum_first_ = 0;
  if (need_direct_) cum_.emplace_back(grid_.size() * static_cast<std::size_t>(streams_), 0.0);
}

double DetectorState::clamp(double v) {
  if (v > kLogSaturation) {
    saturated_ = true;
    return kLogSaturation;
  }
  return v;
}

void DetectorState::update(std::span<const double> increments) {
  const std::size_t block = grid_.size() * static_cast<std::size_t>(streams_);
  if (increments.size() != block) throw std::invalid_argument("detector state: increment block has wrong size");
  ++n_;
  const bool full_regime = !windowed_regime();
  if (recursive_ && full_regime) update_recursive(increments);
  if (need_direct_) update_direct(increments);
}

void DetectorState::update_recursive(std::span<const double> increments) {
  const std::size_t g_count = grid_.size();
  const auto& prior = *prior_;
  const double lt_prev = prior.log_tail(n_ - 1);
  const double lt = prior.log_tail(n_);
  const double lm = prior.log_mass(n_ - 1);

  for (std::size_t g = 0; g < g_count; ++g) {
    const double* inc = increments.data() + g * static_cast<std::size_t>(streams_);
    subset_sum_[0] = 0.0;
    for (std::uint32_t mask = 1; mask < subset_sum_.size(); ++mask)
      subset_sum_[mask] = subset_sum_[mask & (mask - 1)] + inc[std::countr_zero(mask)];

    for (std::size_t b = 0; b < masks_.size(); ++b) {
      const double l = subset_sum_[masks_[b]];
      const std::size_t idx = b * g_count + g;
      if (options_.shiryaev) {
        double v;
        if (lt == kNegInf)
          v = std::numeric_limits<double>::infinity();
        else
          v = l + log_add_exp(rec_s_[idx] + lt_prev, lm) - lt;
        rec_s_[idx] = clamp(v);
      }
      if (options_.sr) rec_r_[idx] = clamp(l + log1p_exp(rec_r_[idx]));
    }
  }

  auto emit = [&](const std::vector<double>& comps) {
    for (std::size_t j = 0; j < comps.size(); ++j) scratch_[j] = log_pw_[j] + comps[j];
    return log_sum_exp(scratch_);
  };
  if (options_.shiryaev) log_s_ = emit(rec_s_);
  if (options_.sr) log_r_ = emit(rec_r_);
}

void DetectorState::update_direct(std::span<const double> increments) {
  std::vector<double> next = cum_.back();
  for (std::size_t j = 0; j < next.size(); ++j) next[j] += increments[j];
  cum_.push_back(std::move(next));
  if (options_.window_m1) {
    const Index keep_from = n_ - *options_.window_m1 - 1;
    while (cum_first_ < keep_from) {
      cum_.pop_front();
      ++cum_first_;
    }
  }

  if (windowed_regime()) {
    const Index m1 = *options_.window_m1;
    LogLRWindow w = window(n_ - m1 - 1);
    w.k_end = n_ - options_.window_m0;
    if (options_.shiryaev) log_s_ = clamp(shiryaev_direct(w, *prior_, weights_, grid_));
    if (options_.sr) log_r_ = clamp(sr_direct(w, options_.omega, weights_, grid_));
  } else if (!recursive_) {
    const LogLRWindow w = window(-1);
    if (options_.shiryaev) log_s_ = clamp(shiryaev_direct(w, *prior_, weights_, grid_));
    if (options_.sr) log_r_ = clamp(sr_direct(w, options_.omega, weights_, grid_));
  }
}

LogLRWindow DetectorState::window(Index k_begin) const {
  if (!need_direct_) throw std::logic_error("detector state: direct path not maintained");
  const Index first = std::max<Index>(k_begin, 0);
  if (first < cum_first_) throw std::invalid_argument("detector state: window reaches before the stored history");
  LogLRWindow w;
  w.n = n_;
  w.k_begin = k_begin;
  w.k_end = n_;
  w.streams = streams_;
  w.grid = grid_.size();
  const auto& now = cum_.back();
  w.values.reserve(static_cast<std::size_t>(n_ - first) * now.size());
  for (Index k = first; k < n_; ++k) {
    const auto& then = cum_[static_cast<std::size_t>(k - cum_first_)];
    for (std::size_t j = 0; j < now.size(); ++j) w.values.push_back(now[j] - then[j]);
  }
  return w;
}

void compute_increments(std::span<const std::unique_ptr<StreamLLR>> sources, const GridSpec& grid,
                        std::span<double> out) {
  const std::size_t n = sources.size();
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (std::size_t i = 0; i < n; ++i) out[g * n + i] = sources[i]->log_increment(grid.points[g][i]);
}

}  // namespace qcd
