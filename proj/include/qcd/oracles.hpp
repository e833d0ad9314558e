#pragma once

// Reference implementations used only to check the library. Everything here
// is written for clarity over speed: explicit subset enumeration, full sums
// over change points and joint densities built from scratch.

#include <optional>
#include <span>
#include <vector>

#include "qcd/model.hpp"
#include "qcd/scenarios.hpp"

namespace qcd::oracle {

/// log sum exp of the terms, skipping -inf.
double log_sum(std::span<const double> terms);

/// log( C sum_{B in P_K} prod_{i in B} p_i LR_i ) by listing every subset.
double mixture_lr(std::span<const double> log_lrs, std::span<const double> p, int max_affected);

/// log( C [prod (1 + p_i LR_i) - 1] ), valid for K = N.
double mixture_lr_product(std::span<const double> log_lrs, std::span<const double> p);

/// Stream log LR increments for t = 1..steps, each row grid x streams.
struct IncrementPath {
  int streams = 0;
  std::size_t grid = 0;
  std::vector<double> values;

  Index steps() const { return static_cast<Index>(values.size() / (grid * static_cast<std::size_t>(streams))); }
  double at(Index t, std::size_t g, int i) const;  // t is 1-based
};

struct MixingSpec {
  std::vector<double> p;
  int max_affected = 1;
  std::vector<double> grid_weights;
};

/// Candidate change points entering the statistic at time n. With no window
/// (or n <= m1) the full range is used, with the head term as k = -1.
struct KRange {
  Index first = -1;
  Index last = -1;  // inclusive
};
KRange change_point_range(Index n, std::optional<Index> m1, Index m0);

/// log S(n) and log R(n) for n = 1..steps summed term by term.
struct StatisticPath {
  std::vector<double> log_s;
  std::vector<double> log_r;
};
StatisticPath statistics(const IncrementPath& path, const PriorSpec& prior, const MixingSpec& mixing, double omega,
                         std::optional<Index> m1 = std::nullopt, Index m0 = 0);

/// P(nu >= n | X^n) from the joint densities of the scenario, for every n up
/// to the batch horizon. `grid_points` holds one theta per stream per point.
std::vector<double> posterior_tail(const ScenarioSpec& scenario, const PriorSpec& prior, const MixingSpec& mixing,
                                   const std::vector<std::vector<double>>& grid_points, const ObservationBatch& batch);

/// log f_theta(x_{k+1..k+n}) - log g(x_{k+1..k+n} | x_{1..k}) for one mixture
/// channel, from the pre-change joint density beta prod p1 + (1-beta) prod p2.
double mixture_llr(const MixtureChannelSpec& spec, double theta, std::span<const double> xs, Index k, Index n);

}  // namespace qcd::oracle
