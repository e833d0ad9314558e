#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/likelihood.hpp"
#include "qcd/montecarlo.hpp"
#include "qcd/oracles.hpp"
#include "qcd/statistics.hpp"

namespace qcd::verify {

struct CheckResult {
  std::string suite;
  std::string invariant;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t cases = 0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int paths = 100;    // random cases per quantified check
  Index max_n = 200;  // path length for the statistic checks
  std::size_t mc_replications = 20000;
  int workers = 1;
};

/// One statistic computation: increments for t = 1..steps fed in order.
struct StatisticCase {
  std::shared_ptr<const PriorTable> prior;
  SubsetWeights weights;
  GridSpec grid;
  StatisticOptions options;
  oracle::IncrementPath increments;
};

/// Fills log S(n) and log R(n) for n = 1..steps.
using StatisticImpl = std::function<void(const StatisticCase&, std::vector<double>& log_s, std::vector<double>& log_r)>;
using MixtureImpl = std::function<double(std::span<const double>, const SubsetWeights&)>;

/// The library's running statistic (recursive or direct as the options say).
StatisticImpl library_statistics();

/// The two test scenarios used throughout: three AR channels, three mixture channels.
ScenarioSpec ar_scenario();
ScenarioSpec mixture_scenario();
GridSpec two_point_grid(int streams);

/// Stream log LR increments on a path simulated with a prior-drawn change.
oracle::IncrementPath simulate_increments(const ScenarioSpec& scenario, const PriorSpec& prior,
                                          const SubsetWeights& weights, const GridSpec& grid, Index steps, Rng& rng,
                                          ObservationBatch* batch = nullptr);

std::vector<CheckResult> mixture_lr(const VerifyOptions& opts, const MixtureImpl& impl = mixture_lr_dp);
std::vector<CheckResult> recursion(const VerifyOptions& opts, const StatisticImpl& impl = library_statistics());
std::vector<CheckResult> window(const VerifyOptions& opts, const StatisticImpl& impl = library_statistics());
std::vector<CheckResult> posterior(const VerifyOptions& opts);
std::vector<CheckResult> submartingale(const VerifyOptions& opts);
std::vector<CheckResult> telescoping(const VerifyOptions& opts);

const std::vector<std::string>& suite_names();
/// Runs a named suite, or every suite for "all". Throws on an unknown name.
std::vector<CheckResult> run_suite(const std::string& name, const VerifyOptions& opts);

/// Mean of R(n) under the no-change law at each requested n, for a single
/// Gaussian stream and a known theta.
std::vector<MCEstimate> sr_mean(double theta, double omega, const std::vector<Index>& ns, std::size_t replications,
                                std::uint64_t seed, int workers);

}  // namespace qcd::verify
