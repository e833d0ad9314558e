#pragma once

#include <span>
#include <vector>

#include "qcd/likelihood.hpp"
#include "qcd/montecarlo.hpp"
#include "qcd/scenarios.hpp"
#include "qcd/statistics.hpp"

namespace qcd {

/// Per-stream Kullback-Leibler numbers (nats per observation) and the prior
/// tail rate.
struct InfoNumbers {
  std::vector<double> per_stream;
  double mu = 0.0;
};

/// theta^2 Q / (2 sigma^2)
double kl_ar(double theta, double q, double sigma);

/// (theta - mu2)^2 / (2 sigma^2)
double kl_mixture(double theta, double mu2, double sigma);

/// Sum of per-stream numbers over the subset. Rejects an empty subset.
double kl_subset(std::span<const int> subset, std::span<const double> per_stream);

/// Information number of one channel at parameter theta.
double channel_information(const ChannelSpec& channel, double theta);

/// I_{B,theta} for the change's subset and parameters.
double change_information(const ScenarioSpec& scenario, const ChangeSpec& change);

/// D_{mu,r} = sum_B p_B sum_g w_g (I_{B,theta_g} + mu)^{-r}. `per_point` holds
/// one per-stream information vector for each grid point.
double d_constant(const SubsetWeights& weights, const GridSpec& grid,
                  std::span<const std::vector<double>> per_point, double mu, double r);

/// Same, with information numbers computed from the scenario at each grid point.
double d_constant(const SubsetWeights& weights, const GridSpec& grid, const ScenarioSpec& scenario, double mu,
                  double r);

/// Monte Carlo estimate of lambda_{B,theta}(0, n) / n under the change-at-0 law.
MCEstimate estimate_kl_slope(const ScenarioSpec& scenario, const ChangeSpec& change, Index n, const MCConfig& mc);

}  // namespace qcd
