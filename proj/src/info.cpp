#include "qcd/info.hpp"

#include <cmath>
#include <stdexcept>

namespace qcd {

double kl_ar(double theta, double q, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kl_ar: sigma must be positive");
  if (!(q > 0.0)) throw std::invalid_argument("kl_ar: Q must be positive");
  return theta * theta * q / (2.0 * sigma * sigma);
}

double kl_mixture(double theta, double mu2, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kl_mixture: sigma must be positive");
  const double d = theta - mu2;
  return d * d / (2.0 * sigma * sigma);
}

double kl_subset(std::span<const int> subset, std::span<const double> per_stream) {
  if (subset.empty()) throw std::invalid_argument("kl_subset: empty subset");
  double sum = 0.0;
  for (int i : subset) {
    if (i < 0 || static_cast<std::size_t>(i) >= per_stream.size())
      throw std::invalid_argument("kl_subset: stream index out of range");
    sum += per_stream[static_cast<std::size_t>(i)];
  }
  return sum;
}

double channel_information(const ChannelSpec& channel, double theta) {
  if (const auto* ar = std::get_if<ARChannelSpec>(&channel))
    return kl_ar(theta, q_constant(ar->signal, ar->coeffs), ar->sigma);
  const auto& mix = std::get<MixtureChannelSpec>(channel);
  return kl_mixture(theta, mix.mu2, mix.sigma);
}

double change_information(const ScenarioSpec& scenario, const ChangeSpec& change) {
  if (change.subset.empty()) throw std::invalid_argument("change_information: empty subset");
  if (change.subset.size() != change.theta.size())
    throw std::invalid_argument("change_information: subset and theta lengths differ");
  double sum = 0.0;
  for (std::size_t j = 0; j < change.subset.size(); ++j) {
    const int i = change.subset[j];
    if (i < 0 || i >= scenario.streams()) throw std::invalid_argument("change_information: stream out of range");
    sum += channel_information(scenario.channels[static_cast<std::size_t>(i)], change.theta[j]);
  }
  return sum;
}

namespace {

double reciprocal_power(double info, double mu, double r) {
  const double denom = info + mu;
  if (!(denom > 0.0)) throw std::invalid_argument("d_constant: I + mu must be positive");
  return std::pow(denom, -r);
}

}  // namespace

double d_constant(const SubsetWeights& weights, const GridSpec& grid, std::span<const std::vector<double>> per_point,
                  double mu, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("d_constant: r must be positive");
  if (!(mu >= 0.0)) throw std::invalid_argument("d_constant: mu must be nonnegative");
  if (per_point.size() != grid.size()) throw std::invalid_argument("d_constant: one info vector per grid point");
  const int n = weights.streams();
  for (const auto& v : per_point)
    if (static_cast<int>(v.size()) != n) throw std::invalid_argument("d_constant: info vector has wrong length");

  double total = 0.0;
  if (n <= kMaxEnumerationOracle) {
    for (std::uint32_t mask : enumerate_subsets(n, weights.max_affected)) {
      const double pb = weights.weight(mask);
      double inner = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double info = 0.0;
        for (int i = 0; i < n; ++i)
          if (mask & (1u << i)) info += per_point[g][static_cast<std::size_t>(i)];
        inner += grid.weights[g] * reciprocal_power(info, mu, r);
      }
      total += pb * inner;
    }
    return total;
  }

  // Too many subsets to list: with equal per-stream information at each grid
  // point I_B depends on |B| only, and the size-j mass is C e_j(p).
  for (const auto& v : per_point)
    for (double x : v)
      if (x != v.front()) throw std::invalid_argument("d_constant: large N requires equal per-stream information");
  const auto e = elementary_symmetric(weights.p, weights.max_affected);
  for (int j = 1; j <= weights.max_affected; ++j) {
    double inner = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
      inner += grid.weights[g] * reciprocal_power(j * per_point[g].front(), mu, r);
    total += weights.normalizer * e[static_cast<std::size_t>(j)] * inner;
  }
  return total;
}

double d_constant(const SubsetWeights& weights, const GridSpec& grid, const ScenarioSpec& scenario, double mu,
                  double r) {
  grid.validate(scenario.streams());
  std::vector<std::vector<double>> per_point;
  per_point.reserve(grid.size());
  for (const auto& point : grid.points) {
    std::vector<double> v;
    for (int i = 0; i < scenario.streams(); ++i)
      v.push_back(channel_information(scenario.channels[static_cast<std::size_t>(i)], point[static_cast<std::size_t>(i)]));
    per_point.push_back(std::move(v));
  }
  return d_constant(weights, grid, per_point, mu, r);
}

MCEstimate estimate_kl_slope(const ScenarioSpec& scenario, const ChangeSpec& change, Index n, const MCConfig& mc) {
  if (n < 1) throw std::invalid_argument("estimate_kl_slope: n must be >= 1");
  if (mc.replications == 0) throw std::invalid_argument("mc: replications must be positive");
  if (mc.workers < 1) throw std::invalid_argument("mc: workers must be positive");
  ChangeSpec at_zero = change;
  at_zero.nu = 0;
  scenario.validate();
  scenario.validate_change(at_zero, scenario.streams());

  const auto prototypes = make_stream_llrs(scenario);
  std::vector<double> slopes(mc.replications);
  const auto streams = static_cast<std::size_t>(scenario.streams());
  parallel_for(mc.replications, mc.workers, [&](std::size_t, std::size_t rep) {
    Rng rng = make_rng(mc.master_seed, rep);
    std::vector<std::unique_ptr<StreamLLR>> sources;
    for (int i : at_zero.subset) sources.push_back(prototypes[static_cast<std::size_t>(i)]->clone());
    ScenarioSampler sampler(scenario, at_zero, rng);
    std::vector<double> x(streams);
    double llr = 0.0;
    for (Index t = 1; t <= n; ++t) {
      sampler.next(rng, x);
      for (std::size_t j = 0; j < sources.size(); ++j) {
        sources[j]->push(x[static_cast<std::size_t>(at_zero.subset[j])]);
        llr += sources[j]->log_increment(at_zero.theta[j]);
      }
    }
    slopes[rep] = llr / static_cast<double>(n);
  });

  Accumulator acc;
  for (double s : slopes) acc.add(s);
  MCEstimate e;
  e.mean = acc.mean();
  e.std_error = acc.std_error();
  e.n_effective = acc.count();
  return e;
}

}  // namespace qcd
