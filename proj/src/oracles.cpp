#include "qcd/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qcd::oracle {

double log_sum(std::span<const double> terms) {
  double top = -std::numeric_limits<double>::infinity();
  for (double t : terms) top = std::max(top, t);
  if (std::isinf(top)) return top;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

namespace {

std::vector<std::uint32_t> subsets(int n, int k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 1; m < (1u << n); ++m)
    if (std::popcount(m) <= k) out.push_back(m);
  return out;
}

double log_unnormalized_weight(std::uint32_t mask, std::span<const double> p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (mask & (1u << i)) s += std::log(p[i]);
  return s;
}

double log_normalizer(std::span<const double> p, int k) {
  std::vector<double> terms;
  for (auto m : subsets(static_cast<int>(p.size()), k)) terms.push_back(log_unnormalized_weight(m, p));
  return -log_sum(terms);
}

double log_gauss(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double mixture_lr(std::span<const double> log_lrs, std::span<const double> p, int max_affected) {
  const int n = static_cast<int>(log_lrs.size());
  if (n > 25) throw std::invalid_argument("oracle: too many streams to enumerate");
  std::vector<double> terms;
  for (auto m : subsets(n, max_affected)) {
    double t = log_unnormalized_weight(m, p);
    for (int i = 0; i < n; ++i)
      if (m & (1u << i)) t += log_lrs[static_cast<std::size_t>(i)];
    terms.push_back(t);
  }
  return log_normalizer(p, max_affected) + log_sum(terms);
}

double mixture_lr_product(std::span<const double> log_lrs, std::span<const double> p) {
  // log(prod(1 + y_i) - 1) with y_i = p_i LR_i, via expm1 of the summed log1p.
  double log_prod = 0.0;
  double log_prod_p = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ly = std::log(p[i]) + log_lrs[i];
    log_prod += ly > 0 ? ly + std::log1p(std::exp(-ly)) : std::log1p(std::exp(ly));
    log_prod_p += std::log1p(p[i]);
  }
  auto log_expm1 = [](double a) { return a > 30.0 ? a + std::log1p(-std::exp(-a)) : std::log(std::expm1(a)); };
  return log_expm1(log_prod) - log_expm1(log_prod_p);
}

double IncrementPath::at(Index t, std::size_t g, int i) const {
  const std::size_t block = grid * static_cast<std::size_t>(streams);
  return values[static_cast<std::size_t>(t - 1) * block + g * static_cast<std::size_t>(streams) +
                static_cast<std::size_t>(i)];
}

KRange change_point_range(Index n, std::optional<Index> m1, Index m0) {
  if (!m1 || n <= *m1) return {-1, n - 1};
  return {n - *m1 - 1, n - 1 - m0};
}

StatisticPath statistics(const IncrementPath& path, const PriorSpec& prior, const MixingSpec& mixing, double omega,
                         std::optional<Index> m1, Index m0) {
  const Index steps = path.steps();
  const int n_streams = path.streams;
  // cum[t][g][i] = sum of increments 1..t
  std::vector<std::vector<std::vector<double>>> cum(
      static_cast<std::size_t>(steps + 1),
      std::vector<std::vector<double>>(path.grid, std::vector<double>(static_cast<std::size_t>(n_streams), 0.0)));
  for (Index t = 1; t <= steps; ++t)
    for (std::size_t g = 0; g < path.grid; ++g)
      for (int i = 0; i < n_streams; ++i)
        cum[static_cast<std::size_t>(t)][g][static_cast<std::size_t>(i)] =
            cum[static_cast<std::size_t>(t - 1)][g][static_cast<std::size_t>(i)] + path.at(t, g, i);

  const auto masks = subsets(n_streams, mixing.max_affected);
  const double log_c = log_normalizer(mixing.p, mixing.max_affected);

  StatisticPath out;
  for (Index n = 1; n <= steps; ++n) {
    const KRange range = change_point_range(n, m1, m0);
    std::vector<double> s_terms, r_terms;
    for (Index k = range.first; k <= range.last; ++k) {
      const Index from = std::max<Index>(k, 0);
      const double coef_s = k < 0 ? (prior.q > 0 ? std::log(prior.q) : -INFINITY) : std::log(prior_mass(prior, k));
      const double coef_r = k < 0 ? (omega > 0 ? std::log(omega) : -INFINITY) : 0.0;
      for (auto m : masks) {
        const double lw = log_c + log_unnormalized_weight(m, mixing.p);
        for (std::size_t g = 0; g < path.grid; ++g) {
          double llr = 0.0;
          for (int i = 0; i < n_streams; ++i)
            if (m & (1u << i))
              llr += cum[static_cast<std::size_t>(n)][g][static_cast<std::size_t>(i)] -
                     cum[static_cast<std::size_t>(from)][g][static_cast<std::size_t>(i)];
          const double base = lw + std::log(mixing.grid_weights[g]) + llr;
          s_terms.push_back(coef_s + base);
          r_terms.push_back(coef_r + base);
        }
      }
    }
    out.log_s.push_back(log_sum(s_terms) - std::log(prior_tail(prior, n)));
    out.log_r.push_back(log_sum(r_terms));
  }
  return out;
}

namespace {

// Per-stream cumulative joint log densities: pre[t] = log g(x_1..x_t) and
// post[g][t] = sum_{s <= t} log f_theta_g(x_s | x_1..x_{s-1}).
struct StreamDensities {
  std::vector<double> pre;
  std::vector<std::vector<double>> post;
};

StreamDensities ar_densities(const ARChannelSpec& spec, std::span<const double> x,
                             const std::vector<double>& thetas) {
  const auto h = x.size();
  StreamDensities d;
  d.pre.assign(h + 1, 0.0);
  d.post.assign(thetas.size(), std::vector<double>(h + 1, 0.0));
  const std::size_t p = spec.coeffs.size();
  const std::size_t period = spec.signal.size();
  auto signal = [&](std::size_t s) { return spec.signal[(s - 1) % period]; };  // s is 1-based
  for (std::size_t s = 1; s <= h; ++s) {
    const std::size_t order = std::min(p, s - 1);
    double pred = 0.0, sres = signal(s);
    for (std::size_t j = 1; j <= order; ++j) {
      pred += spec.coeffs[j - 1] * x[s - 1 - j];
      sres -= spec.coeffs[j - 1] * signal(s - j);
    }
    d.pre[s] = d.pre[s - 1] + log_gauss(x[s - 1], pred, spec.sigma);
    for (std::size_t g = 0; g < thetas.size(); ++g)
      d.post[g][s] = d.post[g][s - 1] + log_gauss(x[s - 1], pred + thetas[g] * sres, spec.sigma);
  }
  return d;
}

StreamDensities mixture_densities(const MixtureChannelSpec& spec, std::span<const double> x,
                                   const std::vector<double>& thetas) {
  const auto h = x.size();
  StreamDensities d;
  d.pre.assign(h + 1, 0.0);
  d.post.assign(thetas.size(), std::vector<double>(h + 1, 0.0));
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t s = 1; s <= h; ++s) {
    s1 += log_gauss(x[s - 1], spec.mu1, spec.sigma);
    s2 += log_gauss(x[s - 1], spec.mu2, spec.sigma);
    const double both[2] = {std::log(spec.beta_mix) + s1, std::log1p(-spec.beta_mix) + s2};
    d.pre[s] = log_sum(both);
    for (std::size_t g = 0; g < thetas.size(); ++g)
      d.post[g][s] = d.post[g][s - 1] + log_gauss(x[s - 1], thetas[g], spec.sigma);
  }
  return d;
}

}  // namespace

std::vector<double> posterior_tail(const ScenarioSpec& scenario, const PriorSpec& prior, const MixingSpec& mixing,
                                   const std::vector<std::vector<double>>& grid_points, const ObservationBatch& batch) {
  const int n_streams = scenario.streams();
  const auto horizon = static_cast<std::size_t>(batch.horizon);
  std::vector<StreamDensities> dens;
  for (int i = 0; i < n_streams; ++i) {
    std::vector<double> x(horizon), thetas;
    for (std::size_t t = 0; t < horizon; ++t) x[t] = batch.at(static_cast<Index>(t), i);
    for (const auto& pt : grid_points) thetas.push_back(pt[static_cast<std::size_t>(i)]);
    const auto& ch = scenario.channels[static_cast<std::size_t>(i)];
    if (const auto* ar = std::get_if<ARChannelSpec>(&ch))
      dens.push_back(ar_densities(*ar, x, thetas));
    else
      dens.push_back(mixture_densities(std::get<MixtureChannelSpec>(ch), x, thetas));
  }

  const auto masks = subsets(n_streams, mixing.max_affected);
  const double log_c = log_normalizer(mixing.p, mixing.max_affected);
  std::vector<double> out;
  for (std::size_t n = 1; n <= horizon; ++n) {
    double pre_all = 0.0;
    for (const auto& d : dens) pre_all += d.pre[n];
    const double no_change = std::log(prior_tail(prior, static_cast<Index>(n))) + pre_all;
    std::vector<double> terms{no_change};
    for (Index k = -1; k < static_cast<Index>(n); ++k) {
      const double coef = k < 0 ? (prior.q > 0 ? std::log(prior.q) : -INFINITY) : std::log(prior_mass(prior, k));
      if (std::isinf(coef)) continue;
      const auto from = static_cast<std::size_t>(std::max<Index>(k, 0));
      for (auto m : masks) {
        const double lw = log_c + log_unnormalized_weight(m, mixing.p);
        for (std::size_t g = 0; g < grid_points.size(); ++g) {
          double joint = 0.0;
          for (int i = 0; i < n_streams; ++i) {
            const auto& d = dens[static_cast<std::size_t>(i)];
            if (m & (1u << i))
              joint += d.pre[from] + d.post[g][n] - d.post[g][from];
            else
              joint += d.pre[n];
          }
          terms.push_back(coef + lw + std::log(mixing.grid_weights[g]) + joint);
        }
      }
    }
    out.push_back(std::exp(no_change - log_sum(terms)));
  }
  return out;
}

double mixture_llr(const MixtureChannelSpec& spec, double theta, std::span<const double> xs, Index k, Index n) {
  if (k < 0 || n < 0 || static_cast<std::size_t>(k + n) > xs.size())
    throw std::invalid_argument("oracle: observation range out of bounds");
  const std::vector<double> thetas{theta};
  const auto d = mixture_densities(spec, xs.first(static_cast<std::size_t>(k + n)), thetas);
  const auto ku = static_cast<std::size_t>(k), end = static_cast<std::size_t>(k + n);
  return (d.post[0][end] - d.post[0][ku]) - (d.pre[end] - d.pre[ku]);
}

}  // namespace qcd::oracle
