#include "qcd/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qcd/scenarios.hpp"

namespace qcd {

Rng make_rng(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

PriorSpec PriorSpec::geometric(double rho, double q) {
  PriorSpec p;
  p.kind = PriorKind::Geometric;
  p.rho = rho;
  p.q = q;
  p.validate();
  return p;
}

PriorSpec PriorSpec::polynomial_tail(double beta, double q) {
  PriorSpec p;
  p.kind = PriorKind::PolynomialTail;
  p.beta = beta;
  p.q = q;
  p.validate();
  return p;
}

PriorSpec PriorSpec::point_mass(Index k0, double q) {
  PriorSpec p;
  p.kind = PriorKind::PointMass;
  p.k0 = k0;
  p.q = q;
  p.validate();
  return p;
}

void PriorSpec::validate() const {
  if (!(q >= 0.0 && q < 1.0)) throw std::invalid_argument("prior: q must lie in [0, 1)");
  switch (kind) {
    case PriorKind::Geometric:
      if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("prior: rho must lie in (0, 1)");
      break;
    case PriorKind::PolynomialTail:
      if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("prior: beta must be positive");
      break;
    case PriorKind::PointMass:
      if (k0 < 0) throw std::invalid_argument("prior: k0 must be nonnegative");
      break;
  }
}

namespace {

// sum_{k >= n} (k+1)^{-s} = hurwitz_zeta(s, n+1)
double poly_tail_unnormalized(double s, Index n) { return hurwitz_zeta(s, static_cast<double>(n) + 1.0); }

double poly_normalizer(double s) { return hurwitz_zeta(s, 1.0); }

}  // namespace

double prior_mass(const PriorSpec& prior, Index k) {
  if (k < 0) throw std::invalid_argument("prior_mass: k must be nonnegative");
  const double body = 1.0 - prior.q;
  switch (prior.kind) {
    case PriorKind::Geometric:
      return body * prior.rho * std::pow(1.0 - prior.rho, static_cast<double>(k));
    case PriorKind::PolynomialTail: {
      const double s = 1.0 + prior.beta;
      return body * std::pow(static_cast<double>(k) + 1.0, -s) / poly_normalizer(s);
    }
    case PriorKind::PointMass:
      return k == prior.k0 ? body : 0.0;
  }
  return 0.0;
}

double prior_tail(const PriorSpec& prior, Index n) {
  if (n < 0) throw std::invalid_argument("prior_tail: n must be nonnegative");
  const double body = 1.0 - prior.q;
  switch (prior.kind) {
    case PriorKind::Geometric:
      return body * std::pow(1.0 - prior.rho, static_cast<double>(n));
    case PriorKind::PolynomialTail: {
      if (n == 0) return body;
      const double s = 1.0 + prior.beta;
      return body * poly_tail_unnormalized(s, n) / poly_normalizer(s);
    }
    case PriorKind::PointMass:
      return n <= prior.k0 ? body : 0.0;
  }
  return 0.0;
}

double log_prior_mass(const PriorSpec& prior, Index k) {
  if (k < 0) throw std::invalid_argument("log_prior_mass: k must be nonnegative");
  const double log_body = std::log1p(-prior.q);
  switch (prior.kind) {
    case PriorKind::Geometric:
      return log_body + std::log(prior.rho) + static_cast<double>(k) * std::log1p(-prior.rho);
    case PriorKind::PolynomialTail: {
      const double s = 1.0 + prior.beta;
      return log_body - s * std::log(static_cast<double>(k) + 1.0) - std::log(poly_normalizer(s));
    }
    case PriorKind::PointMass:
      return k == prior.k0 ? log_body : kNegInf;
  }
  return kNegInf;
}

double log_prior_tail(const PriorSpec& prior, Index n) {
  if (n < 0) throw std::invalid_argument("log_prior_tail: n must be nonnegative");
  const double log_body = std::log1p(-prior.q);
  switch (prior.kind) {
    case PriorKind::Geometric:
      return log_body + static_cast<double>(n) * std::log1p(-prior.rho);
    case PriorKind::PolynomialTail:
    case PriorKind::PointMass: {
      const double t = prior_tail(prior, n);
      return t > 0.0 ? std::log(t) : kNegInf;
    }
  }
  return kNegInf;
}

double prior_tail_rate(const PriorSpec& prior) {
  switch (prior.kind) {
    case PriorKind::Geometric:
      return -std::log1p(-prior.rho);
    case PriorKind::PolynomialTail:
      return 0.0;
    case PriorKind::PointMass:
      return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

double prior_mean(const PriorSpec& prior) {
  const double body = 1.0 - prior.q;
  switch (prior.kind) {
    case PriorKind::Geometric:
      return body * (1.0 - prior.rho) / prior.rho;
    case PriorKind::PolynomialTail: {
      // sum_k k (k+1)^{-s} = zeta(s-1) - zeta(s), finite only for s > 2.
      const double s = 1.0 + prior.beta;
      if (s <= 2.0) return std::numeric_limits<double>::infinity();
      return body * (poly_normalizer(s - 1.0) - poly_normalizer(s)) / poly_normalizer(s);
    }
    case PriorKind::PointMass:
      return body * static_cast<double>(prior.k0);
  }
  return 0.0;
}

Index sample_change(const PriorSpec& prior, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (u < prior.q) return -1;
  // Rescale to a uniform on (0, 1] over the nonnegative part.
  const double v = 1.0 - (u - prior.q) / (1.0 - prior.q);
  switch (prior.kind) {
    case PriorKind::Geometric: {
      // P(nu >= k | nu >= 0) = (1-rho)^k; invert the survival function.
      if (v <= 0.0) return 0;
      const double k = std::floor(std::log(v) / std::log1p(-prior.rho));
      return static_cast<Index>(std::max(0.0, k));
    }
    case PriorKind::PolynomialTail: {
      // Smallest k with P(nu >= k+1 | nu >= 0) < v.
      const double body = 1.0 - prior.q;
      auto surv = [&](Index k) { return prior_tail(prior, k) / body; };
      Index lo = 0, hi = 1;
      while (surv(hi + 1) >= v) {
        lo = hi + 1;
        if (hi > (std::numeric_limits<Index>::max() >> 2)) return hi;
        hi *= 2;
      }
      while (lo < hi) {
        const Index mid = lo + (hi - lo) / 2;
        if (surv(mid + 1) < v)
          hi = mid;
        else
          lo = mid + 1;
      }
      return lo;
    }
    case PriorKind::PointMass:
      return prior.k0;
  }
  return 0;
}

void ChangeSpec::validate(int streams, int max_affected) const {
  if (subset.empty()) throw std::invalid_argument("change: affected subset is empty");
  if (static_cast<int>(subset.size()) > max_affected)
    throw std::invalid_argument("change: subset has more than K streams");
  if (theta.size() != subset.size()) throw std::invalid_argument("change: theta must match the subset");
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] < 0 || subset[j] >= streams)
      throw std::invalid_argument("change: stream index " + std::to_string(subset[j]) + " out of range");
    if (j > 0 && subset[j] <= subset[j - 1]) throw std::invalid_argument("change: subset must be strictly increasing");
  }
  if (nu < -1) throw std::invalid_argument("change: nu must be >= -1");
}

bool ChangeSpec::affects(int stream) const { return std::binary_search(subset.begin(), subset.end(), stream); }

double ChangeSpec::theta_for(int stream) const {
  auto it = std::lower_bound(subset.begin(), subset.end(), stream);
  if (it == subset.end() || *it != stream) return 0.0;
  return theta[static_cast<std::size_t>(it - subset.begin())];
}

ObservationBatch generate(const ScenarioSpec& scenario, const ChangeSpec& change, Index horizon, Rng& rng) {
  if (horizon <= 0) throw std::invalid_argument("generate: horizon must be positive");
  ScenarioSampler sampler(scenario, change, rng);
  ObservationBatch batch;
  batch.horizon = horizon;
  batch.streams = scenario.streams();
  batch.data.resize(static_cast<std::size_t>(horizon * batch.streams));
  for (Index t = 0; t < horizon; ++t)
    sampler.next(rng, std::span<double>(batch.data.data() + t * batch.streams, static_cast<std::size_t>(batch.streams)));
  return batch;
}

}  // namespace qcd
