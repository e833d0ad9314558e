#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "qcd/numeric.hpp"

namespace qcd {

/// Generator used for every simulated quantity. One instance per replication.
using Rng = std::mt19937_64;

/// Counter-style seeding: the stream for replication `index` depends only on
/// (master_seed, index), never on scheduling.
Rng make_rng(std::uint64_t master_seed, std::uint64_t index);

enum class PriorKind { Geometric, PolynomialTail, PointMass };

/// Distribution of the change point. Mass q sits on {nu <= -1}; the remaining
/// 1 - q is spread over k = 0, 1, 2, ...
///
///   Geometric       pi_k = (1-q) rho (1-rho)^k
///   PolynomialTail  pi_k = (1-q) (k+1)^{-(1+beta)} / zeta(1+beta)
///   PointMass       pi_{k0} = 1-q
struct PriorSpec {
  PriorKind kind = PriorKind::Geometric;
  double rho = 0.1;
  double beta = 1.0;
  double q = 0.0;
  Index k0 = 0;

  static PriorSpec geometric(double rho, double q = 0.0);
  static PriorSpec polynomial_tail(double beta, double q = 0.0);
  static PriorSpec point_mass(Index k0, double q = 0.0);

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

double prior_mass(const PriorSpec& prior, Index k);
/// P(nu >= n) restricted to nonnegative change points: sum_{k >= n} pi_k.
double prior_tail(const PriorSpec& prior, Index n);
double log_prior_mass(const PriorSpec& prior, Index k);
double log_prior_tail(const PriorSpec& prior, Index n);

/// Exponential right-tail rate mu = lim |log P(nu > n)| / n.
double prior_tail_rate(const PriorSpec& prior);
/// Mean sum_k k pi_k; +inf when it diverges.
double prior_mean(const PriorSpec& prior);

/// -1 with probability q, else k with probability pi_k.
Index sample_change(const PriorSpec& prior, Rng& rng);

/// Sentinel change point meaning "no change within any horizon".
inline constexpr Index kNoChange = std::numeric_limits<Index>::max();

struct ChangeSpec {
  Index nu = kNoChange;
  std::vector<int> subset;    // affected streams, strictly increasing
  std::vector<double> theta;  // one post-change parameter per affected stream

  /// Throws unless the subset is nonempty, inside [0, streams), of size <= max_affected,
  /// and theta matches it in length.
  void validate(int streams, int max_affected) const;
  bool affects(int stream) const;
  double theta_for(int stream) const;
};

/// Row-major horizon x streams matrix of observations.
struct ObservationBatch {
  Index horizon = 0;
  int streams = 0;
  std::vector<double> data;

  double at(Index t, int stream) const { return data[static_cast<std::size_t>(t * streams + stream)]; }
  std::span<const double> row(Index t) const {
    return {data.data() + t * streams, static_cast<std::size_t>(streams)};
  }
};

struct ScenarioSpec;

/// Draws `horizon` observation vectors. Streams in the change subset follow the
/// post-change conditional law from index nu+1 on (observation nu is the last
/// pre-change sample). The noise draws do not depend on the change, so equal
/// seeds with no change inside the horizon give bitwise-equal batches.
ObservationBatch generate(const ScenarioSpec& scenario, const ChangeSpec& change, Index horizon, Rng& rng);

}  // namespace qcd
