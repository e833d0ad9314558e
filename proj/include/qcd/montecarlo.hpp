#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/model.hpp"

namespace qcd {

struct MCConfig {
  std::size_t replications = 1000;
  std::uint64_t master_seed = 1;
  Index horizon = 1000;
  int workers = 1;

  void validate() const;
  friend bool operator==(const MCConfig&, const MCConfig&) = default;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_effective = 0;
  double censored_fraction = 0.0;
  /// Replications dropped by conditioning (e.g. false alarms when estimating delay).
  std::size_t discarded = 0;
  /// Set when censored runs cannot be bounded tightly enough for the PFA target.
  bool insufficient_horizon = false;
};

/// Count / mean / sum of squared deviations with the pairwise merge rule.
class Accumulator {
 public:
  void add(double x);
  void merge(const Accumulator& other);

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const;  // sample variance (n - 1)
  double std_error() const;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Runs body(worker, index) for every index in [0, count) on `workers`
/// threads. Indices are handed out dynamically; results must be written to
/// per-index slots so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(std::size_t{0}, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(w, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// How the change is drawn for each replication.
enum class ChangeMode {
  None,      // pre-change law only
  Fixed,     // the given change, including nu
  PriorNu,   // nu from the prior; subset and theta from the given change
  PriorAll,  // nu from the prior, subset from p_B, theta from the mixing grid
};

struct ChangePlan {
  ChangeMode mode = ChangeMode::None;
  ChangeSpec change;

  static ChangePlan none() { return {}; }
  static ChangePlan fixed(ChangeSpec c) { return {ChangeMode::Fixed, std::move(c)}; }
  static ChangePlan prior_nu(ChangeSpec c) { return {ChangeMode::PriorNu, std::move(c)}; }
  static ChangePlan prior_all() { return {ChangeMode::PriorAll, {}}; }
};

struct ReplicationRecord {
  std::size_t replication = 0;
  Index nu = kNoChange;
  std::optional<Index> stopped_at;
  std::vector<int> subset;
  std::size_t grid_point = 0;

  bool censored() const { return !stopped_at.has_value(); }
  bool false_alarm() const { return stopped_at && nu != kNoChange && *stopped_at <= nu; }
  /// T - max(nu, 0); a change before the first observation counts from 0.
  Index delay() const;
};

/// One record per replication, in replication order. With `stop_at_nu` a run
/// also ends once n reaches nu (enough to decide {T <= nu}).
std::vector<ReplicationRecord> simulate(const DetectionProblem& problem, const ChangePlan& plan, const MCConfig& mc,
                                        bool stop_at_nu = false);

/// Reference PFA bound: 1/(1+A) for Shiryaev kinds, (omega b + mean)/A for SR.
double pfa_bound(const DetectionProblem& problem);

/// Rao-Blackwellized PFA: E_inf[P(nu >= T)] from pre-change runs only.
MCEstimate estimate_pfa(const DetectionProblem& problem, const MCConfig& mc);
MCEstimate pfa_from_records(const DetectionProblem& problem, const std::vector<ReplicationRecord>& records,
                            Index horizon);

/// Naive PFA: nu drawn from the prior, indicator of {T <= nu}.
MCEstimate estimate_pfa_two_stage(const DetectionProblem& problem, const MCConfig& mc);

/// E_k[(T - k)^r | T > k] for the fixed change in `change`.
MCEstimate estimate_conditional_delay(const DetectionProblem& problem, const ChangeSpec& change, double r,
                                      const MCConfig& mc);

/// E^pi[(T - nu)^r | T > nu] with nu drawn from the prior.
MCEstimate estimate_bayes_delay(const DetectionProblem& problem, const ChangeSpec& change, double r,
                                const MCConfig& mc);

/// Delay moment over records; false alarms are discarded and censored runs excluded.
MCEstimate delay_from_records(const std::vector<ReplicationRecord>& records, double r);

/// PFA + c E[((T - nu)^+)^r] with (nu, B, theta) drawn from (prior, p_B, W).
/// Censored runs enter with T = horizon and are reported in censored_fraction.
MCEstimate estimate_average_risk(const DetectionProblem& problem, double cost, double r, const MCConfig& mc);

struct SweepRow {
  double alpha = 0.0;
  double threshold = 0.0;
  MCEstimate pfa;
  std::vector<MCEstimate> delay;  // one per moment order
  std::vector<double> first_order;
  std::vector<double> ratio;
  std::vector<double> ratio_se;
};

/// For each alpha: calibrate A, estimate the PFA and the Bayesian delay moments
/// for the given change, and divide by (|log alpha| / (I + mu))^r. SR rules use
/// mu = 0 in the denominator.
std::vector<SweepRow> asymptotic_ratio_sweep(const DetectionProblem& problem, const ChangeSpec& change,
                                             std::span<const double> alphas, std::span<const double> orders,
                                             const MCConfig& mc);

/// Threshold for a PFA target, by the rule's own bound.
double threshold_for_alpha(const DetectionProblem& problem, double alpha);

}  // namespace qcd
