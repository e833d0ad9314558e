#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qcd/likelihood.hpp"
#include "qcd/model.hpp"
#include "qcd/scenarios.hpp"
#include "qcd/statistics.hpp"

namespace qcd {

enum class DetectorKind { ShiryaevMixture, SRMixture, ShiryaevPutative, SRPutative };

struct DetectorConfig {
  DetectorKind kind = DetectorKind::ShiryaevMixture;
  double threshold = 1.0;  // A
  std::optional<Index> window_m1;
  Index window_m0 = 0;
  double omega = 0.0;                  // SR head start
  std::vector<double> putative_theta;  // one value (broadcast) or one per stream

  bool shiryaev() const { return kind == DetectorKind::ShiryaevMixture || kind == DetectorKind::ShiryaevPutative; }
  bool putative() const { return kind == DetectorKind::ShiryaevPutative || kind == DetectorKind::SRPutative; }

  /// Shiryaev kinds need A > q/(1-q); SR kinds need A > 0.
  void validate(const PriorSpec& prior, int streams) const;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

/// Everything needed to run one detector on one scenario.
struct DetectionProblem {
  ScenarioSpec scenario;
  PriorSpec prior;
  SubsetWeights weights;
  GridSpec grid;
  DetectorConfig detector;

  void validate() const;
  /// The mixing grid the detector actually uses (degenerate for putative kinds).
  GridSpec effective_grid() const;
};

/// Stateful stopping rule: feed one observation vector per time step.
class Detector {
 public:
  Detector(const DetectionProblem& problem, std::shared_ptr<const PriorTable> prior_table);
  explicit Detector(const DetectionProblem& problem, Index prior_table_length = 4096);

  Detector(const Detector& other);
  Detector& operator=(const Detector&) = delete;

  void reset();
  /// Consumes X(n) and reports whether the statistic reached the threshold.
  bool step(std::span<const double> x);

  Index n() const { return state_.n(); }
  double log_statistic() const { return shiryaev_ ? state_.log_shiryaev() : state_.log_sr(); }
  double log_threshold() const { return log_threshold_; }
  const DetectorState& state() const { return state_; }

 private:
  std::vector<std::unique_ptr<StreamLLR>> sources_;
  DetectorState state_;
  std::vector<double> increments_;
  bool shiryaev_;
  double log_threshold_;
};

struct RunResult {
  std::optional<Index> stopped_at;  // empty when censored
  std::vector<double> log_trajectory;

  bool censored() const { return !stopped_at.has_value(); }
};

/// Runs the detector on a fixed batch: stops at the first n <= max_horizon with
/// statistic >= A.
RunResult run(Detector& detector, const ObservationBatch& batch, Index max_horizon);

/// A = (1 - alpha) / alpha, which keeps PFA <= alpha for 0 < alpha < 1 - q.
double threshold_shiryaev(double alpha, double q = 0.0);

/// A = (omega b + mean(nu)) / alpha with b = P(nu >= 1). Requires a finite-mean
/// prior and a positive result.
double threshold_sr(double alpha, double omega, const PriorSpec& prior);

/// Root A > 1 of r D A (log A)^{r-1} = scale / c.
double threshold_cost(double cost, double r, double d_constant, double scale = 1.0);

}  // namespace qcd
