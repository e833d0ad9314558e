#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/montecarlo.hpp"

namespace qcd {

/// Raised for anything wrong with a configuration file; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calibration target. At most one of alpha / cost is set.
struct TargetSpec {
  std::optional<double> alpha;
  std::optional<double> cost;
  double cost_r = 1.0;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

/// Everything a CLI run needs, loaded from an INI file.
struct RunConfig {
  ScenarioSpec scenario;
  PriorSpec prior;
  SubsetWeights weights;
  GridSpec grid;
  DetectorConfig detector;
  bool threshold_given = false;  // otherwise derived from the target
  TargetSpec target;
  ChangeMode change_mode = ChangeMode::None;
  ChangeSpec change;
  MCConfig mc;
  std::vector<double> orders{1.0};
  std::vector<double> sweep_alphas;
  std::string output;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
  /// The detection problem with the threshold resolved from the target when
  /// no explicit threshold was given.
  DetectionProblem problem() const;

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

struct Calibration {
  double threshold = 0.0;
  std::string formula;
  double d_constant = 0.0;  // only for cost targets
  double mu = 0.0;
  double scale = 1.0;
};

/// Threshold for the configured target (alpha or cost).
Calibration calibrate(const RunConfig& config);

}  // namespace qcd
