#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qcd/config.hpp"

namespace qcd::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kVerificationFailed = 3,
  kInfeasibleHorizon = 4,
};

/// Flag values that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

/// RFC 4180 field: quoted when it holds a comma, quote or line break.
std::string csv_field(const std::string& text);
std::string csv_row(const std::vector<std::string>& fields);

RunConfig apply(RunConfig config, const Overrides& o);

/// Each command writes its artifacts and a short report to `log`, and returns
/// an exit code. Config problems surface as ConfigError.
int calibrate(const RunConfig& config, std::ostream& log);
int simulate(const RunConfig& config, std::ostream& log);
int oc_sweep(const RunConfig& config, std::ostream& log);
int verify(const std::string& suite, std::uint64_t seed, int workers, int paths, const std::string& out,
           std::ostream& log);

/// Path of the JSON summary written next to a CSV output.
std::string summary_path(const std::string& csv_path);

/// Full command line entry point.
int main(int argc, char** argv);

}  // namespace qcd::cli
