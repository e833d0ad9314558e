#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "qcd/cli.hpp"
#include "qcd/config.hpp"
#include "qcd/verify.hpp"

using namespace qcd;
namespace fs = std::filesystem;

namespace {

const char* const kBase = R"(; three Gaussian streams
[scenario]
streams = 3
model = ar

[prior]
kind = geometric
rho = 0.1

[grid]
theta = 0.5, 1.0
max_affected = 3

[detector]
kind = shiryaev

[target]
alpha = 0.05

[change]
mode = none

[mc]
replications = 300
seed = 7
horizon = 300
)";

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("qcd_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string write_config(const std::string& name, const std::string& text) {
  const auto p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

int run_main(std::vector<std::string> args) {
  args.insert(args.begin(), "qcd");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      row.push_back(field);
      rows.push_back(row);
      row.clear();
      field.clear();
    } else {
      field += c;
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("CSV fields") {
  CHECK(cli::csv_field("plain") == "plain");
  CHECK(cli::csv_field("0,2") == "\"0,2\"");
  CHECK(cli::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(cli::csv_field("a\nb") == "\"a\nb\"");
  CHECK(cli::csv_row({"a", "b,c", ""}) == "a,\"b,c\",\r\n");
  CHECK(parse_csv(cli::csv_row({"x", "1,2", "q\"t"}))[0] == std::vector<std::string>{"x", "1,2", "q\"t"});
}

TEST_CASE("summary path") {
  CHECK(cli::summary_path("out/run.csv") == "out/run.summary.json");
  CHECK(cli::summary_path("run") == "run.summary.json");
  CHECK(cli::summary_path("dir.v2/run") == "dir.v2/run.summary.json");
}

TEST_CASE("config round trip") {
  const RunConfig a = parse_config(read_file(fs::path(QCD_SOURCE_DIR) / "configs/three_streams.ini"));
  const std::string text = serialize_config(a);
  const RunConfig b = parse_config(text);
  CHECK(a == b);
  CHECK(serialize_config(b) == text);

  const RunConfig mixed = parse_config(R"([scenario]
streams = 2
model = mixture
beta_mix = 0.3
mu1 = 3
mu2 = 0.1
[stream.1]
model = ar
coeffs = 0.5, -0.1
sigma = 0.7
signal = 1, 2
[prior]
kind = polynomial-tail
beta = 1.5
q = 0.2
[grid]
points = 0.5 1.0 | 1.0 0.5
weights = 0.25, 0.75
p = 1, 2
max_affected = 1
[detector]
kind = sr
threshold = 80.5
window_m1 = 12
omega = 2
[change]
mode = fixed
nu = 10
subset = 1
theta = 0.5
[mc]
replications = 10
workers = 2
[output]
path = /tmp/x.csv
)");
  CHECK(parse_config(serialize_config(mixed)) == mixed);
  CHECK(std::holds_alternative<MixtureChannelSpec>(mixed.scenario.channels[0]));
  CHECK(std::get<ARChannelSpec>(mixed.scenario.channels[1]).coeffs == std::vector<double>{0.5, -0.1});
  CHECK(mixed.detector.window_m1 == 12);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config(std::string(kBase) + "\n[mc]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(std::string(kBase) + "\n[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[scenario]\nstreams = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config((scratch_dir() / "missing.ini").string()), ConfigError);

  std::string zero = kBase;
  zero.replace(zero.find("replications = 300"), 18, "replications = 0");
  CHECK_THROWS_AS(parse_config(zero), ConfigError);
}

TEST_CASE("calibration examples") {
  SUBCASE("alpha = 0.05 gives 19") {
    CHECK(calibrate(parse_config(kBase)).threshold == doctest::Approx(19.0).epsilon(1e-15));
  }
  SUBCASE("alpha above 1 - q is infeasible") {
    std::string text = kBase;
    text.replace(text.find("rho = 0.1"), 9, "rho = 0.1\nq = 0.97");
    CHECK_THROWS_AS(calibrate(parse_config(text)), ConfigError);
  }
  SUBCASE("cost target with r = 1 and D = 1") {
    // Polynomial-tail prior (mu = 0), one stream with I = theta^2/2 = 1.
    const RunConfig c = parse_config(R"([scenario]
streams = 1
[prior]
kind = polynomial-tail
beta = 1
[grid]
theta = 1.4142135623730951
[detector]
kind = shiryaev
[target]
cost = 0.001
r = 1
)");
    const auto cal = calibrate(c);
    CHECK(cal.d_constant == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cal.threshold == doctest::Approx(1000.0).epsilon(1e-12));
  }
}

TEST_CASE("simulate is byte-for-byte deterministic and independent of workers") {
  const std::string cfg = write_config("det.ini", kBase);
  const auto a = (scratch_dir() / "a.csv").string(), b = (scratch_dir() / "b.csv").string(),
             c = (scratch_dir() / "c.csv").string();
  CHECK(run_main({"simulate", "--config", cfg, "--out", a}) == 0);
  CHECK(run_main({"simulate", "--config", cfg, "--out", b}) == 0);
  CHECK(run_main({"simulate", "--config", cfg, "--out", c, "--workers", "4"}) == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) == read_file(c));
  CHECK(read_file(cli::summary_path(a)) == read_file(cli::summary_path(c)));
  CHECK(run_main({"simulate", "--config", cfg, "--out", b, "--seed", "8"}) == 0);
  CHECK(read_file(a) != read_file(b));
}

TEST_CASE("summary PFA matches a recomputation from the CSV rows") {
  const std::string cfg = write_config("pfa.ini", kBase);
  const auto out = (scratch_dir() / "pfa.csv").string();
  REQUIRE(run_main({"simulate", "--config", cfg, "--out", out}) == 0);
  const auto rows = parse_csv(read_file(out));
  REQUIRE(rows.size() == 301);
  CHECK(rows[0] == std::vector<std::string>{"replication", "nu", "stopped_at", "censored", "false_alarm", "delay",
                                            "subset", "grid_point"});
  const auto prior = PriorSpec::geometric(0.1);
  double sum = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    sum += r[2].empty() ? prior_tail(prior, 301) : prior_tail(prior, std::stoll(r[2]));
  }
  const auto summary = nlohmann::json::parse(read_file(cli::summary_path(out)));
  CHECK(std::abs(summary["pfa"]["mean"].get<double>() - sum / 300.0) <= 1e-12);
  CHECK(summary["pfa_bound"].get<double>() == doctest::Approx(0.05));
}

TEST_CASE("simulate with a prior-drawn change quotes the subset column") {
  std::string text = kBase;
  text.replace(text.find("mode = none"), 11, "mode = prior-all");
  text += "orders = 1, 2\n";
  const auto out = (scratch_dir() / "all.csv").string();
  CHECK(run_main({"simulate", "--config", write_config("all.ini", text), "--out", out}) == 0);
  const std::string csv = read_file(out);
  const auto rows = parse_csv(csv);
  bool multi = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 8);
    if (rows[i][6].find(',') != std::string::npos) multi = true;
  }
  CHECK(multi);
  CHECK(csv.find("\"0,") != std::string::npos);
  const auto summary = nlohmann::json::parse(read_file(cli::summary_path(out)));
  CHECK(summary["delay"].size() == 2);
  CHECK(summary["pfa"]["estimator"] == "indicator");
}

TEST_CASE("oc-sweep rows") {
  std::string text = kBase;
  text.replace(text.find("mode = none"), 11, "mode = prior-nu\nsubset = 0\ntheta = 1");
  text.replace(text.find("replications = 300"), 18, "replications = 200");
  text.replace(text.find("horizon = 300"), 13, "horizon = 600");
  SUBCASE("single alpha gives one row") {
    const auto out = (scratch_dir() / "sweep1.csv").string();
    CHECK(run_main({"oc-sweep", "--config", write_config("s1.ini", text + "[sweep]\nalphas = 0.01\n"), "--out",
                    out}) == 0);
    CHECK(parse_csv(read_file(out)).size() == 2);
  }
  SUBCASE("two alphas, increasing A, ratios identical to the library") {
    const auto cfg = write_config("s2.ini", text + "[sweep]\nalphas = 0.1, 0.01\n");
    const auto out = (scratch_dir() / "sweep2.csv").string();
    REQUIRE(run_main({"oc-sweep", "--config", cfg, "--out", out}) == 0);
    const auto rows = parse_csv(read_file(out));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][1] == "A");
    CHECK(std::stod(rows[2][1]) > std::stod(rows[1][1]));

    const RunConfig c = load_config(cfg);
    DetectionProblem p{c.scenario, c.prior, c.weights, c.grid, c.detector};
    const auto lib = asymptotic_ratio_sweep(p, c.change, c.sweep_alphas, c.orders, c.mc);
    std::size_t ratio_col = 0;
    for (std::size_t j = 0; j < rows[0].size(); ++j)
      if (rows[0][j] == "ratio_r1") ratio_col = j;
    REQUIRE(ratio_col > 0);
    CHECK(std::stod(rows[1][ratio_col]) == lib[0].ratio[0]);
    CHECK(std::stod(rows[2][ratio_col]) == lib[1].ratio[0]);
  }
  SUBCASE("sweep without alphas is a config error") {
    CHECK(run_main({"oc-sweep", "--config", write_config("s3.ini", text), "--out",
                    (scratch_dir() / "s3.csv").string()}) == 2);
  }
}

TEST_CASE("exit codes") {
  CHECK(run_main({"simulate"}) == 2);                                                    // missing --config
  CHECK(run_main({"calibrate", "--config", (scratch_dir() / "nope.ini").string()}) == 2);  // unreadable
  CHECK(run_main({"frobnicate"}) == 2);
  CHECK(run_main({"verify", "--suite", "no-such-suite"}) == 2);
  CHECK(run_main({"verify", "--suite", "telescoping", "--paths", "10"}) == 0);
  CHECK(run_main({"calibrate", "--config", write_config("cal.ini", kBase)}) == 0);

  // Pre-change runs with an unreachable threshold: the censored tail 0.9^51 is
  // far above 1e-3 of the bound, so the horizon is reported as infeasible.
  std::string text = kBase;
  text.replace(text.find("horizon = 300"), 13, "horizon = 50");
  text.replace(text.find("alpha = 0.05"), 12, "alpha = 1e-9");
  CHECK(run_main({"simulate", "--config", write_config("cens.ini", text), "--out",
                  (scratch_dir() / "cens.csv").string()}) == 4);
}

TEST_CASE("verify reports PASS lines and an off-by-one window fails by name") {
  std::ostringstream log;
  CHECK(cli::verify("window", 3, 1, 5, "", log) == 0);
  CHECK(log.str().find("PASS window: windowed Shiryaev") != std::string::npos);

  // Mutant: the window reaches one step further back than configured.
  const verify::StatisticImpl mutant = [](const verify::StatisticCase& c, std::vector<double>& s,
                                          std::vector<double>& r) {
    verify::StatisticCase shifted = c;
    if (shifted.options.window_m1) shifted.options.window_m1 = *shifted.options.window_m1 + 1;
    verify::library_statistics()(shifted, s, r);
  };
  verify::VerifyOptions opts;
  opts.paths = 5;
  const auto results = verify::window(opts, mutant);
  bool named_failure = false;
  for (const auto& r : results)
    if (!r.passed && r.invariant == "windowed Shiryaev equals brute-force window sum") named_failure = true;
  CHECK(named_failure);
}

TEST_CASE("verify passes across seeds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    verify::VerifyOptions opts;
    opts.seed = seed;
    opts.paths = 5;
    opts.max_n = 60;
    opts.mc_replications = 4000;
    for (const auto& suite : {"mixture-lr", "recursion", "window", "posterior", "telescoping"}) {
      for (const auto& r : verify::run_suite(suite, opts)) {
        INFO(r.suite << ": " << r.invariant << " seed " << seed << " error " << r.max_error);
        CHECK(r.passed);
      }
    }
  }
}
