#include <doctest.h>

#include <cmath>

#include "qcd/detectors.hpp"

using namespace qcd;

namespace {

DetectionProblem gaussian_problem(int streams, DetectorKind kind, double threshold) {
  DetectionProblem p;
  p.scenario = ScenarioSpec::gaussian(streams);
  p.prior = PriorSpec::geometric(0.1);
  p.weights = SubsetWeights::uniform(streams, streams);
  const std::vector<double> thetas{0.5, 1.0};
  p.grid = GridSpec::uniform_scalar(thetas, streams);
  p.detector.kind = kind;
  p.detector.threshold = threshold;
  return p;
}

double cost_residual(double a, double c, double r, double d, double scale) {
  const double lhs = r * d * a * std::pow(std::log(a), r - 1.0);
  return std::abs(lhs - scale / c) / (scale / c);
}

}  // namespace

TEST_CASE("Shiryaev thresholds") {
  CHECK(threshold_shiryaev(0.05) == doctest::Approx(19.0).epsilon(1e-15));
  CHECK(threshold_shiryaev(0.5) == 1.0);
  CHECK(threshold_shiryaev(0.005) == doctest::Approx(199.0).epsilon(1e-15));
  CHECK_THROWS_AS(threshold_shiryaev(0.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold_shiryaev(0.8, 0.3), std::invalid_argument);
}

TEST_CASE("SR thresholds") {
  CHECK(threshold_sr(0.1, 0.0, PriorSpec::geometric(0.5)) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(threshold_sr(0.01, 5.0, PriorSpec::geometric(0.1)) == doctest::Approx(1350.0).epsilon(1e-13));
  CHECK_THROWS_AS(threshold_sr(0.01, 0.0, PriorSpec::point_mass(0)), std::invalid_argument);
  CHECK_THROWS_AS(threshold_sr(0.01, 0.0, PriorSpec::polynomial_tail(1.0)), std::invalid_argument);
  // beta > 1 has a finite mean, computed numerically
  CHECK(std::isfinite(threshold_sr(0.01, 1.0, PriorSpec::polynomial_tail(2.0))));
}

TEST_CASE("cost thresholds") {
  CHECK(threshold_cost(1e-3, 1.0, 1.0) == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(threshold_cost(0.01, 1.0, 1.0, 13.5) == doctest::Approx(1350.0).epsilon(1e-12));

  const double a = threshold_cost(1e-4, 2.0, 0.5);
  CHECK(a > 1e3);
  CHECK(a < 1e4);
  CHECK(cost_residual(a, 1e-4, 2.0, 0.5, 1.0) <= 1e-10);

  CHECK_THROWS_AS(threshold_cost(2.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold_cost(1e-3, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold_cost(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("cost threshold residual over random inputs") {
  Rng rng = make_rng(41, 0);
  std::uniform_real_distribution<double> logc(std::log(1e-8), std::log(1e-2));
  std::uniform_real_distribution<double> logd(std::log(0.05), std::log(20.0));
  for (int i = 0; i < 200; ++i) {
    const double c = std::exp(logc(rng)), d = std::exp(logd(rng));
    const double r = 1.0 + i % 3;
    if (r == 1.0 && 1.0 / c <= r * d) continue;
    const double a = threshold_cost(c, r, d);
    CHECK(a > 1.0);
    CHECK(cost_residual(a, c, r, d, 1.0) <= 1e-10);
  }
}

TEST_CASE("config validation") {
  DetectorConfig c;
  c.threshold = 0.2;
  CHECK_NOTHROW(c.validate(PriorSpec::geometric(0.1, 0.1), 1));
  CHECK_THROWS_AS(c.validate(PriorSpec::geometric(0.1, 0.2), 1), std::invalid_argument);  // q/(1-q) = 0.25
  c.kind = DetectorKind::SRMixture;
  c.threshold = 0.0;
  CHECK_THROWS_AS(c.validate(PriorSpec::geometric(0.1), 1), std::invalid_argument);
  c.threshold = 5.0;
  c.kind = DetectorKind::SRPutative;
  c.putative_theta = {1.0, 2.0};
  CHECK_THROWS_AS(c.validate(PriorSpec::geometric(0.1), 3), std::invalid_argument);
  CHECK_NOTHROW(c.validate(PriorSpec::geometric(0.1), 2));
  c.window_m1 = 3;
  c.window_m0 = 4;
  CHECK_THROWS_AS(c.validate(PriorSpec::geometric(0.1), 2), std::invalid_argument);
}

TEST_CASE("run") {
  SUBCASE("huge signal and a low threshold stop at 1") {
    auto p = gaussian_problem(2, DetectorKind::ShiryaevMixture, 1e-3);
    Detector d(p);
    Rng rng = make_rng(42, 0);
    const auto batch = generate(p.scenario, ChangeSpec{-1, {0, 1}, {50.0, 50.0}}, 10, rng);
    const auto res = run(d, batch, 10);
    REQUIRE(res.stopped_at);
    CHECK(*res.stopped_at == 1);
    CHECK(res.log_trajectory.size() == 1);
  }
  SUBCASE("pure noise with A = 1e9 is censored") {
    auto p = gaussian_problem(2, DetectorKind::SRMixture, 1e9);
    Detector d(p);
    Rng rng = make_rng(42, 1);
    const auto batch = generate(p.scenario, ChangeSpec{}, 100, rng);
    const auto res = run(d, batch, 100);
    CHECK(res.censored());
    CHECK(res.log_trajectory.size() == 100);
  }
  SUBCASE("max_horizon must be positive") {
    auto p = gaussian_problem(1, DetectorKind::SRMixture, 10.0);
    Detector d(p);
    Rng rng = make_rng(42, 2);
    const auto batch = generate(p.scenario, ChangeSpec{}, 5, rng);
    CHECK_THROWS_AS(run(d, batch, 0), std::invalid_argument);
  }
  SUBCASE("invalid configuration is rejected at construction") {
    auto p = gaussian_problem(1, DetectorKind::SRMixture, -1.0);
    CHECK_THROWS_AS(Detector{p}, std::invalid_argument);
  }
}

TEST_CASE("stopping time is monotone in A, pathwise") {
  for (auto kind : {DetectorKind::ShiryaevMixture, DetectorKind::SRMixture}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng = make_rng(43, seed);
      auto lo = gaussian_problem(2, kind, 20.0);
      auto hi = gaussian_problem(2, kind, 200.0);
      const auto batch = generate(lo.scenario, ChangeSpec{30, {1}, {1.0}}, 300, rng);
      Detector dl(lo), dh(hi);
      const auto rl = run(dl, batch, 300), rh = run(dh, batch, 300);
      if (rh.stopped_at) {
        REQUIRE(rl.stopped_at);
        CHECK(*rh.stopped_at >= *rl.stopped_at);
      }
      // identical trajectories up to the earlier stop
      for (std::size_t t = 0; t < rl.log_trajectory.size(); ++t)
        CHECK(rl.log_trajectory[t] == rh.log_trajectory[t]);
    }
  }
}

TEST_CASE("putative rule equals the mixture rule on a degenerate grid") {
  for (auto [mixture, putative] : {std::pair{DetectorKind::ShiryaevMixture, DetectorKind::ShiryaevPutative},
                                   std::pair{DetectorKind::SRMixture, DetectorKind::SRPutative}}) {
    auto a = gaussian_problem(3, mixture, 1e6);
    a.grid = GridSpec::degenerate({0.7, 0.7, 0.7});
    auto b = gaussian_problem(3, putative, 1e6);
    b.detector.putative_theta = {0.7};
    Detector da(a), db(b);
    Rng rng = make_rng(44, 0);
    const auto batch = generate(a.scenario, ChangeSpec{20, {0, 2}, {0.5, 0.5}}, 200, rng);
    const auto ra = run(da, batch, 200), rb = run(db, batch, 200);
    CHECK(ra.stopped_at == rb.stopped_at);
    CHECK(ra.log_trajectory == rb.log_trajectory);
  }
}

TEST_CASE("copies run independently") {
  auto p = gaussian_problem(2, DetectorKind::ShiryaevMixture, 1e6);
  Detector a(p);
  Rng rng = make_rng(45, 0);
  const auto batch = generate(p.scenario, ChangeSpec{}, 30, rng);
  for (Index t = 0; t < 10; ++t) a.step(batch.row(t));
  Detector b(a);
  for (Index t = 10; t < 30; ++t) {
    a.step(batch.row(t));
    b.step(batch.row(t));
    CHECK(a.log_statistic() == b.log_statistic());
  }
  CHECK_THROWS_AS(a.step(std::vector<double>{1.0}), std::invalid_argument);
}
