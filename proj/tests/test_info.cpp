#include <doctest.h>

#include <cmath>

#include "qcd/info.hpp"

using namespace qcd;

TEST_CASE("closed-form information numbers") {
  CHECK(kl_ar(1.0, 1.0, 1.0) == 0.5);
  CHECK(kl_ar(0.0, 1.0, 1.0) == 0.0);
  CHECK(kl_ar(2.0, q_constant(std::vector<double>{1.0}, std::vector<double>{0.5}), 1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(kl_ar(1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_ar(1.0, 1.0, 0.0), std::invalid_argument);

  CHECK(kl_mixture(1.0, 0.0, 1.0) == 0.5);
  CHECK(kl_mixture(0.3, 0.3, 1.0) == 0.0);
  CHECK(kl_mixture(2.0, 0.0, 2.0) == 0.5);
  CHECK_THROWS_AS(kl_mixture(1.0, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("subset information is additive") {
  const std::vector<double> per{0.5, 0.3, 0.25};
  CHECK(kl_subset(std::vector<int>{0}, per) == 0.5);
  CHECK(kl_subset(std::vector<int>{0, 1}, per) == 0.8);
  CHECK(kl_subset(std::vector<int>{0, 1, 2}, per) == 0.5 + 0.3 + 0.25);
  CHECK_THROWS_AS(kl_subset(std::vector<int>{}, per), std::invalid_argument);
  CHECK_THROWS_AS(kl_subset(std::vector<int>{3}, per), std::invalid_argument);

  const auto scen = ScenarioSpec::gaussian(3);
  CHECK(change_information(scen, ChangeSpec{0, {0, 2}, {1.0, 2.0}}) == doctest::Approx(0.5 + 2.0));
}

TEST_CASE("D constant") {
  const auto single = GridSpec::degenerate({1.0});
  const std::vector<std::vector<double>> half{{0.5}};
  CHECK(d_constant(SubsetWeights::uniform(1, 1), single, half, 0.0, 1.0) == 2.0);
  CHECK(d_constant(SubsetWeights::uniform(1, 1), single, half, 0.0, 2.0) == 4.0);
  CHECK(d_constant(SubsetWeights::uniform(1, 1), single, half, 0.01, 1.0) == doctest::Approx(1.0 / 0.51));

  const auto pair = GridSpec::degenerate({1.0, 1.0});
  const std::vector<std::vector<double>> both{{0.5, 0.5}};
  CHECK(d_constant(SubsetWeights::uniform(2, 2), pair, both, 0.0, 1.0) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));

  // Scenario overload on the same example: a unit mean shift gives I = 0.5 per stream.
  CHECK(d_constant(SubsetWeights::uniform(2, 2), pair, ScenarioSpec::gaussian(2), 0.0, 1.0) ==
        doctest::Approx(5.0 / 3.0).epsilon(1e-15));

  // Two grid points with weights, hand-summed.
  const std::vector<double> thetas{1.0, 2.0};
  const auto grid = GridSpec::scalar(thetas, std::vector<double>{0.25, 0.75}, 1);
  const double want = 0.25 / 0.5 + 0.75 / 2.0;
  CHECK(d_constant(SubsetWeights::uniform(1, 1), grid, ScenarioSpec::gaussian(1), 0.0, 1.0) == doctest::Approx(want));

  CHECK_THROWS_AS(d_constant(SubsetWeights::uniform(1, 1), single, std::vector<std::vector<double>>{{0.0}}, 0.0, 1.0),
                  std::invalid_argument);
}

TEST_CASE("D constant beyond the enumeration limit uses subset sizes") {
  // N = 30, K = 2, p = 1: sizes 1 and 2 carry 30 and 435 subsets.
  const auto w = SubsetWeights::uniform(30, 2);
  const auto grid = GridSpec::degenerate(std::vector<double>(30, 1.0));
  const double want = (30.0 / 0.5 + 435.0 / 1.0) / 465.0;
  CHECK(d_constant(w, grid, ScenarioSpec::gaussian(30), 0.0, 1.0) == doctest::Approx(want).epsilon(1e-13));

  std::vector<double> uneven(30, 0.5);
  uneven[3] = 0.7;
  CHECK_THROWS_AS(d_constant(w, grid, std::vector<std::vector<double>>{uneven}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("KL slope diagnostics") {
  MCConfig mc;
  mc.replications = 50;
  mc.master_seed = 5;
  const Index n = 2000;
  SUBCASE("AR stream") {
    ScenarioSpec scen;
    scen.channels.push_back(ARChannelSpec{{0.5}, 1.0, {1.0}});
    const auto est = estimate_kl_slope(scen, ChangeSpec{0, {0}, {2.0}}, n, mc);
    CHECK(std::abs(est.mean - 0.5) < 0.05 * 0.5);
    CHECK(est.n_effective == 50);
  }
  SUBCASE("zero amplitude") {
    const auto est = estimate_kl_slope(ScenarioSpec::gaussian(1), ChangeSpec{0, {0}, {0.0}}, n, mc);
    CHECK(est.mean == 0.0);
  }
  SUBCASE("mixture stream") {
    ScenarioSpec scen;
    scen.channels.push_back(MixtureChannelSpec{0.4, 3.0, 0.0, 1.0});
    const auto est = estimate_kl_slope(scen, ChangeSpec{0, {0}, {1.0}}, n, mc);
    CHECK(std::abs(est.mean - kl_mixture(1.0, 0.0, 1.0)) < 0.05 * 0.5);
  }
  SUBCASE("subset sums") {
    const auto est = estimate_kl_slope(ScenarioSpec::gaussian(3), ChangeSpec{0, {0, 2}, {1.0, 1.0}}, n, mc);
    CHECK(std::abs(est.mean - 1.0) < 0.05);
  }
  SUBCASE("rejects n < 1") {
    CHECK_THROWS_AS(estimate_kl_slope(ScenarioSpec::gaussian(1), ChangeSpec{0, {0}, {1.0}}, 0, mc),
                    std::invalid_argument);
  }
}

TEST_CASE("KL slope standard error shrinks like replications^-1/2") {
  // Doubling the replications should shrink the SE by sqrt(2).
  MCConfig small, large;
  small.replications = 200;
  large.replications = 400;
  small.master_seed = 6;
  large.master_seed = 7;
  const ChangeSpec change{0, {0}, {1.0}};
  const auto a = estimate_kl_slope(ScenarioSpec::gaussian(1), change, 200, small);
  const auto b = estimate_kl_slope(ScenarioSpec::gaussian(1), change, 200, large);
  const double ratio = a.std_error / b.std_error;
  CHECK(ratio >= 1.2);
  CHECK(ratio <= 1.7);
}
