#include <doctest.h>

#include <cmath>

#include "qcd/oracles.hpp"
#include "qcd/statistics.hpp"

using namespace qcd;

namespace {

std::shared_ptr<const PriorTable> table(const PriorSpec& prior, Index length = 256) {
  return std::make_shared<const PriorTable>(prior, length);
}

DetectorState single_stream(const PriorSpec& prior, StatisticOptions options = {}) {
  return DetectorState(table(prior), SubsetWeights::uniform(1, 1), GridSpec::degenerate({1.0}), options);
}

}  // namespace

TEST_CASE("initial values") {
  CHECK(single_stream(PriorSpec::geometric(0.1)).log_shiryaev() == kNegInf);
  CHECK(std::exp(single_stream(PriorSpec::geometric(0.1, 0.2)).log_shiryaev()) == doctest::Approx(0.25));
  StatisticOptions o;
  o.omega = 3.0;
  CHECK(std::exp(single_stream(PriorSpec::geometric(0.1), o).log_sr()) == doctest::Approx(3.0));
  CHECK(single_stream(PriorSpec::geometric(0.1)).log_sr() == kNegInf);
}

TEST_CASE("unit likelihood ratios") {
  const double rho = 0.1;
  for (bool direct : {false, true}) {
    StatisticOptions o;
    o.force_direct = direct;
    auto zero = single_stream(PriorSpec::geometric(rho), o);
    o.omega = 3.0;
    auto three = single_stream(PriorSpec::geometric(rho), o);
    const double inc = 0.0;
    for (Index n = 1; n <= 50; ++n) {
      zero.update(std::span<const double>(&inc, 1));
      three.update(std::span<const double>(&inc, 1));
      const double closed = std::pow(1.0 - rho, -static_cast<double>(n)) - 1.0;
      CHECK(std::exp(zero.log_shiryaev()) == doctest::Approx(closed).epsilon(1e-12));
      CHECK(std::exp(zero.log_sr()) == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
      CHECK(std::exp(three.log_sr()) == doctest::Approx(n + 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("one-step Shiryaev recursion with unit LRs") {
  const double rho = 0.2;
  auto st = single_stream(PriorSpec::geometric(rho));
  const double inc = 0.0;
  double prev = 0.0;
  for (int n = 1; n <= 20; ++n) {
    st.update(std::span<const double>(&inc, 1));
    const double s = std::exp(st.log_shiryaev());
    CHECK(s == doctest::Approx((rho + prev) / (1.0 - rho)).epsilon(1e-12));
    prev = s;
  }
}

TEST_CASE("window m1 = 0 keeps only k = n - 1") {
  const auto prior = PriorSpec::geometric(0.1);
  StatisticOptions o;
  o.window_m1 = 0;
  auto st = single_stream(prior, o);
  const double incs[] = {0.3, -0.2, 1.1, 0.4, -0.7};
  for (Index n = 1; n <= 5; ++n) {
    st.update(std::span<const double>(&incs[n - 1], 1));
    const double last = incs[n - 1];
    const double want_s = std::log(prior_mass(prior, n - 1)) + last - std::log(prior_tail(prior, n));
    CHECK(st.log_shiryaev() == doctest::Approx(want_s).epsilon(1e-13));
    CHECK(st.log_sr() == doctest::Approx(last).epsilon(1e-13));
  }
}

TEST_CASE("direct sums on a hand-built window") {
  // Two streams, one grid point, K = 2, p = 1: Lambda = (LR1 + LR2 + LR1 LR2) / 3.
  const auto prior = PriorSpec::geometric(0.25, 0.1);
  const PriorTable pt(prior, 16);
  const auto weights = SubsetWeights::uniform(2, 2);
  const auto grid = GridSpec::degenerate({0.5, 0.5});
  LogLRWindow w;
  w.n = 3;
  w.k_begin = -1;
  w.k_end = 3;
  w.streams = 2;
  w.grid = 1;
  w.values = {0.2, -0.1, 0.5, 0.3, 0.1, 0.0};  // rows k = 0, 1, 2
  auto lam = [&](Index k) {
    const double a = std::exp(w.values[2 * k]), b = std::exp(w.values[2 * k + 1]);
    return (a + b + a * b) / 3.0;
  };
  double s = prior.q * lam(0), r = 2.0 * lam(0);
  for (Index k = 0; k < 3; ++k) {
    s += prior_mass(prior, k) * lam(k);
    r += lam(k);
  }
  s /= prior_tail(prior, 3);
  CHECK(std::exp(shiryaev_direct(w, pt, weights, grid)) == doctest::Approx(s).epsilon(1e-14));
  CHECK(std::exp(sr_direct(w, 2.0, weights, grid)) == doctest::Approx(r).epsilon(1e-14));

  LogLRWindow bad = w;
  bad.values.resize(4);
  CHECK_THROWS_AS(shiryaev_direct(bad, pt, weights, grid), std::invalid_argument);
  bad = w;
  bad.k_end = 4;
  CHECK_THROWS_AS(sr_direct(bad, 0.0, weights, grid), std::invalid_argument);
  CHECK_THROWS_AS(sr_direct(w, -1.0, weights, grid), std::invalid_argument);
}

TEST_CASE("random 20-step window against the brute-force sum") {
  Rng rng = make_rng(31, 0);
  std::normal_distribution<double> z;
  const auto prior = PriorSpec::geometric(0.05, 0.2);
  const auto weights = SubsetWeights::make({0.5, 1.5, 1.0}, 2);
  const std::vector<double> thetas{0.5, 1.0};
  const auto grid = GridSpec::scalar(thetas, std::vector<double>{0.3, 0.7}, 3);
  oracle::IncrementPath path{3, 2, {}};
  for (int t = 0; t < 20 * 6; ++t) path.values.push_back(0.3 * z(rng));
  StatisticOptions o;
  o.omega = 1.5;
  o.window_m1 = 8;
  DetectorState st(table(prior), weights, grid, o);
  for (Index t = 0; t < 20; ++t) st.update(std::span<const double>(path.values).subspan(static_cast<std::size_t>(t) * 6, 6));
  const auto want = oracle::statistics(path, prior, {weights.p, 2, grid.weights}, 1.5, 8, 0);
  CHECK(std::abs(st.log_shiryaev() - want.log_s.back()) < 1e-9);
  CHECK(std::abs(st.log_sr() - want.log_r.back()) < 1e-9);
}

TEST_CASE("degenerate grid reduces the double mixture to the single mixture") {
  Rng rng = make_rng(32, 0);
  std::normal_distribution<double> z;
  const auto prior = PriorSpec::geometric(0.1);
  const auto weights = SubsetWeights::make({1.0, 2.0}, 1);
  const std::vector<double> thetas{0.5, 1.0};
  StatisticOptions o;
  o.omega = 1.0;
  DetectorState single(table(prior), weights, GridSpec::degenerate({0.5, 0.5}), o);
  DetectorState dbl(table(prior), weights, GridSpec::scalar(thetas, std::vector<double>{0.4, 0.6}, 2), o);
  for (int t = 0; t < 60; ++t) {
    const double a = z(rng), b = z(rng);
    const double one[] = {a, b}, two[] = {a, b, a, b};  // both points see the same increments
    single.update(one);
    dbl.update(two);
    CHECK(std::abs(single.log_shiryaev() - dbl.log_shiryaev()) < 1e-12);
    CHECK(std::abs(single.log_sr() - dbl.log_sr()) < 1e-12);
  }
}

TEST_CASE("statistics stay finite and saturate instead of overflowing") {
  auto st = single_stream(PriorSpec::geometric(0.1));
  const double inc = 50.0;
  for (int t = 0; t < 40; ++t) st.update(std::span<const double>(&inc, 1));
  CHECK(st.saturated());
  CHECK(st.log_shiryaev() == kLogSaturation);
  CHECK(std::isfinite(st.log_sr()));

  auto low = single_stream(PriorSpec::geometric(0.1));
  const double neg = -50.0;
  for (int t = 0; t < 40; ++t) low.update(std::span<const double>(&neg, 1));
  CHECK(std::isfinite(low.log_shiryaev()));
  CHECK(std::isfinite(low.log_sr()));
}

TEST_CASE("reset restores the initial state") {
  StatisticOptions o;
  o.omega = 2.0;
  auto st = single_stream(PriorSpec::geometric(0.1, 0.3), o);
  const double s0 = st.log_shiryaev(), r0 = st.log_sr();
  const double inc = 0.7;
  st.update(std::span<const double>(&inc, 1));
  const double s1 = st.log_shiryaev();
  st.reset();
  CHECK(st.n() == 0);
  CHECK(st.log_shiryaev() == s0);
  CHECK(st.log_sr() == r0);
  st.update(std::span<const double>(&inc, 1));
  CHECK(st.log_shiryaev() == s1);
}

TEST_CASE("grid validation") {
  CHECK_NOTHROW(GridSpec::degenerate({1.0}).validate(1));
  CHECK_THROWS_AS((GridSpec{{{1.0}, {2.0}}, {0.5, 0.6}}).validate(1), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{{{1.0}, {1.0}}, {0.5, 0.5}}).validate(1), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{{{1.0}, {2.0}}, {1.0, 0.0}}).validate(1), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{{{1.0, 2.0}}, {1.0}}).validate(1), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{}).validate(1), std::invalid_argument);
}

TEST_CASE("state construction errors") {
  const auto t = table(PriorSpec::geometric(0.1));
  const auto w = SubsetWeights::uniform(1, 1);
  const auto g = GridSpec::degenerate({1.0});
  CHECK_THROWS_AS(DetectorState(t, w, g, {}, false), std::invalid_argument);
  StatisticOptions o;
  o.window_m1 = 2;
  o.window_m0 = 3;
  CHECK_THROWS_AS(DetectorState(t, w, g, o), std::invalid_argument);
  o.window_m0 = 0;
  o.omega = -1.0;
  CHECK_THROWS_AS(DetectorState(t, w, g, o), std::invalid_argument);
  DetectorState ok(t, w, g, {});
  const double two[] = {0.0, 0.0};
  CHECK_THROWS_AS(ok.update(two), std::invalid_argument);
  CHECK_THROWS_AS(ok.window(-1), std::logic_error);
}

TEST_CASE("recursion is used for small N and direct sums beyond") {
  const auto t = table(PriorSpec::geometric(0.1));
  const auto g13 = GridSpec::degenerate(std::vector<double>(13, 1.0));
  DetectorState big(t, SubsetWeights::uniform(13, 2), g13, {});
  CHECK_FALSE(big.recursive());
  const auto g12 = GridSpec::degenerate(std::vector<double>(12, 1.0));
  DetectorState small(t, SubsetWeights::uniform(12, 2), g12, {});
  CHECK(small.recursive());
}

TEST_CASE("direct path for N = 13 matches the oracle") {
  Rng rng = make_rng(33, 0);
  std::normal_distribution<double> z;
  const int n = 13;
  const auto prior = PriorSpec::geometric(0.05);
  const auto weights = SubsetWeights::uniform(n, 2, 0.5);
  const auto grid = GridSpec::degenerate(std::vector<double>(n, 1.0));
  oracle::IncrementPath path{n, 1, {}};
  for (int t = 0; t < 15 * n; ++t) path.values.push_back(0.4 * z(rng));
  StatisticOptions o;
  o.omega = 0.5;
  DetectorState st(table(prior), weights, grid, o);
  const auto want = oracle::statistics(path, prior, {weights.p, 2, {1.0}}, 0.5);
  for (Index t = 0; t < 15; ++t) {
    st.update(std::span<const double>(path.values).subspan(static_cast<std::size_t>(t * n), n));
    CHECK(std::abs(st.log_shiryaev() - want.log_s[static_cast<std::size_t>(t)]) < 1e-9);
    CHECK(std::abs(st.log_sr() - want.log_r[static_cast<std::size_t>(t)]) < 1e-9);
  }
}
