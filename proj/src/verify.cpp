#include "qcd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qcd::verify {

namespace {

constexpr std::uint64_t kMixtureSalt = 1;
constexpr std::uint64_t kRecursionSalt = 2;
constexpr std::uint64_t kWindowSalt = 3;
constexpr std::uint64_t kPosteriorSalt = 4;
constexpr std::uint64_t kTelescopeSalt = 5;

Rng case_rng(const VerifyOptions& opts, std::uint64_t salt, std::uint64_t index) {
  return make_rng(opts.seed, (salt << 40) + index);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// |a - b| with equal infinities counted as agreement.
double log_gap(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b);
}

struct Tally {
  CheckResult r;
  Tally(std::string suite, std::string invariant, double tol) {
    r.suite = std::move(suite);
    r.invariant = std::move(invariant);
    r.tolerance = tol;
  }
  void add(double err) {
    ++r.cases;
    if (!(err <= r.max_error)) r.max_error = std::isnan(err) ? INFINITY : std::max(r.max_error, err);
  }
  CheckResult done() {
    r.passed = r.cases > 0 && r.max_error <= r.tolerance;
    return r;
  }
};

oracle::MixingSpec mixing_of(const SubsetWeights& w, const GridSpec& g) { return {w.p, w.max_affected, g.weights}; }

SubsetWeights random_weights(int streams, Rng& rng) {
  std::vector<double> p(static_cast<std::size_t>(streams));
  for (auto& v : p) v = uniform(rng, 0.3, 2.0);
  const int k = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, streams - 1)(rng));
  return SubsetWeights::make(std::move(p), k);
}

PriorSpec random_prior(Rng& rng) {
  const double q = std::bernoulli_distribution(0.5)(rng) ? uniform(rng, 0.05, 0.3) : 0.0;
  if (std::bernoulli_distribution(0.7)(rng)) return PriorSpec::geometric(uniform(rng, 0.01, 0.2), q);
  return PriorSpec::polynomial_tail(uniform(rng, 0.5, 2.0), q);
}

}  // namespace

StatisticImpl library_statistics() {
  return [](const StatisticCase& c, std::vector<double>& log_s, std::vector<double>& log_r) {
    DetectorState state(c.prior, c.weights, c.grid, c.options, true);
    const Index steps = c.increments.steps();
    const std::size_t block = c.grid.size() * static_cast<std::size_t>(c.weights.streams());
    log_s.clear();
    log_r.clear();
    for (Index t = 0; t < steps; ++t) {
      state.update(std::span<const double>(c.increments.values).subspan(static_cast<std::size_t>(t) * block, block));
      log_s.push_back(state.log_shiryaev());
      log_r.push_back(state.log_sr());
    }
  };
}

ScenarioSpec ar_scenario() {
  ScenarioSpec s;
  s.channels.push_back(ARChannelSpec{{0.5}, 1.0, {1.0}});
  s.channels.push_back(ARChannelSpec{{0.3, -0.2}, 0.8, {1.0, 0.5, -0.5}});
  s.channels.push_back(ARChannelSpec{{}, 1.2, {1.0, 2.0}});
  return s;
}

ScenarioSpec mixture_scenario() {
  ScenarioSpec s;
  s.channels.push_back(MixtureChannelSpec{0.3, 3.0, 0.0, 1.0});
  s.channels.push_back(MixtureChannelSpec{0.5, 3.0, 0.0, 1.0});
  s.channels.push_back(MixtureChannelSpec{0.7, 3.5, 0.2, 1.1});
  return s;
}

GridSpec two_point_grid(int streams) {
  const std::vector<double> thetas{0.5, 1.0};
  return GridSpec::uniform_scalar(thetas, streams);
}

oracle::IncrementPath simulate_increments(const ScenarioSpec& scenario, const PriorSpec& prior,
                                          const SubsetWeights& weights, const GridSpec& grid, Index steps, Rng& rng,
                                          ObservationBatch* batch) {
  ChangeSpec change;
  change.nu = sample_change(prior, rng);
  change.subset = sample_subset(weights, rng);
  const auto g = std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(rng);
  for (int i : change.subset) change.theta.push_back(grid.points[g][static_cast<std::size_t>(i)]);

  auto sources = make_stream_llrs(scenario);
  ScenarioSampler sampler(scenario, change, rng);
  const auto n = static_cast<std::size_t>(scenario.streams());
  oracle::IncrementPath path{scenario.streams(), grid.size(), {}};
  std::vector<double> x(n), inc(grid.size() * n);
  if (batch) *batch = ObservationBatch{steps, scenario.streams(), {}};
  for (Index t = 0; t < steps; ++t) {
    sampler.next(rng, x);
    if (batch) batch->data.insert(batch->data.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) sources[i]->push(x[i]);
    compute_increments(sources, grid, inc);
    path.values.insert(path.values.end(), inc.begin(), inc.end());
  }
  return path;
}

std::vector<CheckResult> mixture_lr(const VerifyOptions& opts, const MixtureImpl& impl) {
  Tally vs_enum("mixture-lr", "dp equals subset enumeration", 1e-9);
  Tally product("mixture-lr", "K = N product form", 1e-10);
  Tally unit("mixture-lr", "unit LRs give Lambda = 1", 1e-12);
  constexpr int kDraws = 50;
  std::uint64_t index = 0;
  for (int n = 1; n <= kMaxEnumerableStreams; ++n) {
    for (int k = 1; k <= n; ++k) {
      for (int d = 0; d < kDraws; ++d) {
        Rng rng = case_rng(opts, kMixtureSalt, index++);
        std::vector<double> p(static_cast<std::size_t>(n)), llr(static_cast<std::size_t>(n));
        for (auto& v : p) v = uniform(rng, 0.05, 5.0);
        for (auto& v : llr) v = uniform(rng, -20.0, 20.0);
        const auto w = SubsetWeights::make(p, k);
        const double got = impl(llr, w);
        vs_enum.add(log_gap(got, oracle::mixture_lr(llr, p, k)));
        if (k == n) product.add(log_gap(got, oracle::mixture_lr_product(llr, p)));
        if (d == 0) {
          const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
          unit.add(std::abs(impl(zeros, w)));
        }
      }
    }
  }
  return {vs_enum.done(), product.done(), unit.done()};
}

std::vector<CheckResult> recursion(const VerifyOptions& opts, const StatisticImpl& impl) {
  Tally rec_s("recursion", "recursive Shiryaev equals direct sum", 1e-9);
  Tally rec_r("recursion", "recursive SR equals direct sum", 1e-9);
  Tally dir_s("recursion", "direct-path Shiryaev equals direct sum", 1e-9);
  Tally dir_r("recursion", "direct-path SR equals direct sum", 1e-9);
  const ScenarioSpec scenarios[] = {ar_scenario(), mixture_scenario()};
  std::uint64_t index = 0;
  for (const auto& scenario : scenarios) {
    for (int c = 0; c < opts.paths; ++c) {
      Rng rng = case_rng(opts, kRecursionSalt, index++);
      const PriorSpec prior = random_prior(rng);
      const SubsetWeights weights = random_weights(scenario.streams(), rng);
      const GridSpec grid = two_point_grid(scenario.streams());
      const double omega = std::bernoulli_distribution(0.5)(rng) ? uniform(rng, 0.5, 5.0) : 0.0;
      StatisticCase sc{std::make_shared<const PriorTable>(prior, opts.max_n + 2), weights, grid, {}, {}};
      sc.options.omega = omega;
      sc.increments = simulate_increments(scenario, prior, weights, grid, opts.max_n, rng);
      const auto want = oracle::statistics(sc.increments, prior, mixing_of(weights, grid), omega);

      std::vector<double> s, r;
      impl(sc, s, r);
      sc.options.force_direct = true;
      std::vector<double> ds, dr;
      impl(sc, ds, dr);
      for (std::size_t t = 0; t < want.log_s.size(); ++t) {
        rec_s.add(t < s.size() ? log_gap(s[t], want.log_s[t]) : INFINITY);
        rec_r.add(t < r.size() ? log_gap(r[t], want.log_r[t]) : INFINITY);
        dir_s.add(t < ds.size() ? log_gap(ds[t], want.log_s[t]) : INFINITY);
        dir_r.add(t < dr.size() ? log_gap(dr[t], want.log_r[t]) : INFINITY);
      }
    }
  }
  return {rec_s.done(), rec_r.done(), dir_s.done(), dir_r.done()};
}

std::vector<CheckResult> window(const VerifyOptions& opts, const StatisticImpl& impl) {
  Tally win_s("window", "windowed Shiryaev equals brute-force window sum", 1e-9);
  Tally win_r("window", "windowed SR equals brute-force window sum", 1e-9);
  Tally identical("window", "m1 >= n is bit-identical to the full statistic", 0.0);
  const ScenarioSpec scenarios[] = {ar_scenario(), mixture_scenario()};
  const Index steps = std::min<Index>(opts.max_n, 60);
  std::uint64_t index = 0;
  for (const auto& scenario : scenarios) {
    for (int c = 0; c < opts.paths; ++c) {
      Rng rng = case_rng(opts, kWindowSalt, index++);
      const PriorSpec prior = random_prior(rng);
      const SubsetWeights weights = random_weights(scenario.streams(), rng);
      const GridSpec grid = two_point_grid(scenario.streams());
      const double omega = std::bernoulli_distribution(0.5)(rng) ? uniform(rng, 0.5, 5.0) : 0.0;
      const Index m1 = std::uniform_int_distribution<Index>(0, 25)(rng);
      const Index m0 = std::uniform_int_distribution<Index>(0, std::min<Index>(m1, 3))(rng);
      StatisticCase sc{std::make_shared<const PriorTable>(prior, steps + 2), weights, grid, {}, {}};
      sc.options.omega = omega;
      sc.options.window_m1 = m1;
      sc.options.window_m0 = m0;
      sc.increments = simulate_increments(scenario, prior, weights, grid, steps, rng);
      const auto want = oracle::statistics(sc.increments, prior, mixing_of(weights, grid), omega, m1, m0);
      std::vector<double> s, r;
      impl(sc, s, r);
      for (std::size_t t = 0; t < want.log_s.size(); ++t) {
        win_s.add(t < s.size() ? log_gap(s[t], want.log_s[t]) : INFINITY);
        win_r.add(t < r.size() ? log_gap(r[t], want.log_r[t]) : INFINITY);
      }

      std::vector<double> full_s, full_r, wide_s, wide_r;
      sc.options.window_m1.reset();
      sc.options.window_m0 = 0;
      impl(sc, full_s, full_r);
      sc.options.window_m1 = steps;
      impl(sc, wide_s, wide_r);
      double mismatches = 0.0;
      for (std::size_t t = 0; t < full_s.size(); ++t)
        if (t >= wide_s.size() || full_s[t] != wide_s[t] || full_r[t] != wide_r[t]) mismatches += 1.0;
      identical.add(mismatches);
    }
  }
  return {win_s.done(), win_r.done(), identical.done()};
}

std::vector<CheckResult> posterior(const VerifyOptions& opts) {
  Tally post("posterior", "P(nu >= n | F_n) = 1/(S + 1)", 1e-9);
  constexpr int kPaths = 20;
  const Index steps = std::min<Index>(opts.max_n, 100);
  const ScenarioSpec scenarios[] = {ScenarioSpec::gaussian(3), ar_scenario(), mixture_scenario()};
  std::uint64_t index = 0;
  for (const auto& scenario : scenarios) {
    for (int c = 0; c < kPaths; ++c) {
      Rng rng = case_rng(opts, kPosteriorSalt, index++);
      const PriorSpec prior = PriorSpec::geometric(uniform(rng, 0.02, 0.1), c % 2 ? uniform(rng, 0.05, 0.3) : 0.0);
      const SubsetWeights weights = random_weights(scenario.streams(), rng);
      const GridSpec grid = two_point_grid(scenario.streams());
      ObservationBatch batch;
      StatisticCase sc{std::make_shared<const PriorTable>(prior, steps + 2), weights, grid, {}, {}};
      sc.increments = simulate_increments(scenario, prior, weights, grid, steps, rng, &batch);
      std::vector<double> s, r;
      library_statistics()(sc, s, r);
      const auto want = oracle::posterior_tail(scenario, prior, mixing_of(weights, grid), grid.points, batch);
      for (std::size_t t = 0; t < want.size(); ++t) post.add(std::abs(1.0 / (std::exp(s[t]) + 1.0) - want[t]));
    }
  }
  return {post.done()};
}

std::vector<MCEstimate> sr_mean(double theta, double omega, const std::vector<Index>& ns, std::size_t replications,
                                std::uint64_t seed, int workers) {
  if (ns.empty()) return {};
  const Index last = *std::max_element(ns.begin(), ns.end());
  const ScenarioSpec scenario = ScenarioSpec::gaussian(1);
  const GridSpec grid = GridSpec::degenerate({theta});
  const SubsetWeights weights = SubsetWeights::uniform(1, 1);
  StatisticOptions options;
  options.shiryaev = false;
  options.omega = omega;
  const auto table = std::make_shared<const PriorTable>(PriorSpec::geometric(0.5), last + 2);
  const DetectorState prototype(table, weights, grid, options, true);

  std::vector<double> values(replications * ns.size());
  parallel_for(replications, workers, [&](std::size_t, std::size_t rep) {
    Rng rng = make_rng(seed, rep);
    DetectorState state = prototype;
    ARStreamLLR source(std::get<ARChannelSpec>(scenario.channels[0]));
    ScenarioSampler sampler(scenario, ChangeSpec{}, rng);
    double x = 0.0, inc = 0.0;
    for (Index t = 1; t <= last; ++t) {
      sampler.next(rng, std::span<double>(&x, 1));
      source.push(x);
      inc = source.log_increment(theta);
      state.update(std::span<const double>(&inc, 1));
      for (std::size_t j = 0; j < ns.size(); ++j)
        if (ns[j] == t) values[rep * ns.size() + j] = std::exp(state.log_sr());
    }
  });

  std::vector<MCEstimate> out;
  for (std::size_t j = 0; j < ns.size(); ++j) {
    Accumulator acc;
    for (std::size_t rep = 0; rep < replications; ++rep) acc.add(values[rep * ns.size() + j]);
    MCEstimate e;
    e.mean = acc.mean();
    e.std_error = acc.std_error();
    e.n_effective = acc.count();
    out.push_back(e);
  }
  return out;
}

std::vector<CheckResult> submartingale(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  const std::vector<Index> ns{1, 10, 50};
  for (double omega : {0.0, 3.0}) {
    const auto est = sr_mean(0.5, omega, ns, opts.mc_replications, opts.seed, opts.workers);
    for (std::size_t j = 0; j < ns.size(); ++j) {
      CheckResult r;
      r.suite = "submartingale";
      r.invariant = "E_inf R(" + std::to_string(ns[j]) + ") = omega + n, omega = " + format_double(omega);
      r.max_error = std::abs(est[j].mean - (omega + static_cast<double>(ns[j])));
      r.tolerance = 3.0 * est[j].std_error;
      r.cases = est[j].n_effective;
      r.passed = r.max_error <= r.tolerance;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<CheckResult> telescoping(const VerifyOptions& opts) {
  Tally tel("telescoping", "summed mixture increments equal the closed-form LLR", 1e-10);
  for (int c = 0; c < opts.paths; ++c) {
    Rng rng = case_rng(opts, kTelescopeSalt, static_cast<std::uint64_t>(c));
    MixtureChannelSpec spec{uniform(rng, 0.05, 0.95), uniform(rng, 2.0, 4.0), uniform(rng, -0.5, 0.5),
                            uniform(rng, 0.5, 2.0)};
    const double theta = spec.mu2 + uniform(rng, -0.8, 0.8);
    const Index k = std::uniform_int_distribution<Index>(0, 20)(rng);
    const Index n = std::uniform_int_distribution<Index>(1, 50)(rng);
    ScenarioSpec scenario;
    scenario.channels.push_back(spec);
    ChangeSpec change{k, {0}, {theta}};
    ScenarioSampler sampler(scenario, change, rng);
    MixtureStreamLLR source(spec);
    std::vector<double> xs;
    double sum = 0.0;
    for (Index t = 1; t <= k + n; ++t) {
      double x = 0.0;
      sampler.next(rng, std::span<double>(&x, 1));
      xs.push_back(x);
      source.push(x);
      if (t > k) sum += source.log_increment(theta);
    }
    tel.add(std::abs(sum - oracle::mixture_llr(spec, theta, xs, k, n)));
  }
  return {tel.done()};
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"mixture-lr", "recursion",     "window",
                                              "posterior",  "submartingale", "telescoping"};
  return names;
}

std::vector<CheckResult> run_suite(const std::string& name, const VerifyOptions& opts) {
  if (name == "all") {
    std::vector<CheckResult> out;
    for (const auto& n : suite_names()) {
      auto part = run_suite(n, opts);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  if (name == "mixture-lr") return mixture_lr(opts);
  if (name == "recursion") return recursion(opts);
  if (name == "window") return window(opts);
  if (name == "posterior") return posterior(opts);
  if (name == "submartingale") return submartingale(opts);
  if (name == "telescoping") return telescoping(opts);
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

}  // namespace qcd::verify
