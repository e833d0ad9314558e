#include "qcd/montecarlo.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "qcd/info.hpp"

namespace qcd {

void MCConfig::validate() const {
  if (replications == 0) throw std::invalid_argument("mc: replications must be positive");
  if (horizon < 1) throw std::invalid_argument("mc: horizon must be positive");
  if (workers < 1) throw std::invalid_argument("mc: workers must be positive");
}

void Accumulator::add(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double n_a = static_cast<double>(count_);
  const double n_b = static_cast<double>(other.count_);
  const double n = n_a + n_b;
  const double delta = other.mean_ - mean_;
  mean_ += delta * n_b / n;
  m2_ += other.m2_ + delta * delta * n_a * n_b / n;
  count_ += other.count_;
}

double Accumulator::variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }

double Accumulator::std_error() const {
  return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
}

namespace {

MCEstimate to_estimate(const Accumulator& acc, std::size_t censored, std::size_t considered, std::size_t discarded) {
  MCEstimate e;
  e.mean = acc.mean();
  e.std_error = acc.std_error();
  e.n_effective = acc.count();
  e.censored_fraction = considered > 0 ? static_cast<double>(censored) / static_cast<double>(considered) : 0.0;
  e.discarded = discarded;
  return e;
}

std::size_t sample_grid_point(const GridSpec& grid, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    if (u < grid.weights[g]) return g;
    u -= grid.weights[g];
  }
  return grid.size() - 1;
}

}  // namespace

Index ReplicationRecord::delay() const {
  if (!stopped_at) throw std::logic_error("delay of a censored replication");
  return *stopped_at - std::max<Index>(nu, 0);
}

std::vector<ReplicationRecord> simulate(const DetectionProblem& problem, const ChangePlan& plan, const MCConfig& mc,
                                        bool stop_at_nu) {
  problem.validate();
  mc.validate();
  const int max_affected = problem.weights.max_affected;
  if (plan.mode == ChangeMode::Fixed || plan.mode == ChangeMode::PriorNu) {
    ChangeSpec probe = plan.change;
    if (plan.mode == ChangeMode::PriorNu) probe.nu = 0;
    problem.scenario.validate_change(probe, max_affected);
  }

  auto table = std::make_shared<const PriorTable>(problem.prior, mc.horizon + 2);
  const Detector prototype(problem, table);
  std::vector<std::unique_ptr<Detector>> detectors;
  const auto workers = static_cast<std::size_t>(mc.workers);
  for (std::size_t w = 0; w < workers; ++w) detectors.push_back(std::make_unique<Detector>(prototype));

  std::vector<ReplicationRecord> records(mc.replications);
  const auto streams = static_cast<std::size_t>(problem.scenario.streams());

  parallel_for(mc.replications, mc.workers, [&](std::size_t worker, std::size_t i) {
    Rng rng = make_rng(mc.master_seed, i);
    ReplicationRecord rec;
    rec.replication = i;

    ChangeSpec change;
    switch (plan.mode) {
      case ChangeMode::None:
        break;
      case ChangeMode::Fixed:
        change = plan.change;
        break;
      case ChangeMode::PriorNu:
        change = plan.change;
        change.nu = sample_change(problem.prior, rng);
        break;
      case ChangeMode::PriorAll: {
        change.nu = sample_change(problem.prior, rng);
        change.subset = sample_subset(problem.weights, rng);
        rec.grid_point = sample_grid_point(problem.grid, rng);
        for (int s : change.subset)
          change.theta.push_back(problem.grid.points[rec.grid_point][static_cast<std::size_t>(s)]);
        problem.scenario.validate_change(change, max_affected);
        break;
      }
    }
    rec.nu = change.nu;
    rec.subset = change.subset;

    Detector& det = *detectors[worker];
    det.reset();
    ScenarioSampler sampler(problem.scenario, change, rng);
    std::vector<double> x(streams);
    for (Index t = 1; t <= mc.horizon; ++t) {
      if (stop_at_nu && change.nu != kNoChange && t > change.nu) break;
      sampler.next(rng, x);
      if (det.step(x)) {
        rec.stopped_at = t;
        break;
      }
    }
    records[i] = std::move(rec);
  });
  return records;
}

double pfa_bound(const DetectionProblem& problem) {
  const double a = problem.detector.threshold;
  if (problem.detector.shiryaev()) return 1.0 / (1.0 + a);
  const double mean = prior_mean(problem.prior);
  if (!std::isfinite(mean)) return 1.0;
  return std::min(1.0, (problem.detector.omega * prior_tail(problem.prior, 1) + mean) / a);
}

MCEstimate pfa_from_records(const DetectionProblem& problem, const std::vector<ReplicationRecord>& records,
                            Index horizon) {
  Accumulator acc;
  std::size_t censored = 0;
  const double censored_value = prior_tail(problem.prior, horizon + 1);
  for (const auto& r : records) {
    if (r.stopped_at) {
      acc.add(prior_tail(problem.prior, *r.stopped_at));
    } else {
      ++censored;
      acc.add(censored_value);
    }
  }
  MCEstimate e = to_estimate(acc, censored, records.size(), 0);
  e.insufficient_horizon = censored > 0 && !(censored_value < 1e-3 * pfa_bound(problem));
  return e;
}

MCEstimate estimate_pfa(const DetectionProblem& problem, const MCConfig& mc) {
  return pfa_from_records(problem, simulate(problem, ChangePlan::none(), mc), mc.horizon);
}

MCEstimate estimate_pfa_two_stage(const DetectionProblem& problem, const MCConfig& mc) {
  problem.validate();
  mc.validate();
  auto table = std::make_shared<const PriorTable>(problem.prior, mc.horizon + 2);
  const Detector prototype(problem, table);
  std::vector<std::unique_ptr<Detector>> detectors;
  for (int w = 0; w < mc.workers; ++w) detectors.push_back(std::make_unique<Detector>(prototype));
  const auto streams = static_cast<std::size_t>(problem.scenario.streams());
  const ChangeSpec no_change;

  // {T <= nu} is decided by pre-change data alone, so each run stops at nu.
  std::vector<ReplicationRecord> records(mc.replications);
  parallel_for(mc.replications, mc.workers, [&](std::size_t worker, std::size_t i) {
    Rng rng = make_rng(mc.master_seed, i);
    ReplicationRecord rec;
    rec.replication = i;
    rec.nu = sample_change(problem.prior, rng);
    Detector& det = *detectors[worker];
    det.reset();
    ScenarioSampler sampler(problem.scenario, no_change, rng);
    std::vector<double> x(streams);
    const Index last = std::min<Index>(rec.nu, mc.horizon);
    for (Index t = 1; t <= last; ++t) {
      sampler.next(rng, x);
      if (det.step(x)) {
        rec.stopped_at = t;
        break;
      }
    }
    records[i] = std::move(rec);
  });

  Accumulator acc;
  std::size_t censored = 0;
  for (const auto& r : records) {
    acc.add(r.stopped_at ? 1.0 : 0.0);
    if (!r.stopped_at && r.nu > mc.horizon) ++censored;
  }
  return to_estimate(acc, censored, records.size(), 0);
}

MCEstimate delay_from_records(const std::vector<ReplicationRecord>& records, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("delay moment order must be positive");
  Accumulator acc;
  std::size_t censored = 0, discarded = 0;
  for (const auto& rec : records) {
    if (rec.false_alarm()) {
      ++discarded;
    } else if (rec.censored()) {
      ++censored;
    } else {
      acc.add(std::pow(static_cast<double>(rec.delay()), r));
    }
  }
  return to_estimate(acc, censored, records.size() - discarded, discarded);
}

MCEstimate estimate_conditional_delay(const DetectionProblem& problem, const ChangeSpec& change, double r,
                                      const MCConfig& mc) {
  if (!(r >= 1.0)) throw std::invalid_argument("estimate_conditional_delay: r must be >= 1");
  if (change.nu == kNoChange) throw std::invalid_argument("estimate_conditional_delay: change point required");
  return delay_from_records(simulate(problem, ChangePlan::fixed(change), mc), r);
}

MCEstimate estimate_bayes_delay(const DetectionProblem& problem, const ChangeSpec& change, double r,
                                const MCConfig& mc) {
  if (!(r >= 1.0)) throw std::invalid_argument("estimate_bayes_delay: r must be >= 1");
  return delay_from_records(simulate(problem, ChangePlan::prior_nu(change), mc), r);
}

MCEstimate estimate_average_risk(const DetectionProblem& problem, double cost, double r, const MCConfig& mc) {
  if (!(cost >= 0.0)) throw std::invalid_argument("estimate_average_risk: cost must be nonnegative");
  if (!(r >= 1.0)) throw std::invalid_argument("estimate_average_risk: r must be >= 1");
  const auto records = simulate(problem, ChangePlan::prior_all(), mc);
  Accumulator acc;
  std::size_t censored = 0;
  for (const auto& rec : records) {
    const Index start = std::max<Index>(rec.nu, 0);
    if (rec.stopped_at) {
      const Index t = *rec.stopped_at;
      if (t <= rec.nu)
        acc.add(1.0);
      else
        acc.add(cost * std::pow(static_cast<double>(t - start), r));
    } else {
      ++censored;
      const Index lag = std::max<Index>(mc.horizon - start, 0);
      acc.add(cost * std::pow(static_cast<double>(lag), r));
    }
  }
  return to_estimate(acc, censored, records.size(), 0);
}

double threshold_for_alpha(const DetectionProblem& problem, double alpha) {
  if (problem.detector.shiryaev()) return threshold_shiryaev(alpha, problem.prior.q);
  return threshold_sr(alpha, problem.detector.omega, problem.prior);
}

std::vector<SweepRow> asymptotic_ratio_sweep(const DetectionProblem& problem, const ChangeSpec& change,
                                             std::span<const double> alphas, std::span<const double> orders,
                                             const MCConfig& mc) {
  if (alphas.empty()) throw std::invalid_argument("sweep: empty alpha grid");
  if (orders.empty()) throw std::invalid_argument("sweep: no moment orders");
  ChangeSpec probe = change;
  probe.nu = 0;
  problem.scenario.validate_change(probe, problem.weights.max_affected);
  const double info = change_information(problem.scenario, probe);
  const double mu = problem.detector.shiryaev() ? prior_tail_rate(problem.prior) : 0.0;

  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    DetectionProblem p = problem;
    p.detector.threshold = threshold_for_alpha(problem, alpha);
    SweepRow row;
    row.alpha = alpha;
    row.threshold = p.detector.threshold;
    row.pfa = estimate_pfa(p, mc);
    const auto records = simulate(p, ChangePlan::prior_nu(change), mc);
    for (double r : orders) {
      const MCEstimate d = delay_from_records(records, r);
      const double first = std::pow(std::abs(std::log(alpha)) / (info + mu), r);
      row.delay.push_back(d);
      row.first_order.push_back(first);
      row.ratio.push_back(d.mean / first);
      row.ratio_se.push_back(d.std_error / first);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qcd
