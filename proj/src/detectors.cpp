#include "qcd/detectors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qcd {

void DetectorConfig::validate(const PriorSpec& prior, int streams) const {
  if (!std::isfinite(threshold)) throw std::invalid_argument("detector: threshold must be finite");
  if (shiryaev()) {
    const double floor = prior.q / (1.0 - prior.q);
    if (!(threshold > floor)) throw std::invalid_argument("detector: Shiryaev threshold must exceed q/(1-q)");
  } else {
    if (!(threshold > 0.0)) throw std::invalid_argument("detector: SR threshold must be positive");
    if (!(omega >= 0.0)) throw std::invalid_argument("detector: head start must be nonnegative");
  }
  if (putative()) {
    if (putative_theta.size() != 1 && static_cast<int>(putative_theta.size()) != streams)
      throw std::invalid_argument("detector: putative theta needs one value or one per stream");
  }
  if (window_m1) {
    if (*window_m1 < 0) throw std::invalid_argument("detector: window m1 must be nonnegative");
    if (window_m0 < 0 || window_m0 > *window_m1) throw std::invalid_argument("detector: need 0 <= m0 <= m1");
  }
}

void DetectionProblem::validate() const {
  scenario.validate();
  prior.validate();
  if (weights.streams() != scenario.streams())
    throw std::invalid_argument("problem: subset weights and scenario disagree on the stream count");
  grid.validate(scenario.streams());
  detector.validate(prior, scenario.streams());
}

GridSpec DetectionProblem::effective_grid() const {
  if (!detector.putative()) return grid;
  if (detector.putative_theta.size() == 1)
    return GridSpec::degenerate(
        std::vector<double>(static_cast<std::size_t>(scenario.streams()), detector.putative_theta.front()));
  return GridSpec::degenerate(detector.putative_theta);
}

namespace {

StatisticOptions options_for(const DetectorConfig& c) {
  StatisticOptions o;
  o.shiryaev = c.shiryaev();
  o.sr = !c.shiryaev();
  o.omega = c.omega;
  o.window_m1 = c.window_m1;
  o.window_m0 = c.window_m0;
  return o;
}

bool all_k_independent(const std::vector<std::unique_ptr<StreamLLR>>& s) {
  for (const auto& p : s)
    if (!p->k_independent()) return false;
  return true;
}

}  // namespace

Detector::Detector(const DetectionProblem& problem, std::shared_ptr<const PriorTable> prior_table)
    : sources_((problem.validate(), make_stream_llrs(problem.scenario))),
      state_(std::move(prior_table), problem.weights, problem.effective_grid(), options_for(problem.detector),
             all_k_independent(sources_)),
      increments_(state_.grid().size() * static_cast<std::size_t>(problem.scenario.streams())),
      shiryaev_(problem.detector.shiryaev()),
      log_threshold_(std::log(problem.detector.threshold)) {}

Detector::Detector(const DetectionProblem& problem, Index prior_table_length)
    : Detector(problem, std::make_shared<const PriorTable>(problem.prior, prior_table_length)) {}

Detector::Detector(const Detector& other)
    : state_(other.state_),
      increments_(other.increments_),
      shiryaev_(other.shiryaev_),
      log_threshold_(other.log_threshold_) {
  sources_.reserve(other.sources_.size());
  for (const auto& s : other.sources_) sources_.push_back(s->clone());
}

void Detector::reset() {
  for (auto& s : sources_) s->reset();
  state_.reset();
}

bool Detector::step(std::span<const double> x) {
  if (x.size() != sources_.size()) throw std::invalid_argument("detector: observation has wrong stream count");
  for (std::size_t i = 0; i < sources_.size(); ++i) sources_[i]->push(x[i]);
  compute_increments(sources_, state_.grid(), increments_);
  state_.update(increments_);
  return log_statistic() >= log_threshold_;
}

RunResult run(Detector& detector, const ObservationBatch& batch, Index max_horizon) {
  if (max_horizon < 1) throw std::invalid_argument("run: max_horizon must be >= 1");
  detector.reset();
  RunResult result;
  const Index limit = std::min(max_horizon, batch.horizon);
  result.log_trajectory.reserve(static_cast<std::size_t>(limit));
  for (Index t = 0; t < limit; ++t) {
    const bool hit = detector.step(batch.row(t));
    result.log_trajectory.push_back(detector.log_statistic());
    if (hit) {
      result.stopped_at = t + 1;
      break;
    }
  }
  return result;
}

double threshold_shiryaev(double alpha, double q) {
  if (!(alpha > 0.0 && alpha < 1.0 - q)) {
    std::ostringstream msg;
    msg << "threshold_shiryaev: alpha must lie in (0, 1 - q) = (0, " << 1.0 - q << ")";
    throw std::invalid_argument(msg.str());
  }
  return (1.0 - alpha) / alpha;
}

double threshold_sr(double alpha, double omega, const PriorSpec& prior) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("threshold_sr: alpha must lie in (0, 1)");
  if (!(omega >= 0.0)) throw std::invalid_argument("threshold_sr: omega must be nonnegative");
  const double mean = prior_mean(prior);
  if (!std::isfinite(mean)) throw std::invalid_argument("threshold_sr: the prior has an infinite mean");
  const double b = prior_tail(prior, 1);
  const double a = (omega * b + mean) / alpha;
  if (!(a > 0.0)) throw std::invalid_argument("threshold_sr: omega b + mean(nu) is zero, so A would be 0");
  return a;
}

double threshold_cost(double cost, double r, double d_constant, double scale) {
  if (!(cost > 0.0) || !(d_constant > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("threshold_cost: cost, D and scale must be positive");
  if (!(r >= 1.0)) throw std::invalid_argument("threshold_cost: r must be >= 1");
  // Work with y = log A > 0: h(y) = log(rD) + y + (r-1) log y - log(scale/c)
  // is strictly increasing on (0, inf).
  const double target = std::log(scale / cost) - std::log(r * d_constant);
  auto h = [&](double y) { return y + (r - 1.0) * std::log(y) - target; };
  if (r == 1.0) {
    if (!(target > 0.0)) {
      std::ostringstream msg;
      msg << "threshold_cost: no root A > 1 for r = 1; need scale/c > r D, i.e. c < " << scale / (r * d_constant);
      throw std::invalid_argument(msg.str());
    }
    return std::exp(target);
  }
  double lo = std::numeric_limits<double>::min();
  double hi = std::max(1.0, target + 1.0);
  while (h(hi) < 0.0) hi *= 2.0;
  // h -> -inf as y -> 0 for r > 1, so the bracket [lo, hi] holds the root.
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double v = h(y);
    if (std::abs(v) <= 1e-15 * std::max(1.0, std::abs(target))) break;
    if (v < 0.0)
      lo = y;
    else
      hi = y;
    const double newton = y - v / (1.0 + (r - 1.0) / y);
    y = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * hi) break;
  }
  return std::exp(y);
}

}  // namespace qcd
