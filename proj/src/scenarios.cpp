#include "qcd/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qcd {

void ARChannelSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("ar channel: sigma must be positive");
  if (signal.empty()) throw std::invalid_argument("ar channel: signal template is empty");
  for (double s : signal)
    if (!std::isfinite(s)) throw std::invalid_argument("ar channel: signal must be finite");
  if (!ar_is_stable(coeffs)) throw std::invalid_argument("ar channel: AR coefficients are not stable");
}

void MixtureChannelSpec::validate() const {
  if (!(beta_mix > 0.0 && beta_mix < 1.0)) throw std::invalid_argument("mixture channel: beta_mix must lie in (0, 1)");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("mixture channel: sigma must be positive");
  if (!std::isfinite(mu1) || !std::isfinite(mu2)) throw std::invalid_argument("mixture channel: means must be finite");
}

void MixtureChannelSpec::check_ordering(double theta) const {
  if (!(std::abs(theta - mu1) > std::abs(theta - mu2)))
    throw std::invalid_argument("mixture channel: need |theta - mu1| > |theta - mu2| so that G_n -> 0 after the change");
}

void ScenarioSpec::validate() const {
  if (channels.empty()) throw std::invalid_argument("scenario: no streams");
  for (const auto& c : channels) std::visit([](const auto& spec) { spec.validate(); }, c);
}

void ScenarioSpec::validate_change(const ChangeSpec& change, int max_affected) const {
  change.validate(streams(), max_affected);
  for (std::size_t j = 0; j < change.subset.size(); ++j) {
    if (const auto* mix = std::get_if<MixtureChannelSpec>(&channels[static_cast<std::size_t>(change.subset[j])]))
      mix->check_ordering(change.theta[j]);
  }
}

ScenarioSpec ScenarioSpec::homogeneous(const ChannelSpec& channel, int streams) {
  if (streams <= 0) throw std::invalid_argument("scenario: stream count must be positive");
  ScenarioSpec s;
  s.channels.assign(static_cast<std::size_t>(streams), channel);
  return s;
}

ScenarioSpec ScenarioSpec::gaussian(int streams, double sigma) {
  ARChannelSpec ch;
  ch.sigma = sigma;
  return homogeneous(ch, streams);
}

bool ar_is_stable(std::span<const double> coeffs) {
  // a(z) = 1 - b_1 z^{-1} - ... - b_p z^{-p}; stable iff every reflection
  // coefficient from the step-down recursion has modulus below one.
  std::vector<double> a(coeffs.size() + 1);
  a[0] = 1.0;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (!std::isfinite(coeffs[j])) return false;
    a[j + 1] = -coeffs[j];
  }
  for (std::size_t m = coeffs.size(); m >= 1; --m) {
    const double k = a[m];
    if (std::abs(k) >= 1.0) return false;
    std::vector<double> next(m);
    const double denom = 1.0 - k * k;
    for (std::size_t j = 0; j < m; ++j) next[j] = (a[j] - k * a[m - j]) / denom;
    a.assign(next.begin(), next.end());
  }
  return true;
}

double ar_residual(std::span<const double> history, std::span<const double> coeffs) {
  if (history.empty()) throw std::invalid_argument("ar_residual: empty history");
  const std::size_t n = history.size();
  const std::size_t order = std::min(coeffs.size(), n - 1);
  double r = history[n - 1];
  for (std::size_t j = 1; j <= order; ++j) r -= coeffs[j - 1] * history[n - 1 - j];
  return r;
}

double ar_llr_increment(double theta, double residual, double signal_residual, double sigma) {
  const double s2 = sigma * sigma;
  return theta * signal_residual * residual / s2 - theta * theta * signal_residual * signal_residual / (2.0 * s2);
}

double q_constant(std::span<const double> signal, std::span<const double> coeffs) {
  if (signal.empty()) throw std::invalid_argument("q_constant: empty signal template");
  const auto period = static_cast<Index>(signal.size());
  auto at = [&](Index m) {
    const Index r = ((m % period) + period) % period;
    return signal[static_cast<std::size_t>(r)];
  };
  double acc = 0.0;
  for (Index n = 0; n < period; ++n) {
    double r = at(n);
    for (std::size_t j = 1; j <= coeffs.size(); ++j) r -= coeffs[j - 1] * at(n - static_cast<Index>(j));
    acc += r * r;
  }
  return acc / static_cast<double>(period);
}

double signal_residual_at(const ARChannelSpec& spec, Index n) {
  const auto period = static_cast<Index>(spec.signal.size());
  auto at = [&](Index m) { return spec.signal[static_cast<std::size_t>((m - 1) % period)]; };
  const Index order = std::min<Index>(static_cast<Index>(spec.coeffs.size()), n - 1);
  double r = at(n);
  for (Index j = 1; j <= order; ++j) r -= spec.coeffs[static_cast<std::size_t>(j - 1)] * at(n - j);
  return r;
}

// ---------------------------------------------------------------------------

double mixture_log_ratio_2(const MixtureChannelSpec& spec, double theta, double x) {
  const double s2 = spec.sigma * spec.sigma;
  return ((x - spec.mu2) * (x - spec.mu2) - (x - theta) * (x - theta)) / (2.0 * s2);
}

MixtureLLRState::MixtureLLRState(const MixtureChannelSpec& spec)
    : spec_(spec), log_v_(std::log(spec.beta_mix) - std::log1p(-spec.beta_mix)) {
  spec_.validate();
}

void MixtureLLRState::reset() {
  log_g_ = 0.0;
  log_g_prev_ = 0.0;
  x_ = 0.0;
}

void MixtureLLRState::push(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("mixture stream: non-finite observation");
  const double s2 = spec_.sigma * spec_.sigma;
  // log p1(x)/p2(x)
  const double log_dg = ((x - spec_.mu2) * (x - spec_.mu2) - (x - spec_.mu1) * (x - spec_.mu1)) / (2.0 * s2);
  log_g_prev_ = log_g_;
  log_g_ += log_dg;
  x_ = x;
}

double MixtureLLRState::increment(double theta) const {
  return mixture_log_ratio_2(spec_, theta, x_) + log1p_exp(log_v_ + log_g_prev_) - log1p_exp(log_v_ + log_g_);
}

// ---------------------------------------------------------------------------

ARStreamLLR::ARStreamLLR(ARChannelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  history_.reserve(spec_.coeffs.size() + 1);
}

void ARStreamLLR::reset() {
  history_.clear();
  n_ = 0;
  residual_ = 0.0;
  signal_residual_ = 0.0;
}

void ARStreamLLR::push(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("ar stream: non-finite observation");
  ++n_;
  history_.push_back(x);
  residual_ = ar_residual(history_, spec_.coeffs);
  if (history_.size() > spec_.coeffs.size()) history_.erase(history_.begin());
  signal_residual_ = signal_residual_at(spec_, n_);
}

double ARStreamLLR::log_increment(double theta) const {
  return ar_llr_increment(theta, residual_, signal_residual_, spec_.sigma);
}

std::unique_ptr<StreamLLR> make_stream_llr(const ChannelSpec& channel) {
  return std::visit(
      [](const auto& spec) -> std::unique_ptr<StreamLLR> {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ARChannelSpec>)
          return std::make_unique<ARStreamLLR>(spec);
        else
          return std::make_unique<MixtureStreamLLR>(spec);
      },
      channel);
}

std::vector<std::unique_ptr<StreamLLR>> make_stream_llrs(const ScenarioSpec& scenario) {
  std::vector<std::unique_ptr<StreamLLR>> out;
  out.reserve(scenario.channels.size());
  for (const auto& c : scenario.channels) out.push_back(make_stream_llr(c));
  return out;
}

// ---------------------------------------------------------------------------

ScenarioSampler::ScenarioSampler(const ScenarioSpec& scenario, const ChangeSpec& change, Rng& rng)
    : scenario_(&scenario), change_(change) {
  const auto n = scenario.channels.size();
  history_.resize(n);
  component_.assign(n, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto* mix = std::get_if<MixtureChannelSpec>(&scenario.channels[i]))
      component_[i] = unif(rng) < mix->beta_mix ? 1 : 2;
  }
}

void ScenarioSampler::next(Rng& rng, std::span<double> out) {
  ++t_;
  const bool post = change_.nu != kNoChange && t_ > change_.nu;
  for (std::size_t i = 0; i < scenario_->channels.size(); ++i) {
    const double z = normal_(rng);
    const int stream = static_cast<int>(i);
    const bool changed = post && change_.affects(stream);
    const double theta = changed ? change_.theta_for(stream) : 0.0;
    std::visit(
        [&](const auto& spec) {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, ARChannelSpec>) {
            // X_t = AR prediction + theta S~_t + sigma z, so that the residual
            // has exactly the conditional law used by the LLR.
            auto& h = history_[i];
            const std::size_t order = std::min(spec.coeffs.size(), h.size());
            double pred = 0.0;
            for (std::size_t j = 1; j <= order; ++j) pred += spec.coeffs[j - 1] * h[h.size() - j];
            const double mean = changed ? theta * signal_residual_at(spec, t_) : 0.0;
            const double x = pred + mean + spec.sigma * z;
            h.push_back(x);
            if (h.size() > spec.coeffs.size()) h.erase(h.begin());
            out[i] = x;
          } else {
            const double mean = changed ? theta : (component_[i] == 1 ? spec.mu1 : spec.mu2);
            out[i] = mean + spec.sigma * z;
          }
        },
        scenario_->channels[i]);
  }
}

}  // namespace qcd
