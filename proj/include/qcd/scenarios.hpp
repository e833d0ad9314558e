#pragma once

#include <memory>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "qcd/model.hpp"

namespace qcd {

/// Gaussian AR(p) noise with a deterministic periodic signal template.
/// An empty coefficient list with signal {1} is the plain i.i.d. Gaussian
/// mean-shift stream.
struct ARChannelSpec {
  std::vector<double> coeffs;
  double sigma = 1.0;
  std::vector<double> signal{1.0};

  void validate() const;
  friend bool operator==(const ARChannelSpec&, const ARChannelSpec&) = default;
};

/// Pre-change: a two-component mixture of i.i.d. N(mu1, sigma^2) and
/// N(mu2, sigma^2) sequences with weight beta_mix on the first. Post-change:
/// i.i.d. N(theta, sigma^2).
struct MixtureChannelSpec {
  double beta_mix = 0.5;
  double mu1 = 1.0;
  double mu2 = 0.0;
  double sigma = 1.0;

  void validate() const;
  /// Rejects theta unless |theta - mu1| > |theta - mu2|.
  void check_ordering(double theta) const;
  friend bool operator==(const MixtureChannelSpec&, const MixtureChannelSpec&) = default;
};

using ChannelSpec = std::variant<ARChannelSpec, MixtureChannelSpec>;

struct ScenarioSpec {
  std::vector<ChannelSpec> channels;

  int streams() const { return static_cast<int>(channels.size()); }
  void validate() const;
  /// Validates `change` against this scenario, including the mixture ordering.
  void validate_change(const ChangeSpec& change, int max_affected) const;

  static ScenarioSpec homogeneous(const ChannelSpec& channel, int streams);
  static ScenarioSpec gaussian(int streams, double sigma = 1.0);

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// True when every root of z^p - b_1 z^{p-1} - ... - b_p lies strictly inside
/// the unit circle (step-down / reflection-coefficient test).
bool ar_is_stable(std::span<const double> coeffs);

/// Residual of the newest entry of `history` against the AR prediction. The
/// order is truncated to the available past, so the first residual is X_1.
double ar_residual(std::span<const double> history, std::span<const double> coeffs);

/// theta S~ X~ / sigma^2 - theta^2 S~^2 / (2 sigma^2)
double ar_llr_increment(double theta, double residual, double signal_residual, double sigma);

/// Period average of the steady-state squared signal residual.
double q_constant(std::span<const double> signal, std::span<const double> coeffs);

/// Running state for the mixture pre-change model. Keeps log G_n, where
/// G_n = prod_j p1(X_j)/p2(X_j), and the latest observation.
class MixtureLLRState {
 public:
  explicit MixtureLLRState(const MixtureChannelSpec& spec);

  void reset();
  /// Appends x and updates log G. Throws on non-finite x.
  void push(double x);
  /// log f_theta(x_n)/g(x_n | x^{n-1}) for the latest pushed observation.
  double increment(double theta) const;

  double log_g() const { return log_g_; }
  double log_g_prev() const { return log_g_prev_; }

 private:
  MixtureChannelSpec spec_;
  double log_v_;
  double log_g_ = 0.0;
  double log_g_prev_ = 0.0;
  double x_ = 0.0;
};

/// log f_theta(x)/p_2(x) for Gaussian components with common variance.
double mixture_log_ratio_2(const MixtureChannelSpec& spec, double theta, double x);

/// Per-stream source of log-likelihood-ratio increments. Holds the stream's
/// history, so one instance serves one replication on one thread.
class StreamLLR {
 public:
  virtual ~StreamLLR() = default;
  virtual void reset() = 0;
  virtual void push(double x) = 0;
  /// log L_theta(t) for the latest pushed observation.
  virtual double log_increment(double theta) const = 0;
  /// Increments that do not depend on the hypothesized change point admit the
  /// exact one-step recursions.
  virtual bool k_independent() const { return true; }
  virtual std::unique_ptr<StreamLLR> clone() const = 0;
};

class ARStreamLLR final : public StreamLLR {
 public:
  explicit ARStreamLLR(ARChannelSpec spec);
  void reset() override;
  void push(double x) override;
  double log_increment(double theta) const override;
  std::unique_ptr<StreamLLR> clone() const override { return std::make_unique<ARStreamLLR>(*this); }

  double residual() const { return residual_; }
  double signal_residual() const { return signal_residual_; }

 private:
  ARChannelSpec spec_;
  std::vector<double> history_;  // most recent p observations, newest last
  Index n_ = 0;
  double residual_ = 0.0;
  double signal_residual_ = 0.0;
};

class MixtureStreamLLR final : public StreamLLR {
 public:
  explicit MixtureStreamLLR(const MixtureChannelSpec& spec) : state_(spec) {}
  void reset() override { state_.reset(); }
  void push(double x) override { state_.push(x); }
  double log_increment(double theta) const override { return state_.increment(theta); }
  std::unique_ptr<StreamLLR> clone() const override { return std::make_unique<MixtureStreamLLR>(*this); }

 private:
  MixtureLLRState state_;
};

std::unique_ptr<StreamLLR> make_stream_llr(const ChannelSpec& channel);
std::vector<std::unique_ptr<StreamLLR>> make_stream_llrs(const ScenarioSpec& scenario);

/// Signal residual S~_n (1-based n) of a periodic template with truncated AR order.
double signal_residual_at(const ARChannelSpec& spec, Index n);

/// Streaming generator for one replication. Each call to next() emits the
/// observation vector for the next time index t = 1, 2, ...
class ScenarioSampler {
 public:
  ScenarioSampler(const ScenarioSpec& scenario, const ChangeSpec& change, Rng& rng);
  void next(Rng& rng, std::span<double> out);
  Index time() const { return t_; }

 private:
  const ScenarioSpec* scenario_;
  ChangeSpec change_;
  std::vector<std::vector<double>> history_;
  std::vector<int> component_;  // mixture streams: 1 or 2
  std::normal_distribution<double> normal_{0.0, 1.0};
  Index t_ = 0;
};

}  // namespace qcd
