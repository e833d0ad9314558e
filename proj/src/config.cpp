#include "qcd/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qcd/info.hpp"

namespace qcd {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  Int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

/// Numbers separated by commas and/or whitespace. Empty text is an empty list.
std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string normalized = text;
  for (char& c : normalized)
    if (c == ',') c = ' ';
  std::istringstream in(normalized);
  std::string tok;
  while (in >> tok) out.push_back(to_double(key, tok));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

/// Reads keys and tracks which ones were consumed, so unknown keys are errors.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.push_back(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }
  std::optional<double> number(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return to_double(name_ + "." + key, *v);
  }
  double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }
  template <class Int>
  std::optional<Int> integer(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return to_int<Int>(name_ + "." + key, *v);
  }
  std::optional<std::vector<double>> list(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return to_list(name_ + "." + key, *v);
  }
  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [k, child] : *tree_) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end())
        throw ConfigError("unknown key '" + k + "' in section [" + name_ + "]");
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::vector<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
  auto c = root.get_child_optional(pt::ptree::path_type(name, '\0'));
  return c ? &*c : nullptr;
}

ChannelSpec read_channel(Section& s, const ChannelSpec& fallback) {
  const std::string fallback_model = std::holds_alternative<MixtureChannelSpec>(fallback) ? "mixture" : "ar";
  const std::string model = s.raw("model").value_or(fallback_model);
  if (model == "ar") {
    ARChannelSpec ar = std::holds_alternative<ARChannelSpec>(fallback) ? std::get<ARChannelSpec>(fallback)
                                                                       : ARChannelSpec{};
    if (auto v = s.list("coeffs")) ar.coeffs = *v;
    ar.sigma = s.number("sigma", ar.sigma);
    if (auto v = s.list("signal")) ar.signal = *v;
    return ar;
  }
  if (model == "mixture") {
    MixtureChannelSpec m = std::holds_alternative<MixtureChannelSpec>(fallback)
                               ? std::get<MixtureChannelSpec>(fallback)
                               : MixtureChannelSpec{};
    m.beta_mix = s.number("beta_mix", m.beta_mix);
    m.mu1 = s.number("mu1", m.mu1);
    m.mu2 = s.number("mu2", m.mu2);
    m.sigma = s.number("sigma", m.sigma);
    return m;
  }
  throw ConfigError("model must be 'ar' or 'mixture', got '" + model + "'");
}

void write_channel(std::ostream& out, const ChannelSpec& ch) {
  if (const auto* ar = std::get_if<ARChannelSpec>(&ch)) {
    out << "model = ar\ncoeffs = " << join(ar->coeffs) << "\nsigma = " << format_double(ar->sigma)
        << "\nsignal = " << join(ar->signal) << "\n";
  } else {
    const auto& m = std::get<MixtureChannelSpec>(ch);
    out << "model = mixture\nbeta_mix = " << format_double(m.beta_mix) << "\nmu1 = " << format_double(m.mu1)
        << "\nmu2 = " << format_double(m.mu2) << "\nsigma = " << format_double(m.sigma) << "\n";
  }
}

const char* prior_name(PriorKind k) {
  switch (k) {
    case PriorKind::Geometric:
      return "geometric";
    case PriorKind::PolynomialTail:
      return "polynomial-tail";
    case PriorKind::PointMass:
      return "point-mass";
  }
  return "";
}

const char* detector_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::ShiryaevMixture:
      return "shiryaev";
    case DetectorKind::SRMixture:
      return "sr";
    case DetectorKind::ShiryaevPutative:
      return "shiryaev-putative";
    case DetectorKind::SRPutative:
      return "sr-putative";
  }
  return "";
}

const char* mode_name(ChangeMode m) {
  switch (m) {
    case ChangeMode::None:
      return "none";
    case ChangeMode::Fixed:
      return "fixed";
    case ChangeMode::PriorNu:
      return "prior-nu";
    case ChangeMode::PriorAll:
      return "prior-all";
  }
  return "";
}

template <class F>
auto as_config_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

bool scalar_grid(const GridSpec& g) {
  for (const auto& p : g.points)
    for (double t : p)
      if (t != p.front()) return false;
  return true;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [name, sub] : root) {
    if (!sub.data().empty() && sub.empty()) throw ConfigError("key '" + name + "' outside any section");
    const bool known = name == "scenario" || name == "prior" || name == "grid" || name == "detector" ||
                       name == "target" || name == "change" || name == "mc" || name == "sweep" ||
                       name == "output" || name.rfind("stream.", 0) == 0;
    if (!known) throw ConfigError("unknown section [" + name + "]");
  }

  RunConfig c;

  // [scenario] holds the default channel; [stream.i] sections override it.
  Section scen(child(root, "scenario"), "scenario");
  const auto streams = scen.integer<int>("streams");
  if (!streams || *streams < 1) throw ConfigError("scenario.streams must be a positive integer");
  const ChannelSpec base = read_channel(scen, ARChannelSpec{});
  scen.check_unknown();
  for (int i = 0; i < *streams; ++i) {
    const std::string name = "stream." + std::to_string(i);
    Section s(child(root, name), name);
    c.scenario.channels.push_back(read_channel(s, base));
    s.check_unknown();
  }
  for (const auto& [name, sub] : root) {
    if (name.rfind("stream.", 0) == 0) {
      const int idx = to_int<int>(name, name.substr(7));
      if (idx < 0 || idx >= *streams) throw ConfigError("section [" + name + "] is beyond scenario.streams");
    }
  }

  Section prior(child(root, "prior"), "prior");
  const std::string pk = prior.raw("kind").value_or("geometric");
  const double q = prior.number("q", 0.0);
  if (pk == "geometric") {
    c.prior = PriorSpec::geometric(prior.number("rho", 0.1), q);
  } else if (pk == "polynomial-tail") {
    c.prior = PriorSpec::polynomial_tail(prior.number("beta", 1.0), q);
  } else if (pk == "point-mass") {
    c.prior = PriorSpec::point_mass(prior.integer<Index>("k0").value_or(0), q);
  } else {
    throw ConfigError("prior.kind must be geometric, polynomial-tail or point-mass");
  }
  prior.check_unknown();

  Section grid(child(root, "grid"), "grid");
  const auto theta = grid.list("theta");
  const auto points = grid.raw("points");
  if (theta && points) throw ConfigError("grid: give either theta or points, not both");
  if (!theta && !points) throw ConfigError("grid: theta or points is required");
  if (theta) {
    for (double t : *theta) c.grid.points.emplace_back(static_cast<std::size_t>(*streams), t);
  } else {
    for (const auto& part : split(*points, '|')) c.grid.points.push_back(to_list("grid.points", part));
  }
  if (auto w = grid.list("weights")) {
    c.grid.weights = *w;
  } else {
    c.grid.weights.assign(c.grid.points.size(), 1.0 / static_cast<double>(c.grid.points.size()));
  }
  std::vector<double> p = grid.list("p").value_or(std::vector<double>(static_cast<std::size_t>(*streams), 1.0));
  const int k = grid.integer<int>("max_affected").value_or(*streams);
  c.weights = as_config_error([&] { return SubsetWeights::make(p, k); });
  grid.check_unknown();

  Section det(child(root, "detector"), "detector");
  const std::string dk = det.raw("kind").value_or("shiryaev");
  if (dk == "shiryaev")
    c.detector.kind = DetectorKind::ShiryaevMixture;
  else if (dk == "sr")
    c.detector.kind = DetectorKind::SRMixture;
  else if (dk == "shiryaev-putative")
    c.detector.kind = DetectorKind::ShiryaevPutative;
  else if (dk == "sr-putative")
    c.detector.kind = DetectorKind::SRPutative;
  else
    throw ConfigError("detector.kind must be shiryaev, sr, shiryaev-putative or sr-putative");
  if (auto a = det.number("threshold")) {
    c.detector.threshold = *a;
    c.threshold_given = true;
  }
  c.detector.window_m1 = det.integer<Index>("window_m1");
  c.detector.window_m0 = det.integer<Index>("window_m0").value_or(0);
  c.detector.omega = det.number("omega", 0.0);
  c.detector.putative_theta = det.list("putative_theta").value_or(std::vector<double>{});
  det.check_unknown();

  Section target(child(root, "target"), "target");
  c.target.alpha = target.number("alpha");
  c.target.cost = target.number("cost");
  c.target.cost_r = target.number("r", 1.0);
  target.check_unknown();

  Section change(child(root, "change"), "change");
  const std::string mode = change.raw("mode").value_or("none");
  if (mode == "none")
    c.change_mode = ChangeMode::None;
  else if (mode == "fixed")
    c.change_mode = ChangeMode::Fixed;
  else if (mode == "prior-nu")
    c.change_mode = ChangeMode::PriorNu;
  else if (mode == "prior-all")
    c.change_mode = ChangeMode::PriorAll;
  else
    throw ConfigError("change.mode must be none, fixed, prior-nu or prior-all");
  if (auto nu = change.integer<Index>("nu")) c.change.nu = *nu;
  if (auto s = change.list("subset")) {
    for (double v : *s) {
      if (v != std::floor(v)) throw ConfigError("change.subset: stream indices must be integers");
      c.change.subset.push_back(static_cast<int>(v));
    }
  }
  c.change.theta = change.list("theta").value_or(std::vector<double>{});
  change.check_unknown();

  Section mc(child(root, "mc"), "mc");
  c.mc.replications = mc.integer<std::size_t>("replications").value_or(c.mc.replications);
  c.mc.master_seed = mc.integer<std::uint64_t>("seed").value_or(c.mc.master_seed);
  c.mc.horizon = mc.integer<Index>("horizon").value_or(c.mc.horizon);
  c.mc.workers = mc.integer<int>("workers").value_or(c.mc.workers);
  c.orders = mc.list("orders").value_or(c.orders);
  mc.check_unknown();

  Section sweep(child(root, "sweep"), "sweep");
  c.sweep_alphas = sweep.list("alphas").value_or(std::vector<double>{});
  sweep.check_unknown();

  Section output(child(root, "output"), "output");
  c.output = output.raw("path").value_or("");
  output.check_unknown();

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void RunConfig::validate() const {
  as_config_error([&] {
    scenario.validate();
    prior.validate();
    if (weights.streams() != scenario.streams()) throw ConfigError("grid.p needs one weight per stream");
    grid.validate(scenario.streams());
    if (threshold_given) detector.validate(prior, scenario.streams());
    mc.validate();
    return 0;
  });
  if (target.alpha && target.cost) throw ConfigError("target: give alpha or cost, not both");
  if (target.alpha && !(*target.alpha > 0.0 && *target.alpha < 1.0))
    throw ConfigError("target.alpha must lie in (0, 1)");
  if (target.cost && !(*target.cost > 0.0)) throw ConfigError("target.cost must be positive");
  if (!(target.cost_r >= 1.0)) throw ConfigError("target.r must be >= 1");
  if (!detector.shiryaev() && (target.alpha || target.cost) && !std::isfinite(prior_mean(prior)))
    throw ConfigError("the SR rule needs a prior with a finite mean");
  if (detector.putative() && detector.putative_theta.empty())
    throw ConfigError("putative detectors need detector.putative_theta");
  for (double r : orders)
    if (!(r >= 1.0)) throw ConfigError("mc.orders must all be >= 1");
  for (double a : sweep_alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("sweep.alphas must lie in (0, 1)");
  if (change_mode == ChangeMode::Fixed || change_mode == ChangeMode::PriorNu) {
    ChangeSpec probe = change;
    if (change_mode == ChangeMode::PriorNu) probe.nu = 0;
    if (probe.nu == kNoChange) throw ConfigError("change.nu is required for mode = fixed");
    if (probe.nu < -1) throw ConfigError("change.nu must be >= -1");
    as_config_error([&] {
      scenario.validate_change(probe, weights.max_affected);
      return 0;
    });
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.scenario == b.scenario && a.prior == b.prior && a.weights.p == b.weights.p &&
         a.weights.max_affected == b.weights.max_affected && a.grid == b.grid && a.detector == b.detector &&
         a.threshold_given == b.threshold_given && a.target == b.target && a.change_mode == b.change_mode &&
         a.change.nu == b.change.nu && a.change.subset == b.change.subset && a.change.theta == b.change.theta &&
         a.mc == b.mc && a.orders == b.orders && a.sweep_alphas == b.sweep_alphas && a.output == b.output;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[scenario]\nstreams = " << c.scenario.streams() << "\n";
  for (int i = 0; i < c.scenario.streams(); ++i) {
    out << "\n[stream." << i << "]\n";
    write_channel(out, c.scenario.channels[static_cast<std::size_t>(i)]);
  }

  out << "\n[prior]\nkind = " << prior_name(c.prior.kind) << "\nq = " << format_double(c.prior.q) << "\n";
  switch (c.prior.kind) {
    case PriorKind::Geometric:
      out << "rho = " << format_double(c.prior.rho) << "\n";
      break;
    case PriorKind::PolynomialTail:
      out << "beta = " << format_double(c.prior.beta) << "\n";
      break;
    case PriorKind::PointMass:
      out << "k0 = " << c.prior.k0 << "\n";
      break;
  }

  out << "\n[grid]\n";
  if (scalar_grid(c.grid)) {
    std::vector<double> theta;
    for (const auto& p : c.grid.points) theta.push_back(p.front());
    out << "theta = " << join(theta) << "\n";
  } else {
    out << "points = ";
    for (std::size_t g = 0; g < c.grid.points.size(); ++g) out << (g ? " | " : "") << join(c.grid.points[g]);
    out << "\n";
  }
  out << "weights = " << join(c.grid.weights) << "\np = " << join(c.weights.p)
      << "\nmax_affected = " << c.weights.max_affected << "\n";

  out << "\n[detector]\nkind = " << detector_name(c.detector.kind) << "\n";
  if (c.threshold_given) out << "threshold = " << format_double(c.detector.threshold) << "\n";
  if (c.detector.window_m1) out << "window_m1 = " << *c.detector.window_m1 << "\n";
  out << "window_m0 = " << c.detector.window_m0 << "\nomega = " << format_double(c.detector.omega) << "\n";
  if (!c.detector.putative_theta.empty()) out << "putative_theta = " << join(c.detector.putative_theta) << "\n";

  out << "\n[target]\n";
  if (c.target.alpha) out << "alpha = " << format_double(*c.target.alpha) << "\n";
  if (c.target.cost) out << "cost = " << format_double(*c.target.cost) << "\n";
  out << "r = " << format_double(c.target.cost_r) << "\n";

  out << "\n[change]\nmode = " << mode_name(c.change_mode) << "\n";
  if (c.change.nu != kNoChange) out << "nu = " << c.change.nu << "\n";
  if (!c.change.subset.empty()) {
    std::vector<double> s(c.change.subset.begin(), c.change.subset.end());
    out << "subset = " << join(s) << "\n";
  }
  if (!c.change.theta.empty()) out << "theta = " << join(c.change.theta) << "\n";

  out << "\n[mc]\nreplications = " << c.mc.replications << "\nseed = " << c.mc.master_seed
      << "\nhorizon = " << c.mc.horizon << "\nworkers = " << c.mc.workers << "\norders = " << join(c.orders)
      << "\n";
  if (!c.sweep_alphas.empty()) out << "\n[sweep]\nalphas = " << join(c.sweep_alphas) << "\n";
  if (!c.output.empty()) out << "\n[output]\npath = " << c.output << "\n";
  return out.str();
}

Calibration calibrate(const RunConfig& config) {
  return as_config_error([&] {
    DetectionProblem p{config.scenario, config.prior, config.weights, config.grid, config.detector};
    Calibration cal;
    const bool shiryaev = config.detector.shiryaev();
    if (config.target.alpha) {
      const double alpha = *config.target.alpha;
      cal.threshold = threshold_for_alpha(p, alpha);
      cal.formula = shiryaev ? "A = (1 - alpha) / alpha" : "A = (omega b + mean(nu)) / alpha";
    } else if (config.target.cost) {
      const double r = config.target.cost_r;
      cal.mu = shiryaev ? prior_tail_rate(config.prior) : 0.0;
      if (!std::isfinite(cal.mu)) throw ConfigError("cost calibration needs a prior with a finite tail rate");
      cal.d_constant = d_constant(config.weights, p.effective_grid(), config.scenario, cal.mu, r);
      if (!shiryaev) {
        const double mean = prior_mean(config.prior);
        if (!std::isfinite(mean)) throw ConfigError("the SR rule needs a prior with a finite mean");
        cal.scale = config.detector.omega * prior_tail(config.prior, 1) + mean;
      }
      cal.threshold = threshold_cost(*config.target.cost, r, cal.d_constant, cal.scale);
      cal.formula = shiryaev ? "r D A (log A)^(r-1) = 1/c" : "r D A (log A)^(r-1) = (omega b + mean(nu))/c";
    } else {
      throw ConfigError("no calibration target: set target.alpha or target.cost");
    }
    return cal;
  });
}

DetectionProblem RunConfig::problem() const {
  DetectionProblem p{scenario, prior, weights, grid, detector};
  if (!threshold_given) {
    if (!target.alpha && !target.cost)
      throw ConfigError("detector.threshold is missing and there is no target to derive it from");
    p.detector.threshold = calibrate(*this).threshold;
  }
  as_config_error([&] {
    p.validate();
    return 0;
  });
  return p;
}

}  // namespace qcd
