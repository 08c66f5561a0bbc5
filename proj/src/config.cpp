#include "tubelab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tubelab/errors.hpp"
#include "tubelab/fiber.hpp"
#include "tubelab/stochastic.hpp"

namespace tubelab {

namespace {

std::string where(const std::string& origin, const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.line < 0) return origin;
  return origin + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

// Reads one mapping section and rejects keys it does not know.
class Section {
 public:
  Section(const YAML::Node& node, std::string name, std::string origin)
      : node_(node), name_(std::move(name)), origin_(std::move(origin)) {
    // "key:" with nothing under it is an empty section
    if (node_ && node_.IsNull()) node_ = YAML::Node(YAML::NodeType::Undefined);
    if (node_ && !node_.IsMap())
      throw ConfigError(where(origin_, node_) + ": section '" + name_ + "' must be a mapping");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_[key]) return;
    const YAML::Node v = node_[key];
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(origin_, v) + ": bad value for '" + name_ + "." + key + "'");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_ ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key))
        throw ConfigError(where(origin_, kv.first) + ": unknown key '" + name_ + "." + key + "'");
    }
  }

  const std::string& origin() const { return origin_; }
  const YAML::Node& node() const { return node_; }

 private:
  YAML::Node node_;
  std::string name_, origin_;
  std::set<std::string> seen_;
};

void fail(const std::string& origin, const YAML::Node& n, const std::string& what) {
  throw ConfigError((n ? where(origin, n) : origin) + ": " + what);
}

void check_eps(const std::vector<double>& eps, const std::string& origin, const YAML::Node& n,
               const std::string& name) {
  if (eps.empty()) fail(origin, n, name + " must not be empty");
  for (size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0 && eps[i] < 1)) fail(origin, n, name + " entries must lie in (0, 1)");
    if (i && !(eps[i] < eps[i - 1])) fail(origin, n, name + " must be strictly decreasing");
  }
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash);
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ":" +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (root && !root.IsNull() && !root.IsMap()) fail(origin, root, "top level must be a mapping");

  ExperimentConfig c;
  c.text = text;
  c.hash = fnv1a(text);
  Section top(root, "", origin);

  Section m(top.child("model"), "model", origin);
  m.get("kind", c.model.kind);
  m.get("radius", c.model.radius);
  m.get("profile", c.model.profile);
  m.get("curvature", c.model.curvature);
  m.get("torsion", c.model.torsion);
  m.get("length", c.model.length);
  m.get("a", c.model.axis_a);
  m.get("b", c.model.axis_b);
  m.get("samples", c.model.samples);
  m.get("curvature_samples", c.model.curvature_samples);
  m.get("torsion_samples", c.model.torsion_samples);
  m.get("base_dim", c.model.base_dim);
  m.get("codim", c.model.codim);
  m.get("base_length", c.model.base_length);
  if (YAML::Node comps = m.child("components")) {
    if (!comps.IsSequence()) fail(origin, comps, "model.components must be a list");
    for (const auto& e : comps) {
      std::vector<double> v;
      try {
        v = e.as<std::vector<double>>();
      } catch (const YAML::Exception&) {
        fail(origin, e, "component must be [mu, alpha, nu, beta, value]");
      }
      if (v.size() != 5) fail(origin, e, "component must be [mu, alpha, nu, beta, value]");
      c.model.components.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]),
                                    static_cast<int>(v[2]), static_cast<int>(v[3]), v[4]});
    }
  }
  m.finish();
  const std::set<std::string> kinds{"circle", "curve", "synthetic"};
  if (!kinds.count(c.model.kind)) fail(origin, m.node()["kind"], "unknown model kind '" + c.model.kind + "'");

  Section g(top.child("grid"), "grid", origin);
  g.get("n_base", c.grid.n_base);
  g.get("n_fiber", c.grid.n_fiber);
  g.get("n_angular", c.grid.n_angular);
  g.finish();
  if (c.grid.n_base <= 0 || c.grid.n_fiber <= 0 || c.grid.n_angular <= 0)
    fail(origin, g.node(), "grid counts must be positive");

  Section s(top.child("sweep"), "sweep", origin);
  s.get("eps", c.sweep.eps);
  s.get("t_grid", c.sweep.t_grid);
  double alpha = NAN;
  s.get("alpha", alpha);
  if (!std::isnan(alpha)) c.sweep.alpha = alpha;
  s.get("norms", c.sweep.norms);
  s.get("metric", c.sweep.metric);
  s.get("resolution_check", c.sweep.resolution_check);
  s.get("fields", c.sweep.fields);
  s.get("field_seed", c.sweep.field_seed);
  {
    Section f(s.child("field"), "sweep.field", origin);
    f.get("fiber_mode", c.sweep.fiber_mode);
    f.get("base_cos", c.sweep.base_cos);
    f.get("base_sin", c.sweep.base_sin);
    f.get("perturbation_cos", c.sweep.perturbation_cos);
    f.finish();
  }
  s.finish();
  check_eps(c.sweep.eps, origin, s.node()["eps"], "sweep.eps");
  if (c.sweep.t_grid.empty()) fail(origin, s.node()["t_grid"], "sweep.t_grid must not be empty");
  for (double t : c.sweep.t_grid)
    if (!(t > 0)) fail(origin, s.node()["t_grid"], "sweep.t_grid entries must be positive");
  for (int k : c.sweep.norms)
    if (k < 0 || k > 2) fail(origin, s.node()["norms"], "sweep.norms entries must be 0, 1 or 2");
  if (c.sweep.metric != "induced" && c.sweep.metric != "sasaki")
    fail(origin, s.node()["metric"], "sweep.metric must be 'induced' or 'sasaki'");
  if (c.sweep.fields <= 0) fail(origin, s.node()["fields"], "sweep.fields must be positive");
  if (c.sweep.fiber_mode < 0) fail(origin, s.node()["field"], "fiber_mode must be >= 0");

  Section mc(top.child("mc"), "mc", origin);
  mc.get("eps", c.mc.eps);
  mc.get("n_paths", c.mc.n_paths);
  mc.get("dt_factor", c.mc.dt_factor);
  mc.get("horizon", c.mc.horizon);
  mc.get("times", c.mc.times);
  mc.get("x0", c.mc.x0);
  mc.get("seed", c.mc.seed);
  mc.get("observables", c.mc.observables);
  std::string resampling = "adaptive";
  mc.get("resampling", resampling);
  mc.get("islands", c.mc.islands);
  mc.get("dump_paths", c.mc.dump_paths);
  mc.finish();
  check_eps(c.mc.eps, origin, mc.node()["eps"], "mc.eps");
  if (c.mc.n_paths <= 0) fail(origin, mc.node()["n_paths"], "mc.n_paths must be positive");
  if (!(c.mc.dt_factor > 0)) fail(origin, mc.node()["dt_factor"], "mc.dt_factor must be positive");
  if (c.mc.islands <= 0) fail(origin, mc.node()["islands"], "mc.islands must be positive");
  if (!(c.mc.horizon > 0)) fail(origin, mc.node()["horizon"], "mc.horizon must be positive");
  for (double t : c.mc.times)
    if (!(t >= 0 && t <= c.mc.horizon))
      fail(origin, mc.node()["times"], "mc.times must lie in [0, horizon]");
  if (resampling != "adaptive" && resampling != "none")
    fail(origin, mc.node()["resampling"], "mc.resampling must be 'adaptive' or 'none'");
  c.mc.resampling = resampling == "adaptive";
  for (const auto& name : c.mc.observables) {
    try {
      make_observable(name);
    } catch (const Error&) {
      fail(origin, mc.node()["observables"], "unknown observable '" + name + "'");
    }
  }

  Section o(top.child("output"), "output", origin);
  o.get("directory", c.output.directory);
  o.get("formats", c.output.formats);
  o.finish();
  for (const auto& f : c.output.formats)
    if (f != "csv" && f != "json") fail(origin, o.node()["formats"], "unknown output format '" + f + "'");

  top.finish();

  // alpha > lambda0 + 1 with the discrete fiber ground value of this grid
  if (c.sweep.alpha) {
    const int q = c.model.kind == "synthetic" ? c.model.codim : (c.model.kind == "curve" ? 2 : 1);
    double lambda0;
    try {
      lambda0 = fiber_spectrum(q, 2, make_fiber_grid(q, c.grid.n_fiber, c.grid.n_angular)).lambda(0);
    } catch (const Error& e) {
      fail(origin, s.node()["alpha"], std::string("cannot check alpha: ") + e.what());
    }
    if (!(*c.sweep.alpha > lambda0 + 1))
      fail(origin, s.node()["alpha"],
           "sweep.alpha must exceed lambda0 + 1 = " + std::to_string(lambda0 + 1));
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

SubmanifoldModel ExperimentConfig::build_model() const {
  const ModelConfig& m = model;
  try {
    if (m.kind == "circle") return SubmanifoldModel(CircleInPlane{m.radius});
    if (m.kind == "curve") {
      if (m.profile == "constant") return SubmanifoldModel(CurveInSpace::constant(m.curvature, m.torsion, m.length));
      if (m.profile == "ellipse") return SubmanifoldModel(CurveInSpace::ellipse(m.axis_a, m.axis_b, m.samples));
      if (m.profile == "sampled") {
        if (!(m.length > 0)) throw ConfigError("sampled curve needs model.length");
        CurveInSpace c;
        c.length = m.length;
        c.curvature = Profile::sampled(m.curvature_samples, m.length);
        c.torsion = m.torsion_samples.empty() ? Profile::constant(0.0)
                                              : Profile::sampled(m.torsion_samples, m.length);
        return SubmanifoldModel(c);
      }
      throw ConfigError("unknown curve profile '" + m.profile + "'");
    }
    return SubmanifoldModel(
        SyntheticFiberModel::make(m.base_dim, m.codim, m.components, m.base_length));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

SweepOptions ExperimentConfig::sweep_options(int workers) const {
  SweepOptions o;
  o.eps = sweep.eps;
  o.t_grid = sweep.t_grid;
  o.norms = sweep.norms;
  o.metric = sweep.metric == "induced" ? MetricKind::Induced : MetricKind::Sasaki;
  o.n_base = grid.n_base;
  o.n_fiber = grid.n_fiber;
  o.n_angular = grid.n_angular;
  o.u0.fiber_mode = sweep.fiber_mode;
  o.u0.base_cos = sweep.base_cos;
  o.u0.base_sin = sweep.base_sin;
  if (!sweep.perturbation_cos.empty()) {
    FieldSpec u1;
    u1.fiber_mode = sweep.fiber_mode;
    u1.base_cos = sweep.perturbation_cos;
    o.u1 = u1;
  }
  o.resolution_check = sweep.resolution_check;
  o.workers = workers;
  return o;
}

}  // namespace tubelab
