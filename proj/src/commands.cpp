#include "tubelab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "tubelab/errors.hpp"
#include "tubelab/io.hpp"
#include "tubelab/semigroup.hpp"
#include "tubelab/stochastic.hpp"
#include "tubelab/suites.hpp"

namespace tubelab {

namespace fs = std::filesystem;

namespace {

struct Output {
  fs::path dir;
  bool csv = true, json = true;
  std::string hash;

  std::string comment() const { return std::string("tubelab ") + kVersion + " config " + hash; }

  nlohmann::json stamp(nlohmann::json j) const {
    j["version"] = kVersion;
    j["config_hash"] = hash;
    return j;
  }

  void write_json(const std::string& name, const nlohmann::json& j) const {
    if (json) write_file((dir / name).string(), stamp(j).dump(2) + "\n");
  }
  void write_csv(const std::string& name, const CsvTable& t) const {
    if (csv) write_file((dir / name).string(), t.str());
  }
};

ExperimentConfig effective(const ExperimentConfig& cfg, const CommandOptions& opt) {
  ExperimentConfig c = cfg;
  if (opt.seed) {
    c.mc.seed = *opt.seed;
    c.sweep.field_seed = *opt.seed;
  }
  if (opt.out_dir) c.output.directory = *opt.out_dir;
  return c;
}

Output open_output(const ExperimentConfig& c, const std::string& sub) {
  Output o;
  o.dir = fs::path(c.output.directory) / sub;
  fs::create_directories(o.dir);
  o.csv = std::find(c.output.formats.begin(), c.output.formats.end(), "csv") != c.output.formats.end();
  o.json = std::find(c.output.formats.begin(), c.output.formats.end(), "json") != c.output.formats.end();
  // a seed override changes the results, so it is part of the provenance
  o.hash = c.hash_hex();
  if (c.mc.seed != ExperimentConfig{}.mc.seed || c.sweep.field_seed != ExperimentConfig{}.sweep.field_seed)
    o.hash += "-seed" + std::to_string(c.mc.seed) + "-" + std::to_string(c.sweep.field_seed);
  return o;
}

const char* kPlotStub = R"(# generated plotting stub, edit freely
import csv
import sys

import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(l for l in open(sys.argv[1] if len(sys.argv) > 1 else "sweep.csv")
                                  if not l.startswith("#"))]
for norm in ("err_L2", "err_H1", "err_H2"):
    by_eps = {}
    for r in rows:
        if r[norm] not in ("", "nan"):
            by_eps.setdefault(float(r["eps"]), []).append(float(r[norm]))
    if by_eps:
        eps = sorted(by_eps)
        plt.loglog(eps, [max(by_eps[e]) for e in eps], "o-", label=norm)
plt.xlabel("eps")
plt.ylabel("sup over t of the error")
plt.legend()
plt.savefig("sweep.png", dpi=150)
)";

double weighted_l2(const ProductGrid& g, const Vec& f) { return std::sqrt(f.dot(g.weights.cwiseProduct(f))); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double exact_limit(const SubmanifoldModel& model, const std::string& obs, double x0, double t) {
  const auto* c = model.as<CircleInPlane>();
  if (!c) return NAN;
  const double R = c->radius;
  if (obs == "one") return 1.0;
  if (obs == "cos_angle") return circle_heat_oracle(R, x0, t, {0.0, 1.0});
  if (obs == "sin_angle") return circle_heat_oracle(R, x0, t, {}, {1.0});
  if (obs == "x") return R * circle_heat_oracle(R, x0, t, {0.0, 1.0});
  return NAN;
}

}  // namespace

int cmd_validate(const ExperimentConfig& cfg0, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective(cfg0, opt);
  const Output out = open_output(cfg, "validate");
  const auto reports = run_property_suites(cfg);
  bool ok = true;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& r : reports) {
    out.write_json(r.name + ".json", r.to_json());
    summary.push_back({{"suite", r.name}, {"status", r.status}, {"violations", r.violations.size()}});
    log << r.status << "  " << r.name << '\n';
    for (const auto& v : r.violations) log << "      " << v << '\n';
    ok = ok && r.passed();
  }
  out.write_json("report.json", {{"suites", summary}, {"passed", ok}});
  return ok ? kExitPass : kExitProperty;
}

int cmd_sweep(const ExperimentConfig& cfg0, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective(cfg0, opt);
  const Output out = open_output(cfg, "sweep");
  const SubmanifoldModel model = cfg.build_model();
  const SweepResult res = convergence_sweep(model, cfg.sweep_options(opt.workers));

  CsvTable t({"eps", "t", "err_L2", "err_H1", "err_H2"}, out.comment());
  for (const auto& rec : res.records)
    for (int k = 0; k < rec.t.size(); ++k) {
      std::vector<std::string> row{format_double(rec.eps), format_double(rec.t(k))};
      for (int order = 0; order < 3; ++order) {
        const bool used = std::find(res.norms.begin(), res.norms.end(), order) != res.norms.end();
        row.push_back(used ? format_double(rec.error[order](k)) : "nan");
      }
      t.add(row);
    }
  out.write_csv("sweep.csv", t);

  nlohmann::json s;
  s["metric"] = res.metric;
  s["grid"] = {{"n_base", cfg.grid.n_base}, {"n_fiber", cfg.grid.n_fiber},
               {"n_angular", cfg.grid.n_angular}, {"unknowns", res.grid_size}};
  s["lambda0"] = res.lambda0;
  s["lambda1"] = res.lambda1;
  s["spatial_error"] = res.spatial_error;
  s["rate_is_empirical"] = true;  // convergence is proved without a rate
  const char* names[3] = {"L2", "H1", "H2"};
  for (int order : res.norms) {
    std::vector<double> sup;
    for (const auto& rec : res.records) sup.push_back(rec.sup[order]);
    s["fits"][names[order]] = {{"order", res.order[order]}, {"r_squared", res.r_squared[order]},
                               {"sup_error", sup}};
  }
  s["eps"] = cfg.sweep.eps;
  s["t_grid"] = cfg.sweep.t_grid;
  s["field_seed"] = cfg.sweep.field_seed;
  out.write_json("summary.json", s);
  if (out.csv) write_file((out.dir / "plot_sweep.py").string(), "# " + out.comment() + "\n" + kPlotStub);

  // wall-clock data lives apart from the deterministic result files
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& rec : res.records) timing.push_back({{"eps", rec.eps}, {"seconds", rec.runtime}});
  write_file((out.dir / "timing.json").string(), out.stamp({{"runs", timing}}).dump(2) + "\n");

  for (int order : res.norms)
    log << "order " << names[order] << ": p = " << res.order[order]
        << ", R^2 = " << res.r_squared[order] << '\n';
  return kExitPass;
}

int cmd_mc(const ExperimentConfig& cfg0, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective(cfg0, opt);
  const Output out = open_output(cfg, "mc");
  const SubmanifoldModel model = cfg.build_model();
  const ProductGrid grid = build_grid(model, cfg.grid.n_base, cfg.grid.n_fiber, cfg.grid.n_angular);

  CsvTable t({"eps", "t", "mc_est", "mc_se", "op_route", "exact_limit", "observable", "ess",
              "low_ess"},
             out.comment());
  nlohmann::json runs = nlohmann::json::array();
  for (size_t i = 0; i < cfg.mc.eps.size(); ++i) {
    const double eps = cfg.mc.eps[i];
    SamplerOptions so;
    so.workers = opt.workers;
    so.resampling = cfg.mc.resampling ? Resampling::Adaptive : Resampling::None;
    so.islands = cfg.mc.islands;
    const std::uint64_t seed = mix_seed(cfg.mc.seed, i);
    const PathEnsemble ens = sample_conditioned(model, eps, cfg.mc.x0, cfg.mc.horizon,
                                                cfg.mc.dt_factor * eps * eps, cfg.mc.n_paths,
                                                seed, cfg.mc.times, so);
    const ConditionalFlow flow(grid, eps);
    for (const auto& name : cfg.mc.observables) {
      const Observable f = make_observable(name);
      for (double tt : ens.times) {
        const MarginalEstimate m = marginal_estimate(ens, f, tt);
        const double op = flow.at(cfg.mc.horizon, tt, f, cfg.mc.x0);
        t.add({format_double(eps), format_double(tt), format_double(m.estimate),
               format_double(m.std_error), format_double(op),
               format_double(exact_limit(model, name, cfg.mc.x0, tt)), name,
               format_double(m.ess), m.low_ess ? "1" : "0"});
        log << "eps " << eps << " t " << tt << " " << name << ": mc " << m.estimate << " +- "
            << m.std_error << ", operator " << op << '\n';
      }
    }
    runs.push_back({{"eps", eps}, {"seed", seed}, {"dt", ens.dt}, {"resamplings", ens.resample_count},
                    {"islands", ens.island_log_normalizer.size()},
                    {"survival", ens.survival}, {"fk_mass", ens.fk_mass}, {"times", ens.times}});
    if (cfg.mc.dump_paths) {
      std::ofstream dump(out.dir / ("paths_" + std::to_string(i) + ".bin"), std::ios::binary);
      write_path_dump(dump, ens);
    }
  }
  out.write_csv("mc.csv", t);
  out.write_json("mc.json", {{"runs", runs}, {"n_paths", cfg.mc.n_paths}, {"x0", cfg.mc.x0},
                             {"horizon", cfg.mc.horizon}, {"seed", cfg.mc.seed}});
  return kExitPass;
}

int cmd_fiber(const ExperimentConfig& cfg0, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective(cfg0, opt);
  const Output out = open_output(cfg, "fiber");
  const SubmanifoldModel model = cfg.build_model();
  const int q = model.codim();
  const FiberGrid g = make_fiber_grid(q, cfg.grid.n_fiber, cfg.grid.n_angular);
  const FiberSpectrum spec = fiber_spectrum(q, 6, g, false);
  out.write_json("fiber.json", spectrum_json(spec));
  for (int k = 0; k < spec.mode_count(); ++k)
    log << "lambda_" << k << " = " << spec.eigenvalues(k) << "  (analytic "
        << spec.analytic_values(k) << ")\n";
  return kExitPass;
}

int cmd_resolvent(const ExperimentConfig& cfg0, const CommandOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = effective(cfg0, opt);
  const Output out = open_output(cfg, "resolvent");
  const SubmanifoldModel model = cfg.build_model();
  const ProductGrid grid = build_grid(model, cfg.grid.n_base, cfg.grid.n_fiber, cfg.grid.n_angular);
  const FiberSpectrum spec = fiber_spectrum(model.codim(), 2, grid.fiber);
  const double alpha = cfg.sweep.alpha.value_or(spec.lambda(0) + 1.5);
  FieldSpec fsp;
  fsp.fiber_mode = cfg.sweep.fiber_mode;
  fsp.base_cos = cfg.sweep.base_cos;
  fsp.base_sin = cfg.sweep.base_sin;
  const Vec w = fsp.evaluate(grid, spec);
  const Vec limit = limit_resolvent(spec, assemble_base_laplacian(grid), alpha, w);
  const auto perturb = random_test_fields(grid, 20, cfg.sweep.field_seed);

  CsvTable t({"eps", "err_L2", "min_variational_gain"}, out.comment());
  bool ok = true;
  double prev = INFINITY;
  for (double eps : cfg.sweep.eps) {
    const DiscreteOperator A =
        renormalize(assemble_operator(grid, OperatorKind::H, eps), spec.lambda(0), eps);
    const Vec fstar = resolvent_minimizer(A, alpha, w);
    const double err = weighted_l2(grid, fstar - limit);
    const double base = variational_functional(A, alpha, w, fstar);
    double gain = INFINITY;
    for (const Vec& v : perturb)
      gain = std::min(gain, variational_functional(A, alpha, w, fstar + 1e-3 * v) - base);
    t.add({format_double(eps), format_double(err), format_double(gain)});
    log << "eps " << eps << ": error " << err << ", min variational gain " << gain << '\n';
    if (!(gain >= 0) || !(err < prev)) ok = false;
    prev = err;
  }
  out.write_csv("resolvent.csv", t);
  out.write_json("summary.json", {{"alpha", alpha}, {"eps", cfg.sweep.eps}, {"passed", ok}});
  return ok ? kExitPass : kExitProperty;
}

int run_command(const std::string& name, const std::string& config_path,
                const CommandOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    if (name == "validate") return cmd_validate(cfg, opt, log);
    if (name == "sweep") return cmd_sweep(cfg, opt, log);
    if (name == "mc") return cmd_mc(cfg, opt, log);
    if (name == "fiber") return cmd_fiber(cfg, opt, log);
    if (name == "resolvent") return cmd_resolvent(cfg, opt, log);
    err << "unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const CoercivityViolation& e) {
    err << e.what() << '\n';
    return kExitProperty;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace tubelab
