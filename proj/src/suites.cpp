#include "tubelab/suites.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tubelab/errors.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

namespace {

double wnorm2(const ProductGrid& g, const Vec& f) { return f.dot(g.weights.cwiseProduct(f)); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double max_abs(const SpMat& B) {
  double m = 0;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

// relative size of A_1 A_2 - A_2 A_1 for A = W^{-1} K
double commutator_defect(const DiscreteOperator& A, const DiscreteOperator& B) {
  const Vec winv = A.w.cwiseInverse();
  const SpMat a = winv.asDiagonal() * A.K, b = winv.asDiagonal() * B.K;
  const SpMat c = a * b - b * a;
  const double scale = max_abs(a) * max_abs(b);
  return scale > 0 ? max_abs(c) / scale : 0.0;
}

FormSample sample(const ProductGrid& g, const FiberSpectrum& spec, const DiscreteOperator& V,
                  const DiscreteOperator& H, const Vec& f) {
  FormSample s;
  s.norm2 = wnorm2(g, f);
  s.e0_norm2 = wnorm2(g, project_E0(spec, f));
  s.qV = V.form(f);
  s.qH = H.form(f);
  s.h1_2 = s.norm2 + s.qV + s.qH;
  return s;
}

}  // namespace

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json j;
  j["suite"] = name;
  j["status"] = status;
  j["violations"] = violations;
  j["details"] = details;
  return j;
}

double admissible_eps(const FiberSpectrum& spec) { return 1.0 - spec.lambda(0) / spec.lambda(1); }

SuiteReport admissibility_suite(const FiberSpectrum& spec, const std::vector<double>& eps) {
  SuiteReport r;
  r.name = "admissibility";
  const double bound = admissible_eps(spec);
  r.details["lambda0"] = spec.lambda(0);
  r.details["lambda1"] = spec.lambda(1);
  r.details["eps_bound"] = bound;
  for (double e : eps)
    if (e > bound)
      r.violate(fmt("CoercivityViolation: eps = %.6g exceeds 1 - lambda0/lambda1 = %.6g", e, bound));
  return r;
}

SuiteReport composite_spectrum_suite(const ProductGrid& grid, double eps, bool dense,
                                     double tol) {
  SuiteReport r;
  r.name = "composite_spectrum";
  const DiscreteOperator V = assemble_form(grid, FormKind::V);
  const DiscreteOperator H = assemble_form(grid, FormKind::H);
  const double comm = commutator_defect(V, H);
  r.details["eps"] = eps;
  r.details["commutator"] = comm;
  if (comm > 1e-12) {
    r.violate(fmt("DeltaV and DeltaH do not commute (relative defect %.3g)", comm));
    return r;
  }
  const int nf = grid.fiber_size();
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, nf, grid.fiber, false);

  std::vector<double> ref;
  for (const auto& [a, e] : spec.multiplets) {
    const int d = e - a, nb = grid.n_base;
    Mat Q = Mat::Zero(grid.size(), d * nb);
    for (int k = 0; k < d; ++k)
      for (int b = 0; b < nb; ++b)
        Q.col(k * nb + b).segment(b * nf, nf) = spec.eigenvectors.col(a + k);
    Mat M = Q.transpose() * (H.K * Q);
    Mat G = Q.transpose() * grid.weights.asDiagonal() * Q;
    // G is the base weight times the identity up to roundoff
    const Vec gd = G.diagonal().cwiseSqrt().cwiseInverse();
    SymmetricEigen nu = sym_eig(gd.asDiagonal() * M * gd.asDiagonal());
    for (int j = 0; j < nu.values.size(); ++j)
      ref.push_back(spec.eigenvalues(a) / (eps * eps) + nu.values(j));
  }
  std::sort(ref.begin(), ref.end());

  const DiscreteOperator HSa = assemble_operator(grid, OperatorKind::HSa, eps);
  Vec vals;
  if (dense) {
    vals = sym_eig(Mat(HSa.symmetrized())).values;
    r.details["solver"] = "dense";
  } else {
    Propagator P(HSa, &grid);
    vals = P.eigenvalues();
    r.details["solver"] = P.method();
  }
  if (static_cast<int>(ref.size()) != vals.size()) {
    r.violate("composite spectrum has the wrong number of eigenvalues");
    return r;
  }
  double worst = 0;
  for (int i = 0; i < vals.size(); ++i) {
    const double rel = std::abs(vals(i) - ref[i]) / std::abs(ref[i]);
    worst = std::max(worst, rel);
    if (rel > tol)
      r.violate(fmt("eigenvalue %.0f: %.15g vs composite %.15g", i, vals(i), ref[i]));
  }
  r.details["max_relative_error"] = worst;
  r.details["count"] = vals.size();
  return r;
}

SuiteReport sasaki_limit_suite(const ProductGrid& grid, const std::vector<double>& eps,
                               const std::vector<double>& t_grid, const FieldSpec& base,
                               int fiber_mode) {
  SuiteReport r;
  r.name = "sasaki_limit_bound";
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, std::max(2, fiber_mode + 1), grid.fiber);
  const double lambda0 = spec.lambda(0), gap = spec.lambda(1) - lambda0;
  FieldSpec fs = base;
  fs.fiber_mode = fiber_mode;
  const Vec f = fs.evaluate(grid, spec);
  const double nf = std::sqrt(wnorm2(grid, f));
  const Propagator dH(assemble_operator(grid, OperatorKind::DeltaH), &grid);
  r.details["gap"] = gap;
  r.details["e0_norm"] = std::sqrt(wnorm2(grid, project_E0(spec, f)));
  double worst = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (double e : eps) {
    const Propagator P(renormalize(assemble_operator(grid, OperatorKind::HSa, e), lambda0, e), &grid);
    const double s = gap / (e * e);
    for (double t : t_grid) {
      // both sides are multiplied by e^{t gap / (2 eps^2)}
      const Vec lim = project_E0(spec, dH.apply(t, project_E0(spec, f)));
      Vec x = P.apply(t, f, s);
      if (lim.cwiseAbs().maxCoeff() > 0) x -= std::exp(0.5 * t * s) * lim;
      const double ratio = std::sqrt(wnorm2(grid, x)) / nf;
      worst = std::max(worst, std::isfinite(ratio) ? ratio : INFINITY);
      rows.push_back({{"eps", e}, {"t", t}, {"ratio", ratio}, {"log_bound", -0.5 * t * s}});
      if (!(ratio <= 1.0))
        r.violate(fmt("eps = %.4g, t = %.4g: scaled difference %.17g > 1", e, t, ratio));
    }
  }
  r.details["max_ratio"] = worst;
  r.details["samples"] = rows;
  return r;
}

std::vector<SuiteReport> inequality_suites(const ProductGrid& grid,
                                           const std::vector<double>& eps,
                                           const std::vector<Vec>& fields, double alpha) {
  SuiteReport v, s, k, c;
  v.name = "vertical_energy_bound";
  s.name = "sasaki_form_bound";
  k.name = "kato_bound";
  c.name = "coercivity";
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, 2, grid.fiber);
  const double l0 = spec.lambda(0), ksa = std::max(1.0, l0), bound = admissible_eps(spec);
  const DiscreteOperator V = assemble_form(grid, FormKind::V);
  const DiscreteOperator H = assemble_form(grid, FormKind::H);
  std::vector<FormSample> fs;
  for (const Vec& f : fields) fs.push_back(sample(grid, spec, V, H, f));
  v.details["k_sa"] = ksa;
  c.details["alpha"] = alpha;

  double kl = NAN, c_uniform = INFINITY;
  nlohmann::json kl_rows = nlohmann::json::array(), c_rows = nlohmann::json::array();
  for (double e : eps) {
    if (e > bound) {
      for (SuiteReport* rep : {&v, &s, &k, &c})
        rep->violate(fmt("CoercivityViolation: eps = %.6g outside the admissible range", e));
      continue;
    }
    const DiscreteOperator I = assemble_form(grid, FormKind::InducedEps, e);
    const double e2 = e * e;
    double worst_v = -INFINITY, worst_s = -INFINITY, ratio_max = 0, c_min = INFINITY;
    std::vector<double> ratios;
    for (size_t i = 0; i < fields.size(); ++i) {
      const FormSample& x = fs[i];
      const double q0sa = x.qV / e2 + x.qH - l0 / e2 * x.norm2;
      const double scale = x.qV / e2 + x.qH + l0 / e2 * x.norm2;
      const double tol = 1e-12 * scale;
      // vertical energy bound
      const double rv = ksa * (e * q0sa + x.e0_norm2);
      worst_v = std::max(worst_v, x.qV - rv);
      if (x.qV > rv + tol)
        v.violate(fmt("eps = %.4g, field %.0f: q_V = %.12g", e, double(i), x.qV));
      // Sasaki form bound
      const double ls = x.qV + x.qH, rs = q0sa + l0 * x.e0_norm2;
      worst_s = std::max(worst_s, ls - rs);
      if (ls > rs + tol) s.violate(fmt("eps = %.4g, field %.0f: q_Sa1 = %.12g", e, double(i), ls));
      // Kato-type bound
      const Vec& f = fields[i];
      const double qe = I.form(f);
      const double l = qe - (x.qV / e2 + x.qH);
      const double ratio = std::abs(l) / (e * (q0sa + x.h1_2));
      ratios.push_back(ratio);
      ratio_max = std::max(ratio_max, ratio);
      // coercivity
      const double q0 = qe - l0 / e2 * x.norm2;
      c_min = std::min(c_min, (q0 + alpha * x.norm2) / x.h1_2);
    }
    if (std::isnan(kl)) kl = ratio_max;  // fit once, at the first epsilon
    for (size_t i = 0; i < ratios.size(); ++i)
      if (ratios[i] > kl * (1 + 1e-12))
        k.violate(fmt("eps = %.4g, field %.0f: |l|/(eps(q0 + |f|_1^2)) = %.6g", e, double(i), ratios[i]));
    if (!(c_min > 0)) c.violate(fmt("eps = %.4g: coercivity constant %.6g", e, c_min));
    c_uniform = std::min(c_uniform, c_min);
    kl_rows.push_back({{"eps", e}, {"max_ratio", ratio_max}});
    c_rows.push_back({{"eps", e}, {"c", c_min}});
    v.details["max_excess"][fmt("%g", e)] = worst_v;
    s.details["max_excess"][fmt("%g", e)] = worst_s;
  }
  k.details["k_l"] = kl;
  k.details["per_eps"] = kl_rows;
  c.details["per_eps"] = c_rows;
  c.details["uniform_c"] = c_uniform;
  return {v, s, k, c};
}

SuiteReport residual_suite(const ProductGrid& grid, const std::vector<double>& eps,
                           const std::vector<Vec>& fields) {
  SuiteReport r;
  r.name = "residual_bounded";
  SobolevNorm sn(grid);
  std::vector<double> sups;
  nlohmann::json rows = nlohmann::json::array();
  for (double e : eps) {
    const DiscreteOperator R = residual_r_eps(grid, e);
    double sup = 0;
    for (const Vec& f : fields) sup = std::max(sup, std::abs(R.form(f)) / sn.squared(f, 1));
    sups.push_back(sup);
    rows.push_back({{"eps", e}, {"sup_ratio", sup}, {"h1_operator_norm", h1_operator_norm(grid, R)}});
  }
  const double hi = *std::max_element(sups.begin(), sups.end());
  const double lo = *std::min_element(sups.begin(), sups.end());
  r.details["per_eps"] = rows;
  r.details["max_over_min"] = lo > 0 ? hi / lo : (hi > 0 ? INFINITY : 1.0);
  if (lo > 0 && hi / lo > 3) r.violate(fmt("sup |r_eps| varies by a factor %.3g over the sweep", hi / lo));
  if (!std::isfinite(hi)) r.violate("r_eps is not finite");
  return r;
}

SuiteReport spectral_bound_suite(const ProductGrid& grid, const std::vector<double>& eps,
                                 double alpha, double delta_h) {
  SuiteReport r;
  r.name = "spectral_lower_bound";
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, 2, grid.fiber);
  const double l0 = spec.lambda(0);
  nlohmann::json rows = nlohmann::json::array();
  for (double e : eps) {
    const Propagator P(renormalize(assemble_operator(grid, OperatorKind::H, e), l0, e), &grid);
    const double m = P.lambda_min() + alpha;
    rows.push_back({{"eps", e}, {"min_eigenvalue", m}});
    if (m < alpha - l0 - delta_h)
      r.violate(fmt("eps = %.4g: min eigenvalue %.10g below alpha - lambda0 = %.10g", e, m, alpha - l0));
  }
  r.details["per_eps"] = rows;
  r.details["alpha"] = alpha;
  r.details["lambda0"] = l0;
  return r;
}

SuiteReport semigroup_suite(const ProductGrid& grid, double eps, const std::vector<Vec>& fields) {
  SuiteReport r;
  r.name = "semigroup_law";
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, 2, grid.fiber);
  const DiscreteOperator A =
      renormalize(assemble_operator(grid, OperatorKind::H, eps), spec.lambda(0), eps);
  const Propagator P(A, &grid);
  const DiscreteOperator V = assemble_operator(grid, OperatorKind::DeltaV);
  const DiscreteOperator H = assemble_operator(grid, OperatorKind::DeltaH);
  const Propagator PV(V, &grid), PH(H, &grid);
  double law = 0, contraction = 0, commute = 0, identity = 0;
  const size_t n = std::min<size_t>(fields.size(), 10);
  for (size_t i = 0; i < n; ++i) {
    const Vec& f = fields[i];
    const double nf = std::sqrt(wnorm2(grid, f));
    identity = std::max(identity, std::sqrt(wnorm2(grid, P.apply(0.0, f) - f)) / nf);
    const Vec a = P.apply(0.7, f), b = P.apply(0.3, P.apply(0.4, f));
    law = std::max(law, std::sqrt(wnorm2(grid, a - b)) / std::sqrt(wnorm2(grid, a)));
    contraction = std::max(contraction, std::sqrt(wnorm2(grid, a)) /
                                            (std::exp(-0.35 * P.lambda_min()) * nf));
    const Vec c1 = PV.apply(0.2, PH.apply(0.5, f)), c2 = PH.apply(0.5, PV.apply(0.2, f));
    commute = std::max(commute, std::sqrt(wnorm2(grid, c1 - c2)) / std::sqrt(wnorm2(grid, c1)));
  }
  const double gen = commutator_defect(V, H);
  r.details = {{"eps", eps},           {"identity", identity},      {"semigroup_law", law},
               {"contraction", contraction}, {"propagator_commutator", commute},
               {"generator_commutator", gen}, {"method", P.method()}};
  if (identity != 0) r.violate("apply(0, f) differs from f");
  if (law > 1e-10) r.violate(fmt("semigroup law defect %.3g", law));
  if (contraction > 1 + 1e-12) r.violate(fmt("contraction bound exceeded by factor %.17g", contraction));
  if (commute > 1e-10) r.violate(fmt("vertical and horizontal semigroups differ by %.3g", commute));
  if (gen > 1e-12) r.violate(fmt("DeltaV and DeltaH commutator %.3g", gen));
  return r;
}

SuiteReport curvature_operator_suite(const ProductGrid& grid, const std::vector<Vec>& fields,
                                     double tol_projection, double tol_commutator) {
  SuiteReport r;
  r.name = "curvature_operator";
  if (grid.fiber.codim < 2) {
    r.status = "skipped";
    r.details["reason"] = "P exists only for codimension >= 2";
    return r;
  }
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, 2, grid.fiber);
  const DiscreteOperator P = assemble_operator(grid, OperatorKind::P);
  const DiscreteOperator V = assemble_operator(grid, OperatorKind::DeltaV);
  SobolevNorm sn(grid);
  double proj = 0, comm = 0;
  for (const Vec& f : fields) {
    const double nf = std::sqrt(wnorm2(grid, f));
    proj = std::max(proj, std::sqrt(wnorm2(grid, P.apply(project_E0(spec, f)))) / nf);
    const Vec c = V.apply(P.apply(f)) - P.apply(V.apply(f));
    comm = std::max(comm, std::sqrt(wnorm2(grid, c)) / sn(f, 2));
  }
  r.details = {{"projection_ratio", proj}, {"commutator_ratio", comm},
               {"operator_scale", max_abs(P.K)}};
  if (proj > tol_projection) r.violate(fmt("|P E0 f|/|f| = %.3g", proj));
  if (comm > tol_commutator) r.violate(fmt("|[DeltaV, P] f|/|f|_2 = %.3g", comm));
  return r;
}

SuiteReport omega_projection_suite(const ProductGrid& grid, const std::vector<Vec>& fields,
                                   double tol) {
  SuiteReport r;
  r.name = "omega_projection";
  const FiberSpectrum spec = fiber_spectrum(grid.fiber.codim, 2, grid.fiber);
  const DiscreteOperator O = assemble_form(grid, FormKind::Omega);
  SobolevNorm sn(grid);
  double worst = 0;
  for (const Vec& f : fields) {
    const Vec perp = f - project_E0(spec, f);
    worst = std::max(worst, std::abs(O.form(f) - O.form(perp)) / sn.squared(f, 1));
  }
  r.details["max_ratio"] = worst;
  if (worst > tol) r.violate(fmt("|Omega(f) - Omega(f - E0 f)| / |f|_1^2 = %.3g", worst));
  return r;
}

std::vector<SuiteReport> run_property_suites(const ExperimentConfig& cfg) {
  const SubmanifoldModel model = cfg.build_model();
  const ProductGrid grid = build_grid(model, cfg.grid.n_base, cfg.grid.n_fiber, cfg.grid.n_angular);
  const FiberSpectrum spec = fiber_spectrum(model.codim(), 2, grid.fiber);
  const double alpha = cfg.sweep.alpha.value_or(spec.lambda(0) + 1.5);

  std::vector<SuiteReport> out;
  out.push_back(admissibility_suite(spec, cfg.sweep.eps));
  std::vector<double> eps;
  for (double e : cfg.sweep.eps)
    if (e <= admissible_eps(spec)) eps.push_back(e);
  if (eps.empty()) return out;

  const std::vector<Vec> fields = random_test_fields(grid, cfg.sweep.fields, cfg.sweep.field_seed);

  if (grid.size() <= 8000) {
    out.push_back(composite_spectrum_suite(grid, eps.front(), false));
  }
  if (grid.fiber.codim == 1) {
    FieldSpec base;
    base.base_cos = cfg.sweep.base_cos;
    base.base_sin = cfg.sweep.base_sin;
    out.push_back(sasaki_limit_suite(grid, eps, cfg.sweep.t_grid, base));
  } else {
    SuiteReport s;
    s.name = "sasaki_limit_bound";
    s.status = "skipped";
    s.details["reason"] = "exact ground projection needs a mirrored q = 1 fiber grid";
    out.push_back(s);
  }
  for (auto& r : inequality_suites(grid, eps, fields, alpha)) out.push_back(std::move(r));
  if (model.flat_ambient()) out.push_back(residual_suite(grid, eps, fields));
  out.push_back(spectral_bound_suite(grid, eps, alpha));
  out.push_back(semigroup_suite(grid, eps.front(), fields));
  if (model.codim() >= 2 && !model.flat_ambient()) {
    out.push_back(curvature_operator_suite(grid, fields));
    out.push_back(omega_projection_suite(grid, fields));
  }
  return out;
}

}  // namespace tubelab
