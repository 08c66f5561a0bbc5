#include "tubelab/semigroup.hpp"

#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "tubelab/errors.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr int kDenseLimit = 8000;
}  // namespace

namespace {

constexpr double kSplitTol = 1e-12;

double max_abs(const SpMat& B) {
  double m = 0;
  for (int k = 0; k < B.outerSize(); ++k)
    for (SpMat::InnerIterator it(B, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

// Base Fourier groups tensored with the identity on `inner` nodes per base node.
std::vector<Mat> base_shift_bases(int n_base, int inner) {
  std::vector<Mat> out;
  for (const Mat& F : fourier_groups(n_base)) {
    Mat Q = Mat::Zero(static_cast<Eigen::Index>(n_base) * inner, F.cols() * inner);
    for (int c = 0; c < F.cols(); ++c)
      for (int b = 0; b < n_base; ++b)
        Q.block(b * inner, c * inner, inner, inner).diagonal().setConstant(F(b, c));
    out.push_back(std::move(Q));
  }
  return out;
}

SymmetricEigen decompose(const SpMat& B, const std::vector<Mat>* bases, std::string& how) {
  if (bases) {
    try {
      SymmetricEigen e = block_eig(B, *bases);
      how = "blocks";
      return e;
    } catch (const NumericalError&) {
    }
  }
  if (B.rows() > kDenseLimit) throw NumericalError("operator too large for dense decomposition");
  how = "dense";
  return sym_eig(Mat(B));
}

}  // namespace

Propagator::Propagator(const DiscreteOperator& A, const ProductGrid* grid, Method method) {
  sqrtw_ = A.w.cwiseSqrt();
  const SpMat B = A.symmetrized();
  const int n = A.size();
  const bool structured = method != Method::Dense && grid && grid->size() == n;

  // fiber reflection split on q = 1 grids
  if (structured && grid->fiber.codim == 1 && grid->n_base > 1) {
    const int nb = grid->n_base, nf = grid->fiber_size();
    const int ne = (nf + 1) / 2, no = nf / 2;
    bool mirrored = true;
    for (int b = 0; b < nb && mirrored; ++b)
      for (int i = 0; i < no; ++i)
        if (sqrtw_(b * nf + i) != sqrtw_(b * nf + nf - 1 - i)) mirrored = false;
    if (mirrored) {
      const double r = std::sqrt(0.5);
      std::vector<Eigen::Triplet<double>> te, to;
      for (int b = 0; b < nb; ++b) {
        for (int i = 0; i < no; ++i) {
          te.emplace_back(b * ne + i, b * nf + i, r);
          te.emplace_back(b * ne + i, b * nf + nf - 1 - i, r);
          to.emplace_back(b * no + i, b * nf + i, r);
          to.emplace_back(b * no + i, b * nf + nf - 1 - i, -r);
        }
        if (nf % 2) te.emplace_back(b * ne + no, b * nf + no, 1.0);
      }
      SpMat Fe(nb * ne, n), Fo(nb * no, n);
      Fe.setFromTriplets(te.begin(), te.end());
      Fo.setFromTriplets(to.begin(), to.end());
      const SpMat Fet = Fe.transpose(), Fot = Fo.transpose();
      const SpMat cross = Fo * B * Fet;
      if (max_abs(cross) <= kSplitTol * max_abs(B)) {
        n_base_ = nb;
        n_fiber_ = nf;
        std::string how_e, how_o;
        const auto be = base_shift_bases(nb, ne), bo = base_shift_bases(nb, no);
        SymmetricEigen e = decompose(Fe * B * Fet, &be, how_e);
        SymmetricEigen o = decompose(Fo * B * Fot, &bo, how_o);
        parts_.push_back({std::move(e.values), std::move(e.vectors)});
        parts_.push_back({std::move(o.values), std::move(o.vectors)});
        method_ = "reflection split, " + how_e + "/" + how_o;
      }
    }
  }

  if (parts_.empty()) {
    SymmetricEigen e;
    bool done = false;
    if (structured) {
      // try the largest symmetry group first, then base shifts only
      for (bool rot : {true, false}) {
        if (rot && grid->fiber.codim < 2) continue;
        try {
          e = block_eig(B, symmetry_bases(*grid, rot));
          method_ = rot ? "blocks(base x rotation)" : "blocks(base)";
          done = true;
          break;
        } catch (const NumericalError&) {
        }
      }
      if (!done && method == Method::Blocks)
        throw NumericalError("operator has no usable symmetry blocks");
    }
    if (!done) {
      if (n > kDenseLimit) throw NumericalError("operator too large for dense decomposition");
      e = sym_eig(Mat(B));
      method_ = "dense";
    }
    parts_.push_back({std::move(e.values), std::move(e.vectors)});
  }

  for (int p = 0; p < static_cast<int>(parts_.size()); ++p)
    for (int j = 0; j < parts_[p].values.size(); ++j) order_.emplace_back(p, j);
  std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) {
    return parts_[a.first].values(a.second) < parts_[b.first].values(b.second);
  });
  values_.resize(n);
  for (int k = 0; k < n; ++k) values_(k) = parts_[order_[k].first].values(order_[k].second);
  if (!values_.allFinite()) throw NumericalError("non-finite eigenvalues");
}

void Propagator::fold(const Vec& g, Vec& even, Vec& odd) const {
  const int nb = n_base_, nf = n_fiber_, ne = (nf + 1) / 2, no = nf / 2;
  const double r = std::sqrt(0.5);
  even.resize(nb * ne);
  odd.resize(nb * no);
  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < no; ++i) {
      const double a = g(b * nf + i), c = g(b * nf + nf - 1 - i);
      even(b * ne + i) = (a + c) * r;
      odd(b * no + i) = (a - c) * r;
    }
    if (nf % 2) even(b * ne + no) = g(b * nf + no);
  }
}

Vec Propagator::unfold(const Vec& even, const Vec& odd) const {
  const int nb = n_base_, nf = n_fiber_, ne = (nf + 1) / 2, no = nf / 2;
  const double r = std::sqrt(0.5);
  Vec g(nb * nf);
  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < no; ++i) {
      const double e = even(b * ne + i), o = odd(b * no + i);
      g(b * nf + i) = (e + o) * r;
      g(b * nf + nf - 1 - i) = (e - o) * r;
    }
    if (nf % 2) g(b * nf + no) = even(b * ne + no);
  }
  return g;
}

Vec Propagator::apply(double t, const Vec& f, double shift) const {
  if (t < 0) throw InvalidArgument("negative propagation time");
  if (f.size() != sqrtw_.size()) throw InvalidArgument("field size mismatch");
  if (t == 0) return f;
  auto evolve = [&](const Part& p, const Vec& g) {
    Vec c = p.vectors.transpose() * g;
    for (int j = 0; j < c.size(); ++j)
      if (c(j) != 0.0) c(j) *= std::exp(-0.5 * t * (p.values(j) - shift));
    return Vec(p.vectors * c);
  };
  const Vec g = sqrtw_.cwiseProduct(f);
  if (parts_.size() == 1) return evolve(parts_[0], g).cwiseQuotient(sqrtw_);
  Vec even, odd;
  fold(g, even, odd);
  return unfold(evolve(parts_[0], even), evolve(parts_[1], odd)).cwiseQuotient(sqrtw_);
}

Vec Propagator::eigenfield(int k) const {
  const auto [p, j] = order_.at(k);
  if (parts_.size() == 1) return parts_[0].vectors.col(j).cwiseQuotient(sqrtw_);
  Vec even = Vec::Zero(parts_[0].vectors.rows()), odd = Vec::Zero(parts_[1].vectors.rows());
  (p == 0 ? even : odd) = parts_[p].vectors.col(j);
  return unfold(even, odd).cwiseQuotient(sqrtw_);
}

Vec propagate(const DiscreteOperator& A, double t, const Vec& f) {
  return Propagator(A).apply(t, f);
}

Vec limit_propagate(double t, const Vec& f, const FiberSpectrum& spec,
                    const Propagator& base_heat) {
  return tensor_field(spec, 0, base_heat.apply(t, extract_fb(spec, f)));
}

Vec resolvent_minimizer(const DiscreteOperator& A, double alpha, const Vec& w) {
  DiscreteOperator M = shifted(A, alpha);
  Eigen::SimplicialLLT<SpMat> llt(M.K);
  if (llt.info() != Eigen::Success)
    throw CoercivityViolation("H0 + alpha is not positive definite (epsilon too large?)");
  const Vec rhs = A.w.cwiseProduct(w);
  Vec f = llt.solve(rhs);
  // one refinement step keeps the residual at roundoff level
  Vec r = rhs - M.K * f;
  f += llt.solve(r);
  r = rhs - M.K * f;
  if (!f.allFinite() || r.norm() > 1e-10 * rhs.norm())
    throw NumericalError("resolvent residual above tolerance");
  return f;
}

Vec limit_resolvent(const FiberSpectrum& spec, const DiscreteOperator& base_lap, double alpha,
                    const Vec& w) {
  const Vec wb = extract_fb(spec, w);
  const Vec g = resolvent_minimizer(base_lap, alpha, wb);
  return tensor_field(spec, 0, g);
}

double variational_functional(const DiscreteOperator& A, double alpha, const Vec& w,
                              const Vec& f) {
  const double norm2 = f.dot(A.w.cwiseProduct(f));
  return 0.5 * (A.form(f) + alpha * norm2) - w.dot(A.w.cwiseProduct(f));
}

Vec FieldSpec::base_profile(const ProductGrid& grid) const {
  Vec p = Vec::Zero(grid.n_base);
  const double period = grid.model->dim_base() == 1 ? grid.model->period() : 1.0;
  for (int b = 0; b < grid.n_base; ++b) {
    const double th = 2 * kPi * grid.base_x(b) / period;
    double v = 0;
    for (size_t n = 0; n < base_cos.size(); ++n) v += base_cos[n] * std::cos(n * th);
    for (size_t n = 0; n < base_sin.size(); ++n) v += base_sin[n] * std::sin((n + 1) * th);
    p(b) = v;
  }
  return p;
}

Vec FieldSpec::evaluate(const ProductGrid& grid, const FiberSpectrum& spec) const {
  if (fiber_mode < 0 || fiber_mode >= spec.mode_count())
    throw InvalidArgument("fiber mode index out of range");
  return tensor_field(spec, fiber_mode, base_profile(grid));
}

std::vector<double> default_t_grid() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.1 + 0.1 * i);
  return t;
}

std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2) return {NAN, NAN};
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0 && y[i] > 0)) return {NAN, NAN};
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, r2};
}

namespace {

ProductGrid refined(const ProductGrid& g) {
  const int nf = g.fiber.codim == 1 ? 2 * g.fiber.n + 1 : 2 * g.fiber.n + 1;
  return build_grid(*g.model, g.n_base == 1 ? 1 : 2 * g.n_base, nf, 2 * g.fiber.n_angular);
}

// nodes of g inside the nested refinement f
Vec restrict_to(const ProductGrid& g, const ProductGrid& f, const Vec& fine) {
  Vec out(g.size());
  const int step = f.n_base / g.n_base;
  for (int b = 0; b < g.n_base; ++b)
    for (int j = 0; j < g.fiber_size(); ++j) {
      int jf;
      if (g.fiber.codim == 1) {
        jf = 2 * j + 1;
      } else if (j == 0) {
        jf = 0;
      } else {
        const int a = (j - 1) / g.fiber.n_angular + 1, k = (j - 1) % g.fiber.n_angular;
        jf = f.fiber.node(2 * a, 2 * k);
      }
      out(g.index(b, j)) = fine(f.index(b * step, jf));
    }
  return out;
}

double l2(const ProductGrid& g, const Vec& f) { return std::sqrt(f.dot(g.weights.cwiseProduct(f))); }

}  // namespace

SweepResult convergence_sweep(const SubmanifoldModel& model, const SweepOptions& opt) {
  if (opt.eps.empty()) throw InvalidArgument("empty epsilon list");
  for (size_t i = 0; i < opt.eps.size(); ++i) {
    if (!(opt.eps[i] > 0 && opt.eps[i] < 1)) throw InvalidArgument("epsilon outside (0, 1)");
    if (i && !(opt.eps[i] < opt.eps[i - 1])) throw InvalidArgument("epsilon list must decrease");
  }
  for (double t : opt.t_grid)
    if (!(t > 0)) throw InvalidArgument("t grid must lie in (0, inf)");
  for (int k : opt.norms)
    if (k < 0 || k > 2) throw NotSupported("Sobolev order above 2");

  const ProductGrid grid = build_grid(model, opt.n_base, opt.n_fiber, opt.n_angular);
  const int n_modes = std::max({2, opt.u0.fiber_mode + 1, opt.u1 ? opt.u1->fiber_mode + 1 : 0});
  const FiberSpectrum spec = fiber_spectrum(model.codim(), n_modes, grid.fiber);
  const Propagator base_heat(assemble_base_laplacian(grid));
  const SobolevNorm sob(grid);
  const Vec u0 = opt.u0.evaluate(grid, spec);
  const Vec u1 = opt.u1 ? opt.u1->evaluate(grid, spec) : Vec::Zero(grid.size());
  const double lambda0 = spec.lambda(0);

  std::vector<Vec> limits;
  for (double t : opt.t_grid) limits.push_back(limit_propagate(t, u0, spec, base_heat));

  SweepResult res;
  res.norms = opt.norms;
  res.lambda0 = lambda0;
  res.lambda1 = spec.lambda(1);
  res.grid_size = grid.size();
  res.metric = opt.metric == MetricKind::Induced ? "induced" : "sasaki";
  res.records.resize(opt.eps.size());

  auto run = [&](size_t i) {
    auto t0 = std::chrono::steady_clock::now();
    const double eps = opt.eps[i];
    DiscreteOperator H = assemble_operator(
        grid, opt.metric == MetricKind::Induced ? OperatorKind::H : OperatorKind::HSa, eps);
    Propagator P(renormalize(H, lambda0, eps), &grid);
    const Vec u = u0 + eps * u1;
    SweepRecord rec;
    rec.eps = eps;
    rec.t = Eigen::Map<const Vec>(opt.t_grid.data(), opt.t_grid.size());
    for (auto& e : rec.error) e = Vec::Zero(opt.t_grid.size());
    for (size_t k = 0; k < opt.t_grid.size(); ++k) {
      const Vec d = P.apply(opt.t_grid[k], u) - limits[k];
      for (int order : opt.norms) {
        rec.error[order](k) = sob(d, order);
        rec.sup[order] = std::max(rec.sup[order], rec.error[order](k));
      }
    }
    rec.runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.records[i] = std::move(rec);
  };

  const int workers = std::max(1, std::min<int>(opt.workers, opt.eps.size()));
  if (workers == 1) {
    for (size_t i = 0; i < opt.eps.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (size_t i = w; i < opt.eps.size(); i += workers) run(i);
        } catch (...) {
          errs[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> eps(opt.eps.begin(), opt.eps.end());
  for (int order : opt.norms) {
    std::vector<double> sup;
    for (const auto& r : res.records) sup.push_back(r.sup[order]);
    auto [p, r2] = loglog_fit(eps, sup);
    res.order[order] = p;
    res.r_squared[order] = r2;
  }

  if (opt.resolution_check && opt.metric == MetricKind::Induced) {
    const ProductGrid fine = refined(grid);
    const FiberSpectrum fspec = fiber_spectrum(model.codim(), n_modes, fine.fiber);
    const Propagator fheat(assemble_base_laplacian(fine));
    const Vec fu0 = opt.u0.evaluate(fine, fspec);
    double worst = 0;
    for (size_t k = 0; k < opt.t_grid.size(); ++k) {
      Vec lf = restrict_to(grid, fine, limit_propagate(opt.t_grid[k], fu0, fspec, fheat));
      worst = std::max(worst, l2(grid, lf - limits[k]));
    }
    res.spatial_error = worst;
    if (worst > 0.1 * res.records.front().sup[0])
      throw ResolutionError("spatial error " + std::to_string(worst) +
                            " is not 10x below the coarsest model error " +
                            std::to_string(res.records.front().sup[0]));
  }
  return res;
}

// ------------------------------------------------------- conditional flow

ConditionalFlow::ConditionalFlow(const ProductGrid& grid, double eps, int n_modes)
    : grid_(grid),
      eps_(eps),
      spec_(fiber_spectrum(grid.model->codim(), n_modes, grid.fiber)),
      prop_(renormalize(assemble_operator(grid, OperatorKind::H, eps), spec_.lambda(0), eps),
            &grid_),
      emb_(*grid.model) {
  sqrt_rho_.resize(grid_.size());
  for (int b = 0; b < grid_.n_base; ++b)
    for (int j = 0; j < grid_.fiber_size(); ++j)
      sqrt_rho_(grid_.index(b, j)) = std::sqrt(density_rho(*grid_.model, grid_.point(b, j, eps_)));
}

Vec ConditionalFlow::center_values(const Vec& field) const {
  const int nf = grid_.fiber_size();
  Vec out(grid_.n_base);
  for (int b = 0; b < grid_.n_base; ++b) {
    if (grid_.fiber.codim == 2) {
      out(b) = field(grid_.index(b, 0));
    } else if (nf % 2 == 1) {
      out(b) = field(grid_.index(b, nf / 2));
    } else {
      out(b) = 0.5 * (field(grid_.index(b, nf / 2 - 1)) + field(grid_.index(b, nf / 2)));
    }
  }
  return out;
}

Vec ConditionalFlow::evaluate(double T, double t, const Observable& f) const {
  if (!(t >= 0 && t <= T)) throw InvalidArgument("need 0 <= t <= T");
  Vec ft(grid_.size());
  for (int b = 0; b < grid_.n_base; ++b)
    for (int j = 0; j < grid_.fiber_size(); ++j)
      ft(grid_.index(b, j)) = f(emb_.ambient(grid_.base_x(b), eps_ * grid_.fiber.points[j]));
  const Vec inner = prop_.apply(T - t, sqrt_rho_);
  const Vec num = center_values(prop_.apply(t, ft.cwiseProduct(inner)));
  const Vec den = center_values(prop_.apply(T, sqrt_rho_));
  if (den.minCoeff() < 1e-12) throw DegenerateConditioning("semigroup denominator vanishes");
  return num.cwiseQuotient(den);
}

double ConditionalFlow::at(double T, double t, const Observable& f, double x) const {
  Vec v = evaluate(T, t, f);
  const double period = grid_.model->period();
  double r = std::fmod(x, period);
  if (r < 0) r += period;
  int b = static_cast<int>(std::lround(r / grid_.dx)) % grid_.n_base;
  return v(b);
}

Vec conditional_flow_operator(const SubmanifoldModel& model, double eps, double T, double t,
                              const Observable& f, int n_base, int n_fiber) {
  return ConditionalFlow(build_grid(model, n_base, n_fiber), eps).evaluate(T, t, f);
}

}  // namespace tubelab
