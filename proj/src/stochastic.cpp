#include "tubelab/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <ostream>
#include <thread>

#include "tubelab/errors.hpp"

namespace tubelab {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::array<std::uint32_t, 4> Philox::operator()(std::uint32_t c0, std::uint32_t c1,
                                                std::uint32_t c2, std::uint32_t c3) const {
  std::uint32_t k0 = static_cast<std::uint32_t>(key), k1 = static_cast<std::uint32_t>(key >> 32);
  std::array<std::uint32_t, 4> c{c0, c1, c2, c3};
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
    const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
    const std::uint32_t hi0 = p0 >> 32, lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = p1 >> 32, lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return c;
}

std::pair<double, double> Philox::uniforms(std::uint32_t c0, std::uint32_t c1,
                                           std::uint32_t c2) const {
  auto r = (*this)(c0, c1, c2, 0x5EEDu);
  auto to01 = [](std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t u = (std::uint64_t(hi) << 32 | lo) >> 11;
    return (u + 1) * 0x1.0p-53;  // (0, 1]
  };
  return {to01(r[0], r[1]), to01(r[2], r[3])};
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

int PathEnsemble::time_index(double t) const {
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, T)) return static_cast<int>(i);
  throw InvalidArgument("time is not on the ensemble's record grid");
}

namespace {

// U on the tube: closed form for the circle, otherwise a table of the
// finite-difference potential in (x, |w|, angle) with linear interpolation.
class PathPotential {
 public:
  PathPotential(const SubmanifoldModel& model, double eps) : eps_(eps) {
    if (auto c = model.as<CircleInPlane>()) {
      circle_ = true;
      R_ = c->radius;
      return;
    }
    auto cv = model.as<CurveInSpace>();
    period_ = cv->length;
    ns_ = cv->curvature.is_constant() && cv->torsion.is_constant() ? 1 : 64;
    table_.resize(static_cast<size_t>(ns_) * nr_ * na_);
    for (int i = 0; i < ns_; ++i)
      for (int a = 0; a < nr_; ++a)
        for (int k = 0; k < na_; ++k) {
          const double r = double(a) / (nr_ - 1), ph = 2 * kPi * k / na_;
          Vec w(2);
          w << r * std::cos(ph), r * std::sin(ph);
          table_[(static_cast<size_t>(i) * nr_ + a) * na_ + k] =
              potential_U(model, TubePoint{period_ * i / ns_, w, eps});
        }
  }

  double operator()(const Vec& X, double x, const Vec& v) const {
    if (circle_) {
      const double r2 = X.squaredNorm();
      return -0.25 / r2;
    }
    const double r = std::min(1.0, v.norm() / eps_) * (nr_ - 1);
    double ph = std::atan2(v(1), v(0));
    if (ph < 0) ph += 2 * kPi;
    const double fk = ph / (2 * kPi) * na_;
    const double fs = ns_ == 1 ? 0.0 : x / period_ * ns_;
    const int a0 = std::min(static_cast<int>(r), nr_ - 2);
    const int k0 = static_cast<int>(fk), s0 = static_cast<int>(fs);
    const double ta = r - a0, tk = fk - k0, ts = fs - s0;
    auto at = [&](int s, int a, int k) {
      s = ((s % ns_) + ns_) % ns_;
      k = ((k % na_) + na_) % na_;
      return table_[(static_cast<size_t>(s) * nr_ + a) * na_ + k];
    };
    double out = 0;
    for (int ds = 0; ds < (ns_ == 1 ? 1 : 2); ++ds)
      for (int da = 0; da < 2; ++da)
        for (int dk = 0; dk < 2; ++dk) {
          const double wgt = (ns_ == 1 ? 1.0 : (ds ? ts : 1 - ts)) * (da ? ta : 1 - ta) *
                             (dk ? tk : 1 - tk);
          out += wgt * at(s0 + ds, a0 + da, k0 + dk);
        }
    return out;
  }

 private:
  double eps_;
  bool circle_ = false;
  double R_ = 1;
  double period_ = 1;
  int ns_ = 1;
  static constexpr int nr_ = 17, na_ = 32;
  std::vector<double> table_;
};

template <class Fn>
void parallel_for(int workers, int n, Fn fn) {
  if (workers <= 1 || n < 2 * workers) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back(fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

}  // namespace

PathEnsemble sample_conditioned(const SubmanifoldModel& model, double eps, double x0, double T,
                                double dt, int n_paths, std::uint64_t seed,
                                std::vector<double> record_times, const SamplerOptions& opt) {
  if (n_paths <= 0) throw EmptyEnsemble("no paths requested");
  if (!model.flat_ambient()) throw NotSupported("Monte Carlo needs a flat ambient model");
  if (!(eps > 0)) throw InvalidArgument("epsilon must be positive");
  if (!(dt > 0) || dt > eps * eps / 10 * (1 + 1e-12))
    throw StepSizeError("dt must not exceed eps^2/10");
  if (!(T > 0)) throw InvalidArgument("horizon must be positive");

  const int n_steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  const double h = T / n_steps;
  std::sort(record_times.begin(), record_times.end());
  record_times.erase(std::unique(record_times.begin(), record_times.end()), record_times.end());
  std::vector<int> record_step;
  for (double t : record_times) {
    const double idx = std::round(t / h);
    if (t < 0 || t > T * (1 + 1e-12) || std::abs(idx * h - t) > 1e-9 * std::max(1.0, T))
      throw InvalidArgument("record time is not on the step grid");
    record_step.push_back(static_cast<int>(idx));
  }

  const FlatEmbedding emb(model);
  const PathPotential U(model, eps);
  const int dim = emb.ambient_dim();
  const int q = model.codim();
  const int N = n_paths, nt = static_cast<int>(record_times.size());

  PathEnsemble ens;
  ens.n_paths = N;
  ens.dim = dim;
  ens.dt = h;
  ens.T = T;
  ens.eps = eps;
  ens.seed = seed;
  for (int s : record_step) ens.times.push_back(s * h);
  ens.positions.assign(static_cast<size_t>(N) * nt * dim, 0.0);
  ens.survived.assign(N, 1);
  ens.log_weight.assign(N, 0.0);
  ens.fk_log.assign(N, 0.0);
  ens.ancestor.resize(N);
  for (int k = 0; k < N; ++k) ens.ancestor[k] = k;
  ens.resampled = opt.resampling == Resampling::Adaptive;
  const int B = ens.resampled ? std::clamp(opt.islands, 1, N) : 1;
  for (int b = 0; b <= B; ++b) ens.island_start.push_back(static_cast<int>(static_cast<long long>(b) * N / B));
  ens.island_log_normalizer.assign(B, 0.0);

  std::vector<double> X(static_cast<size_t>(N) * dim), xpar(N, x0), Uold(N, 0.0);
  std::vector<double> vnorm(static_cast<size_t>(N) * q, 0.0);
  {
    const Vec start = emb.ambient(x0, Vec::Zero(q));
    const double u0 = opt.use_potential ? U(start, x0, Vec::Zero(q)) : 0.0;
    for (int k = 0; k < N; ++k) {
      for (int d = 0; d < dim; ++d) X[k * dim + d] = start(d);
      Uold[k] = u0;
    }
  }
  const Philox rng{seed};
  const double sq = std::sqrt(h);

  const auto* circ = model.as<CircleInPlane>();
  const bool circle = circ != nullptr;
  const double radius = circle ? circ->radius : 0.0;
  auto advance = [&](int lo, int hi, int step) {
    Vec Y(dim), v(q);
    for (int k = lo; k < hi; ++k) {
      if (!ens.survived[k]) continue;
      const auto [u1, u2] = rng.uniforms(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(step), 0);
      const auto [u3, u4] = rng.uniforms(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(step), 1);
      const double rad = std::sqrt(-2 * std::log(u1));
      double z[3] = {rad * std::cos(2 * kPi * u2), rad * std::sin(2 * kPi * u2), 0.0};
      if (dim == 3) z[2] = std::sqrt(-2 * std::log(u3)) * std::cos(2 * kPi * u4);
      for (int d = 0; d < dim; ++d) Y(d) = X[k * dim + d] + sq * z[d];
      // u4 drives the third normal only in 3D; use the spare uniform otherwise
      const double ukill = dim == 3 ? rng.uniforms(static_cast<std::uint32_t>(k),
                                                   static_cast<std::uint32_t>(step), 2)
                                          .first
                                    : u3;
      double xnew = xpar[k];
      if (circle) {
        // radial offset is all the kill test and the potential need
        v(0) = std::hypot(Y(0), Y(1)) - radius;
      } else if (opt.kill || opt.use_potential) {
        auto fc = emb.fermi(Y, xpar[k]);
        xnew = fc.first;
        v = fc.second;
      }
      if (opt.kill) {
        bool dead;
        if (q == 1) {
          const double vo = vnorm[k];
          const double a0 = eps - vo, b0 = eps + vo;
          const double a1 = eps - v(0), b1 = eps + v(0);
          dead = a1 <= 0 || b1 <= 0;
          if (!dead) {
            const double p = (1 - std::exp(-2 * a0 * a1 / h)) * (1 - std::exp(-2 * b0 * b1 / h));
            dead = ukill > p;
          }
        } else {
          const double d0 = eps - std::hypot(vnorm[2 * k], vnorm[2 * k + 1]);
          const double d1 = eps - v.norm();
          dead = d1 <= 0;
          if (!dead) dead = ukill > 1 - std::exp(-2 * d0 * d1 / h);
        }
        if (dead) {
          ens.survived[k] = 0;
          continue;
        }
        for (int i = 0; i < q; ++i) vnorm[static_cast<size_t>(k) * q + i] = v(i);
      }
      if (opt.use_potential) {
        const double un = U(Y, xnew, v);
        const double inc = 0.25 * (Uold[k] + un) * h;
        ens.log_weight[k] += inc;
        ens.fk_log[k] += inc;
        Uold[k] = un;
      }
      xpar[k] = xnew;
      for (int d = 0; d < dim; ++d) X[k * dim + d] = Y(d);
    }
  };

  std::vector<double> buf(N), buf2(N);
  auto record = [&](int ti) {
    for (int k = 0; k < N; ++k)
      for (int d = 0; d < dim; ++d)
        ens.positions[(static_cast<size_t>(k) * nt + ti) * dim + d] = X[k * dim + d];
    // each island estimates the mass without bias; average them
    double mass = 0, surv = 0;
    for (int b = 0; b < B; ++b) {
      const int lo = ens.island_start[b], n = ens.island_start[b + 1] - lo;
      for (int k = lo; k < lo + n; ++k) {
        const double lw = ens.island_log_normalizer[b] + ens.log_weight[k];
        buf[k] = ens.survived[k] ? std::exp(lw) : 0.0;
        buf2[k] = ens.survived[k] ? std::exp(lw - ens.fk_log[k]) : 0.0;
      }
      mass += pairwise_sum(buf.data() + lo, n) / n / B;
      surv += pairwise_sum(buf2.data() + lo, n) / n / B;
    }
    ens.fk_mass.push_back(mass);
    ens.survival.push_back(surv);
  };

  int next_rec = 0;
  while (next_rec < nt && record_step[next_rec] == 0) record(next_rec++);

  std::vector<double> Xn(X.size()), xn(N), Un(N), vn(vnorm.size()), fkn(N), posn;
  std::vector<int> ancn(N);
  for (int step = 0; step < n_steps; ++step) {
    parallel_for(opt.workers, N, [&](int lo, int hi) { advance(lo, hi, step); });
    while (next_rec < nt && record_step[next_rec] == step + 1) record(next_rec++);

    if (!ens.resampled || step + 1 == n_steps) continue;
    bool any_alive = false, copied = false;
    const size_t filled = static_cast<size_t>(next_rec) * dim;
    for (int b = 0; b < B; ++b) {
      const int lo = ens.island_start[b], hi = ens.island_start[b + 1], n = hi - lo;
      double mx = -INFINITY;
      for (int k = lo; k < hi; ++k)
        if (ens.survived[k]) mx = std::max(mx, ens.log_weight[k]);
      if (mx == -INFINITY) continue;  // a dead island stays dead and carries zero mass
      any_alive = true;
      for (int k = lo; k < hi; ++k) {
        buf[k] = ens.survived[k] ? std::exp(ens.log_weight[k] - mx) : 0.0;
        buf2[k] = buf[k] * buf[k];
      }
      const double s1 = pairwise_sum(buf.data() + lo, n), s2 = pairwise_sum(buf2.data() + lo, n);
      if (s1 * s1 >= opt.ess_threshold * n * s2) continue;

      if (!copied) {
        Xn = X;
        vn = vnorm;
        xn = xpar;
        Un = Uold;
        fkn = ens.fk_log;
        ancn = ens.ancestor;
        posn = ens.positions;
        copied = true;
      }
      // systematic resampling in index order, inside the island
      ens.island_log_normalizer[b] += mx + std::log(s1 / n);
      const double u = rng.uniforms(0xFFFFFFFFu - static_cast<std::uint32_t>(b),
                                    static_cast<std::uint32_t>(step), 7)
                           .first;
      double cum = 0;
      int src = lo - 1;
      for (int i = lo; i < hi; ++i) {
        const double target = (i - lo + 1 - u) / n * s1;
        while (src < hi - 1 && cum < target) cum += buf[++src];
        while (!ens.survived[src]) --src;  // only reachable through roundoff
        std::copy_n(&X[static_cast<size_t>(src) * dim], dim, &Xn[static_cast<size_t>(i) * dim]);
        std::copy_n(&vnorm[static_cast<size_t>(src) * q], q, &vn[static_cast<size_t>(i) * q]);
        xn[i] = xpar[src];
        Un[i] = Uold[src];
        fkn[i] = ens.fk_log[src];
        ancn[i] = ens.ancestor[src];
        std::copy_n(&ens.positions[static_cast<size_t>(src) * nt * dim], filled,
                    &posn[static_cast<size_t>(i) * nt * dim]);
      }
      std::fill(ens.log_weight.begin() + lo, ens.log_weight.begin() + hi, 0.0);
      std::fill(ens.survived.begin() + lo, ens.survived.begin() + hi, 1);
      ++ens.resample_count;
    }
    if (!any_alive) throw DegenerateConditioning("every path left the tube");
    if (!copied) continue;
    X.swap(Xn);
    vnorm.swap(vn);
    xpar.swap(xn);
    Uold.swap(Un);
    ens.fk_log.swap(fkn);
    ens.ancestor.swap(ancn);
    ens.positions.swap(posn);
  }
  return ens;
}

MarginalEstimate marginal_estimate(const PathEnsemble& ens, const Observable& f, double t) {
  if (ens.n_paths == 0) throw EmptyEnsemble("empty ensemble");
  const int ti = ens.time_index(t);
  const int N = ens.n_paths;
  const int B = static_cast<int>(ens.island_log_normalizer.size());
  // pooled weight of path k in island b: exp(L_b + log_weight_k) / n_b
  std::vector<double> lw(N, -INFINITY);
  std::vector<int> island(N, 0);
  double mx = -INFINITY;
  for (int b = 0; b < B; ++b) {
    const int lo = ens.island_start[b], hi = ens.island_start[b + 1];
    for (int k = lo; k < hi; ++k) {
      island[k] = b;
      if (!ens.survived[k]) continue;
      lw[k] = ens.island_log_normalizer[b] + ens.log_weight[k] - std::log(double(hi - lo));
      mx = std::max(mx, lw[k]);
    }
  }
  if (mx == -INFINITY) throw DegenerateConditioning("no path survived the horizon");
  std::vector<double> W(N), fv(N, 0.0), a(N), b(N);
  double fref = NAN;
  for (int k = 0; k < N; ++k) {
    W[k] = std::exp(lw[k] - mx);
    if (W[k] > 0) {
      fv[k] = f(Eigen::Map<const Vec>(ens.position(k, ti), ens.dim));
      if (std::isnan(fref)) fref = fv[k];
    }
  }
  for (int k = 0; k < N; ++k) {
    a[k] = W[k] * (W[k] > 0 ? fv[k] - fref : 0.0);
    b[k] = W[k] * W[k];
  }
  const double s0 = pairwise_sum(W.data(), N);
  const double mu = fref + pairwise_sum(a.data(), N) / s0;
  // delta-method variance over independent clusters: islands when there are
  // several, otherwise time-0 ancestors (single paths without resampling)
  const bool by_island = B > 1;
  std::vector<double> cluster(N, 0.0), var(N);
  std::vector<char> used(N, 0), lineage(N, 0);
  for (int k = 0; k < N; ++k) {
    if (W[k] == 0) continue;
    const int c = by_island ? island[k] : ens.ancestor[k];
    cluster[c] += W[k] * (fv[k] - mu);
    used[c] = 1;
    lineage[ens.ancestor[k]] = 1;
  }
  const int C = static_cast<int>(std::count(used.begin(), used.end(), 1));
  for (int k = 0; k < N; ++k) {
    var[k] = cluster[k] * cluster[k];
    a[k] = W[k] * (W[k] > 0 ? (fv[k] - mu) * (fv[k] - mu) : 0.0);
  }
  MarginalEstimate out;
  out.estimate = mu;
  out.std_error = std::sqrt(pairwise_sum(var.data(), N) * (C > 1 ? double(C) / (C - 1) : 1.0)) / s0;
  const double kish = s0 * s0 / pairwise_sum(b.data(), N);
  const double spread = pairwise_sum(a.data(), N) / s0;
  out.ess = out.std_error > 0 ? std::min(kish, spread / (out.std_error * out.std_error)) : kish;
  out.lineages = static_cast<int>(std::count(lineage.begin(), lineage.end(), 1));
  out.islands = by_island ? C : 1;
  out.low_ess = out.ess < 50;
  return out;
}

double circle_heat_oracle(double R, double x0, double t, const std::vector<double>& cos_coef,
                          const std::vector<double>& sin_coef,
                          const std::function<double(int)>& symbol) {
  auto sigma = [&](int n) { return symbol ? symbol(n) : double(n) * n / (R * R); };
  double v = 0;
  for (size_t n = 0; n < cos_coef.size(); ++n)
    v += cos_coef[n] * std::exp(-0.5 * t * sigma(static_cast<int>(n))) * std::cos(n * x0);
  for (size_t n = 0; n < sin_coef.size(); ++n)
    v += sin_coef[n] * std::exp(-0.5 * t * sigma(static_cast<int>(n + 1))) * std::sin((n + 1) * x0);
  return v;
}

Observable make_observable(const std::string& name) {
  if (name == "one") return [](const Vec&) { return 1.0; };
  if (name == "cos_angle") return [](const Vec& X) { return X(0) / std::hypot(X(0), X(1)); };
  if (name == "sin_angle") return [](const Vec& X) { return X(1) / std::hypot(X(0), X(1)); };
  if (name == "x") return [](const Vec& X) { return X(0); };
  throw InvalidArgument("unknown observable '" + name + "'");
}

void write_path_dump(std::ostream& os, const PathEnsemble& ens) {
  auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  os.write("TLPATHS1", 8);
  put(static_cast<std::uint64_t>(ens.n_paths));
  put(ens.dt);
  put(ens.T);
  put(ens.seed);
  put(static_cast<std::uint32_t>(ens.dim));
  put(static_cast<std::uint32_t>(ens.times.size()));
  for (double t : ens.times) put(t);
  const size_t per = ens.times.size() * ens.dim;
  for (int k = 0; k < ens.n_paths; ++k) {
    os.write(reinterpret_cast<const char*>(ens.positions.data() + k * per), per * sizeof(double));
    put(ens.log_weight[k]);
    put(static_cast<double>(ens.survived[k]));
    put(static_cast<double>(ens.ancestor[k]));
  }
}

}  // namespace tubelab
