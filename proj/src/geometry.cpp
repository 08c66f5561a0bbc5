#include "tubelab/geometry.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "tubelab/errors.hpp"

namespace tubelab {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap(double s, double period) {
  double r = std::fmod(s, period);
  return r < 0 ? r + period : r;
}

}  // namespace

// ---------------------------------------------------------------- Profile

Profile Profile::constant(double value) {
  Profile p;
  p.mean_ = value;
  p.samples_ = {value};
  return p;
}

Profile Profile::sampled(std::vector<double> values, double period) {
  if (values.empty()) throw InvalidArgument("empty profile samples");
  if (!(period > 0)) throw InvalidArgument("profile period must be positive");
  Profile p;
  p.period_ = period;
  const int n = static_cast<int>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  p.mean_ = mean / n;
  const int kmax = (n - 1) / 2;
  for (int k = 1; k <= kmax; ++k) {
    double a = 0, b = 0;
    for (int j = 0; j < n; ++j) {
      double arg = 2 * kPi * k * j / n;
      a += values[j] * std::cos(arg);
      b += values[j] * std::sin(arg);
    }
    p.coeff_cos_.push_back(2 * a / n);
    p.coeff_sin_.push_back(2 * b / n);
  }
  if (n % 2 == 0) {
    double a = 0;
    for (int j = 0; j < n; ++j) a += values[j] * (j % 2 ? -1.0 : 1.0);
    p.nyquist_ = a / n;
  }
  // drop numerically empty tails so constant samples report is_constant()
  double scale = 0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  bool all_small = std::abs(p.nyquist_) <= 1e-15 * (1 + scale);
  for (size_t k = 0; k < p.coeff_cos_.size() && all_small; ++k)
    all_small = std::abs(p.coeff_cos_[k]) + std::abs(p.coeff_sin_[k]) <=
                1e-15 * (1 + scale);
  if (all_small) {
    p.coeff_cos_.clear();
    p.coeff_sin_.clear();
    p.nyquist_ = 0;
  }
  p.samples_ = std::move(values);
  return p;
}

double Profile::operator()(double s) const {
  if (is_constant()) return mean_;
  double v = mean_;
  const double base = 2 * kPi * s / period_;
  for (size_t k = 0; k < coeff_cos_.size(); ++k) {
    double arg = (k + 1) * base;
    v += coeff_cos_[k] * std::cos(arg) + coeff_sin_[k] * std::sin(arg);
  }
  if (nyquist_ != 0.0) v += nyquist_ * std::cos(0.5 * samples_.size() * base);
  return v;
}

double Profile::derivative(double s) const {
  if (is_constant()) return 0.0;
  const double w = 2 * kPi / period_;
  double d = 0;
  for (size_t k = 0; k < coeff_cos_.size(); ++k) {
    double kk = (k + 1) * w;
    d += kk * (-coeff_cos_[k] * std::sin(kk * s) + coeff_sin_[k] * std::cos(kk * s));
  }
  if (nyquist_ != 0.0) {
    double kk = 0.5 * samples_.size() * w;
    d -= kk * nyquist_ * std::sin(kk * s);
  }
  return d;
}

double Profile::max_abs() const {
  if (is_constant()) return std::abs(mean_);
  double m = 0;
  const int n = 8 * static_cast<int>(samples_.size());
  for (int j = 0; j < n; ++j) m = std::max(m, std::abs((*this)(period_ * j / n)));
  return m;
}

// ----------------------------------------------------------------- curves

CurveInSpace CurveInSpace::constant(double kappa, double tau, double length) {
  if (!(kappa > 0)) throw InvalidArgument("curvature must be positive");
  CurveInSpace c;
  c.curvature = Profile::constant(kappa);
  c.torsion = Profile::constant(tau);
  c.length = length > 0 ? length : 2 * kPi / kappa;
  return c;
}

CurveInSpace CurveInSpace::ellipse(double a, double b, int samples) {
  if (!(a > 0 && b > 0)) throw InvalidArgument("ellipse semi-axes must be positive");
  using boost::math::quadrature::gauss_kronrod;
  auto speed = [&](double t) {
    return std::hypot(a * std::sin(t), b * std::cos(t));
  };
  auto arc = [&](double t) {
    return gauss_kronrod<double, 31>::integrate(speed, 0.0, t, 12, 1e-14);
  };
  const double L = arc(2 * kPi);
  std::vector<double> kappa(samples);
  double t = 0;
  for (int j = 0; j < samples; ++j) {
    const double target = L * j / samples;
    for (int it = 0; it < 50; ++it) {
      double dt = (arc(t) - target) / speed(t);
      t -= dt;
      if (std::abs(dt) < 1e-14) break;
    }
    double sp = speed(t);
    kappa[j] = a * b / (sp * sp * sp);
  }
  CurveInSpace c;
  c.curvature = Profile::sampled(std::move(kappa), L);
  c.torsion = Profile::constant(0.0);
  c.length = L;
  return c;
}

// --------------------------------------------------------------- synthetic

SyntheticFiberModel SyntheticFiberModel::make(
    int base_dim, int codim, const std::vector<Component>& components,
    double base_length) {
  if (base_dim != 0 && base_dim != 1)
    throw InvalidArgument("synthetic model supports base dimension 0 or 1");
  if (codim < 2) throw InvalidArgument("synthetic model needs codimension >= 2");
  SyntheticFiberModel m;
  m.base_dim = base_dim;
  m.codim = codim;
  m.base_length = base_dim == 1 ? (base_length > 0 ? base_length : 2 * kPi) : 0.0;
  const int q = codim;
  m.tensor.assign(static_cast<size_t>(q) * q * q * q, 0.0);
  std::vector<char> set(m.tensor.size(), 0);
  auto idx = [q](int a, int b, int c, int d) {
    return ((static_cast<size_t>(a) * q + b) * q + c) * q + d;
  };
  auto put = [&](int a, int b, int c, int d, double v) {
    size_t k = idx(a, b, c, d);
    if (set[k] && std::abs(m.tensor[k] - v) > 1e-14 * (1 + std::abs(v)))
      throw InvalidArgument("curvature components contradict the tensor symmetries");
    m.tensor[k] = v;
    set[k] = 1;
  };
  for (const auto& c : components) {
    int a = c.mu - 1, b = c.alpha - 1, cc = c.nu - 1, d = c.beta - 1;
    for (int v : {a, b, cc, d})
      if (v < 0 || v >= q) throw InvalidArgument("curvature index out of range");
    double x = c.value;
    put(a, b, cc, d, x);
    put(b, a, cc, d, -x);
    put(a, b, d, cc, -x);
    put(b, a, d, cc, x);
    put(cc, d, a, b, x);
    put(d, cc, a, b, -x);
    put(cc, d, b, a, -x);
    put(d, cc, b, a, x);
  }
  return m;
}

double SyntheticFiberModel::at(int mu, int alpha, int nu, int beta) const {
  const int q = codim;
  return tensor[((static_cast<size_t>(mu) * q + alpha) * q + nu) * q + beta];
}

double SyntheticFiberModel::symmetry_defect() const {
  double worst = 0;
  const int q = codim;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      for (int c = 0; c < q; ++c)
        for (int d = 0; d < q; ++d) {
          worst = std::max(worst, std::abs(at(a, b, c, d) - at(c, d, a, b)));
          worst = std::max(worst, std::abs(at(a, b, c, d) + at(b, a, c, d)));
        }
  return worst;
}

// ------------------------------------------------------------------ model

SubmanifoldModel::SubmanifoldModel(Kind kind) : kind_(std::move(kind)) {
  if (auto c = as<CircleInPlane>(); c && !(c->radius > 0))
    throw InvalidArgument("circle radius must be positive");
  if (auto c = as<CurveInSpace>(); c && !(c->length > 0))
    throw InvalidArgument("curve length must be positive");
}

int SubmanifoldModel::dim_base() const {
  if (auto s = as<SyntheticFiberModel>()) return s->base_dim;
  return 1;
}

int SubmanifoldModel::dim_ambient() const {
  if (as<CircleInPlane>()) return 2;
  if (as<CurveInSpace>()) return 3;
  auto s = as<SyntheticFiberModel>();
  return s->base_dim + s->codim;
}

bool SubmanifoldModel::flat_ambient() const { return !as<SyntheticFiberModel>(); }

std::string SubmanifoldModel::name() const {
  if (as<CircleInPlane>()) return "circle";
  if (as<CurveInSpace>()) return "curve";
  return "synthetic";
}

double SubmanifoldModel::period() const {
  if (as<CircleInPlane>()) return 2 * kPi;
  if (auto c = as<CurveInSpace>()) return c->length;
  return as<SyntheticFiberModel>()->base_length;
}

double SubmanifoldModel::speed() const {
  if (auto c = as<CircleInPlane>()) return c->radius;
  return 1.0;
}

double SubmanifoldModel::normal_connection(double x) const {
  if (auto c = as<CurveInSpace>()) return c->torsion(x);
  return 0.0;
}

double SubmanifoldModel::focal_radius() const {
  if (auto c = as<CircleInPlane>()) return c->radius;
  if (auto c = as<CurveInSpace>()) return 1.0 / c->curvature.max_abs();
  // truncated Jacobi map I + R_W/6 on |W| = r degenerates when an
  // eigenvalue of R_W reaches -6/r^2
  auto s = as<SyntheticFiberModel>();
  double lo = 0;
  const int q = s->codim;
  for (int i = 0; i < q; ++i) {
    Vec W = Vec::Zero(q);
    W(i) = 1;
    Mat R = Mat::Zero(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        for (int m = 0; m < q; ++m)
          for (int n = 0; n < q; ++n) R(b, a) += W(m) * W(n) * s->at(m, a, n, b);
    lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Mat>(R).eigenvalues().minCoeff());
  }
  return lo < 0 ? std::sqrt(6.0 / -lo) : std::numeric_limits<double>::infinity();
}

// --------------------------------------------------------------- geometry

Mat CometricAt::assembled() const {
  const int l = horizontal.rows(), q = vertical.rows();
  Mat G(l + q, l + q);
  G.topLeftCorner(l, l) = horizontal;
  G.bottomRightCorner(q, q) = vertical;
  G.topRightCorner(l, q) = cross;
  G.bottomLeftCorner(q, l) = cross.transpose();
  return G;
}

Mat weingarten(const SubmanifoldModel& model, double x, const Vec& W) {
  if (W.size() != model.codim()) throw InvalidArgument("normal vector has wrong size");
  if (auto c = model.as<CircleInPlane>()) {
    // W measured along the outward normal
    return Mat::Constant(1, 1, -W(0) / c->radius);
  }
  if (auto c = model.as<CurveInSpace>()) {
    // W in the (principal normal, binormal) frame
    return Mat::Constant(1, 1, c->curvature(x) * W(0));
  }
  if (model.as<SyntheticFiberModel>()) {
    const int l = model.dim_base();
    return Mat::Zero(l, l);
  }
  throw NotImplemented("weingarten for this model");
}

namespace {

Mat synthetic_RW(const SyntheticFiberModel& s, const Vec& W) {
  const int q = s.codim;
  Mat R = Mat::Zero(q, q);
  for (int m = 0; m < q; ++m) {
    if (W(m) == 0) continue;
    for (int n = 0; n < q; ++n) {
      if (W(n) == 0) continue;
      const double ww = W(m) * W(n);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) R(b, a) += ww * s.at(m, a, n, b);
    }
  }
  return R;
}

Mat truncated_jacobi(const SubmanifoldModel& model, double x, const Vec& W,
                     double eps) {
  const int l = model.dim_base(), q = model.codim();
  Mat A = Mat::Identity(l + q, l + q);
  Vec eW = eps * W;
  A.topLeftCorner(l, l) -= weingarten(model, x, eW);
  if (auto s = model.as<SyntheticFiberModel>())
    A.bottomRightCorner(q, q) += synthetic_RW(*s, eW) / 6.0;
  return A;
}

}  // namespace

Mat jacobi_expansion(const SubmanifoldModel& model, double x, const Vec& W,
                     double eps) {
  if (W.size() != model.codim()) throw InvalidArgument("normal vector has wrong size");
  return truncated_jacobi(model, x, W, eps);
}

Mat jacobi_endomorphism(const SubmanifoldModel& model, double x, const Vec& W,
                        double eps) {
  if (W.size() != model.codim()) throw InvalidArgument("normal vector has wrong size");
  // with a flat ambient, Jacobi fields are affine in the normal direction
  // and the truncation is exact
  Mat A = truncated_jacobi(model, x, W, eps);
  const int l = model.dim_base(), q = model.codim();
  if (model.flat_ambient()) {
    if (A(0, 0) <= 1e-12)
      throw FocalRadiusExceeded("tube point beyond the focal radius");
  } else {
    double lo = Eigen::SelfAdjointEigenSolver<Mat>(A.bottomRightCorner(q, q))
                    .eigenvalues()
                    .minCoeff();
    if (lo <= 1e-12) throw FocalRadiusExceeded("truncated Jacobi map is singular");
  }
  (void)l;
  return A;
}

Mat curvature_block(const SubmanifoldModel& model, const TubePoint& p) {
  const int q = model.codim();
  if (auto s = model.as<SyntheticFiberModel>()) return synthetic_RW(*s, p.w);
  return Mat::Zero(q, q);
}

CometricAt cometric(const SubmanifoldModel& model, const TubePoint& p,
                    MetricKind which) {
  const int l = model.dim_base(), q = model.codim();
  if (p.w.size() != q) throw InvalidArgument("fiber point has wrong size");
  if (!(p.eps > 0)) throw InvalidArgument("epsilon must be positive");
  CometricAt G;
  if (which == MetricKind::Sasaki) {
    G.horizontal = Mat::Identity(l, l);
    G.vertical = Mat::Identity(q, q) / (p.eps * p.eps);
    G.cross = Mat::Zero(l, q);
    return G;
  }
  Mat A = jacobi_endomorphism(model, p.x, p.w, p.eps);
  Mat M = A.transpose() * A;
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw FocalRadiusExceeded("induced metric is singular");
  Mat C = llt.solve(Mat::Identity(l + q, l + q));
  C = 0.5 * (C + C.transpose());
  Vec d = Vec::Ones(l + q);
  d.tail(q).setConstant(1.0 / p.eps);
  C = d.asDiagonal() * C * d.asDiagonal();
  G.horizontal = C.topLeftCorner(l, l);
  G.vertical = C.bottomRightCorner(q, q);
  G.cross = C.topRightCorner(l, q);
  return G;
}

double density_rho(const SubmanifoldModel& model, const TubePoint& p) {
  if (auto c = model.as<CircleInPlane>()) {
    double r = c->radius + p.eps * p.w(0);
    if (r <= 1e-12 * c->radius) throw FocalRadiusExceeded("tube point beyond the focal radius");
    return r / c->radius;
  }
  return std::abs(jacobi_endomorphism(model, p.x, p.w, p.eps).determinant());
}

Mat coordinate_metric(const SubmanifoldModel& model, double x, const Vec& v) {
  const int l = model.dim_base(), q = model.codim(), n = l + q;
  Mat F = Mat::Identity(n, n);
  if (l == 1) {
    F(0, 0) = model.speed();
    const double tau = model.normal_connection(x);
    if (q == 2 && tau != 0.0) {
      // d/dx = speed (e_h + tau Z_12), Z_12 = v1 d/dv2 - v2 d/dv1
      F(1, 0) = -model.speed() * tau * v(1);
      F(2, 0) = model.speed() * tau * v(0);
    }
  }
  Mat A = jacobi_endomorphism(model, x, v, 1.0);
  return F.transpose() * (A.transpose() * A) * F;
}

double potential_U_fd(const SubmanifoldModel& model, const TubePoint& p, double h) {
  if (!(h > 1e-8)) throw NumericalError("finite-difference step underflow");
  const int l = model.dim_base(), q = model.codim(), n = l + q;
  Vec y(n);
  if (l == 1) y(0) = p.x;
  y.tail(q) = p.eps * p.w;

  auto split = [&](const Vec& z, double& x, Vec& v) {
    x = l == 1 ? z(0) : 0.0;
    v = z.tail(q);
  };
  auto hval = [&](const Vec& z) {
    double x;
    Vec v;
    split(z, x, v);
    double rho = std::abs(jacobi_endomorphism(model, x, v, 1.0).determinant());
    return 1.0 / std::sqrt(rho);
  };
  // flux F^i = sqrt(g) g^{ij} d_j h
  auto flux = [&](const Vec& z, int i) {
    double x;
    Vec v;
    split(z, x, v);
    Mat g = coordinate_metric(model, x, v);
    Mat ginv = g.inverse();
    double sg = std::sqrt(g.determinant());
    double f = 0;
    for (int j = 0; j < n; ++j) {
      if (ginv(i, j) == 0.0) continue;
      Vec zp = z, zm = z;
      zp(j) += h;
      zm(j) -= h;
      f += ginv(i, j) * (hval(zp) - hval(zm)) / (2 * h);
    }
    return sg * f;
  };
  double div = 0;
  for (int i = 0; i < n; ++i) {
    Vec yp = y, ym = y;
    yp(i) += h;
    ym(i) -= h;
    div += (flux(yp, i) - flux(ym, i)) / (2 * h);
  }
  double x;
  Vec v;
  split(y, x, v);
  double sg = std::sqrt(coordinate_metric(model, x, v).determinant());
  double lap_pos = -div / sg;
  return lap_pos / hval(y);
}

double potential_U(const SubmanifoldModel& model, const TubePoint& p, double h) {
  if (auto c = model.as<CircleInPlane>()) {
    double r = c->radius + p.eps * p.w(0);
    if (r <= 1e-12 * c->radius) throw FocalRadiusExceeded("tube point beyond the focal radius");
    return -0.25 / (r * r);
  }
  return potential_U_fd(model, p, h);
}

// -------------------------------------------------------------- embedding

FlatEmbedding::FlatEmbedding(const SubmanifoldModel& model, int steps) {
  if (auto c = model.as<CircleInPlane>()) {
    dim_ = 2;
    radius_ = c->radius;
    length_ = 2 * kPi;
    return;
  }
  auto c = model.as<CurveInSpace>();
  if (!c) throw NotSupported("embedding needs a flat ambient model");
  dim_ = 3;
  length_ = c->length;
  ds_ = length_ / steps;
  nodes_.resize(steps + 1);
  kappa_.resize(steps + 1);
  tau_.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    kappa_[i] = c->curvature(i * ds_);
    tau_[i] = c->torsion(i * ds_);
  }
  using V3 = Eigen::Vector3d;
  struct State {
    V3 p, T, N, B;
  };
  auto rhs = [&](double s, const State& y) {
    double k = c->curvature(s), t = c->torsion(s);
    return State{y.T, k * y.N, -k * y.T + t * y.B, -t * y.N};
  };
  auto axpy = [](const State& y, double a, const State& d) {
    return State{y.p + a * d.p, y.T + a * d.T, y.N + a * d.N, y.B + a * d.B};
  };
  State y{V3::Zero(), V3::UnitX(), V3::UnitY(), V3::UnitZ()};
  nodes_[0] = {y.p, y.T, y.N, y.B};
  for (int i = 0; i < steps; ++i) {
    double s = i * ds_;
    State k1 = rhs(s, y);
    State k2 = rhs(s + ds_ / 2, axpy(y, ds_ / 2, k1));
    State k3 = rhs(s + ds_ / 2, axpy(y, ds_ / 2, k2));
    State k4 = rhs(s + ds_, axpy(y, ds_, k3));
    y.p += ds_ / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    y.T += ds_ / 6 * (k1.T + 2 * k2.T + 2 * k3.T + k4.T);
    y.N += ds_ / 6 * (k1.N + 2 * k2.N + 2 * k3.N + k4.N);
    y.B += ds_ / 6 * (k1.B + 2 * k2.B + 2 * k3.B + k4.B);
    nodes_[i + 1] = {y.p, y.T, y.N, y.B};
  }
  const Node& a = nodes_.front();
  const Node& b = nodes_.back();
  closure_error_ = std::max({(a.pos - b.pos).norm(), (a.T - b.T).norm(),
                             (a.N - b.N).norm(), (a.B - b.B).norm()});
  if (closure_error_ > 1e-6 * std::max(1.0, length_))
    throw InvalidArgument("curve data does not close up in space");
}

void FlatEmbedding::frame_at(double s, Eigen::Vector3d& pos, Eigen::Vector3d& T,
                             Eigen::Vector3d& N, Eigen::Vector3d& B) const {
  s = wrap(s, length_);
  const int steps = static_cast<int>(nodes_.size()) - 1;
  int i = std::min(static_cast<int>(s / ds_), steps - 1);
  double t = s / ds_ - i;
  double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  const Node& a = nodes_[i];
  const Node& b = nodes_[i + 1];
  auto herm = [&](const Eigen::Vector3d& va, const Eigen::Vector3d& da,
                  const Eigen::Vector3d& vb, const Eigen::Vector3d& db) {
    return Eigen::Vector3d(h00 * va + h10 * ds_ * da + h01 * vb + h11 * ds_ * db);
  };
  pos = herm(a.pos, a.T, b.pos, b.T);
  T = herm(a.T, kappa_[i] * a.N, b.T, kappa_[i + 1] * b.N);
  N = herm(a.N, -kappa_[i] * a.T + tau_[i] * a.B, b.N,
           -kappa_[i + 1] * b.T + tau_[i + 1] * b.B);
  B = herm(a.B, -tau_[i] * a.N, b.B, -tau_[i + 1] * b.N);
}

Vec FlatEmbedding::ambient(double x, const Vec& v) const {
  if (dim_ == 2) {
    double r = radius_ + v(0);
    return Eigen::Vector2d(r * std::cos(x), r * std::sin(x));
  }
  Eigen::Vector3d p, T, N, B;
  frame_at(x, p, T, N, B);
  return p + v(0) * N + v(1) * B;
}

std::pair<double, Vec> FlatEmbedding::fermi(const Vec& X, double x_guess) const {
  if (dim_ == 2) {
    double th = std::atan2(X(1), X(0));
    if (th < 0) th += 2 * kPi;
    return {th, Vec::Constant(1, X.head<2>().norm() - radius_)};
  }
  double s = x_guess;
  Eigen::Vector3d p, T, N, B;
  const Eigen::Vector3d Y = X.head<3>();
  for (int it = 0; it < 30; ++it) {
    frame_at(s, p, T, N, B);
    Eigen::Vector3d d = Y - p;
    double k = kappa_[std::min(static_cast<int>(wrap(s, length_) / ds_),
                               static_cast<int>(kappa_.size()) - 1)];
    double g = d.dot(T);
    double dg = -1.0 + k * d.dot(N);
    double step = g / dg;
    s -= step;
    if (std::abs(step) < 1e-13 * std::max(1.0, length_)) break;
  }
  s = wrap(s, length_);
  frame_at(s, p, T, N, B);
  Eigen::Vector3d d = Y - p;
  Vec v(2);
  v << d.dot(N), d.dot(B);
  return {s, v};
}

}  // namespace tubelab
