#include "tubelab/discretize.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>

#include "tubelab/errors.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Stencil = std::vector<std::pair<int, double>>;

TubePoint ProductGrid::point(int b, int j, double eps) const {
  return TubePoint{base_x(b), fiber.points[j], eps};
}

ProductGrid build_grid(const SubmanifoldModel& model, int n_base, int n_fiber,
                       int n_angular) {
  const int l = model.dim_base(), q = model.codim();
  if (l == 0) {
    if (n_base != 1) throw InvalidArgument("a point base needs exactly one base node");
  } else if (n_base < 8) {
    throw InvalidArgument("need at least 8 base nodes");
  }
  if (n_fiber < 8) throw InvalidArgument("need at least 8 fiber nodes");
  if (q > 2) throw NotSupported("fiber grids exist for codimension 1 and 2 only");
  ProductGrid g;
  g.model = std::make_shared<const SubmanifoldModel>(model);
  g.n_base = n_base;
  g.fiber = make_fiber_grid(q, n_fiber, n_angular);
  g.base_x = Vec::Zero(n_base);
  if (l == 1) {
    g.dx = model.period() / n_base;
    g.base_weight = model.speed() * g.dx;
    for (int b = 0; b < n_base; ++b) g.base_x(b) = b * g.dx;
  }
  const int nf = g.fiber.size();
  g.weights.resize(n_base * nf);
  for (int b = 0; b < n_base; ++b) g.weights.segment(b * nf, nf) = g.base_weight * g.fiber.weights;
  return g;
}

SpMat DiscreteOperator::symmetrized() const {
  Vec s = w.cwiseSqrt().cwiseInverse();
  SpMat B = s.asDiagonal() * K * s.asDiagonal();
  SpMat Bt = B.transpose();
  return 0.5 * (B + Bt);
}

namespace {

constexpr double kCrossTol = 1e-10;

void add_term(Triplets& t, double c, const Stencil& st) {
  if (c == 0.0) return;
  for (const auto& [i, a] : st)
    for (const auto& [j, b] : st) t.emplace_back(i, j, c * a * b);
}

DiscreteOperator finish(const ProductGrid& g, const Triplets& t, std::string prov,
                        std::optional<double> eps) {
  DiscreteOperator op;
  op.K.resize(g.size(), g.size());
  op.K.setFromTriplets(t.begin(), t.end());
  SpMat Kt = op.K.transpose();
  op.K = 0.5 * (op.K + Kt);
  op.K.prune(0.0);
  op.w = g.weights;
  op.provenance = std::move(prov);
  op.eps = eps;
  return op;
}

// Vertical part: sum over base nodes and fiber edges of
// area * c(b, edge) * (D f)^2.
template <class Coef>
void vertical_terms(const ProductGrid& g, Triplets& t, Coef coef) {
  const int nf = g.fiber_size();
  const auto edges = fiber_edges(g.fiber);
  for (int b = 0; b < g.n_base; ++b)
    for (const auto& e : edges) {
      const double c = coef(b, e);
      if (c == 0.0) continue;
      Stencil st;
      if (e.a >= 0) st.emplace_back(b * nf + e.a, -e.coef);
      if (e.b >= 0) st.emplace_back(b * nf + e.b, e.coef);
      add_term(t, g.base_weight * e.area * c, st);
    }
}

// Horizontal part: base edges (b, b+1) at every fiber node, with the
// normal-connection correction -tau Z averaged onto the edge.
template <class Coef>
void horizontal_terms(const ProductGrid& g, Triplets& t, Coef coef) {
  if (g.model->dim_base() == 0) return;
  const int nf = g.fiber_size(), nb = g.n_base;
  const double inv = 1.0 / g.base_weight;
  const auto Z = rotation_fields(g.fiber);
  SpMat Zt;
  if (!Z.empty()) Zt = Z[0].transpose();  // column j holds row j of Z
  for (int b = 0; b < nb; ++b) {
    const int b1 = (b + 1) % nb;
    const double xm = g.base_x(b) + 0.5 * g.dx;
    const double tau = Z.empty() ? 0.0 : g.model->normal_connection(xm);
    for (int j = 0; j < nf; ++j) {
      const double c = coef(b, j);
      if (c == 0.0) continue;
      Stencil st{{b1 * nf + j, inv}, {b * nf + j, -inv}};
      if (tau != 0.0) {
        for (SpMat::InnerIterator it(Zt, j); it; ++it) {
          st.emplace_back(b * nf + it.index(), -0.5 * tau * it.value());
          st.emplace_back(b1 * nf + it.index(), -0.5 * tau * it.value());
        }
      }
      add_term(t, g.base_weight * g.fiber.weights(j) * c, st);
    }
  }
}

Vec perpendicular(const Vec& d) {
  Vec p(2);
  p << -d(1), d(0);
  return p;
}

double directional(const Mat& G, const FiberEdge& e) {
  const double c = e.direction.dot(G * e.direction);
  if (G.rows() == 2) {
    const double x = e.direction.dot(G * perpendicular(e.direction));
    if (std::abs(x) > kCrossTol * G.cwiseAbs().maxCoeff())
      throw NotImplemented("cometric couples the two polar directions");
  }
  return c;
}

DiscreteOperator induced_form(const ProductGrid& g, double eps) {
  const SubmanifoldModel& m = *g.model;
  Triplets t;
  const auto edges = fiber_edges(g.fiber);
  auto check_cross = [&](const CometricAt& G) {
    if (G.cross.size() && G.cross.cwiseAbs().maxCoeff() >
                              kCrossTol * G.assembled().cwiseAbs().maxCoeff())
      throw NotImplemented("cometric couples horizontal and vertical directions");
  };
  vertical_terms(g, t, [&](int b, const FiberEdge& e) {
    CometricAt G = cometric(m, TubePoint{g.base_x(b), e.midpoint, eps}, MetricKind::Induced);
    check_cross(G);
    return directional(G.vertical, e);
  });
  horizontal_terms(g, t, [&](int b, int j) {
    CometricAt G = cometric(
        m, TubePoint{g.base_x(b) + 0.5 * g.dx, g.fiber.points[j], eps}, MetricKind::Induced);
    check_cross(G);
    return G.horizontal(0, 0);
  });
  return finish(g, t, "InducedEps", eps);
}

}  // namespace

DiscreteOperator assemble_form(const ProductGrid& g, FormKind which, double eps) {
  if (which == FormKind::InducedEps || which == FormKind::SasakiEps) {
    if (!(eps > 0 && eps <= 1)) throw InvalidArgument("epsilon must lie in (0, 1]");
  }
  Triplets t;
  switch (which) {
    case FormKind::V:
      vertical_terms(g, t, [](int, const FiberEdge&) { return 1.0; });
      return finish(g, t, "V", std::nullopt);
    case FormKind::H:
      horizontal_terms(g, t, [](int, int) { return 1.0; });
      return finish(g, t, "H", std::nullopt);
    case FormKind::Omega: {
      const SubmanifoldModel& m = *g.model;
      if (!m.flat_ambient()) {
        vertical_terms(g, t, [&](int b, const FiberEdge& e) {
          Mat C = -curvature_block(m, TubePoint{g.base_x(b), e.midpoint, 1.0}) / 3.0;
          return directional(C, e);
        });
      }
      return finish(g, t, "Omega", std::nullopt);
    }
    case FormKind::SasakiEps: {
      DiscreteOperator V = assemble_form(g, FormKind::V);
      DiscreteOperator H = assemble_form(g, FormKind::H);
      DiscreteOperator S = combine(1.0 / (eps * eps), V, 1.0, H, "SasakiEps");
      S.eps = eps;
      return S;
    }
    case FormKind::InducedEps:
      return induced_form(g, eps);
  }
  throw InvalidArgument("unknown form");
}

DiscreteOperator assemble_operator(const ProductGrid& g, OperatorKind which, double eps) {
  DiscreteOperator op;
  switch (which) {
    case OperatorKind::DeltaV:
      op = assemble_form(g, FormKind::V);
      op.provenance = "DeltaV";
      return op;
    case OperatorKind::DeltaH:
      op = assemble_form(g, FormKind::H);
      op.provenance = "DeltaH";
      return op;
    case OperatorKind::HSa:
      op = assemble_form(g, FormKind::SasakiEps, eps);
      op.provenance = "HSa";
      return op;
    case OperatorKind::H:
      op = assemble_form(g, FormKind::InducedEps, eps);
      op.provenance = "H";
      return op;
    case OperatorKind::P:
      if (g.model->codim() < 2) throw NotSupported("P exists only for codimension >= 2");
      op = assemble_form(g, FormKind::Omega);
      op.provenance = "P";
      return op;
  }
  throw InvalidArgument("unknown operator");
}

DiscreteOperator assemble_base_laplacian(const ProductGrid& g) {
  const int nb = g.n_base;
  DiscreteOperator op;
  op.w = Vec::Constant(nb, g.base_weight);
  op.provenance = "DeltaL";
  op.K.resize(nb, nb);
  if (g.model->dim_base() == 0) return op;
  Triplets t;
  const double inv = 1.0 / g.base_weight;
  for (int b = 0; b < nb; ++b)
    add_term(t, g.base_weight, {{(b + 1) % nb, inv}, {b, -inv}});
  op.K.setFromTriplets(t.begin(), t.end());
  return op;
}

DiscreteOperator renormalize(const DiscreteOperator& A, double lambda0, double eps) {
  if (!(eps > 0)) throw InvalidArgument("epsilon must be positive");
  DiscreteOperator out = A;
  SpMat D(A.size(), A.size());
  D.setIdentity();
  SpMat WD = A.w.asDiagonal() * D;
  out.K = A.K - (lambda0 / (eps * eps)) * WD;
  out.K.prune(0.0);
  out.provenance = A.provenance + "0";
  out.eps = eps;
  return out;
}

DiscreteOperator shifted(const DiscreteOperator& A, double alpha) {
  DiscreteOperator out = A;
  SpMat D(A.size(), A.size());
  D.setIdentity();
  SpMat WD = A.w.asDiagonal() * D;
  out.K = A.K + alpha * WD;
  out.provenance = A.provenance + "+alpha";
  return out;
}

DiscreteOperator combine(double a, const DiscreteOperator& A, double b,
                         const DiscreteOperator& B, std::string provenance) {
  if (A.size() != B.size() || A.w != B.w) throw InvalidArgument("operators live on different grids");
  DiscreteOperator out;
  out.K = a * A.K + b * B.K;
  out.w = A.w;
  out.provenance = std::move(provenance);
  return out;
}

DiscreteOperator residual_r_eps(const ProductGrid& g, double eps) {
  DiscreteOperator I = assemble_form(g, FormKind::InducedEps, eps);
  DiscreteOperator S = assemble_form(g, FormKind::SasakiEps, eps);
  DiscreteOperator O = assemble_form(g, FormKind::Omega);
  DiscreteOperator r;
  r.K = (I.K - S.K - O.K) / eps;
  r.w = g.weights;
  r.provenance = "r_eps";
  r.eps = eps;
  return r;
}

SobolevNorm::SobolevNorm(const ProductGrid& g)
    : V_(assemble_form(g, FormKind::V)), H_(assemble_form(g, FormKind::H)) {}

double SobolevNorm::squared(const Vec& f, int order) const {
  if (order < 0 || order > 2) throw NotSupported("Sobolev order above 2");
  const Vec& w = V_.w;
  double s = f.dot(w.cwiseProduct(f));
  if (order >= 1) s += V_.form(f) + H_.form(f);
  if (order == 2) {
    Vec lap = V_.apply(f) + H_.apply(f);
    s += lap.dot(w.cwiseProduct(lap));
  }
  return s;
}

double SobolevNorm::operator()(const Vec& f, int order) const {
  return std::sqrt(std::max(0.0, squared(f, order)));
}

double sobolev_norm(const ProductGrid& g, const Vec& f, int order) {
  if (order < 0 || order > 2) throw NotSupported("Sobolev order above 2");
  return SobolevNorm(g)(f, order);
}

double h1_operator_norm(const ProductGrid& g, const DiscreteOperator& A) {
  // power iteration for the largest |mu| in K v = mu M v, M the H1 Gram matrix
  SobolevNorm sn(g);
  SpMat M = sn.V().K + sn.H().K;
  for (int i = 0; i < M.rows(); ++i) M.coeffRef(i, i) += g.weights(i);
  Eigen::SimplicialLDLT<SpMat> solver(M);
  if (solver.info() != Eigen::Success) throw NumericalError("H1 Gram matrix factorization failed");
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Vec v(g.size());
  for (int i = 0; i < v.size(); ++i) v(i) = nd(rng);
  double mu = 0;
  for (int it = 0; it < 500; ++it) {
    Vec y = solver.solve(A.K * v);
    double norm = std::sqrt(y.dot(M * y));
    if (norm == 0) return 0;
    double next = norm / std::sqrt(v.dot(M * v));
    v = y / norm;
    if (it > 10 && std::abs(next - mu) <= 1e-10 * next) {
      mu = next;
      break;
    }
    mu = next;
  }
  return mu;
}

std::vector<Vec> random_test_fields(const ProductGrid& g, int count, std::uint64_t seed) {
  SobolevNorm sn(g);
  SpMat L = sn.V().K + sn.H().K;
  // Gershgorin bound on the weighted operator norm
  Vec rows = Vec::Zero(g.size());
  for (int k = 0; k < L.outerSize(); ++k)
    for (SpMat::InnerIterator it(L, k); it; ++it) rows(it.row()) += std::abs(it.value());
  double norm = rows.cwiseQuotient(g.weights).maxCoeff();
  SpMat A = L / norm;
  for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += g.weights(i);
  Eigen::SimplicialLDLT<SpMat> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("smoothing factorization failed");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Vec> out;
  for (int c = 0; c < count; ++c) {
    Vec x(g.size());
    for (int i = 0; i < x.size(); ++i) x(i) = nd(rng);
    Vec f = solver.solve(g.weights.cwiseProduct(x));
    f /= std::sqrt(f.dot(g.weights.cwiseProduct(f)));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Mat> symmetry_bases(const ProductGrid& g, bool fiber_rotations) {
  const FiberGrid& fg = g.fiber;
  const int nf = fg.size();
  std::vector<Mat> fiber_groups;
  if (fiber_rotations && fg.codim == 2) {
    const int na = fg.n_angular, nr = fg.n;
    for (int m = 0; 2 * m <= na; ++m) {
      const bool single = m == 0 || 2 * m == na;
      const int cols = (single ? 1 : 2) * nr + (m == 0 ? 1 : 0);
      Mat Q = Mat::Zero(nf, cols);
      int c0 = 0;
      if (m == 0) Q(0, c0++) = 1.0;
      for (int a = 1; a <= nr; ++a)
        for (int k = 0; k < na; ++k) {
          const double phi = m * k * fg.dphi();
          const int row = fg.node(a, k);
          if (single) {
            double v = m == 0 ? 1.0 : (k % 2 ? -1.0 : 1.0);
            Q(row, c0 + a - 1) = v / std::sqrt(double(na));
          } else {
            Q(row, c0 + a - 1) = std::sqrt(2.0 / na) * std::cos(phi);
            Q(row, c0 + nr + a - 1) = std::sqrt(2.0 / na) * std::sin(phi);
          }
        }
      fiber_groups.push_back(std::move(Q));
    }
  } else {
    fiber_groups.push_back(Mat::Identity(nf, nf));
  }
  std::vector<Mat> base_groups;
  if (g.n_base == 1) base_groups.push_back(Mat::Ones(1, 1));
  else base_groups = fourier_groups(g.n_base);

  std::vector<Mat> out;
  for (const Mat& Fb : base_groups)
    for (const Mat& Ff : fiber_groups) {
      Mat Q = Mat::Zero(g.size(), Fb.cols() * Ff.cols());
      for (int c1 = 0; c1 < Fb.cols(); ++c1)
        for (int b = 0; b < g.n_base; ++b) {
          const double v = Fb(b, c1);
          if (v == 0.0) continue;
          Q.block(b * nf, c1 * Ff.cols(), nf, Ff.cols()) = v * Ff;
        }
      out.push_back(std::move(Q));
    }
  return out;
}

}  // namespace tubelab
