#include "tubelab/fiber.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tubelab/errors.hpp"
#include "tubelab/spectral.hpp"

namespace tubelab {

namespace {
constexpr double kPi = std::numbers::pi;
}

double FiberGrid::dphi() const { return 2 * kPi / n_angular; }

int FiberGrid::node(int ring, int k) const {
  k %= n_angular;
  if (k < 0) k += n_angular;
  return 1 + (ring - 1) * n_angular + k;
}

FiberGrid make_fiber_grid(int codim, int n, int n_angular) {
  FiberGrid g;
  g.codim = codim;
  g.n = n;
  if (n < 1) throw InvalidArgument("fiber grid needs at least one interior node");
  if (codim == 1) {
    g.h = 2.0 / (n + 1);
    g.weights = Vec::Constant(n, g.h);
    for (int j = 1; j <= n; ++j) g.points.push_back(Vec::Constant(1, -1.0 + j * g.h));
    g.boundary_weight = g.h;  // two half cells
    return g;
  }
  if (codim != 2) throw NotSupported("fiber grids exist for codimension 1 and 2 only");
  if (n_angular < 4) throw InvalidArgument("polar grid needs at least 4 angular nodes");
  g.n_angular = n_angular;
  g.h = 1.0 / (n + 1);
  const double dphi = g.dphi();
  g.weights.resize(1 + n * n_angular);
  g.weights(0) = kPi * g.h * g.h / 4;
  g.points.push_back(Vec::Zero(2));
  for (int a = 1; a <= n; ++a)
    for (int k = 0; k < n_angular; ++k) {
      double r = a * g.h;
      g.weights(g.node(a, k)) = r * g.h * dphi;
      Vec p(2);
      p << r * std::cos(k * dphi), r * std::sin(k * dphi);
      g.points.push_back(p);
    }
  double r_in = 1.0 - g.h / 2;
  g.boundary_weight = kPi * (1.0 - r_in * r_in);
  return g;
}

std::vector<FiberEdge> fiber_edges(const FiberGrid& g) {
  std::vector<FiberEdge> e;
  if (g.codim == 1) {
    for (int j = 0; j <= g.n; ++j) {
      FiberEdge x;
      x.a = j - 1;
      x.b = j < g.n ? j : -1;
      x.coef = 1.0 / g.h;
      x.area = g.h;
      x.midpoint = Vec::Constant(1, -1.0 + (j + 0.5) * g.h);
      x.direction = Vec::Ones(1);
      x.angular = false;
      e.push_back(std::move(x));
    }
    return e;
  }
  const double dphi = g.dphi();
  for (int k = 0; k < g.n_angular; ++k) {
    const double phi = k * dphi;
    Vec dir(2);
    dir << std::cos(phi), std::sin(phi);
    for (int a = 0; a <= g.n; ++a) {
      FiberEdge x;
      x.a = a == 0 ? 0 : g.node(a, k);
      x.b = a < g.n ? g.node(a + 1, k) : -1;
      const double rm = (a + 0.5) * g.h;
      x.coef = 1.0 / g.h;
      x.area = rm * dphi * g.h;
      x.midpoint = rm * dir;
      x.direction = dir;
      x.angular = false;
      e.push_back(std::move(x));
    }
  }
  for (int a = 1; a <= g.n; ++a) {
    const double r = a * g.h;
    for (int k = 0; k < g.n_angular; ++k) {
      const double phi = (k + 0.5) * dphi;
      FiberEdge x;
      x.a = g.node(a, k);
      x.b = g.node(a, k + 1);
      x.coef = 1.0 / (r * dphi);
      x.area = r * g.h * dphi;
      x.midpoint = Vec(2);
      x.midpoint << r * std::cos(phi), r * std::sin(phi);
      x.direction = Vec(2);
      x.direction << -std::sin(phi), std::cos(phi);
      x.angular = true;
      e.push_back(std::move(x));
    }
  }
  return e;
}

SpMat fiber_stiffness(const FiberGrid& g) {
  std::vector<Eigen::Triplet<double>> t;
  for (const auto& e : fiber_edges(g)) {
    const double c = e.area * e.coef * e.coef;
    if (e.a >= 0) t.emplace_back(e.a, e.a, c);
    if (e.b >= 0) t.emplace_back(e.b, e.b, c);
    if (e.a >= 0 && e.b >= 0) {
      t.emplace_back(e.a, e.b, -c);
      t.emplace_back(e.b, e.a, -c);
    }
  }
  SpMat K(g.size(), g.size());
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

Vec analytic_eigenvalues(int codim, int count) {
  Vec out(count);
  if (codim == 1) {
    for (int k = 0; k < count; ++k) out(k) = std::pow((k + 1) * kPi / 2, 2);
    return out;
  }
  if (codim != 2) throw NotSupported("analytic spectra for q = 1, 2 only");
  // collect every j_{m,n}^2 below a cap; Weyl's law (about lambda / 4 values
  // below lambda) sizes the first cap, which doubles until enough are found
  double cap = 4.0 * count + 40.0 * std::sqrt(count + 1.0) + 40.0;
  std::vector<double> v;
  for (;;) {
    v.clear();
    for (int m = 0; m * m < cap; ++m)
      for (int n = 1;; ++n) {
        const double j = boost::math::cyl_bessel_j_zero(double(m), n);
        if (j * j > cap) break;
        v.push_back(j * j);
        if (m > 0) v.push_back(j * j);
      }
    if (static_cast<int>(v.size()) >= count) break;
    cap *= 2;
  }
  std::sort(v.begin(), v.end());
  for (int k = 0; k < count; ++k) out(k) = v[k];
  return out;
}

FiberSpectrum fiber_spectrum(int codim, int n_modes, const FiberGrid& grid,
                             bool enforce_resolution) {
  if (codim != 1 && codim != 2) throw NotSupported("fiber spectra for q = 1, 2 only");
  if (grid.codim != codim) throw InvalidArgument("fiber grid codimension mismatch");
  if (n_modes < 2) throw InvalidArgument("need at least two fiber modes");
  const int n = grid.size();
  if (n_modes > n) throw ResolutionError("more modes requested than fiber unknowns");

  SpMat K = fiber_stiffness(grid);
  Vec isw = grid.weights.cwiseSqrt().cwiseInverse();
  SpMat B = isw.asDiagonal() * K * isw.asDiagonal();

  // Blocks keep their basis and eigenvectors; mode vectors are formed only
  // for the modes that are returned.
  struct Block {
    SpMat Q;
    SymmetricEigen e;
  };
  struct Mode {
    double value;
    int block, col;
    int m, radial, parity;
  };
  std::vector<Block> blocks;
  std::vector<Mode> modes;
  if (codim == 1) {
    // even and odd halves under s -> -s; the eigenvectors come out exactly
    // mirrored, which keeps parity arguments exact in floating point
    const int no = n / 2, ne = n - no;
    const double r = std::sqrt(0.5);
    for (int parity = 0; parity < 2; ++parity) {
      std::vector<Eigen::Triplet<double>> t;
      for (int i = 0; i < no; ++i) {
        t.emplace_back(i, i, r);
        t.emplace_back(n - 1 - i, i, parity ? -r : r);
      }
      if (parity == 0 && n % 2) t.emplace_back(no, no, 1.0);
      SpMat Q(n, parity ? no : ne);
      Q.setFromTriplets(t.begin(), t.end());
      if (Q.cols() == 0) continue;
      SpMat Qt = Q.transpose();
      Mat Bb = Mat(Qt * B * Q);
      const int id = static_cast<int>(blocks.size());
      blocks.push_back({std::move(Q), sym_eig(Bb)});
      const Vec& ev = blocks.back().e.values;
      for (int j = 0; j < ev.size(); ++j) modes.push_back({ev(j), id, j, 0, 2 * j + parity, parity});
    }
  } else {
    const int na = grid.n_angular, nr = grid.n;
    auto block_basis = [&](int m, int parity) {
      std::vector<Eigen::Triplet<double>> t;
      const int off = m == 0 ? 1 : 0;
      if (m == 0) t.emplace_back(0, 0, 1.0);
      for (int a = 1; a <= nr; ++a)
        for (int k = 0; k < na; ++k) {
          double c;
          if (m == 0) c = 1.0 / std::sqrt(double(na));
          else if (2 * m == na) c = (k % 2 ? -1.0 : 1.0) / std::sqrt(double(na));
          else if (parity == 0) c = std::sqrt(2.0 / na) * std::cos(m * k * grid.dphi());
          else c = std::sqrt(2.0 / na) * std::sin(m * k * grid.dphi());
          if (c != 0.0) t.emplace_back(grid.node(a, k), a - 1 + off, c);
        }
      SpMat Q(n, nr + off);
      Q.setFromTriplets(t.begin(), t.end());
      return Q;
    };
    for (int m = 0; 2 * m <= na; ++m) {
      for (int parity = 0; parity < 2; ++parity) {
        if (parity == 1 && (m == 0 || 2 * m == na)) continue;
        SpMat Q = block_basis(m, parity);
        SpMat Qt = Q.transpose();
        Mat Bb = Mat(Qt * B * Q);
        const int id = static_cast<int>(blocks.size());
        blocks.push_back({std::move(Q), sym_eig(Bb)});
        const Vec& ev = blocks.back().e.values;
        for (int j = 0; j < ev.size(); ++j) modes.push_back({ev(j), id, j, m, j, parity});
      }
    }
  }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const Mode& a, const Mode& b) { return a.value < b.value; });
  // inside a numerical multiplet order by angular index, cosine first
  for (size_t i = 0; i < modes.size();) {
    size_t e = i + 1;
    while (e < modes.size() &&
           modes[e].value - modes[e - 1].value <= kMultipletTol * std::abs(modes[e - 1].value))
      ++e;
    std::stable_sort(modes.begin() + i, modes.begin() + e, [](const Mode& a, const Mode& b) {
      return a.m != b.m ? a.m < b.m : a.parity < b.parity;
    });
    i = e;
  }

  int count = n_modes;
  while (count < n &&
         std::abs(modes[count].value - modes[count - 1].value) <=
             kMultipletTol * std::abs(modes[count - 1].value))
    ++count;

  for (int k = 0; enforce_resolution && k < count; ++k) {
    const Mode& md = modes[k];
    if (codim == 1 && 4 * (md.radial + 1) > grid.n + 1)
      throw ResolutionError("fiber grid too coarse for the requested modes");
    if (codim == 2 && (4 * md.m > grid.n_angular || 4 * (md.radial + 1) > grid.n + 1))
      throw ResolutionError("fiber grid too coarse for the requested modes");
  }

  FiberSpectrum s;
  s.codim = codim;
  s.grid = grid;
  s.eigenvalues.resize(count);
  s.eigenvectors.resize(n, count);
  for (int k = 0; k < count; ++k) {
    s.eigenvalues(k) = modes[k].value;
    const Block& bl = blocks[modes[k].block];
    Vec v = isw.asDiagonal() * (bl.Q * bl.e.vectors.col(modes[k].col));
    s.eigenvectors.col(k) = v;
    s.angular_order.push_back(modes[k].m);
    s.radial_order.push_back(modes[k].radial);
  }
  s.analytic_values = analytic_eigenvalues(codim, count);
  if (codim == 1) {
    s.analytic_vectors.resize(n, count);
    for (int k = 0; k < count; ++k)
      for (int j = 0; j < n; ++j)
        s.analytic_vectors(j, k) =
            std::sin((k + 1) * kPi * (grid.points[j](0) + 1) / 2);
    for (int k = 0; k < count; ++k) {
      double d = s.eigenvectors.col(k).dot(grid.weights.asDiagonal() * s.analytic_vectors.col(k));
      if (d < 0) s.eigenvectors.col(k) *= -1;
    }
  }
  if (s.eigenvectors.col(0).sum() < 0) s.eigenvectors.col(0) *= -1;
  // the ground state has one sign; clear roundoff-level negatives
  s.eigenvectors.col(0) = s.eigenvectors.col(0).cwiseMax(0.0);
  if (s.eigenvectors(0, 0) <= 0 && codim == 2)
    throw NumericalError("ground state is not positive at the origin");

  for (int k = 0; k < count;) {
    int e = k + 1;
    while (e < count && std::abs(s.eigenvalues(e) - s.eigenvalues(k)) <=
                            kMultipletTol * std::abs(s.eigenvalues(k)))
      ++e;
    s.multiplets.emplace_back(k, e);
    k = e;
  }
  if (s.multiplets.front().second != 1)
    throw NumericalError("discrete ground state is not simple");
  return s;
}

std::vector<SpMat> rotation_fields(const FiberGrid& g) {
  std::vector<SpMat> out;
  if (g.codim < 2) return out;
  std::vector<Eigen::Triplet<double>> t;
  const double c = 1.0 / (2 * g.dphi());
  for (int a = 1; a <= g.n; ++a)
    for (int k = 0; k < g.n_angular; ++k) {
      t.emplace_back(g.node(a, k), g.node(a, k + 1), c);
      t.emplace_back(g.node(a, k), g.node(a, k - 1), -c);
    }
  SpMat Z(g.size(), g.size());
  Z.setFromTriplets(t.begin(), t.end());
  out.push_back(std::move(Z));
  return out;
}

Vec ground_state_field(const FiberSpectrum& spec, int n_base) {
  return tensor_field(spec, 0, Vec::Ones(n_base));
}

Vec tensor_field(const FiberSpectrum& spec, int mode, const Vec& base) {
  const int nf = spec.grid.size();
  Vec f(base.size() * nf);
  const Vec phi = spec.eigenvectors.col(mode);
  for (int b = 0; b < base.size(); ++b) f.segment(b * nf, nf) = base(b) * phi;
  return f;
}

Vec extract_fb(const FiberSpectrum& spec, const Vec& f) {
  const int nf = spec.grid.size();
  if (f.size() % nf) throw InvalidArgument("field size does not match the fiber grid");
  const int nb = static_cast<int>(f.size() / nf);
  const Vec wphi = spec.grid.weights.cwiseProduct(spec.eigenvectors.col(0));
  Vec fb(nb);
  if (spec.codim == 1) {
    // mirrored pairs first: an exactly odd fiber profile integrates to 0
    for (int b = 0; b < nb; ++b) {
      const double* x = f.data() + static_cast<std::ptrdiff_t>(b) * nf;
      double acc = nf % 2 ? wphi(nf / 2) * x[nf / 2] : 0.0;
      for (int i = 0; i < nf / 2; ++i)
        acc += wphi(i) * x[i] + wphi(nf - 1 - i) * x[nf - 1 - i];
      fb(b) = acc;
    }
    return fb;
  }
  for (int b = 0; b < nb; ++b) fb(b) = wphi.dot(f.segment(b * nf, nf));
  return fb;
}

Vec project_E0(const FiberSpectrum& spec, const Vec& f) {
  return tensor_field(spec, 0, extract_fb(spec, f));
}

Vec project_multiplet(const FiberSpectrum& spec, int multiplet, const Vec& f) {
  const int nf = spec.grid.size();
  if (f.size() % nf) throw InvalidArgument("field size does not match the fiber grid");
  const int nb = static_cast<int>(f.size() / nf);
  auto [lo, hi] = spec.multiplets.at(multiplet);
  const Mat P = spec.eigenvectors.middleCols(lo, hi - lo);
  const Mat WP = spec.grid.weights.asDiagonal() * P;
  Vec out(f.size());
  for (int b = 0; b < nb; ++b) out.segment(b * nf, nf) = P * (WP.transpose() * f.segment(b * nf, nf));
  return out;
}

}  // namespace tubelab
