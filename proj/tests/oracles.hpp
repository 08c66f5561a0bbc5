#pragma once

// Reference values computed from scratch, sharing no code with the library.

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// J_m(x) from its power series, summed in long double. Fine for x < 30.
inline long double bessel_j(int m, long double x) {
  long double term = 1;
  for (int k = 1; k <= m; ++k) term *= x / (2 * k);
  long double sum = term;
  const long double q = -x * x / 4;
  for (int k = 1; k < 200; ++k) {
    term *= q / (k * static_cast<long double>(k + m));
    sum += term;
    if (std::abs(term) < 1e-22L * std::abs(sum) && k > x) break;
  }
  return sum;
}

// n-th positive zero of J_m: scan for sign changes, then bisect.
inline double bessel_zero(int m, int n) {
  long double a = m + 0.5L, fa = bessel_j(m, a);
  int found = 0;
  for (long double b = a + 0.01L;; b += 0.01L) {
    const long double fb = bessel_j(m, b);
    if ((fa < 0) != (fb < 0) && ++found == n) {
      long double lo = b - 0.01L, hi = b;
      for (int it = 0; it < 100; ++it) {
        const long double mid = (lo + hi) / 2;
        if ((bessel_j(m, lo) < 0) == (bessel_j(m, mid) < 0))
          lo = mid;
        else
          hi = mid;
      }
      return static_cast<double>((lo + hi) / 2);
    }
    fa = fb;
  }
}

// P(|B_s| < 1 for all s <= tau) for standard Brownian motion started at 0.
inline double interval_survival(double tau) {
  double s = 0;
  for (int k = 0; k < 200; ++k) {
    const double n = 2 * k + 1;
    s += (k % 2 ? -1.0 : 1.0) / n * std::exp(-n * n * pi * pi * tau / 8);
  }
  return 4 / pi * s;
}

// Flat Laplacian of rho^{-1/2} over rho^{-1/2} for a circle of radius R,
// worked by hand in polar coordinates: h = (r/R)^{-1/2},
// -(h'' + h'/r) / h = -1 / (4 r^2).
inline double circle_potential(double r) { return -0.25 / (r * r); }

// Periodic second difference symbol on n nodes with spacing dx.
inline double periodic_symbol(int k, double dx) {
  const double s = std::sin(k * dx / 2);
  return 4 * s * s / (dx * dx);
}

// Observed Richardson order from three errors at halving steps.
inline double richardson_order(double e_coarse, double e_mid, double e_fine) {
  return std::log2((e_coarse - e_mid) / (e_mid - e_fine));
}

}  // namespace oracle
