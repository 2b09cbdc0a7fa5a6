// Independent reference implementations used as test oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "qlds/numerics.hpp"
#include "qlds/rng.hpp"
#include "qlds/theory.hpp"

namespace oracle {

using qlds::Mat;
using qlds::Vec;

/// Gaussian elimination with partial pivoting on plain arrays.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

inline Vec gauss_solve(const Mat& a, const Vec& b) {
  std::vector<std::vector<double>> aa(static_cast<std::size_t>(a.rows()), std::vector<double>(static_cast<std::size_t>(a.cols())));
  std::vector<double> bb(static_cast<std::size_t>(b.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    bb[static_cast<std::size_t>(i)] = b(i);
    for (Eigen::Index j = 0; j < a.cols(); ++j) aa[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a(i, j);
  }
  const auto x = gauss_solve(aa, bb);
  return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
}

/// Cyclic Jacobi rotations; returns eigenvalues in ascending order.
inline std::vector<double> jacobi_eigenvalues(Mat a, int sweeps = 100) {
  const Eigen::Index n = a.rows();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline double jacobi_max(const Mat& a) { return jacobi_eigenvalues(a).back(); }

inline Mat random_matrix(qlds::SplitMix64& g, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g.normal();
  return m;
}

inline Mat random_symmetric(qlds::SplitMix64& g, Eigen::Index n) {
  Mat m = random_matrix(g, n, n);
  return 0.5 * (m + m.transpose());
}

inline Mat random_spd(qlds::SplitMix64& g, Eigen::Index n) {
  Mat m = random_matrix(g, n, n);
  return m * m.transpose() + static_cast<double>(n) * 0.1 * Mat::Identity(n, n);
}

inline Vec random_vec(qlds::SplitMix64& g, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g.normal();
  return v;
}

/// Composite Simpson rule for (2/√π)∫₀ᶻ e^{−t²}dt.
inline double erf_quadrature(double z, int panels = 20000) {
  const double h = z / panels;
  auto f = [](double t) { return std::exp(-t * t); };
  double s = f(0) + f(z);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4 : 2) * f(k * h);
  return 2.0 / std::sqrt(M_PI) * s * h / 3.0;
}

/// Bisection for the root of g on [lo, hi] with g(lo), g(hi) of opposite sign.
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  double glo = g(lo);
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-16 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// δ(λ + κ₁ + κ₂) − 1 written out independently of the library.
inline double fixed_point_residual(const qlds::Proportions& p, const qlds::HyperParams& hp, double delta) {
  const double de = p.c0 * delta;
  double k = 0;
  for (int j = 0; j < 2; ++j) k += p.cl[j] * hp.alpha_l / (1 + hp.alpha_l * de) - p.cu[j] * hp.alpha_u / (1 - hp.alpha_u * de);
  return delta * (hp.lambda + k) - 1;
}

// First sign change of the residual on a fine scan, refined by bisection. NaN when there is none.
inline double bisection_delta(const qlds::Proportions& p, const qlds::HyperParams& hp) {
  const double hi = hp.alpha_u > 0 ? 1.0 / (hp.alpha_u * p.c0) : 10.0 / hp.lambda;
  auto g = [&](double x) { return fixed_point_residual(p, hp, x); };
  const int steps = 20000;
  double prev = 0;
  for (int k = 1; k < steps; ++k) {
    const double x = hi * k / steps;
    if (g(x) >= 0) return bisect(g, prev, x);
    prev = x;
  }
  return std::nan("");
}

}  // namespace oracle
