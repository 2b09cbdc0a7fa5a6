#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include <Eigen/Dense>

#include "qlds/error.hpp"

namespace qlds {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

/// Dense symmetric matrix. Construction averages A and Aᵀ so storage is exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Mat& a) : m_(a) {
    if (a.rows() != a.cols()) fail(ErrorKind::DimensionMismatch, "SymMatrix requires a square matrix");
    symmetrize();
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Mat::Identity(n, n)); }

  /// scale * X Xᵀ for a d×m matrix X.
  template <class Derived>
  static SymMatrix gram(const Eigen::MatrixBase<Derived>& x, double scale) {
    Mat g = Mat::Zero(x.rows(), x.rows());
    if (x.cols() > 0) g.template selfadjointView<Eigen::Lower>().rankUpdate(x.derived(), scale);
    g.template triangularView<Eigen::StrictlyUpper>() = g.transpose();
    SymMatrix s;
    s.m_ = std::move(g);
    return s;
  }

  Eigen::Index order() const { return m_.rows(); }
  const Mat& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  SymMatrix operator+(const SymMatrix& o) const { return raw(m_ + o.m_); }
  SymMatrix operator-(const SymMatrix& o) const { return raw(m_ - o.m_); }
  SymMatrix operator*(double t) const { return raw(m_ * t); }
  friend SymMatrix operator*(double t, const SymMatrix& s) { return s * t; }

  SymMatrix shifted(double s) const {
    Mat m = m_;
    m.diagonal().array() += s;
    return raw(std::move(m));
  }

 private:
  static SymMatrix raw(Mat m) {
    SymMatrix s;
    s.m_ = std::move(m);
    return s;
  }

  void symmetrize() {
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m_.cols(); ++j) {
        const double v = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
  }

  Mat m_;
};

// ---------------------------------------------------------------------------
// Linear solves
// ---------------------------------------------------------------------------

inline constexpr double kPivotRelTol = 1e-12;
inline constexpr double kSolveResidualTol = 1e-10;

/// Factorization of a symmetric matrix, reusable for several right-hand sides.
class SymSolver {
 public:
  explicit SymSolver(const SymMatrix& a) : a_(a.matrix()), ldlt_(a.matrix()) {
    const double amax = a_.size() ? a_.cwiseAbs().maxCoeff() : 0.0;
    if (a_.rows() == 0) return;
    if (amax == 0.0 || ldlt_.info() != Eigen::Success)
      fail(ErrorKind::SingularMatrix, "zero or non-factorizable matrix");
    const double floor = kPivotRelTol * amax;
    const auto& dvec = ldlt_.vectorD();
    for (Eigen::Index i = 0; i < dvec.size(); ++i)
      if (!(std::abs(dvec(i)) >= floor))
        fail(ErrorKind::SingularMatrix, "pivot " + std::to_string(i) + " below 1e-12 * max|A|");
  }

  Vec solve(const Vec& b) const {
    if (b.size() != a_.rows()) fail(ErrorKind::DimensionMismatch, "rhs length differs from matrix order");
    Vec x = ldlt_.solve(b);
    const double bn = std::max(b.norm(), std::numeric_limits<double>::min());
    double rel = (a_ * x - b).norm() / bn;
    for (int it = 0; it < 5 && rel > kSolveResidualTol * 1e-2; ++it) {
      Vec r = b - a_ * x;
      x += ldlt_.solve(r);
      const double next = (a_ * x - b).norm() / bn;
      if (!(next < rel)) {
        rel = next;
        break;
      }
      rel = next;
    }
    if (!std::isfinite(rel) || rel > kSolveResidualTol)
      fail(ErrorKind::SingularMatrix, "relative residual " + std::to_string(rel) + " exceeds 1e-10");
    return x;
  }

 private:
  Mat a_;
  Eigen::LDLT<Mat> ldlt_;
};

inline Vec solve_linear(const SymMatrix& a, const Vec& b) { return SymSolver(a).solve(b); }

// ---------------------------------------------------------------------------
// Largest eigenvalue
// ---------------------------------------------------------------------------

struct EigenPair {
  double value = 0.0;
  Vec vector;
  int iterations = 0;
};

inline constexpr double kEigTol = 1e-10;
inline constexpr int kEigMaxIter = 10000;

/**
 * Largest (algebraic) eigenvalue of a symmetric matrix by shifted block power
 * iteration with Rayleigh-Ritz extraction. The shift is a Gershgorin lower
 * bound so A + sI is positive semidefinite and its dominant eigenvalue is
 * the top eigenvalue of A.
 */
inline EigenPair largest_eigenvalue(const SymMatrix& a, double tol = kEigTol, int max_iter = kEigMaxIter) {
  if (!(tol > 0)) fail(ErrorKind::InvalidArgument, "tol must be positive");
  const Mat& A = a.matrix();
  const Eigen::Index n = A.rows();
  if (n == 0) fail(ErrorKind::DimensionMismatch, "empty matrix");
  if (n == 1) return {A(0, 0), Vec::Ones(1), 0};

  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double radius = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    shift = std::max(shift, radius - A(i, i));
  }
  const Eigen::Index b = std::min<Eigen::Index>(n, 8);

  // Deterministic start: a unit ramp plus coordinate directions.
  Mat q(n, b);
  for (Eigen::Index i = 0; i < n; ++i) q(i, 0) = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  for (Eigen::Index j = 1; j < b; ++j)
    for (Eigen::Index i = 0; i < n; ++i) q(i, j) = std::cos(0.7 * static_cast<double>((i + 1) * (j + 1)));

  EigenPair out;
  double last_res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::HouseholderQR<Mat> qr(q);
    q = qr.householderQ() * Mat::Identity(n, b);
    Mat aq = A * q;
    Mat h = q.transpose() * aq;
    h = (0.5 * (h + h.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const Eigen::Index top = b - 1;
    const double mu = es.eigenvalues()(top);
    Vec v = q * es.eigenvectors().col(top);
    v.normalize();
    const double res = (A * v - mu * v).norm();
    last_res = res;
    if (res <= tol * std::max(std::abs(mu), std::numeric_limits<double>::min()) || res == 0.0) {
      out.value = mu;
      out.vector = std::move(v);
      out.iterations = it;
      return out;
    }
    q = (aq + shift * q) * es.eigenvectors();
  }
  fail(ErrorKind::NoConvergence,
       "largest_eigenvalue residual " + std::to_string(last_res) + " after " + std::to_string(max_iter) + " iterations");
}

// ---------------------------------------------------------------------------
// Error function
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kInvSqrtPi = 0.56418958354775628695;

// erf(z) = 2/sqrt(pi) exp(-z^2) sum_k 2^k z^(2k+1) / (1*3*...*(2k+1)); all terms positive.
inline double erf_series(double z) {
  const double z2 = z * z;
  double term = z;
  double sum = z;
  for (int k = 1; k < 500; ++k) {
    term *= 2.0 * z2 / (2.0 * k + 1.0);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return 2.0 * kInvSqrtPi * std::exp(-z2) * sum;
}

// erfc(z) for z >= 2 by modified Lentz on z + (1/2)/(z + 1/(z + (3/2)/(z + ...))).
inline double erfc_cf(double z) {
  constexpr double tiny = 1e-300;
  double f = z;
  double c = z;
  double d = 0.0;
  for (int k = 1; k < 2000; ++k) {
    const double ak = 0.5 * k;
    d = z + ak * d;
    if (d == 0.0) d = tiny;
    c = z + ak / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return kInvSqrtPi * std::exp(-z * z) / f;
}

}  // namespace detail

/// Gauss error function, absolute error below 1e-12 on all finite inputs.
inline double erf(double z) {
  if (std::isnan(z)) return z;
  const double az = std::abs(z);
  double r;
  if (az < 3.0)
    r = detail::erf_series(az);
  else if (az > 6.5)
    r = 1.0;
  else
    r = 1.0 - detail::erfc_cf(az);
  return z < 0 ? -r : r;
}

/// Complementary error function with relative accuracy in the upper tail.
inline double erfc(double z) {
  if (std::isnan(z)) return z;
  if (z < 2.0) return 1.0 - erf(z);
  if (z > 27.0) return 0.0;
  return detail::erfc_cf(z);
}

}  // namespace qlds
