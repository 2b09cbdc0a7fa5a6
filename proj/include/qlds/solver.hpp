#pragma once

#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/numerics.hpp"

namespace qlds {

struct HyperParams {
  double alpha_l = 1.0;
  double alpha_u = 0.0;
  double lambda = 1.0;
  double lambda_inflation = 1e-3;

  HyperParams scaled(double t) const { return {alpha_l * t, alpha_u * t, lambda * t, lambda_inflation}; }
};

struct LinearModel {
  Vec omega;
  Index n_train = 1;
  HyperParams hyper;
  std::optional<Vec> center;  ///< feature mean removed before fitting, if known
};

enum class LambdaSource { whole, unlabeled };

inline std::string to_string(LambdaSource s) { return s == LambdaSource::whole ? "whole" : "unlabeled"; }

/// Number of closed-form fits performed by this process.
inline std::atomic<long>& fit_counter() {
  static std::atomic<long> c{0};
  return c;
}

/**
 * Precomputed pieces of the closed-form solution for one dataset:
 * S_u = X_uX_uᵀ/n, S_ℓ = X_ℓX_ℓᵀ/n and b = X_ℓy_ℓ/√n.
 */
class QldsProblem {
 public:
  explicit QldsProblem(const Dataset& ds)
      : n_(ds.n()),
        d_(ds.dim()),
        su_(SymMatrix::gram(ds.unlabeled_features(), 1.0 / static_cast<double>(ds.n()))),
        sl_(SymMatrix::gram(ds.labeled_features(), 1.0 / static_cast<double>(ds.n()))) {
    if (ds.n() == 0) fail(ErrorKind::InsufficientSamples, "empty dataset");
    b_ = ds.labeled_features() * ds.labeled_targets() / std::sqrt(static_cast<double>(n_));
  }

  Index n() const { return n_; }
  Index dim() const { return d_; }
  const SymMatrix& unlabeled_gram() const { return su_; }
  const SymMatrix& labeled_gram() const { return sl_; }
  const Vec& rhs() const { return b_; }

  double unlabeled_lambda_max() const {
    if (!lmax_u_) lmax_u_ = d_ ? largest_eigenvalue(su_).value : 0.0;
    return *lmax_u_;
  }

  /// λ − λ_max(α_u S_u − α_ℓ S_ℓ).
  double convexity_margin(const HyperParams& hp) const {
    if (d_ == 0) return hp.lambda;
    return hp.lambda - largest_eigenvalue(hp.alpha_u * su_ - hp.alpha_l * sl_).value;
  }

  /// Cheap sufficient test λ > α_u λ_max(S_u); falls back to the exact margin.
  bool is_convex(const HyperParams& hp) const {
    if (hp.lambda > hp.alpha_u * unlabeled_lambda_max() * (1.0 + 1e-12)) return true;
    return convexity_margin(hp) > 0.0;
  }

  SymMatrix system(const HyperParams& hp) const {
    return (hp.alpha_l * sl_ - hp.alpha_u * su_).shifted(hp.lambda);
  }

  LinearModel fit(const HyperParams& hp) const {
    if (!(hp.lambda > 0)) fail(ErrorKind::InvalidArgument, "lambda must be positive");
    if (hp.alpha_l < 0 || hp.alpha_u < 0) fail(ErrorKind::InvalidArgument, "alpha values must be nonnegative");
    if (!is_convex(hp))
      fail(ErrorKind::NonConvex, "lambda " + std::to_string(hp.lambda) + " does not exceed the convexity threshold");
    ++fit_counter();
    LinearModel m;
    m.omega = d_ ? solve_linear(system(hp), b_) : Vec();
    m.n_train = n_;
    m.hyper = hp;
    return m;
  }

 private:
  Index n_, d_;
  SymMatrix su_, sl_;
  Vec b_;
  mutable std::optional<double> lmax_u_;
};

/// (1+inflation)·λ_max of X Xᵀ/n over the whole data or the unlabeled part only.
inline double default_lambda(const Dataset& ds, LambdaSource source = LambdaSource::whole, double inflation = 1e-3) {
  if (ds.n() == 0) fail(ErrorKind::InsufficientSamples, "empty dataset");
  const double inv_n = 1.0 / static_cast<double>(ds.n());
  double lmax;
  if (source == LambdaSource::whole) {
    lmax = largest_eigenvalue(SymMatrix::gram(ds.features, inv_n)).value;
  } else {
    if (ds.n_unlabeled() == 0) fail(ErrorKind::InsufficientSamples, "unlabeled lambda source needs n_u >= 1");
    lmax = largest_eigenvalue(SymMatrix::gram(ds.unlabeled_features(), inv_n)).value;
  }
  return (1.0 + inflation) * lmax;
}

inline double convexity_margin(const Dataset& ds, const HyperParams& hp) { return QldsProblem(ds).convexity_margin(hp); }

inline LinearModel fit_qlds(const Dataset& ds, const HyperParams& hp) {
  if (ds.n_labeled() == 0) fail(ErrorKind::InsufficientSamples, "no labeled samples");
  return QldsProblem(ds).fit(hp);
}

/// f(x) = ωᵀx/√n_train for every column of `points`.
inline Vec decision_scores(const LinearModel& model, const Mat& points) {
  if (points.rows() != model.omega.size())
    fail(ErrorKind::DimensionMismatch,
         "points have dimension " + std::to_string(points.rows()) + ", model has " + std::to_string(model.omega.size()));
  return points.transpose() * model.omega / std::sqrt(static_cast<double>(model.n_train));
}

/// −1 where f(x) < 0, +1 otherwise.
inline std::vector<int> labels_from_scores(const Vec& f) {
  std::vector<int> y(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i) y[static_cast<std::size_t>(i)] = f(i) < 0 ? -1 : 1;
  return y;
}

inline std::vector<int> predict(const LinearModel& model, const Mat& points) {
  return labels_from_scores(decision_scores(model, points));
}

inline double error_rate(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) fail(ErrorKind::DimensionMismatch, "prediction and truth lengths differ");
  if (truth.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += pred[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

/// Misclassification rate on the unlabeled part.
inline double transductive_error(const LinearModel& model, const Dataset& ds) {
  if (!ds.true_unlabeled_labels) fail(ErrorKind::MissingTruth, "dataset has no unlabeled ground truth");
  return error_rate(predict(model, ds.unlabeled_features()), *ds.true_unlabeled_labels);
}

}  // namespace qlds
