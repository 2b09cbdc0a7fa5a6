#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/parallel.hpp"
#include "qlds/rng.hpp"
#include "qlds/solver.hpp"
#include "qlds/theory.hpp"

namespace qlds {

struct GridPoint {
  double alpha_l = 0;
  double alpha_u = 0;
};

struct Grid {
  std::vector<GridPoint> points;

  /// {0, 1/(k-1), ..., 1}², α_ℓ outer, α_u inner.
  static Grid lattice(int k = 11) {
    Grid g;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        g.points.push_back({k > 1 ? i / static_cast<double>(k - 1) : 0.0, k > 1 ? j / static_cast<double>(k - 1) : 0.0});
    return g;
  }

  void validate() const {
    if (points.empty()) fail(ErrorKind::InvalidArgument, "grid is empty");
    for (const auto& p : points)
      if (!(p.alpha_l >= 0) || !(p.alpha_u >= 0)) fail(ErrorKind::InvalidArgument, "grid entries must be nonnegative");
  }
};

enum class SelectionMethod { theoretical, cross_validation, oracle, fixed };

inline std::string to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::theoretical: return "theoretical";
    case SelectionMethod::cross_validation: return "cross_validation";
    case SelectionMethod::oracle: return "oracle";
    case SelectionMethod::fixed: return "fixed";
  }
  return "theoretical";
}

struct LambdaPolicy {
  LambdaSource source = LambdaSource::whole;
  double inflation = 1e-3;
  std::optional<double> fixed;

  double resolve(const Dataset& ds) const { return fixed ? *fixed : default_lambda(ds, source, inflation); }
};

struct PointResult {
  GridPoint point;
  double criterion = std::numeric_limits<double>::infinity();
  std::string skip_reason;  ///< empty when evaluated
  std::optional<TheoryStats> theory;
};

struct SelectionResult {
  SelectionMethod method = SelectionMethod::theoretical;
  std::size_t chosen_index = 0;
  GridPoint chosen;
  double lambda = 0;
  std::vector<PointResult> per_point;
  double wall_clock_seconds = 0;
  long fits = 0;
  int folds_requested = 0;
  int folds_used = 0;
  TheoryVariant variant = TheoryVariant::standard;
};

struct SelectionOptions {
  LambdaPolicy lambda;
  bool assume_matched_proportions = true;
  TheoryVariant variant = TheoryVariant::standard;
  int folds = 10;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Argmin with earliest-index ties; throws AllPointsInvalid when nothing is finite.
inline void finish_selection(SelectionResult& r) {
  std::size_t best = r.per_point.size();
  for (std::size_t i = 0; i < r.per_point.size(); ++i) {
    const double c = r.per_point[i].criterion;
    if (std::isfinite(c) && (best == r.per_point.size() || c < r.per_point[best].criterion)) best = i;
  }
  if (best == r.per_point.size()) fail(ErrorKind::AllPointsInvalid, "every grid point was skipped");
  r.chosen_index = best;
  r.chosen = r.per_point[best].point;
}

inline HyperParams hp_at(const GridPoint& p, double lambda, double inflation) {
  return {p.alpha_l, p.alpha_u, lambda, inflation};
}

}  // namespace detail

/// Grid search on the predicted error ε*; no model is fitted.
inline SelectionResult select_theoretical(const Dataset& ds, const Grid& grid, const SelectionOptions& opt = {}) {
  grid.validate();
  const auto t0 = detail::Clock::now();
  const long fits0 = fit_counter().load();
  SelectionResult r;
  r.method = SelectionMethod::theoretical;
  r.variant = opt.variant;
  r.lambda = opt.lambda.resolve(ds);
  const TheoryEngine engine(ds, opt.assume_matched_proportions, opt.variant);
  const double lmax_u =
      ds.n_unlabeled() ? largest_eigenvalue(SymMatrix::gram(ds.unlabeled_features(), 1.0 / static_cast<double>(ds.n()))).value : 0.0;
  std::optional<QldsProblem> exact;  // built only if the cheap convexity test is inconclusive
  r.per_point.resize(grid.points.size());
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    auto& pr = r.per_point[i];
    pr.point = grid.points[i];
    const HyperParams hp = detail::hp_at(pr.point, r.lambda, opt.lambda.inflation);
    if (!(hp.lambda > hp.alpha_u * lmax_u * (1.0 + 1e-12))) {
      if (!exact) exact.emplace(ds);
      if (!(exact->convexity_margin(hp) > 0)) {
        pr.skip_reason = "NonConvex";
        continue;
      }
    }
    try {
      pr.theory = engine.evaluate(hp).stats;
      pr.criterion = pr.theory->eps_star;
    } catch (const Error& e) {
      pr.skip_reason = std::string(to_string(e.kind()));
    }
  }
  detail::finish_selection(r);
  r.fits = fit_counter().load() - fits0;
  r.wall_clock_seconds = detail::seconds_since(t0);
  return r;
}

/// Stratified fold assignment over labeled positions; returns fold id per labeled position.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  std::vector<int> fold(labels.size(), 0);
  SplitMix64 rng(seed);
  int offset = 0;
  for (int cls : {-1, 1}) {
    std::vector<Index> members;
    for (Index i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    rng.shuffle(members);
    for (Index k = 0; k < members.size(); ++k) fold[members[k]] = static_cast<int>((k + static_cast<Index>(offset)) % static_cast<Index>(folds));
    offset = static_cast<int>((members.size() + static_cast<Index>(offset)) % static_cast<Index>(folds));
  }
  return fold;
}

/// Training view for one fold: held-out labeled points are removed from the sample.
inline Dataset fold_training_set(const Dataset& ds, const std::vector<int>& fold, int k, Mat* held_x, std::vector<int>* held_y) {
  std::vector<Index> keep;
  Dataset tr;
  for (Index i = 0; i < ds.labeled_idx.size(); ++i) {
    if (fold[i] == k) {
      if (held_y) held_y->push_back(ds.labels[i]);
      continue;
    }
    keep.push_back(ds.labeled_idx[i]);
    tr.labels.push_back(ds.labels[i]);
  }
  const Index nl = keep.size();
  for (Index u : ds.unlabeled_idx) keep.push_back(u);
  tr.features = ds.gather(keep);
  for (Index i = 0; i < keep.size(); ++i) (i < nl ? tr.labeled_idx : tr.unlabeled_idx).push_back(i);
  if (held_x) {
    std::vector<Index> held;
    for (Index i = 0; i < ds.labeled_idx.size(); ++i)
      if (fold[i] == k) held.push_back(ds.labeled_idx[i]);
    *held_x = ds.gather(held);
  }
  return tr;
}

/// K-fold cross-validation on held-out labeled error.
inline SelectionResult select_cross_validation(const Dataset& ds, const Grid& grid, const SelectionOptions& opt = {}) {
  grid.validate();
  if (opt.folds < 2) fail(ErrorKind::InvalidArgument, "folds must be at least 2");
  const auto sizes = ds.labeled_class_sizes();
  const Index smallest = std::min(sizes[0], sizes[1]);
  if (smallest < 2) fail(ErrorKind::InsufficientSamples, "each class needs at least two labeled samples for cross-validation");
  const auto t0 = detail::Clock::now();
  const long fits0 = fit_counter().load();
  SelectionResult r;
  r.method = SelectionMethod::cross_validation;
  r.variant = opt.variant;
  r.folds_requested = opt.folds;
  r.folds_used = static_cast<int>(std::min<Index>(static_cast<Index>(opt.folds), smallest));
  r.lambda = opt.lambda.resolve(ds);
  const int K = r.folds_used;
  const auto fold = stratified_folds(ds.labels, K, opt.seed);
  const std::size_t T = grid.points.size();
  std::vector<std::vector<double>> err(static_cast<std::size_t>(K), std::vector<double>(T, 0.0));
  std::vector<std::vector<std::string>> why(static_cast<std::size_t>(K), std::vector<std::string>(T));
  parallel_for(static_cast<std::size_t>(K), opt.jobs, [&](std::size_t k) {
    Mat hx;
    std::vector<int> hy;
    const Dataset tr = fold_training_set(ds, fold, static_cast<int>(k), &hx, &hy);
    const QldsProblem prob(tr);
    const double lam = opt.lambda.resolve(tr);
    for (std::size_t t = 0; t < T; ++t) {
      try {
        const auto model = prob.fit(detail::hp_at(grid.points[t], lam, opt.lambda.inflation));
        err[k][t] = error_rate(predict(model, hx), hy);
      } catch (const Error& e) {
        err[k][t] = std::numeric_limits<double>::infinity();
        why[k][t] = std::string(to_string(e.kind()));
      }
    }
  });
  r.per_point.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto& pr = r.per_point[t];
    pr.point = grid.points[t];
    double s = 0;
    for (int k = 0; k < K; ++k) {
      s += err[static_cast<std::size_t>(k)][t];
      if (pr.skip_reason.empty()) pr.skip_reason = why[static_cast<std::size_t>(k)][t];
    }
    pr.criterion = pr.skip_reason.empty() ? s / K : std::numeric_limits<double>::infinity();
  }
  detail::finish_selection(r);
  r.fits = fit_counter().load() - fits0;
  r.wall_clock_seconds = detail::seconds_since(t0);
  return r;
}

/// Grid search on the true transductive error.
inline SelectionResult select_oracle(const Dataset& ds, const Grid& grid, const SelectionOptions& opt = {}) {
  grid.validate();
  if (!ds.true_unlabeled_labels) fail(ErrorKind::MissingTruth, "oracle selection needs unlabeled ground truth");
  const auto t0 = detail::Clock::now();
  const long fits0 = fit_counter().load();
  SelectionResult r;
  r.method = SelectionMethod::oracle;
  r.variant = opt.variant;
  r.lambda = opt.lambda.resolve(ds);
  const QldsProblem prob(ds);
  const Mat xu = ds.unlabeled_features();
  r.per_point.resize(grid.points.size());
  parallel_for(grid.points.size(), opt.jobs, [&](std::size_t i) {
    auto& pr = r.per_point[i];
    pr.point = grid.points[i];
    try {
      const auto model = prob.fit(detail::hp_at(pr.point, r.lambda, opt.lambda.inflation));
      pr.criterion = error_rate(predict(model, xu), *ds.true_unlabeled_labels);
    } catch (const Error& e) {
      pr.skip_reason = std::string(to_string(e.kind()));
    }
  });
  detail::finish_selection(r);
  r.fits = fit_counter().load() - fits0;
  r.wall_clock_seconds = detail::seconds_since(t0);
  return r;
}

/// Runs the selector and refits at the chosen point.
inline std::pair<LinearModel, SelectionResult> fit_with_selection(const Dataset& ds, SelectionMethod method, const Grid& grid,
                                                                  const SelectionOptions& opt = {}) {
  SelectionResult r;
  switch (method) {
    case SelectionMethod::theoretical: r = select_theoretical(ds, grid, opt); break;
    case SelectionMethod::cross_validation: r = select_cross_validation(ds, grid, opt); break;
    case SelectionMethod::oracle: r = select_oracle(ds, grid, opt); break;
    case SelectionMethod::fixed: {
      if (grid.points.size() != 1) fail(ErrorKind::InvalidArgument, "fixed selection takes a one-point grid");
      r.method = SelectionMethod::fixed;
      r.variant = opt.variant;
      r.lambda = opt.lambda.resolve(ds);
      r.per_point.push_back({grid.points[0], 0.0, {}, std::nullopt});
      r.chosen = grid.points[0];
      break;
    }
  }
  const auto t0 = detail::Clock::now();
  LinearModel m = fit_qlds(ds, detail::hp_at(r.chosen, r.lambda, opt.lambda.inflation));
  r.fits += 1;
  r.wall_clock_seconds += detail::seconds_since(t0);
  return {std::move(m), std::move(r)};
}

}  // namespace qlds
