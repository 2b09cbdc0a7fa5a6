#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/parallel.hpp"
#include "qlds/selection.hpp"
#include "qlds/solver.hpp"

namespace qlds {

struct SelfTrainConfig {
  /// Quantiles of |f| over the remaining unlabeled points, or absolute |f| cut-offs when `absolute` is set.
  std::vector<double> threshold_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  bool absolute = false;
  int max_rounds = 10;
  int inner_cv_folds = 5;
  LambdaPolicy lambda;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const {
    if (threshold_grid.empty()) fail(ErrorKind::InvalidArgument, "threshold grid is empty");
    if (max_rounds < 1) fail(ErrorKind::InvalidArgument, "max_rounds must be at least 1");
    if (inner_cv_folds < 2) fail(ErrorKind::InvalidArgument, "inner_cv_folds must be at least 2");
  }
};

struct SelfTrainRound {
  int round = 0;
  Index pool_size = 0;  ///< labeled plus pseudo-labeled points used for this round's fit
  double threshold_param = 0;
  double threshold = 0;  ///< resolved |f| cut-off
  double cv_error = 0;
  Index new_labels = 0;
};

struct SelfTrainResult {
  LinearModel model;
  std::vector<SelfTrainRound> history;
  std::vector<Index> pseudo_idx;  ///< sample indices in the order they were pseudo-labeled
  std::vector<int> pseudo_labels;
};

namespace detail {

inline double resolve_threshold(double param, bool absolute, std::vector<double> absf) {
  if (absolute) return param;
  if (absf.empty()) return std::numeric_limits<double>::infinity();
  std::sort(absf.begin(), absf.end());
  const double q = std::clamp(param, 0.0, 1.0);
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(absf.size() - 1)));
  return absf[k];
}

/// Sufficient statistics Σxxᵀ and Σyx of a labeled pool.
struct PoolSums {
  Mat s;
  Vec r;
};

inline Vec ridge_from_sums(const PoolSums& p, double lambda, double n) {
  SymMatrix a(p.s / n);
  return SymSolver(a.shifted(lambda)).solve(p.r / std::sqrt(n));
}

}  // namespace detail

/// Self-training around the least-squares classifier with frozen pseudo-labels.
inline SelfTrainResult self_train(const Dataset& ds, const SelfTrainConfig& cfg = {}) {
  cfg.validate();
  const auto sizes = ds.labeled_class_sizes();
  if (sizes[0] < 2 || sizes[1] < 2) fail(ErrorKind::InsufficientSamples, "self-training needs two labeled samples per class");
  const double lambda = cfg.lambda.resolve(ds);
  const HyperParams hp{1.0, 0.0, lambda, cfg.lambda.inflation};
  const double n = static_cast<double>(ds.n());
  const int K = static_cast<int>(std::min<Index>(static_cast<Index>(cfg.inner_cv_folds), std::min(sizes[0], sizes[1])));
  const auto fold = stratified_folds(ds.labels, K, cfg.seed);

  SelfTrainResult out;
  std::vector<char> taken(ds.n(), 0);
  for (Index i : ds.labeled_idx) taken[i] = 1;
  Dataset pool = ds;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const LinearModel model = fit_qlds(pool, hp);
    out.model = model;
    std::vector<Index> rest;
    for (Index u : ds.unlabeled_idx)
      if (!taken[u]) rest.push_back(u);
    SelfTrainRound rec;
    rec.round = round;
    rec.pool_size = pool.n_labeled();
    if (rest.empty()) {
      out.history.push_back(rec);
      break;
    }
    const Mat xr = ds.gather(rest);

    // Inner CV over the original labeled points picks the threshold parameter.
    std::size_t best = 0;
    std::vector<double> cv(cfg.threshold_grid.size(), 0.0);
    if (cfg.threshold_grid.size() > 1) {
      detail::PoolSums base{Mat::Zero(ds.features.rows(), ds.features.rows()), Vec::Zero(ds.features.rows())};
      const Mat xp = pool.labeled_features();
      base.s = xp * xp.transpose();
      base.r = xp * pool.labeled_targets();
      std::vector<std::vector<double>> err(static_cast<std::size_t>(K), std::vector<double>(cfg.threshold_grid.size()));
      parallel_for(static_cast<std::size_t>(K), cfg.jobs, [&](std::size_t k) {
        detail::PoolSums p = base;
        std::vector<Index> held;
        std::vector<int> hy;
        for (Index i = 0; i < ds.labeled_idx.size(); ++i)
          if (fold[i] == static_cast<int>(k)) {
            const auto x = ds.features.col(static_cast<Eigen::Index>(ds.labeled_idx[i]));
            p.s.noalias() -= x * x.transpose();
            p.r -= ds.labels[i] * x;
            held.push_back(ds.labeled_idx[i]);
            hy.push_back(ds.labels[i]);
          }
        const Mat hx = ds.gather(held);
        const Vec w = detail::ridge_from_sums(p, lambda, n);
        const Vec f = xr.transpose() * w / std::sqrt(n);
        std::vector<double> absf(static_cast<std::size_t>(f.size()));
        for (Eigen::Index i = 0; i < f.size(); ++i) absf[static_cast<std::size_t>(i)] = std::abs(f(i));
        std::vector<std::size_t> order(absf.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return absf[a] > absf[b]; });
        // Visit thresholds from the strictest down so pseudo-label sums accumulate.
        std::vector<std::size_t> tord(cfg.threshold_grid.size());
        std::vector<double> thr(cfg.threshold_grid.size());
        for (std::size_t t = 0; t < thr.size(); ++t) thr[t] = detail::resolve_threshold(cfg.threshold_grid[t], cfg.absolute, absf);
        std::iota(tord.begin(), tord.end(), 0);
        std::stable_sort(tord.begin(), tord.end(), [&](std::size_t a, std::size_t b) { return thr[a] > thr[b]; });
        std::size_t pos = 0;
        for (std::size_t t : tord) {
          while (pos < order.size() && absf[order[pos]] >= thr[t]) {
            const auto i = static_cast<Eigen::Index>(order[pos]);
            const auto x = xr.col(i);
            p.s.noalias() += x * x.transpose();
            p.r += (f(i) < 0 ? -1.0 : 1.0) * x;
            ++pos;
          }
          const Vec wt = detail::ridge_from_sums(p, lambda, n);
          LinearModel m{wt, ds.n(), hp, std::nullopt};
          err[k][t] = error_rate(predict(m, hx), hy);
        }
      });
      for (std::size_t t = 0; t < cv.size(); ++t) {
        for (int k = 0; k < K; ++k) cv[t] += err[static_cast<std::size_t>(k)][t];
        cv[t] /= K;
        if (cv[t] < cv[best]) best = t;
      }
    }

    const Vec f = decision_scores(model, xr);
    std::vector<double> absf(static_cast<std::size_t>(f.size()));
    for (Eigen::Index i = 0; i < f.size(); ++i) absf[static_cast<std::size_t>(i)] = std::abs(f(i));
    rec.threshold_param = cfg.threshold_grid[best];
    rec.threshold = detail::resolve_threshold(rec.threshold_param, cfg.absolute, absf);
    rec.cv_error = cv[best];
    for (Index k = 0; k < rest.size(); ++k)
      if (absf[k] >= rec.threshold) {
        const int y = f(static_cast<Eigen::Index>(k)) < 0 ? -1 : 1;
        taken[rest[k]] = 1;
        out.pseudo_idx.push_back(rest[k]);
        out.pseudo_labels.push_back(y);
        ++rec.new_labels;
      }
    out.history.push_back(rec);
    if (rec.new_labels == 0) break;

    // Rebuild the pool: original labels first, then pseudo-labels in assignment order.
    pool.labeled_idx = ds.labeled_idx;
    pool.labels = ds.labels;
    pool.labeled_idx.insert(pool.labeled_idx.end(), out.pseudo_idx.begin(), out.pseudo_idx.end());
    pool.labels.insert(pool.labels.end(), out.pseudo_labels.begin(), out.pseudo_labels.end());
    pool.unlabeled_idx.clear();
    for (Index u : ds.unlabeled_idx)
      if (!taken[u]) pool.unlabeled_idx.push_back(u);
    pool.true_unlabeled_labels.reset();
    if (round == cfg.max_rounds) out.model = fit_qlds(pool, hp);
  }
  return out;
}

}  // namespace qlds
