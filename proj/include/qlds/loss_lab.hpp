#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/parallel.hpp"
#include "qlds/solver.hpp"

namespace qlds {

enum class LabeledLoss { square, hinge_surrogate, log_loss };
enum class UnlabeledLoss { quadratic_margin, exp_surrogate };

inline std::string to_string(LabeledLoss l) {
  switch (l) {
    case LabeledLoss::square: return "square";
    case LabeledLoss::hinge_surrogate: return "hinge_surrogate";
    case LabeledLoss::log_loss: return "log_loss";
  }
  return "square";
}

inline std::string to_string(UnlabeledLoss u) {
  return u == UnlabeledLoss::quadratic_margin ? "quadratic_margin" : "exp_surrogate";
}

struct LossSpec {
  LabeledLoss labeled = LabeledLoss::square;
  UnlabeledLoss unlabeled = UnlabeledLoss::quadratic_margin;
  double gamma = 20.0;
  double exp_coef = 3.0;

  std::string name() const { return to_string(labeled) + "+" + to_string(unlabeled); }

  void validate() const {
    if (!(gamma > 0)) fail(ErrorKind::InvalidArgument, "gamma must be positive");
    if (!(exp_coef > 0)) fail(ErrorKind::InvalidArgument, "exp_coef must be positive");
  }

  static std::vector<LossSpec> all() {
    std::vector<LossSpec> v;
    for (auto l : {LabeledLoss::square, LabeledLoss::hinge_surrogate, LabeledLoss::log_loss})
      for (auto u : {UnlabeledLoss::quadratic_margin, UnlabeledLoss::exp_surrogate}) v.push_back({l, u, 20.0, 3.0});
    return v;
  }
};

struct OptimConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
  int epochs = 2000;
  std::uint64_t seed = 0;  ///< recorded only; full-batch training from zero is deterministic

  void validate() const {
    if (!(learning_rate > 0) || !(weight_decay >= 0) || !(epsilon_hat > 0))
      fail(ErrorKind::InvalidArgument, "optimizer rates must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail(ErrorKind::InvalidArgument, "moment decays must lie in [0,1)");
    if (epochs < 0) fail(ErrorKind::InvalidArgument, "epochs must be nonnegative");
  }
};

namespace detail {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// 1/(1 + exp(-x)) without overflow.
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Margins ωᵀx/√n of labeled and unlabeled columns, computed once per dataset.
class LossProblem {
 public:
  explicit LossProblem(const Dataset& ds)
      : xl_(ds.labeled_features()), xu_(ds.unlabeled_features()), y_(ds.labeled_targets()),
        inv_sqrt_n_(1.0 / std::sqrt(static_cast<double>(ds.n()))) {}

  Index dim() const { return static_cast<Index>(xl_.rows()); }

  double value_and_gradient(const LossSpec& spec, const HyperParams& hp, const Vec& w, Vec* grad) const {
    if (w.size() != xl_.rows()) fail(ErrorKind::DimensionMismatch, "omega has the wrong dimension");
    const Vec ml = xl_.transpose() * w * inv_sqrt_n_;
    const Vec mu = xu_.transpose() * w * inv_sqrt_n_;
    Vec gl(ml.size()), gu(mu.size());
    double lab = 0, unl = 0;
    for (Eigen::Index i = 0; i < ml.size(); ++i) {
      const double y = y_(i), m = ml(i);
      switch (spec.labeled) {
        case LabeledLoss::square:
          lab += 0.5 * (y - m) * (y - m);
          gl(i) = m - y;
          break;
        case LabeledLoss::hinge_surrogate: {
          const double z = spec.gamma * (1.0 - y * m);
          lab += detail::softplus(z) / spec.gamma;
          gl(i) = -y * detail::sigmoid(z);
          break;
        }
        case LabeledLoss::log_loss:
          lab += detail::softplus(-y * m);
          gl(i) = -y * detail::sigmoid(-y * m);
          break;
      }
    }
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double m = mu(i);
      if (spec.unlabeled == UnlabeledLoss::quadratic_margin) {
        unl += -0.5 * m * m;
        gu(i) = -m;
      } else {
        const double e = std::exp(-spec.exp_coef * m * m);
        unl += e;
        gu(i) = -2.0 * spec.exp_coef * m * e;
      }
    }
    if (grad) *grad = (hp.alpha_l * (xl_ * gl) + hp.alpha_u * (xu_ * gu)) * inv_sqrt_n_ + hp.lambda * w;
    return hp.alpha_l * lab + hp.alpha_u * unl + 0.5 * hp.lambda * w.squaredNorm();
  }

 private:
  Mat xl_, xu_;
  Vec y_;
  double inv_sqrt_n_;
};

/**
 * value = α_ℓ Σ L(y_i, m_i) + α_u Σ U(m_i) + (λ/2)‖ω‖² with m = ωᵀx/√n,
 * and its exact gradient in ω.
 */
inline std::pair<double, Vec> loss_and_gradient(const LossSpec& spec, const HyperParams& hp, const Dataset& ds, const Vec& omega) {
  spec.validate();
  Vec g;
  const double v = LossProblem(ds).value_and_gradient(spec, hp, omega, &g);
  return {v, std::move(g)};
}

struct TrainTrace {
  std::vector<double> loss;  ///< objective (without weight decay) before each step and after the last
};

/// Full-batch Adam from ω = 0. Weight decay enters as an additive wd·ω gradient term.
inline LinearModel train(const LossSpec& spec, const HyperParams& hp, const Dataset& ds, const OptimConfig& cfg = {},
                         TrainTrace* trace = nullptr) {
  spec.validate();
  cfg.validate();
  const LossProblem prob(ds);
  const auto d = static_cast<Eigen::Index>(prob.dim());
  Vec w = Vec::Zero(d), m = Vec::Zero(d), v = Vec::Zero(d), g(d);
  double b1t = 1.0, b2t = 1.0;
  for (int t = 1; t <= cfg.epochs; ++t) {
    const double f = prob.value_and_gradient(spec, hp, w, &g);
    if (!std::isfinite(f) || !g.allFinite()) fail(ErrorKind::DivergenceDetected, "loss became non-finite at epoch " + std::to_string(t));
    if (trace) trace->loss.push_back(f);
    g += cfg.weight_decay * w;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double lr_t = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    w.array() -= lr_t * m.array() / (v.array().sqrt() + cfg.epsilon_hat * std::sqrt(1.0 - b2t));
  }
  const double f = prob.value_and_gradient(spec, hp, w, nullptr);
  if (!std::isfinite(f) || !w.allFinite()) fail(ErrorKind::DivergenceDetected, "loss became non-finite");
  if (trace) trace->loss.push_back(f);
  return {w, ds.n(), hp, std::nullopt};
}

struct LossGridPoint {
  double alpha_l, alpha_u, lambda;
};

struct LossReportRow {
  std::string spec;
  double alpha_l = 0, alpha_u = 0, lambda = 0;
  double oracle_error = 1.0;
  int diverged = 0;
};

/// For each spec, trains at every grid point and keeps the point with the lowest transductive error.
inline std::vector<LossReportRow> loss_grid_oracle_compare(const Dataset& ds, const std::vector<LossSpec>& specs,
                                                           const std::vector<LossGridPoint>& grid, const OptimConfig& cfg = {},
                                                           unsigned jobs = 1) {
  if (!ds.true_unlabeled_labels) fail(ErrorKind::MissingTruth, "oracle comparison needs unlabeled ground truth");
  if (grid.empty()) fail(ErrorKind::InvalidArgument, "empty grid");
  const std::size_t S = specs.size(), T = grid.size();
  std::vector<double> err(S * T, std::numeric_limits<double>::infinity());
  parallel_for(S * T, jobs, [&](std::size_t k) {
    const auto& s = specs[k / T];
    const auto& p = grid[k % T];
    try {
      err[k] = transductive_error(train(s, {p.alpha_l, p.alpha_u, p.lambda, 0.0}, ds, cfg), ds);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DivergenceDetected) throw;
    }
  });
  std::vector<LossReportRow> rows;
  for (std::size_t s = 0; s < S; ++s) {
    LossReportRow r;
    r.spec = specs[s].name();
    std::size_t best = T;
    for (std::size_t t = 0; t < T; ++t) {
      const double e = err[s * T + t];
      if (!std::isfinite(e)) ++r.diverged;
      else if (best == T || e < err[s * T + best]) best = t;
    }
    if (best < T) {
      r.alpha_l = grid[best].alpha_l;
      r.alpha_u = grid[best].alpha_u;
      r.lambda = grid[best].lambda;
      r.oracle_error = err[s * T + best];
    } else {
      r.oracle_error = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace qlds
