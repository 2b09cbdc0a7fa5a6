#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/numerics.hpp"
#include "qlds/solver.hpp"

namespace qlds {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

/**
 * Formula set used for the score statistics.
 *
 * standard: resolvent trace δ̃ = c₀δ enters κ, a and the guards; the mean is
 *   K v/((1+α_ℓδ̃)(1−α_uδ̃)) with K = G(sI + D_κG)⁻¹, s = 1/δ, v = D_{c_ℓ}y, and
 *   the variance is the λ-derivative of the corresponding quadratic form.
 * legacy_plus / legacy_minus: the (D_κ⁻¹ + δG)⁻¹ closed form with δ
 *   unscaled by c₀, differing in the sign in front of aᵀd inside 𝓖.
 *   Kept for comparison; they disagree with simulation.
 */
enum class TheoryVariant { standard, legacy_plus, legacy_minus };

inline std::string to_string(TheoryVariant v) {
  switch (v) {
    case TheoryVariant::standard: return "standard";
    case TheoryVariant::legacy_plus: return "legacy-plus";
    case TheoryVariant::legacy_minus: return "legacy-minus";
  }
  return "standard";
}

inline TheoryVariant parse_theory_variant(const std::string& s) {
  if (s == "standard") return TheoryVariant::standard;
  if (s == "legacy-plus") return TheoryVariant::legacy_plus;
  if (s == "legacy-minus") return TheoryVariant::legacy_minus;
  fail(ErrorKind::InvalidArgument, "unknown theory variant '" + s + "'");
}

/// Limiting class proportions: c_ℓj = n_ℓj/n, c_uj = n_uj/n, c₀ = d/n.
struct Proportions {
  std::array<double, 2> cl{0, 0};
  std::array<double, 2> cu{0, 0};
  double c0 = 0;

  static Proportions from(const ClassCounts& c) {
    return {{c.cl(1), c.cl(2)}, {c.cu(1), c.cu(2)}, c.c0()};
  }

  Proportions swapped() const { return {{cl[1], cl[0]}, {cu[1], cu[0]}, c0}; }
};

struct FixedPoint {
  double delta = 0;
  double delta_eff = 0;  ///< δ̃, the argument of κ_j and a_j
  std::array<double, 2> kappa{0, 0};
  std::array<double, 2> a{0, 0};
  std::array<double, 2> d{0, 0};
  double residual = 0;
  int iterations = 0;
  TheoryVariant variant = TheoryVariant::standard;
};

struct GramEstimate {
  Mat2 mtm = Mat2::Zero();
  bool estimated = true;

  static GramEstimate exact(const Mat2& m) { return {0.5 * (m + m.transpose()), false}; }
  GramEstimate swapped() const {
    Mat2 s;
    s << mtm(1, 1), mtm(1, 0), mtm(0, 1), mtm(0, 0);
    return {s, estimated};
  }
};

struct TheoryStats {
  double m1 = 0, m2 = 0;
  double sigma2 = 0;
  double eps_star = 0.5;
};

inline constexpr double kFixedPointTol = 1e-12;
inline constexpr int kFixedPointMaxIter = 10000;

namespace detail {

struct KappaEval {
  std::array<double, 2> kappa, a;
  double sum_kappa, sum_a;
};

inline KappaEval kappa_at(const Proportions& p, const HyperParams& hp, double de) {
  KappaEval e{};
  const double pl = 1.0 + hp.alpha_l * de;
  const double pu = 1.0 - hp.alpha_u * de;
  for (int j = 0; j < 2; ++j) {
    e.kappa[j] = p.cl[j] * hp.alpha_l / pl - p.cu[j] * hp.alpha_u / pu;
    e.a[j] = p.cl[j] * hp.alpha_l * hp.alpha_l / (pl * pl) + p.cu[j] * hp.alpha_u * hp.alpha_u / (pu * pu);
  }
  e.sum_kappa = e.kappa[0] + e.kappa[1];
  e.sum_a = e.a[0] + e.a[1];
  return e;
}

inline bool in_domain(const HyperParams& hp, double de) {
  return de > 0 && 1.0 - hp.alpha_u * de > 0 && 1.0 + hp.alpha_l * de > 0;
}

}  // namespace detail

/**
 * Solves δ = 1/(λ + κ₁ + κ₂) by iteration from δ₀ = 1/λ, with Newton
 * polishing on g(δ) = δ(λ + κ(δ)) − 1 once the iterates settle.
 */
inline FixedPoint solve_fixed_point(const Proportions& p, const HyperParams& hp,
                                    TheoryVariant variant = TheoryVariant::standard, int max_iter = kFixedPointMaxIter) {
  if (!(hp.lambda > 0)) fail(ErrorKind::InvalidArgument, "lambda must be positive");
  const double t = variant == TheoryVariant::standard ? p.c0 : 1.0;
  if (!(t > 0)) fail(ErrorKind::InvalidArgument, "c0 must be positive");

  auto g = [&](double delta) { return delta * (hp.lambda + detail::kappa_at(p, hp, t * delta).sum_kappa) - 1.0; };

  double delta = 1.0 / hp.lambda;
  if (!detail::in_domain(hp, t * delta)) fail(ErrorKind::InvalidRegime, "initial point violates 1 - alpha_u delta > 0");
  bool converged = false;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    const double denom = hp.lambda + detail::kappa_at(p, hp, t * delta).sum_kappa;
    if (!(denom > 0)) fail(ErrorKind::InvalidRegime, "lambda + kappa_1 + kappa_2 <= 0 along the iteration");
    double next = 1.0 / denom;
    if (!detail::in_domain(hp, t * next)) fail(ErrorKind::InvalidRegime, "iterate violates 1 - alpha_u delta > 0");
    const double step = std::abs(next - delta);
    // Newton on g once the iteration is slow but near the root.
    if (step < 1e-6 * next && step > kFixedPointTol) {
      const auto e = detail::kappa_at(p, hp, t * next);
      const double dg = hp.lambda + e.sum_kappa - next * t * e.sum_a;
      if (dg > 0) {
        const double nn = next - g(next) / dg;
        if (detail::in_domain(hp, t * nn) && std::abs(g(nn)) < std::abs(g(next))) next = nn;
      }
    }
    const double change = std::abs(next - delta);
    delta = next;
    if (change <= kFixedPointTol) {
      converged = true;
      break;
    }
  }
  if (!converged) fail(ErrorKind::NoConvergence, "fixed point not reached after " + std::to_string(max_iter) + " iterations");

  for (int k = 0; k < 3; ++k) {
    const auto e = detail::kappa_at(p, hp, t * delta);
    const double dg = hp.lambda + e.sum_kappa - delta * t * e.sum_a;
    if (!(dg > 0)) break;
    const double nn = delta - g(delta) / dg;
    if (!detail::in_domain(hp, t * nn) || !(std::abs(g(nn)) < std::abs(g(delta)))) break;
    delta = nn;
  }

  FixedPoint fp;
  fp.variant = variant;
  fp.delta = delta;
  fp.delta_eff = t * delta;
  fp.iterations = it;
  const auto e = detail::kappa_at(p, hp, fp.delta_eff);
  fp.kappa = e.kappa;
  fp.a = e.a;
  fp.residual = std::abs(delta * (hp.lambda + e.sum_kappa) - 1.0);

  const double pu = 1.0 - hp.alpha_u * fp.delta_eff;
  const double pl = 1.0 + hp.alpha_l * fp.delta_eff;
  if (!(pu > 0) || !(pl > 0)) fail(ErrorKind::InvalidRegime, "converged point violates 1 -/+ alpha delta > 0");
  if (variant == TheoryVariant::standard) {
    const double q = 1.0 - p.c0 * delta * delta * e.sum_a;
    if (!(q > 0)) fail(ErrorKind::InvalidRegime, "1 - c0 delta^2 a <= 0 at the converged point");
    const double dj = p.c0 * delta * delta / (q * pl * pl * pu * pu);
    fp.d = {dj, dj};
  } else {
    const double nu_over_n = p.cu[0] + p.cu[1];
    for (int j = 0; j < 2; ++j) {
      const double q = 1.0 - p.c0 * delta * delta * e.a[j];
      if (!(q > 0)) fail(ErrorKind::InvalidRegime, "1 - c0 delta^2 a_j <= 0 at the converged point");
      fp.d[j] = -delta * delta / (pu * pu) * p.c0 * nu_over_n / q;
    }
  }
  return fp;
}

/**
 * Split-half estimate of the 2×2 matrix of mean inner products μ_iᵀμ_j from
 * the labeled data, symmetrized and projected onto the PSD cone.
 */
inline GramEstimate estimate_gram(const Dataset& ds) {
  std::array<std::vector<Index>, 2> cls;
  for (Index k = 0; k < ds.labeled_idx.size(); ++k) cls[ds.labels[k] < 0 ? 0 : 1].push_back(ds.labeled_idx[k]);
  for (int j = 0; j < 2; ++j)
    if (cls[j].size() < 2)
      fail(ErrorKind::InsufficientSamples, "class " + std::to_string(j + 1) + " has fewer than two labeled samples");
  std::array<Vec, 2> sums;
  Mat2 g;
  for (int j = 0; j < 2; ++j) {
    const Index k = cls[j].size(), h = k / 2;
    Vec s1 = Vec::Zero(ds.features.rows()), s2 = Vec::Zero(ds.features.rows());
    for (Index i = 0; i < h; ++i) s1 += ds.features.col(static_cast<Eigen::Index>(cls[j][i]));
    for (Index i = h; i < k; ++i) s2 += ds.features.col(static_cast<Eigen::Index>(cls[j][i]));
    g(j, j) = s1.dot(s2) / (static_cast<double>(h) * static_cast<double>(k - h));
    sums[j] = s1 + s2;
  }
  g(0, 1) = g(1, 0) = sums[0].dot(sums[1]) / (static_cast<double>(cls[0].size()) * static_cast<double>(cls[1].size()));
  Eigen::SelfAdjointEigenSolver<Mat2> es(g);
  Vec2 ev = es.eigenvalues().cwiseMax(0.0);
  GramEstimate out;
  out.mtm = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out.mtm = (0.5 * (out.mtm + out.mtm.transpose())).eval();
  out.estimated = true;
  return out;
}

/// ε* = ½ erfc(|m₁ − m₂| / (2√2 σ)).
inline double theoretical_error(const TheoryStats& s) {
  if (!(s.sigma2 > 0)) fail(ErrorKind::DegenerateTheory, "variance must be positive");
  const double z = std::abs(s.m1 - s.m2) / (2.0 * std::sqrt(2.0) * std::sqrt(s.sigma2));
  return std::clamp(0.5 * erfc(z), 0.0, 0.5);
}

namespace detail {

inline TheoryStats stats_standard(const FixedPoint& fp, const Proportions& p, const Mat2& G, const HyperParams& hp) {
  const double delta = fp.delta, de = fp.delta_eff;
  const double pl = 1.0 + hp.alpha_l * de, pu = 1.0 - hp.alpha_u * de;
  const double a = fp.a[0] + fp.a[1];
  const double dde = -p.c0 * delta * delta / (1.0 - p.c0 * delta * delta * a);  // dδ̃/dλ
  const double s = 1.0 / delta;
  const double ds = 1.0 - a * dde;
  const Mat2 I = Mat2::Identity();
  Mat2 Dk = Mat2::Zero(), Dkp = Mat2::Zero();
  for (int j = 0; j < 2; ++j) {
    Dk(j, j) = fp.kappa[j];
    Dkp(j, j) = -fp.a[j] * dde;
  }
  const Mat2 C = s * I + Dk * G;
  const double det = C.determinant();
  if (!(std::abs(det) > 1e-300) || !std::isfinite(det)) fail(ErrorKind::DegenerateTheory, "sI + D_kappa G is singular");
  const Mat2 B = C.inverse();
  const Mat2 K = G * B;
  const Mat2 Kp = -G * B * (ds * I + Dkp * G) * B;
  const Vec2 v(-p.cl[0], p.cl[1]);
  const double vKv = v.dot(K * v), vKpv = v.dot(Kp * v);
  const double cL = p.cl[0] + p.cl[1];
  const double hp_prime = cL * dde / (pl * pl) + vKpv / (pl * pl) - 2.0 * hp.alpha_l * dde * vKv / (pl * pl * pl);
  TheoryStats st;
  const Vec2 m = K * v / (pl * pu);
  st.m1 = m(0);
  st.m2 = m(1);
  st.sigma2 = -hp_prime / (pu * pu);
  return st;
}

inline TheoryStats stats_legacy(const FixedPoint& fp, const Proportions& p, const Mat2& G, const HyperParams& hp) {
  const double delta = fp.delta;
  const double pl = 1.0 + hp.alpha_l * delta, pu = 1.0 - hp.alpha_u * delta;
  for (double k : fp.kappa)
    if (k == 0.0 || !std::isfinite(1.0 / k)) fail(ErrorKind::DegenerateTheory, "kappa_j = 0");
  Mat2 Dki = Mat2::Zero();
  for (int j = 0; j < 2; ++j) Dki(j, j) = 1.0 / fp.kappa[j];
  const Mat2 inner = Dki + delta * G;
  if (!(std::abs(inner.determinant()) > 1e-300)) fail(ErrorKind::DegenerateTheory, "M matrix is singular");
  const Mat2 M = inner.inverse();
  const double nu_over_n = p.cu[0] + p.cu[1];
  const double ad = fp.a[0] * fp.d[0] + fp.a[1] * fp.d[1];
  const double gcoef = fp.variant == TheoryVariant::legacy_plus ? (-nu_over_n / pu + ad) : -(nu_over_n / pu + ad);
  const Mat2 Gm = gcoef * delta * G;
  const Vec2 y(-1.0, 1.0);
  Mat2 Dcl = Mat2::Zero(), Ds = Mat2::Zero(), Dd = Mat2::Zero();
  for (int j = 0; j < 2; ++j) {
    Dcl(j, j) = p.cl[j];
    Ds(j, j) = p.cl[j] / (fp.kappa[j] * pl);
    Dd(j, j) = fp.d[j];
  }
  TheoryStats st;
  std::array<double, 2> m{};
  for (int j = 0; j < 2; ++j) {
    const double sign = j == 0 ? -1.0 : 1.0;
    m[j] = sign * (p.cl[j] + y.dot(Dcl * Dki * M.col(j))) / (fp.kappa[j] * pu * pl);
  }
  st.m1 = m[0];
  st.m2 = m[1];
  st.sigma2 = y.dot((Ds * M * Gm * M * Ds + Dd * Dcl) * y);
  return st;
}

}  // namespace detail

/// Class-conditional score means, shared variance and ε*.
inline TheoryStats theory_statistics(const FixedPoint& fp, const Proportions& p, const GramEstimate& gram, const HyperParams& hp) {
  TheoryStats st = fp.variant == TheoryVariant::standard ? detail::stats_standard(fp, p, gram.mtm, hp)
                                                          : detail::stats_legacy(fp, p, gram.mtm, hp);
  if (!std::isfinite(st.m1) || !std::isfinite(st.m2) || !std::isfinite(st.sigma2))
    fail(ErrorKind::DegenerateTheory, "non-finite score statistics");
  if (!(st.sigma2 > 0)) fail(ErrorKind::DegenerateTheory, "predicted variance is not positive");
  st.eps_star = theoretical_error(st);
  return st;
}

struct TheoryResult {
  FixedPoint fixed_point;
  TheoryStats stats;
};

/**
 * Theory pipeline for one dataset. The Gram estimate and class counts are
 * computed once on construction and reused for every hyperparameter triple.
 */
class TheoryEngine {
 public:
  TheoryEngine(const Dataset& ds, bool assume_matched_proportions = true, TheoryVariant variant = TheoryVariant::standard)
      : gram_(estimate_gram(ds)), counts_(class_counts(ds, assume_matched_proportions)), variant_(variant) {
    props_ = Proportions::from(counts_);
  }

  TheoryEngine(const Proportions& p, const GramEstimate& g, TheoryVariant variant = TheoryVariant::standard)
      : gram_(g), props_(p), variant_(variant) {}

  TheoryResult evaluate(const HyperParams& hp) const {
    TheoryResult r;
    r.fixed_point = solve_fixed_point(props_, hp, variant_);
    r.stats = theory_statistics(r.fixed_point, props_, gram_, hp);
    return r;
  }

  const GramEstimate& gram() const { return gram_; }
  const Proportions& proportions() const { return props_; }
  const ClassCounts& counts() const { return counts_; }
  TheoryVariant variant() const { return variant_; }

 private:
  GramEstimate gram_;
  ClassCounts counts_;
  Proportions props_;
  TheoryVariant variant_;
};

inline TheoryStats predict_error(const Dataset& ds, const HyperParams& hp, bool assume_matched_proportions = true,
                                 TheoryVariant variant = TheoryVariant::standard) {
  return TheoryEngine(ds, assume_matched_proportions, variant).evaluate(hp).stats;
}

}  // namespace qlds
