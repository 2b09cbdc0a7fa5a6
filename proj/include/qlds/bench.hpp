#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/parallel.hpp"
#include "qlds/rng.hpp"
#include "qlds/selection.hpp"
#include "qlds/self_training.hpp"
#include "qlds/solver.hpp"
#include "qlds/stats.hpp"
#include "qlds/theory.hpp"

namespace qlds {

/// Produces the (uncentered) dataset of one trial from its seed.
using TrialSource = std::function<Dataset(std::uint64_t seed)>;

inline TrialSource gmm_source(GmmSpec spec) {
  return [spec](std::uint64_t seed) {
    GmmSpec s = spec;
    s.seed = seed;
    return generate_gmm(s);
  };
}

/// Re-splits a fully labeled pool into labeled/unlabeled parts per trial.
inline TrialSource resplit_source(Mat features, std::vector<int> labels, Index n_labeled) {
  return [features = std::move(features), labels = std::move(labels), n_labeled](std::uint64_t seed) {
    return split_labeled(features, labels, n_labeled, seed);
  };
}

/// Benchmark methods. "qlds11" is the fixed (1,1) point.
inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"ls-svm", "gb-ssl", "qlds11", "st", "cv", "th", "or"};
  return m;
}

struct TrialResult {
  std::uint64_t seed = 0;
  std::string method;
  double error = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
  std::optional<GridPoint> chosen;
  std::string failure;  ///< error kind when the trial was skipped
};

struct BenchOptions {
  Grid grid = Grid::lattice(11);
  SelectionOptions selection;
  SelfTrainConfig self_train;
  unsigned jobs = 1;
};

/// Errors of one method on one already-centered dataset.
inline TrialResult run_method(const std::string& method, const Dataset& ds, const BenchOptions& opt, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  TrialResult tr;
  tr.seed = seed;
  tr.method = method;
  const auto t0 = Clock::now();
  SelectionOptions so = opt.selection;
  so.seed = derive_seed(seed, 0, 1);
  so.jobs = 1;
  try {
    auto fixed = [&](double al, double au) {
      const double lam = so.lambda.resolve(ds);
      tr.chosen = GridPoint{al, au};
      return transductive_error(fit_qlds(ds, {al, au, lam, so.lambda.inflation}), ds);
    };
    if (method == "ls-svm") tr.error = fixed(1, 0);
    else if (method == "gb-ssl") tr.error = fixed(0, 1);
    else if (method == "qlds11") tr.error = fixed(1, 1);
    else if (method == "st") {
      SelfTrainConfig st = opt.self_train;
      st.seed = derive_seed(seed, 0, 2);
      st.jobs = 1;
      st.lambda = so.lambda;
      tr.error = transductive_error(self_train(ds, st).model, ds);
    } else {
      SelectionMethod sm;
      if (method == "th") sm = SelectionMethod::theoretical;
      else if (method == "cv") sm = SelectionMethod::cross_validation;
      else if (method == "or") sm = SelectionMethod::oracle;
      else fail(ErrorKind::InvalidArgument, "unknown method '" + method + "'");
      auto [model, sel] = fit_with_selection(ds, sm, opt.grid, so);
      tr.chosen = sel.chosen;
      tr.error = transductive_error(model, ds);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw;
    tr.failure = std::string(to_string(e.kind()));
    tr.error = std::numeric_limits<double>::quiet_NaN();
  }
  tr.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return tr;
}

struct MethodSummary {
  std::string method;
  MeanStd error;
  std::size_t failed = 0;
  bool best = false;
  bool significantly_worse = false;  ///< p < alpha against the best method
};

struct BenchReport {
  std::vector<std::string> methods;
  std::vector<std::vector<TrialResult>> trials;  ///< [trial][method]
  std::vector<MethodSummary> summary;
  std::vector<std::vector<double>> p_values;  ///< pairwise two-sided Mann-Whitney
  std::vector<std::vector<double>> u_stats;   ///< U of row method against column method
};

inline std::vector<double> errors_of(const BenchReport& r, std::size_t m) {
  std::vector<double> e;
  for (const auto& t : r.trials)
    if (std::isfinite(t[m].error)) e.push_back(t[m].error);
  return e;
}

/// Seeded trials of every method with mean ± std and pairwise Mann-Whitney tests.
inline BenchReport run_benchmark(const TrialSource& source, const std::vector<std::string>& methods, int n_trials,
                                 std::uint64_t seed0, const BenchOptions& opt = {}, double alpha = 0.01) {
  if (n_trials < 2) fail(ErrorKind::InvalidArgument, "n_trials must be at least 2");
  for (const auto& m : methods)
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      fail(ErrorKind::InvalidArgument, "unknown method '" + m + "'");
  BenchReport r;
  r.methods = methods;
  r.trials.resize(static_cast<std::size_t>(n_trials));
  parallel_for(static_cast<std::size_t>(n_trials), opt.jobs, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(seed0, t);
    const Dataset ds = center(source(derive_seed(seed, 0, 0)));
    for (const auto& m : methods) r.trials[t].push_back(run_method(m, ds, opt, seed));
  });
  const std::size_t M = methods.size();
  std::size_t best = M;
  for (std::size_t m = 0; m < M; ++m) {
    MethodSummary s;
    s.method = methods[m];
    const auto e = errors_of(r, m);
    s.error = mean_std(e);
    s.failed = static_cast<std::size_t>(n_trials) - e.size();
    r.summary.push_back(s);
    if (!e.empty() && methods[m] != "or" && (best == M || s.error.mean < r.summary[best].error.mean)) best = m;
  }
  r.p_values.assign(M, std::vector<double>(M, 1.0));
  r.u_stats.assign(M, std::vector<double>(M, 0.0));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      const auto a = errors_of(r, i), b = errors_of(r, j);
      if (i == j || a.empty() || b.empty()) continue;
      const auto mw = mann_whitney_u(a, b);
      r.p_values[i][j] = mw.p_value;
      r.u_stats[i][j] = mw.u1;
    }
  if (best < M) {
    r.summary[best].best = true;
    for (std::size_t m = 0; m < M; ++m)
      if (m != best && methods[m] != "or" && r.summary[m].error.mean > r.summary[best].error.mean && r.p_values[m][best] < alpha)
        r.summary[m].significantly_worse = true;
  }
  return r;
}

/// Reference error rates (percent mean, std) for seven benchmark datasets, used for side-by-side display only.
struct ReferenceRow {
  double mean, std;
};

inline std::optional<std::map<std::string, ReferenceRow>> reference_errors(const std::string& dataset) {
  static const std::map<std::string, std::vector<ReferenceRow>> table{
      {"books", {{37.47, 2.25}, {26.47, 0.72}, {49.13, 0.65}, {35.83, 2.48}, {27.91, 3.32}, {26.03, 0.79}, {25.7, 0.93}}},
      {"dvd", {{38.33, 1.72}, {29.12, 1.35}, {49.25, 0.68}, {36.46, 1.94}, {29.53, 3.48}, {28.53, 1.33}, {26.94, 1.47}}},
      {"electronics", {{34.15, 3.25}, {19.4, 0.29}, {48.67, 1.05}, {31.69, 3.56}, {20.1, 1.03}, {19.41, 0.46}, {19.11, 0.58}}},
      {"kitchen", {{32.39, 3.02}, {19.31, 0.16}, {49.07, 0.64}, {29.62, 3.03}, {19.98, 2.28}, {19.11, 0.32}, {18.67, 0.43}}},
      {"splice", {{39.81, 2.93}, {35.48, 0.86}, {44.36, 2.3}, {39.36, 3.12}, {37.02, 3.04}, {35.35, 1.26}, {33.63, 1.75}}},
      {"adult", {{33.35, 0.68}, {36.28, 0.06}, {32.55, 1.47}, {35.45, 0.75}, {32.25, 1.92}, {32.88, 2.46}, {31.9, 1.74}}},
      {"mushrooms", {{6.55, 2.07}, {11.33, 0.04}, {33.94, 10.67}, {6.62, 2.39}, {2.57, 1.86}, {8.49, 3.63}, {1.75, 1.31}}},
  };
  const auto it = table.find(dataset);
  if (it == table.end()) return std::nullopt;
  std::map<std::string, ReferenceRow> out;
  for (std::size_t k = 0; k < known_methods().size(); ++k) out[known_methods()[k]] = it->second[k];
  return out;
}

// ---------------------------------------------------------------------------
// Density match
// ---------------------------------------------------------------------------

struct Histogram {
  double lo = 0, hi = 0;
  std::vector<std::size_t> class1, class2;
};

struct DensityReport {
  std::array<double, 2> empirical_mean{0, 0}, empirical_std{0, 0};
  std::array<double, 2> theory_mean{0, 0};
  double theory_sigma = 0;
  double empirical_error = 0, theory_error = 0;
  double mean_tolerance = 0;  ///< 0.05 |m₁ − m₂|
  std::array<double, 2> mean_delta{0, 0}, std_delta{0, 0};
  bool pass = false;
  Histogram histogram;  ///< first seed, unlabeled scores
  int seeds = 0;
  TheoryVariant variant = TheoryVariant::standard;
};

inline constexpr int kHistogramBins = 64;

inline Histogram score_histogram(const Vec& f, const std::vector<int>& truth, int bins = kHistogramBins) {
  Histogram h;
  h.class1.assign(static_cast<std::size_t>(bins), 0);
  h.class2.assign(static_cast<std::size_t>(bins), 0);
  if (f.size() == 0) return h;
  h.lo = f.minCoeff();
  h.hi = f.maxCoeff();
  const double w = (h.hi - h.lo) / bins;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    int b = w > 0 ? static_cast<int>((f(i) - h.lo) / w) : 0;
    b = std::clamp(b, 0, bins - 1);
    (truth[static_cast<std::size_t>(i)] < 0 ? h.class1 : h.class2)[static_cast<std::size_t>(b)]++;
  }
  return h;
}

/**
 * Compares unlabeled score statistics with the theory over seeds. Empirical
 * and predicted quantities are averaged over seeds before comparison.
 */
inline DensityReport density_match(const GmmSpec& spec, const GridPoint& point, int n_seeds, const SelectionOptions& opt = {},
                                   unsigned jobs = 1) {
  if (n_seeds < 1) fail(ErrorKind::InvalidArgument, "n_seeds must be positive");
  struct Seed {
    std::array<double, 2> em, es;
    std::array<double, 2> tm;
    double ts, terr, eerr;
    Histogram h;
  };
  std::vector<Seed> res(static_cast<std::size_t>(n_seeds));
  parallel_for(res.size(), jobs, [&](std::size_t s) {
    GmmSpec g = spec;
    g.seed = derive_seed(spec.seed, s);
    const Dataset ds = center(generate_gmm(g));
    const HyperParams hp{point.alpha_l, point.alpha_u, opt.lambda.resolve(ds), opt.lambda.inflation};
    const auto model = fit_qlds(ds, hp);
    const Vec f = decision_scores(model, ds.unlabeled_features());
    const auto& truth = *ds.true_unlabeled_labels;
    Seed& r = res[s];
    for (int c = 0; c < 2; ++c) {
      std::vector<double> v;
      for (Eigen::Index i = 0; i < f.size(); ++i)
        if ((truth[static_cast<std::size_t>(i)] < 0) == (c == 0)) v.push_back(f(i));
      const auto ms = mean_std(v);
      r.em[static_cast<std::size_t>(c)] = ms.mean;
      r.es[static_cast<std::size_t>(c)] = ms.std;
    }
    const auto th = TheoryEngine(ds, opt.assume_matched_proportions, opt.variant).evaluate(hp).stats;
    r.tm = {th.m1, th.m2};
    r.ts = std::sqrt(th.sigma2);
    r.terr = th.eps_star;
    r.eerr = error_rate(labels_from_scores(f), truth);
    if (s == 0) r.h = score_histogram(f, truth);
  });
  DensityReport out;
  out.seeds = n_seeds;
  out.variant = opt.variant;
  const double k = 1.0 / n_seeds;
  for (const auto& r : res) {
    for (int c = 0; c < 2; ++c) {
      out.empirical_mean[c] += k * r.em[c];
      out.empirical_std[c] += k * r.es[c];
      out.theory_mean[c] += k * r.tm[c];
    }
    out.theory_sigma += k * r.ts;
    out.theory_error += k * r.terr;
    out.empirical_error += k * r.eerr;
  }
  out.histogram = res[0].h;
  out.mean_tolerance = 0.05 * std::abs(out.theory_mean[0] - out.theory_mean[1]);
  out.pass = std::abs(out.theory_error - out.empirical_error) <= 0.02;
  for (int c = 0; c < 2; ++c) {
    out.mean_delta[c] = std::abs(out.empirical_mean[c] - out.theory_mean[c]);
    out.std_delta[c] = std::abs(out.empirical_std[c] - out.theory_sigma);
    out.pass = out.pass && out.mean_delta[c] <= out.mean_tolerance && out.std_delta[c] <= 0.10 * out.theory_sigma;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase diagram, proportion robustness, runtime
// ---------------------------------------------------------------------------

struct PhaseDiagram {
  std::vector<Index> labeled_sizes;
  std::vector<double> mu_norms;
  std::vector<std::vector<double>> gain;  ///< [size][mu]; NaN marks a failed cell
};

/**
 * gain = error(LS-SVM) − error(theory-selected QLDS), averaged over seeds.
 * Labeled sizes are totals split evenly between classes; base.nu1/nu2 fix the unlabeled part.
 */
inline PhaseDiagram phase_diagram(const std::vector<Index>& labeled_sizes, const std::vector<double>& mu_norms, const GmmSpec& base,
                                  int n_seeds, const BenchOptions& opt = {}) {
  if (labeled_sizes.empty() || mu_norms.empty()) fail(ErrorKind::InvalidArgument, "phase diagram axes must be nonempty");
  PhaseDiagram pd{labeled_sizes, mu_norms, {}};
  const std::size_t S = labeled_sizes.size(), M = mu_norms.size(), C = S * M * static_cast<std::size_t>(n_seeds);
  std::vector<double> g(C, std::numeric_limits<double>::quiet_NaN());
  parallel_for(C, opt.jobs, [&](std::size_t k) {
    const std::size_t seed = k % static_cast<std::size_t>(n_seeds), cell = k / static_cast<std::size_t>(n_seeds);
    const std::size_t i = cell / M, j = cell % M;
    GmmSpec s = base;
    s.mu_norm = mu_norms[j];
    s.nl1 = labeled_sizes[i] / 2;
    s.nl2 = labeled_sizes[i] - s.nl1;
    s.seed = derive_seed(base.seed, seed, cell + 1);
    const Dataset ds = center(generate_gmm(s));
    const auto ls = run_method("ls-svm", ds, opt, s.seed);
    const auto th = run_method("th", ds, opt, s.seed);
    if (std::isfinite(ls.error) && std::isfinite(th.error)) g[k] = ls.error - th.error;
  });
  pd.gain.assign(S, std::vector<double>(M, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      double sum = 0;
      int ok = 0;
      for (int s = 0; s < n_seeds; ++s) {
        const double v = g[(i * M + j) * static_cast<std::size_t>(n_seeds) + static_cast<std::size_t>(s)];
        if (std::isfinite(v)) {
          sum += v;
          ++ok;
        }
      }
      if (ok) pd.gain[i][j] = sum / ok;
    }
  return pd;
}

struct ProportionRow {
  double ratio = 1;
  Index nl1 = 0, nl2 = 0;
  double error_assumed = std::numeric_limits<double>::quiet_NaN();
  double error_truth = std::numeric_limits<double>::quiet_NaN();
  int agree = 0;  ///< seeds where both selections chose the same grid point
  int seeds = 0;
};

/**
 * Labeled class-1 share is ratio × (unlabeled class-1 share); the unlabeled
 * part is taken from `base`. Selection runs with inferred and with true
 * unlabeled proportions; errors are seed averages of the refitted models.
 */
inline std::vector<ProportionRow> proportion_robustness(const GmmSpec& base, Index n_labeled, const std::vector<double>& ratios,
                                                        int n_seeds, const BenchOptions& opt = {}) {
  for (double r : ratios)
    if (!(r > 0)) fail(ErrorKind::InvalidArgument, "ratios must be positive");
  const double share_u = static_cast<double>(base.nu1) / static_cast<double>(base.nu1 + base.nu2);
  std::vector<ProportionRow> rows(ratios.size());
  const std::size_t C = ratios.size() * static_cast<std::size_t>(n_seeds);
  std::vector<double> ea(C), et(C);
  std::vector<int> same(C, 0);
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    auto& row = rows[i];
    row.ratio = ratios[i];
    row.seeds = n_seeds;
    const double want = ratios[i] * share_u * static_cast<double>(n_labeled);
    row.nl1 = std::clamp<Index>(static_cast<Index>(std::llround(want)), 2, n_labeled - 2);
    row.nl2 = n_labeled - row.nl1;
  }
  parallel_for(C, opt.jobs, [&](std::size_t k) {
    const std::size_t i = k / static_cast<std::size_t>(n_seeds), s = k % static_cast<std::size_t>(n_seeds);
    GmmSpec g = base;
    g.nl1 = rows[i].nl1;
    g.nl2 = rows[i].nl2;
    g.seed = derive_seed(base.seed, s, 7);
    const Dataset ds = center(generate_gmm(g));
    SelectionOptions so = opt.selection;
    so.jobs = 1;
    so.assume_matched_proportions = true;
    auto [ma, ra] = fit_with_selection(ds, SelectionMethod::theoretical, opt.grid, so);
    so.assume_matched_proportions = false;
    auto [mt, rt] = fit_with_selection(ds, SelectionMethod::theoretical, opt.grid, so);
    ea[k] = transductive_error(ma, ds);
    et[k] = transductive_error(mt, ds);
    same[k] = ra.chosen_index == rt.chosen_index;
  });
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    double a = 0, t = 0;
    for (int s = 0; s < n_seeds; ++s) {
      const std::size_t k = i * static_cast<std::size_t>(n_seeds) + static_cast<std::size_t>(s);
      a += ea[k];
      t += et[k];
      rows[i].agree += same[k];
    }
    rows[i].error_assumed = a / n_seeds;
    rows[i].error_truth = t / n_seeds;
  }
  return rows;
}

struct RuntimeRow {
  Index d = 0, n = 0;
  double t_theory = 0, t_cv = 0;
  long fits_theory = 0, fits_cv = 0;
};

/// Wall-clock of theory-based and CV-based selection (each including the final refit) on GMM data with n_ℓj = n_uj = d.
inline std::vector<RuntimeRow> runtime_compare(const std::vector<Index>& sizes, const Grid& grid, int folds, std::uint64_t seed,
                                               const SelectionOptions& base = {}) {
  std::vector<RuntimeRow> rows;
  for (Index d : sizes) {
    GmmSpec g;
    g.d = d;
    g.mu_norm = 2.0;
    g.nl1 = g.nl2 = g.nu1 = g.nu2 = d;
    g.seed = derive_seed(seed, d);
    const Dataset ds = center(generate_gmm(g));
    SelectionOptions so = base;
    so.folds = folds;
    so.seed = derive_seed(seed, d, 1);
    RuntimeRow row;
    row.d = d;
    row.n = ds.n();
    using Clock = std::chrono::steady_clock;
    auto t0 = Clock::now();
    auto th = fit_with_selection(ds, SelectionMethod::theoretical, grid, so);
    row.t_theory = std::chrono::duration<double>(Clock::now() - t0).count();
    row.fits_theory = th.second.fits;
    t0 = Clock::now();
    auto cv = fit_with_selection(ds, SelectionMethod::cross_validation, grid, so);
    row.t_cv = std::chrono::duration<double>(Clock::now() - t0).count();
    row.fits_cv = cv.second.fits;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qlds
