#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "qlds/error.hpp"
#include "qlds/numerics.hpp"

namespace qlds {

struct MeanStd {
  double mean = 0;
  double std = 0;  ///< sample standard deviation (n − 1)
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& x) {
  MeanStd r;
  r.n = x.size();
  if (x.empty()) return r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(x.size() - 1));
  }
  return r;
}

struct MannWhitney {
  double u1 = 0;  ///< rank-sum statistic of the first sample
  double u2 = 0;
  double p_value = 1;
  bool exact = false;
};

/// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> r(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline constexpr std::size_t kExactMannWhitneyMax = 16;

/**
 * Two-sided Mann-Whitney U test. Pooled sizes up to 16 use the exact
 * permutation distribution of the midrank statistic; larger samples use the
 * normal approximation with tie and continuity corrections.
 */
inline MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) fail(ErrorKind::InsufficientSamples, "Mann-Whitney needs two nonempty samples");
  const std::size_t n1 = a.size(), n2 = b.size(), N = n1 + n2;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto r = midranks(pooled);
  const double r1 = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
  MannWhitney out;
  out.u1 = r1 - dn1 * (dn1 + 1.0) / 2.0;
  out.u2 = dn1 * dn2 - out.u1;
  const double mu = dn1 * dn2 / 2.0;
  const double obs = std::abs(out.u1 - mu);

  if (N <= kExactMannWhitneyMax) {
    out.exact = true;
    std::size_t hit = 0, total = 0;
    std::vector<char> pick(N, 0);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n1), 1);
    // prev_permutation over a sorted-descending mask enumerates every n1-subset once.
    do {
      double s = 0;
      for (std::size_t i = 0; i < N; ++i)
        if (pick[i]) s += r[i];
      const double u = s - dn1 * (dn1 + 1.0) / 2.0;
      if (std::abs(u - mu) >= obs - 1e-9) ++hit;
      ++total;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    out.p_value = static_cast<double>(hit) / static_cast<double>(total);
    return out;
  }

  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie = 0;
  for (std::size_t i = 0; i < N;) {
    std::size_t j = i;
    while (j + 1 < N && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie += t * t * t - t;
    i = j + 1;
  }
  const double dN = static_cast<double>(N);
  const double var = dn1 * dn2 / 12.0 * ((dN + 1.0) - tie / (dN * (dN - 1.0)));
  if (!(var > 0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, obs - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, erfc(z / std::sqrt(2.0)));
  return out;
}

}  // namespace qlds
