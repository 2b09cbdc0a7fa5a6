#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qlds/error.hpp"
#include "qlds/numerics.hpp"
#include "qlds/rng.hpp"

namespace qlds {

using Index = std::size_t;

/// d×n data with a labeled/unlabeled partition. Columns are samples.
struct Dataset {
  Mat features;
  std::vector<Index> labeled_idx;
  std::vector<Index> unlabeled_idx;
  std::vector<int> labels;  ///< ±1, aligned with labeled_idx
  std::optional<std::vector<int>> true_unlabeled_labels;  ///< ±1, aligned with unlabeled_idx

  Index dim() const { return static_cast<Index>(features.rows()); }
  Index n() const { return static_cast<Index>(features.cols()); }
  Index n_labeled() const { return labeled_idx.size(); }
  Index n_unlabeled() const { return unlabeled_idx.size(); }

  Mat labeled_features() const { return gather(labeled_idx); }
  Mat unlabeled_features() const { return gather(unlabeled_idx); }

  Vec labeled_targets() const {
    Vec y(static_cast<Eigen::Index>(labels.size()));
    for (Index i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
    return y;
  }

  Mat gather(const std::vector<Index>& idx) const {
    Mat out(features.rows(), static_cast<Eigen::Index>(idx.size()));
    for (Index k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = features.col(static_cast<Eigen::Index>(idx[k]));
    return out;
  }

  /// Checks the partition and label invariants; throws on violation.
  void validate() const {
    const Index total = n();
    if (labels.size() != labeled_idx.size())
      fail(ErrorKind::DimensionMismatch, "labels and labeled_idx differ in length");
    if (true_unlabeled_labels && true_unlabeled_labels->size() != unlabeled_idx.size())
      fail(ErrorKind::DimensionMismatch, "true_unlabeled_labels and unlabeled_idx differ in length");
    if (labeled_idx.size() + unlabeled_idx.size() != total)
      fail(ErrorKind::DimensionMismatch, "partition does not cover all samples");
    std::vector<char> seen(total, 0);
    for (const auto* part : {&labeled_idx, &unlabeled_idx})
      for (Index i : *part) {
        if (i >= total || seen[i]) fail(ErrorKind::DimensionMismatch, "partition index out of range or repeated");
        seen[i] = 1;
      }
    for (int y : labels)
      if (y != -1 && y != 1) fail(ErrorKind::LabelDomainError, "label outside {-1,+1}");
    if (true_unlabeled_labels)
      for (int y : *true_unlabeled_labels)
        if (y != -1 && y != 1) fail(ErrorKind::LabelDomainError, "label outside {-1,+1}");
  }

  std::array<Index, 2> labeled_class_sizes() const {
    std::array<Index, 2> c{0, 0};
    for (int y : labels) ++c[y < 0 ? 0 : 1];
    return c;
  }
};

/// Integer class counts. Class 1 carries label -1, class 2 label +1.
struct ClassCounts {
  Index nl1 = 0, nl2 = 0, nu1 = 0, nu2 = 0;
  Index d = 0;

  Index n() const { return nl1 + nl2 + nu1 + nu2; }
  double cl(int j) const { return ratio(j == 1 ? nl1 : nl2); }
  double cu(int j) const { return ratio(j == 1 ? nu1 : nu2); }
  double c0() const { return ratio(d); }

 private:
  double ratio(Index k) const { return n() ? static_cast<double>(k) / static_cast<double>(n()) : 0.0; }
};

/// Parameters of the two-class isotropic Gaussian mixture. Class means are ∓(mu_norm/2)·e₁.
struct GmmSpec {
  Index d = 100;
  double mu_norm = 2.0;
  Index nl1 = 0, nl2 = 0, nu1 = 0, nu2 = 0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string where(std::size_t line, std::size_t col) {
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

/// Maps raw label values to ±1. Accepts {-1,+1} or {0,1}; mixing 0 with -1 is rejected.
inline std::vector<int> map_labels(const std::vector<double>& raw, const std::vector<std::size_t>& lines) {
  bool has_zero = false, has_neg = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (v == 0.0) has_zero = true;
    else if (v == -1.0) has_neg = true;
    else if (v != 1.0) fail(ErrorKind::LabelDomainError, "label " + std::to_string(v) + " at line " + std::to_string(lines[i]));
  }
  if (has_zero && has_neg) fail(ErrorKind::LabelDomainError, "labels mix the {0,1} and {-1,+1} encodings");
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] == 1.0 ? 1 : -1;
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  return in;
}

/// Largest-remainder rounding of `total` split by nonnegative weights; ties go to the lower index.
inline std::vector<Index> largest_remainder(Index total, const std::vector<double>& weights) {
  double wsum = 0;
  for (double w : weights) wsum += w;
  std::vector<Index> out(weights.size(), 0);
  if (total == 0 || wsum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  Index assigned = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double exact = static_cast<double>(total) * weights[j] / wsum;
    out[j] = static_cast<Index>(std::floor(exact + 1e-9));
    if (out[j] > total) out[j] = total;
    assigned += out[j];
    rem.emplace_back(exact - static_cast<double>(out[j]), j);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < rem.size(); ++k, ++assigned) ++out[rem[k].second];
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

/**
 * Reads a CSV with a header row. Every column except the label and flag
 * columns is a feature. Flag 1 marks a labeled row. Unlabeled rows may leave
 * the label cell empty; if all of them carry a label it is kept as truth.
 */
inline Dataset load_csv(const std::string& path, const std::string& label_column, const std::string& labeled_flag_column) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, path + ": missing header row");
  ++lineno;
  const auto header = detail::split(line, ',');
  std::size_t label_col = header.size(), flag_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_col = c;
    if (header[c] == labeled_flag_column) flag_col = c;
  }
  if (label_col == header.size()) fail(ErrorKind::ParseError, path + ": no column named '" + label_column + "'");
  if (flag_col == header.size()) fail(ErrorKind::ParseError, path + ": no column named '" + labeled_flag_column + "'");
  if (label_col == flag_col) fail(ErrorKind::ParseError, "label and flag columns must differ");

  std::vector<std::vector<double>> cols;
  std::vector<double> lab_raw, unl_raw;
  std::vector<std::size_t> lab_lines, unl_lines;
  std::vector<Index> lab_idx, unl_idx;
  bool all_truth = true;
  Index row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size())
      fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, cells.size()) + ": expected " + std::to_string(header.size()) + " cells");
    double flag = 0;
    if (!detail::parse_double(cells[flag_col], flag) || (flag != 0.0 && flag != 1.0))
      fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, flag_col + 1) + ": labeled flag must be 0 or 1");
    std::vector<double> feat;
    feat.reserve(header.size() - 2);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col || c == flag_col) continue;
      double v;
      if (!detail::parse_double(cells[c], v))
        fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, c + 1) + ": not a number: '" + std::string(cells[c]) + "'");
      feat.push_back(v);
    }
    cols.push_back(std::move(feat));
    double y = 0;
    const bool has_label = !cells[label_col].empty();
    if (has_label && !detail::parse_double(cells[label_col], y))
      fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, label_col + 1) + ": label is not a number");
    if (flag == 1.0) {
      if (!has_label) fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, label_col + 1) + ": labeled row without label");
      lab_idx.push_back(row);
      lab_raw.push_back(y);
      lab_lines.push_back(lineno);
    } else {
      unl_idx.push_back(row);
      if (has_label) {
        unl_raw.push_back(y);
        unl_lines.push_back(lineno);
      } else {
        all_truth = false;
      }
    }
    ++row;
  }
  if (row == 0) fail(ErrorKind::ParseError, path + ": no data rows");

  // One encoding across labeled and unlabeled truth.
  std::vector<double> raw = lab_raw;
  raw.insert(raw.end(), unl_raw.begin(), unl_raw.end());
  std::vector<std::size_t> lines = lab_lines;
  lines.insert(lines.end(), unl_lines.begin(), unl_lines.end());
  const auto mapped = detail::map_labels(raw, lines);

  Dataset ds;
  const Index d = header.size() - 2;
  ds.features.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(row));
  for (Index j = 0; j < row; ++j)
    for (Index i = 0; i < d; ++i) ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  ds.labeled_idx = std::move(lab_idx);
  ds.unlabeled_idx = std::move(unl_idx);
  ds.labels.assign(mapped.begin(), mapped.begin() + static_cast<std::ptrdiff_t>(lab_raw.size()));
  if (all_truth) ds.true_unlabeled_labels.emplace(mapped.begin() + static_cast<std::ptrdiff_t>(lab_raw.size()), mapped.end());
  ds.validate();
  return ds;
}

/// Seeded stratified choice of `n_labeled` positions among `labels` (±1).
inline std::vector<Index> stratified_sample(const std::vector<int>& labels, Index n_labeled, std::uint64_t seed) {
  std::array<std::vector<Index>, 2> by_class;
  for (Index i = 0; i < labels.size(); ++i) by_class[labels[i] < 0 ? 0 : 1].push_back(i);
  auto take = detail::largest_remainder(n_labeled, {static_cast<double>(by_class[0].size()), static_cast<double>(by_class[1].size())});
  SplitMix64 rng(seed);
  std::vector<Index> chosen;
  for (int c = 0; c < 2; ++c) {
    rng.shuffle(by_class[c]);
    chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(std::min(take[c], by_class[c].size())));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Builds a Dataset from fully labeled columns by drawing a stratified labeled subset.
inline Dataset split_labeled(Mat features, const std::vector<int>& labels, Index n_labeled, std::uint64_t seed) {
  if (n_labeled > labels.size())
    fail(ErrorKind::InsufficientSamples, "n_labeled " + std::to_string(n_labeled) + " exceeds n = " + std::to_string(labels.size()));
  const auto chosen = stratified_sample(labels, n_labeled, seed);
  std::vector<char> is_lab(labels.size(), 0);
  for (Index i : chosen) is_lab[i] = 1;
  Dataset ds;
  ds.features = std::move(features);
  std::vector<int> truth;
  for (Index i = 0; i < labels.size(); ++i) {
    if (is_lab[i]) {
      ds.labeled_idx.push_back(i);
      ds.labels.push_back(labels[i]);
    } else {
      ds.unlabeled_idx.push_back(i);
      truth.push_back(labels[i]);
    }
  }
  ds.true_unlabeled_labels = std::move(truth);
  ds.validate();
  return ds;
}

/// Reads "label idx:val ..." lines (1-based indices) and draws a seeded stratified labeled subset.
inline Dataset load_libsvm(const std::string& path, Index n_labeled, std::uint64_t seed) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<std::pair<Index, double>>> rows;
  std::vector<double> raw;
  std::vector<std::size_t> lines;
  Index d = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = detail::trim(line);
    if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = detail::trim(sv.substr(0, hash));
    if (sv.empty()) continue;
    std::istringstream ss{std::string(sv)};
    std::string t;
    std::vector<std::string> owned;
    while (ss >> t) owned.push_back(t);
    double y;
    if (!detail::parse_double(owned[0], y)) fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, 1) + ": bad label");
    std::vector<std::pair<Index, double>> entries;
    for (std::size_t k = 1; k < owned.size(); ++k) {
      const auto colon = owned[k].find(':');
      if (colon == std::string::npos) fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, k + 1) + ": expected idx:val");
      unsigned long long idx = 0;
      const std::string_view is(owned[k].data(), colon);
      const auto r = std::from_chars(is.data(), is.data() + is.size(), idx);
      double v;
      if (r.ec != std::errc() || r.ptr != is.data() + is.size() || idx == 0 ||
          !detail::parse_double(std::string_view(owned[k]).substr(colon + 1), v))
        fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, k + 1) + ": bad entry '" + owned[k] + "'");
      d = std::max<Index>(d, idx);
      entries.emplace_back(static_cast<Index>(idx - 1), v);
    }
    rows.push_back(std::move(entries));
    raw.push_back(y);
    lines.push_back(lineno);
  }
  if (rows.empty()) fail(ErrorKind::ParseError, path + ": no data lines");
  const auto labels = detail::map_labels(raw, lines);
  Mat x = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
  for (Index j = 0; j < rows.size(); ++j)
    for (auto [i, v] : rows[j]) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
  return split_labeled(std::move(x), labels, n_labeled, seed);
}

// ---------------------------------------------------------------------------
// Transformations and generators
// ---------------------------------------------------------------------------

/// Subtracts the per-feature mean over all n samples.
inline Dataset center(const Dataset& ds) {
  if (ds.n() == 0) fail(ErrorKind::InsufficientSamples, "cannot center an empty dataset");
  Dataset out = ds;
  const Vec mean = ds.features.rowwise().mean();
  out.features.colwise() -= mean;
  return out;
}

/// Draws columns in the order: labeled class 1, labeled class 2, unlabeled class 1, unlabeled class 2.
inline Dataset generate_gmm(const GmmSpec& spec) {
  if (!(spec.mu_norm > 0)) fail(ErrorKind::InvalidArgument, "mu_norm must be positive");
  if (spec.d == 0) fail(ErrorKind::InvalidArgument, "d must be positive");
  const Index n = spec.nl1 + spec.nl2 + spec.nu1 + spec.nu2;
  const auto d = static_cast<Eigen::Index>(spec.d);
  Dataset ds;
  ds.features.resize(d, static_cast<Eigen::Index>(n));
  SplitMix64 rng(spec.seed);
  const double half = spec.mu_norm / 2.0;
  std::vector<int> truth;
  Index col = 0;
  auto draw = [&](Index count, int y, bool labeled) {
    for (Index k = 0; k < count; ++k, ++col) {
      const auto c = static_cast<Eigen::Index>(col);
      for (Eigen::Index i = 0; i < d; ++i) ds.features(i, c) = rng.normal();
      ds.features(0, c) += y * half;
      if (labeled) {
        ds.labeled_idx.push_back(col);
        ds.labels.push_back(y);
      } else {
        ds.unlabeled_idx.push_back(col);
        truth.push_back(y);
      }
    }
  };
  draw(spec.nl1, -1, true);
  draw(spec.nl2, +1, true);
  draw(spec.nu1, -1, false);
  draw(spec.nu2, +1, false);
  ds.true_unlabeled_labels = std::move(truth);
  return ds;
}

/**
 * Class counts for the theory engine. With matched proportions the unlabeled
 * split follows the labeled class ratio (largest-remainder rounding);
 * otherwise it is read from the unlabeled ground truth.
 */
inline ClassCounts class_counts(const Dataset& ds, bool assume_matched_proportions = true) {
  if (ds.n_labeled() == 0) fail(ErrorKind::InsufficientSamples, "no labeled samples");
  const auto lab = ds.labeled_class_sizes();
  ClassCounts c;
  c.d = ds.dim();
  c.nl1 = lab[0];
  c.nl2 = lab[1];
  if (assume_matched_proportions) {
    const auto u = detail::largest_remainder(ds.n_unlabeled(), {static_cast<double>(lab[0]), static_cast<double>(lab[1])});
    c.nu1 = u[0];
    c.nu2 = u[1];
  } else {
    if (!ds.true_unlabeled_labels) fail(ErrorKind::MissingTruth, "true unlabeled labels required when proportions are not assumed");
    for (int y : *ds.true_unlabeled_labels) ++(y < 0 ? c.nu1 : c.nu2);
  }
  return c;
}

}  // namespace qlds
