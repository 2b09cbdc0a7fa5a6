#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "qlds/bench.hpp"
#include "qlds/error.hpp"
#include "qlds/selection.hpp"
#include "qlds/self_training.hpp"
#include "qlds/solver.hpp"
#include "qlds/theory.hpp"

namespace qlds {

using json = nlohmann::ordered_json;

/// JSON number, or null for non-finite values.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec vec_from_json(const json& a) {
  if (!a.is_array()) fail(ErrorKind::ParseError, "expected a numeric array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) fail(ErrorKind::ParseError, "non-numeric array entry at position " + std::to_string(i));
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

inline json to_json(const LinearModel& m) {
  json j;
  j["omega"] = to_json(m.omega);
  j["n_train"] = m.n_train;
  j["alpha_l"] = m.hyper.alpha_l;
  j["alpha_u"] = m.hyper.alpha_u;
  j["lambda"] = m.hyper.lambda;
  if (m.center) j["center"] = to_json(*m.center);
  return j;
}

inline LinearModel model_from_json(const json& j) {
  try {
    LinearModel m;
    m.omega = vec_from_json(j.at("omega"));
    m.n_train = j.at("n_train").get<Index>();
    m.hyper.alpha_l = j.at("alpha_l").get<double>();
    m.hyper.alpha_u = j.at("alpha_u").get<double>();
    m.hyper.lambda = j.at("lambda").get<double>();
    if (j.contains("center")) m.center = vec_from_json(j.at("center"));
    if (m.n_train < 1) fail(ErrorKind::ParseError, "n_train must be at least 1");
    if (m.center && m.center->size() != m.omega.size()) fail(ErrorKind::ParseError, "center and omega differ in length");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model JSON: ") + e.what());
  }
}

inline json to_json(const TheoryStats& s) {
  return {{"m1", num(s.m1)}, {"m2", num(s.m2)}, {"sigma2", num(s.sigma2)}, {"eps_star", num(s.eps_star)}};
}

inline json to_json(const FixedPoint& fp) {
  return {{"delta", fp.delta},
          {"delta_eff", fp.delta_eff},
          {"kappa", {fp.kappa[0], fp.kappa[1]}},
          {"a", {fp.a[0], fp.a[1]}},
          {"d", {fp.d[0], fp.d[1]}},
          {"residual", fp.residual},
          {"iterations", fp.iterations},
          {"variant", to_string(fp.variant)}};
}

inline json to_json(const GramEstimate& g) {
  return {{"mtm", {{g.mtm(0, 0), g.mtm(0, 1)}, {g.mtm(1, 0), g.mtm(1, 1)}}}, {"provenance", g.estimated ? "estimated" : "exact"}};
}

inline json to_json(const SelectionResult& r) {
  json j;
  j["method"] = to_string(r.method);
  j["chosen"] = {{"alpha_l", r.chosen.alpha_l}, {"alpha_u", r.chosen.alpha_u}};
  j["chosen_index"] = r.chosen_index;
  j["lambda"] = r.lambda;
  j["theory_variant"] = to_string(r.variant);
  if (r.method == SelectionMethod::cross_validation) {
    j["folds_requested"] = r.folds_requested;
    j["folds_used"] = r.folds_used;
    j["folds_clamped"] = r.folds_used < r.folds_requested;
  }
  j["fits"] = r.fits;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  json pts = json::array();
  for (const auto& p : r.per_point) {
    json e{{"alpha_l", p.point.alpha_l}, {"alpha_u", p.point.alpha_u}, {"criterion", num(p.criterion)}};
    if (!p.skip_reason.empty()) e["skip_reason"] = p.skip_reason;
    if (p.theory) e["theory"] = to_json(*p.theory);
    pts.push_back(e);
  }
  j["per_point"] = pts;
  return j;
}

inline json to_json(const std::vector<SelfTrainRound>& h) {
  json a = json::array();
  for (const auto& r : h)
    a.push_back({{"round", r.round},
                 {"pool_size", r.pool_size},
                 {"threshold_param", r.threshold_param},
                 {"threshold", num(r.threshold)},
                 {"cv_error", r.cv_error},
                 {"new_labels", r.new_labels}});
  return a;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << content;
  if (!out) fail(ErrorKind::IoError, "write failed for " + path);
}

/// Git-style blob id: SHA-1 of "blob <size>\0" followed by the bytes.
inline std::string git_blob_sha1(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 || EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    fail(ErrorKind::IoError, "SHA-1 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// Shortest round-trip decimal form of a double.
inline std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace qlds
