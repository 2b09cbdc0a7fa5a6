// qlds: command-line front end for fitting, model selection and the benchmark suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlds/qlds.hpp"

namespace fs = std::filesystem;
using namespace qlds;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  std::string lambda_source = "whole";
  double lambda_inflation = 1e-3;
  std::string proportion_mode = "matched";
  std::string g_sign_variant = "standard";
  unsigned jobs = default_jobs();
};

struct InputArgs {
  std::string path;
  std::string format = "auto";
  std::string label_column = "label";
  std::string flag_column = "labeled";
  Index n_labeled = 20;
};

struct GmmArgs {
  Index d = 100;
  double mu_norm = 2.0;
  Index nl1 = 10, nl2 = 10, nu1 = 1000, nu2 = 1000;
};

std::string resolve_format(const InputArgs& in) {
  if (in.format != "auto") return in.format;
  const auto ext = fs::path(in.path).extension().string();
  return (ext == ".csv") ? "csv" : "libsvm";
}

Dataset load_input(const InputArgs& in, std::uint64_t seed) {
  const auto f = resolve_format(in);
  if (f == "csv") return load_csv(in.path, in.label_column, in.flag_column);
  if (f == "libsvm") return load_libsvm(in.path, in.n_labeled, seed);
  fail(ErrorKind::InvalidArgument, "unknown input format '" + f + "'");
}

void add_input_options(CLI::App* cmd, InputArgs& in, bool required) {
  auto* o = cmd->add_option("--input,-i", in.path, "Data file (CSV with header, or libsvm text)");
  if (required) o->required();
  cmd->add_option("--format", in.format, "Input format")->check(CLI::IsMember({"auto", "csv", "libsvm"}))->capture_default_str();
  cmd->add_option("--label-column", in.label_column, "CSV column holding labels in {-1,+1} or {0,1}")->capture_default_str();
  cmd->add_option("--flag-column", in.flag_column, "CSV column holding the labeled flag (1 labeled, 0 unlabeled)")->capture_default_str();
  cmd->add_option("--n-labeled", in.n_labeled, "libsvm: number of rows drawn (stratified, seeded) as labeled")->capture_default_str();
}

void add_gmm_options(CLI::App* cmd, GmmArgs& g) {
  cmd->add_option("--d", g.d, "Dimension")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--mu-norm", g.mu_norm, "Distance between class means")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--nl1", g.nl1, "Labeled samples of class 1 (label -1)")->capture_default_str();
  cmd->add_option("--nl2", g.nl2, "Labeled samples of class 2 (label +1)")->capture_default_str();
  cmd->add_option("--nu1", g.nu1, "Unlabeled samples of class 1")->capture_default_str();
  cmd->add_option("--nu2", g.nu2, "Unlabeled samples of class 2")->capture_default_str();
}

GmmSpec to_spec(const GmmArgs& g, std::uint64_t seed) { return {g.d, g.mu_norm, g.nl1, g.nl2, g.nu1, g.nu2, seed}; }

SelectionOptions selection_options(const Globals& gl) {
  SelectionOptions so;
  so.lambda.source = gl.lambda_source == "whole" ? LambdaSource::whole : LambdaSource::unlabeled;
  so.lambda.inflation = gl.lambda_inflation;
  so.assume_matched_proportions = gl.proportion_mode == "matched";
  so.variant = parse_theory_variant(gl.g_sign_variant);
  so.seed = derive_seed(gl.seed, 0, 1);
  so.jobs = gl.jobs;
  return so;
}

Grid load_grid(const std::string& path, int size) {
  if (path.empty()) return Grid::lattice(size);
  std::istringstream in(read_file(path));
  Grid g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split(t, ',');
    double a, b;
    if (cells.size() != 2 || !detail::parse_double(cells[0], a) || !detail::parse_double(cells[1], b)) {
      if (lineno == 1) continue;  // header
      fail(ErrorKind::ParseError, path + ": line " + std::to_string(lineno) + ": expected 'alpha_l,alpha_u'");
    }
    g.points.push_back({a, b});
  }
  g.validate();
  return g;
}

fs::path out_path(const Globals& gl, const std::string& name) {
  std::error_code ec;
  fs::create_directories(gl.output_dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create output directory " + gl.output_dir);
  return fs::path(gl.output_dir) / name;
}

json metadata(const CLI::App& app, const Globals& gl, const std::vector<std::string>& inputs) {
  json m;
  m["config"] = app.config_to_str(true, false);
  m["seed"] = gl.seed;
  m["lambda_source"] = gl.lambda_source;
  m["lambda_inflation"] = gl.lambda_inflation;
  m["proportion_mode"] = gl.proportion_mode;
  m["theory_variant"] = gl.g_sign_variant;
  json h = json::object();
  for (const auto& p : inputs) h[p] = git_blob_sha1(read_file(p));
  m["inputs"] = h;
  return m;
}

std::string predictions_csv(const Vec& f) {
  std::string s = "index,score,label\n";
  for (Eigen::Index i = 0; i < f.size(); ++i) s += std::to_string(i) + "," + fmt(f(i)) + "," + (f(i) < 0 ? "-1" : "1") + "\n";
  return s;
}

std::string gmm_csv(const Dataset& ds) {
  std::ostringstream o;
  for (Index i = 0; i < ds.dim(); ++i) o << "x" << (i + 1) << ",";
  o << "label,labeled\n";
  std::vector<int> y(ds.n(), 0), flag(ds.n(), 0);
  for (Index k = 0; k < ds.labeled_idx.size(); ++k) {
    y[ds.labeled_idx[k]] = ds.labels[k];
    flag[ds.labeled_idx[k]] = 1;
  }
  for (Index k = 0; k < ds.unlabeled_idx.size(); ++k) y[ds.unlabeled_idx[k]] = (*ds.true_unlabeled_labels)[k];
  for (Index j = 0; j < ds.n(); ++j) {
    for (Index i = 0; i < ds.dim(); ++i) o << fmt(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ",";
    o << y[j] << "," << flag[j] << "\n";
  }
  return o.str();
}

/// Feature-only CSV for prediction: every column except the named label/flag columns.
Mat load_feature_csv(const std::string& path, const std::string& label_column, const std::string& flag_column) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, path + ": missing header row");
  const auto header = detail::split(line, ',');
  std::vector<char> use(header.size(), 1);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == label_column || header[c] == flag_column) use[c] = 0;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) fail(ErrorKind::ParseError, path + ": line " + std::to_string(lineno) + ": wrong cell count");
    std::vector<double> r;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!use[c]) continue;
      double v;
      if (!detail::parse_double(cells[c], v))
        fail(ErrorKind::ParseError, path + ": " + detail::where(lineno, c + 1) + ": not a number");
      r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  const auto d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Mat x(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (Eigen::Index i = 0; i < d; ++i) x(i, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(i)];
  return x;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream o;
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  return o.str();
}

void print_error(const Error& e) {
  json j{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}, {"exit_code", exit_code(e.kind())}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlds: semi-supervised quadratic-margin classifier with label-free hyperparameter selection"};
  app.set_config("--config", "", "Read options from a TOML/INI key = value file ([subcommand] sections)");
  app.require_subcommand(1);
  Globals gl;
  app.add_option("--seed", gl.seed, "Root seed; per-trial seeds are derived from it")->capture_default_str();
  app.add_option("--output-dir,-o", gl.output_dir, "Directory for report files")->capture_default_str();
  app.add_option("--lambda-source", gl.lambda_source, "Gram used for the default lambda")
      ->check(CLI::IsMember({"whole", "unlabeled"}))
      ->capture_default_str();
  app.add_option("--lambda-inflation", gl.lambda_inflation, "lambda = (1 + inflation) * lambda_max")->capture_default_str();
  app.add_option("--proportion-mode", gl.proportion_mode, "Unlabeled class proportions: matched to labeled, or from truth")
      ->check(CLI::IsMember({"matched", "truth"}))
      ->capture_default_str();
  app.add_option("--g-sign-variant", gl.g_sign_variant, "Theory formula set")
      ->check(CLI::IsMember({"standard", "legacy-plus", "legacy-minus"}))
      ->capture_default_str();
  app.add_option("--jobs,-j", gl.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // fit
  auto* fit = app.add_subcommand("fit", "Center data, select (alpha_l, alpha_u), fit and write model + predictions");
  InputArgs fit_in;
  std::string fit_select = "th", fit_grid_file;
  double fit_al = 1.0, fit_au = 0.0, fit_lambda = 0.0;
  int fit_grid = 11, fit_folds = 10;
  add_input_options(fit, fit_in, true);
  fit->add_option("--select", fit_select, "Selector: th (theory), cv, or (oracle), fixed")
      ->check(CLI::IsMember({"th", "cv", "or", "fixed"}))
      ->capture_default_str();
  fit->add_option("--alpha-l", fit_al, "alpha_l for --select fixed")->capture_default_str();
  fit->add_option("--alpha-u", fit_au, "alpha_u for --select fixed")->capture_default_str();
  fit->add_option("--lambda", fit_lambda, "Explicit lambda (0 = default policy)")->capture_default_str();
  fit->add_option("--grid-size", fit_grid, "Points per axis of the [0,1]^2 lattice")->capture_default_str();
  fit->add_option("--grid-file", fit_grid_file, "CSV of alpha_l,alpha_u pairs (overrides --grid-size)");
  fit->add_option("--folds", fit_folds, "Cross-validation folds")->capture_default_str();

  // predict
  auto* pred = app.add_subcommand("predict", "Score a feature CSV with a saved model");
  std::string pred_model, pred_input, pred_label = "label", pred_flag = "labeled";
  pred->add_option("--model,-m", pred_model, "Model JSON from fit")->required();
  pred->add_option("--input,-i", pred_input, "CSV with header; label/flag columns are ignored if present")->required();
  pred->add_option("--label-column", pred_label)->capture_default_str();
  pred->add_option("--flag-column", pred_flag)->capture_default_str();

  // gmm
  auto* gmm = app.add_subcommand("gmm", "Write a two-class Gaussian mixture dataset as CSV");
  GmmArgs gmm_args;
  std::string gmm_out = "gmm.csv";
  add_gmm_options(gmm, gmm_args);
  gmm->add_option("--out", gmm_out, "Output file name inside the output directory")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Seeded trials of several methods with Mann-Whitney comparisons");
  InputArgs bench_in;
  GmmArgs bench_gmm;
  std::vector<std::string> bench_methods{"th", "cv", "or", "ls-svm", "gb-ssl", "st"};
  int bench_trials = 20, bench_grid = 11, bench_folds = 10;
  std::string bench_reference;
  add_input_options(bench, bench_in, false);
  add_gmm_options(bench, bench_gmm);
  bench->add_option("--methods", bench_methods, "Methods: th cv or ls-svm gb-ssl qlds11 st")->capture_default_str()->delimiter(',');
  bench->add_option("--trials", bench_trials, "Number of seeded trials")->capture_default_str();
  bench->add_option("--grid-size", bench_grid)->capture_default_str();
  bench->add_option("--folds", bench_folds)->capture_default_str();
  bench->add_option("--reference", bench_reference, "Print reference errors for a named dataset alongside (informational)");

  // density
  auto* dens = app.add_subcommand("density", "Empirical vs predicted score densities on Gaussian mixtures");
  GmmArgs dens_gmm;
  dens_gmm.nl1 = dens_gmm.nl2 = 100;
  double dens_al = 1.0, dens_au = 0.0;
  int dens_seeds = 20;
  add_gmm_options(dens, dens_gmm);
  dens->add_option("--alpha-l", dens_al)->capture_default_str();
  dens->add_option("--alpha-u", dens_au)->capture_default_str();
  dens->add_option("--seeds", dens_seeds)->capture_default_str();

  // phase
  auto* phase = app.add_subcommand("phase", "Gain of theory-selected QLDS over LS-SVM by labeled size and task difficulty");
  GmmArgs phase_gmm;
  std::vector<Index> phase_sizes{10, 20, 40, 80};
  std::vector<double> phase_mu{1.0, 2.0, 3.0, 5.0};
  int phase_seeds = 20, phase_grid = 11;
  add_gmm_options(phase, phase_gmm);
  phase->add_option("--labeled-sizes", phase_sizes)->capture_default_str()->delimiter(',');
  phase->add_option("--mu-norms", phase_mu)->capture_default_str()->delimiter(',');
  phase->add_option("--seeds", phase_seeds)->capture_default_str();
  phase->add_option("--grid-size", phase_grid)->capture_default_str();

  // proportions
  auto* prop = app.add_subcommand("proportions", "Selection with inferred vs true unlabeled class proportions");
  GmmArgs prop_gmm;
  prop_gmm.d = 200;
  std::vector<double> prop_ratios{0.05, 1.0 / 15, 0.1, 0.2, 0.25, 1.0 / 3, 0.5, 1.0};
  Index prop_nl = 80;
  int prop_seeds = 10, prop_grid = 11;
  add_gmm_options(prop, prop_gmm);
  prop->add_option("--ratios", prop_ratios)->capture_default_str()->delimiter(',');
  prop->add_option("--n-labeled", prop_nl)->capture_default_str();
  prop->add_option("--seeds", prop_seeds)->capture_default_str();
  prop->add_option("--grid-size", prop_grid)->capture_default_str();

  // runtime
  auto* rt = app.add_subcommand("runtime", "Wall-clock of theory-based vs cross-validation selection");
  std::vector<Index> rt_sizes{50, 100, 200};
  int rt_grid = 11, rt_folds = 10;
  rt->add_option("--sizes", rt_sizes, "Values of d (n_lj = n_uj = d)")->capture_default_str()->delimiter(',');
  rt->add_option("--grid-size", rt_grid)->capture_default_str();
  rt->add_option("--folds", rt_folds)->capture_default_str();

  // losslab
  auto* ll = app.add_subcommand("losslab", "Oracle-selected errors of six loss combinations trained with Adam");
  GmmArgs ll_gmm;
  ll_gmm.d = 50;
  ll_gmm.nu1 = ll_gmm.nu2 = 200;
  std::vector<double> ll_al{1.0}, ll_au{0.0, 0.5, 1.0}, ll_lscale{1.0};
  OptimConfig ll_opt;
  add_gmm_options(ll, ll_gmm);
  ll->add_option("--alphas-l", ll_al)->capture_default_str()->delimiter(',');
  ll->add_option("--alphas-u", ll_au)->capture_default_str()->delimiter(',');
  ll->add_option("--lambda-scales", ll_lscale, "Multiples of the default lambda")->capture_default_str()->delimiter(',');
  ll->add_option("--epochs", ll_opt.epochs)->capture_default_str();
  ll->add_option("--learning-rate", ll_opt.learning_rate)->capture_default_str();
  ll->add_option("--weight-decay", ll_opt.weight_decay)->capture_default_str();

  // diag-fixedpoint
  auto* diag = app.add_subcommand("diag-fixedpoint", "Solve the fixed point and print score statistics as JSON");
  double dg_cl1 = 0.05, dg_cl2 = 0.05, dg_cu1 = 0.45, dg_cu2 = 0.45, dg_c0 = 0.5, dg_al = 1, dg_au = 0.5, dg_lambda = 2;
  double dg_g11 = 1, dg_g12 = 0, dg_g22 = 1;
  diag->add_option("--cl1", dg_cl1)->capture_default_str();
  diag->add_option("--cl2", dg_cl2)->capture_default_str();
  diag->add_option("--cu1", dg_cu1)->capture_default_str();
  diag->add_option("--cu2", dg_cu2)->capture_default_str();
  diag->add_option("--c0", dg_c0)->capture_default_str();
  diag->add_option("--alpha-l", dg_al)->capture_default_str();
  diag->add_option("--alpha-u", dg_au)->capture_default_str();
  diag->add_option("--lambda", dg_lambda)->capture_default_str();
  diag->add_option("--g11", dg_g11, "Mean Gram entry mu1.mu1")->capture_default_str();
  diag->add_option("--g12", dg_g12, "Mean Gram entry mu1.mu2")->capture_default_str();
  diag->add_option("--g22", dg_g22, "Mean Gram entry mu2.mu2")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const SelectionOptions so = selection_options(gl);

    if (*fit) {
      const Dataset raw = load_input(fit_in, derive_seed(gl.seed, 0, 3));
      const Dataset ds = center(raw);
      SelectionOptions o = so;
      o.folds = fit_folds;
      if (fit_lambda > 0) o.lambda.fixed = fit_lambda;
      SelectionMethod m = SelectionMethod::theoretical;
      Grid grid;
      if (fit_select == "fixed") {
        m = SelectionMethod::fixed;
        grid.points = {{fit_al, fit_au}};
      } else {
        grid = load_grid(fit_grid_file, fit_grid);
        m = fit_select == "th" ? SelectionMethod::theoretical : fit_select == "cv" ? SelectionMethod::cross_validation : SelectionMethod::oracle;
      }
      auto [model, sel] = fit_with_selection(ds, m, grid, o);
      model.center = Vec(raw.features.rowwise().mean());
      const Vec f = decision_scores(model, ds.features);
      std::vector<std::string> inputs{fit_in.path};
      if (!fit_grid_file.empty()) inputs.push_back(fit_grid_file);
      json sj = to_json(sel);
      sj["metadata"] = metadata(app, gl, inputs);
      write_file(out_path(gl, "model.json").string(), to_json(model).dump(2) + "\n");
      write_file(out_path(gl, "predictions.csv").string(), predictions_csv(f));
      write_file(out_path(gl, "selection.json").string(), sj.dump(2) + "\n");
      std::printf("fit: method=%s alpha_l=%g alpha_u=%g lambda=%.6g", to_string(sel.method).c_str(), sel.chosen.alpha_l,
                  sel.chosen.alpha_u, sel.lambda);
      if (raw.true_unlabeled_labels && raw.n_unlabeled() > 0) std::printf(" transductive_error=%.4f", transductive_error(model, ds));
      std::printf("\n");
    } else if (*pred) {
      const LinearModel model = model_from_json(json::parse(read_file(pred_model)));
      Mat x = load_feature_csv(pred_input, pred_label, pred_flag);
      if (model.center) {
        if (x.rows() != model.center->size()) fail(ErrorKind::DimensionMismatch, "input dimension differs from model");
        x.colwise() -= *model.center;
      }
      const Vec f = decision_scores(model, x);
      write_file(out_path(gl, "predictions.csv").string(), predictions_csv(f));
      std::printf("predict: %ld points scored\n", static_cast<long>(f.size()));
    } else if (*gmm) {
      const Dataset ds = generate_gmm(to_spec(gmm_args, gl.seed));
      const auto p = out_path(gl, gmm_out);
      write_file(p.string(), gmm_csv(ds));
      std::printf("gmm: wrote %s (d=%zu, n=%zu)\n", p.string().c_str(), ds.dim(), ds.n());
    } else if (*bench) {
      BenchOptions bo;
      bo.grid = Grid::lattice(bench_grid);
      bo.selection = so;
      bo.selection.folds = bench_folds;
      bo.jobs = gl.jobs;
      TrialSource src;
      std::vector<std::string> inputs;
      if (!bench_in.path.empty()) {
        // Pool every row with its label; each trial draws a fresh stratified labeled subset.
        Dataset all = load_input(bench_in, gl.seed);
        std::vector<int> labels(all.n(), 0);
        bool truth = all.true_unlabeled_labels.has_value();
        for (Index k = 0; k < all.labeled_idx.size(); ++k) labels[all.labeled_idx[k]] = all.labels[k];
        if (!truth && all.n_unlabeled()) fail(ErrorKind::MissingTruth, "bench input needs labels on every row");
        for (Index k = 0; k < all.unlabeled_idx.size(); ++k) labels[all.unlabeled_idx[k]] = (*all.true_unlabeled_labels)[k];
        const Index nl = resolve_format(bench_in) == "csv" ? all.n_labeled() : bench_in.n_labeled;
        src = resplit_source(all.features, labels, nl);
        inputs.push_back(bench_in.path);
      } else {
        src = gmm_source(to_spec(bench_gmm, 0));
      }
      const auto rep = run_benchmark(src, bench_methods, bench_trials, gl.seed, bo);
      std::ostringstream csv;
      csv << "method,mean_error,std_error,failed,best,significantly_worse\n";
      json j;
      j["metadata"] = metadata(app, gl, inputs);
      json rows = json::array();
      for (const auto& s : rep.summary) {
        csv << s.method << "," << fmt(s.error.mean) << "," << fmt(s.error.std) << "," << s.failed << "," << s.best << ","
            << s.significantly_worse << "\n";
        rows.push_back({{"method", s.method}, {"mean", num(s.error.mean)}, {"std", num(s.error.std)}, {"failed", s.failed},
                        {"best", s.best}, {"significantly_worse", s.significantly_worse}});
      }
      j["summary"] = rows;
      j["p_values"] = rep.p_values;
      json trials = json::array();
      for (const auto& t : rep.trials) {
        json tj = json::array();
        for (const auto& r : t) {
          json e{{"seed", r.seed}, {"method", r.method}, {"error", num(r.error)}, {"seconds", r.seconds}};
          if (r.chosen) e["chosen"] = {r.chosen->alpha_l, r.chosen->alpha_u};
          if (!r.failure.empty()) e["failure"] = r.failure;
          tj.push_back(e);
        }
        trials.push_back(tj);
      }
      j["trials"] = trials;
      write_file(out_path(gl, "bench.csv").string(), csv.str());
      write_file(out_path(gl, "bench.json").string(), j.dump(2) + "\n");
      const auto ref = bench_reference.empty() ? std::nullopt : reference_errors(bench_reference);
      if (!bench_reference.empty() && !ref) std::printf("no reference values for '%s'\n", bench_reference.c_str());
      std::printf("%-8s %16s  %s\n", "method", "error % (mean±std)", ref ? "reference % (informational)" : "");
      for (const auto& s : rep.summary) {
        std::printf("%-8s %7.2f ± %5.2f%s%s", s.method.c_str(), 100 * s.error.mean, 100 * s.error.std,
                    s.significantly_worse ? " v" : "  ", s.best ? " *" : "  ");
        if (ref && ref->count(s.method)) std::printf("   %6.2f ± %5.2f", ref->at(s.method).mean, ref->at(s.method).std);
        std::printf("\n");
      }
    } else if (*dens) {
      const auto rep = density_match(to_spec(dens_gmm, gl.seed), {dens_al, dens_au}, dens_seeds, so, gl.jobs);
      json j;
      j["metadata"] = metadata(app, gl, {});
      j["empirical_mean"] = rep.empirical_mean;
      j["empirical_std"] = rep.empirical_std;
      j["theory_mean"] = rep.theory_mean;
      j["theory_sigma"] = rep.theory_sigma;
      j["mean_delta"] = rep.mean_delta;
      j["std_delta"] = rep.std_delta;
      j["empirical_error"] = rep.empirical_error;
      j["theory_error"] = rep.theory_error;
      j["pass"] = rep.pass;
      std::ostringstream h;
      h << "bin,lo,hi,class1,class2\n";
      const double w = (rep.histogram.hi - rep.histogram.lo) / kHistogramBins;
      for (int b = 0; b < kHistogramBins; ++b)
        h << b << "," << fmt(rep.histogram.lo + b * w) << "," << fmt(rep.histogram.lo + (b + 1) * w) << ","
          << rep.histogram.class1[static_cast<std::size_t>(b)] << "," << rep.histogram.class2[static_cast<std::size_t>(b)] << "\n";
      write_file(out_path(gl, "density.json").string(), j.dump(2) + "\n");
      write_file(out_path(gl, "density_histogram.csv").string(), h.str());
      std::printf("density: m=(%.4f, %.4f) emp=(%.4f, %.4f) sigma=%.4f emp_std=(%.4f, %.4f) eps*=%.4f emp_err=%.4f %s\n",
                  rep.theory_mean[0], rep.theory_mean[1], rep.empirical_mean[0], rep.empirical_mean[1], rep.theory_sigma,
                  rep.empirical_std[0], rep.empirical_std[1], rep.theory_error, rep.empirical_error, rep.pass ? "PASS" : "FAIL");
    } else if (*phase) {
      BenchOptions bo;
      bo.grid = Grid::lattice(phase_grid);
      bo.selection = so;
      bo.jobs = gl.jobs;
      const auto pd = phase_diagram(phase_sizes, phase_mu, to_spec(phase_gmm, gl.seed), phase_seeds, bo);
      std::ostringstream csv;
      csv << "n_labeled,mu_norm,gain\n";
      for (std::size_t i = 0; i < pd.labeled_sizes.size(); ++i)
        for (std::size_t k = 0; k < pd.mu_norms.size(); ++k)
          csv << pd.labeled_sizes[i] << "," << fmt(pd.mu_norms[k]) << "," << fmt(pd.gain[i][k]) << "\n";
      write_file(out_path(gl, "phase.csv").string(), csv.str());
      json j{{"metadata", metadata(app, gl, {})}, {"labeled_sizes", pd.labeled_sizes}, {"mu_norms", pd.mu_norms}};
      json g = json::array();
      for (const auto& row : pd.gain) {
        json r = json::array();
        for (double v : row) r.push_back(num(v));
        g.push_back(r);
      }
      j["gain"] = g;
      write_file(out_path(gl, "phase.json").string(), j.dump(2) + "\n");
      std::printf("phase: %zu x %zu cells written to phase.csv\n", pd.labeled_sizes.size(), pd.mu_norms.size());
    } else if (*prop) {
      BenchOptions bo;
      bo.grid = Grid::lattice(prop_grid);
      bo.selection = so;
      bo.jobs = gl.jobs;
      const auto rows = proportion_robustness(to_spec(prop_gmm, gl.seed), prop_nl, prop_ratios, prop_seeds, bo);
      std::ostringstream csv;
      csv << "ratio,nl1,nl2,error_assumed,error_truth,same_choice\n";
      for (const auto& r : rows)
        csv << fmt(r.ratio) << "," << r.nl1 << "," << r.nl2 << "," << fmt(r.error_assumed) << "," << fmt(r.error_truth) << ","
            << r.agree << "/" << r.seeds << "\n";
      write_file(out_path(gl, "proportions.csv").string(), csv.str());
      json j{{"metadata", metadata(app, gl, {})}};
      write_file(out_path(gl, "proportions.json").string(), j.dump(2) + "\n");
      std::printf("proportions: %zu rows written to proportions.csv\n", rows.size());
    } else if (*rt) {
      const auto rows = runtime_compare(rt_sizes, Grid::lattice(rt_grid), rt_folds, gl.seed, so);
      std::ostringstream csv;
      csv << "d,n,t_theory,t_cv,fits_theory,fits_cv\n";
      for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.3f,%.3f,%ld,%ld\n", r.d, r.n, r.t_theory, r.t_cv, r.fits_theory, r.fits_cv);
        csv << buf;
      }
      write_file(out_path(gl, "runtime.csv").string(), csv.str());
      std::printf("%s", csv.str().c_str());
    } else if (*ll) {
      const Dataset ds = center(generate_gmm(to_spec(ll_gmm, gl.seed)));
      const double lam0 = so.lambda.resolve(ds);
      std::vector<LossGridPoint> grid;
      for (double a : ll_al)
        for (double b : ll_au)
          for (double s : ll_lscale) grid.push_back({a, b, s * lam0});
      const auto rows = loss_grid_oracle_compare(ds, LossSpec::all(), grid, ll_opt, gl.jobs);
      std::ostringstream csv;
      csv << "spec,alpha_l,alpha_u,lambda,oracle_error\n";
      for (const auto& r : rows)
        csv << r.spec << "," << fmt(r.alpha_l) << "," << fmt(r.alpha_u) << "," << fmt(r.lambda) << "," << fmt(r.oracle_error) << "\n";
      write_file(out_path(gl, "losslab.csv").string(), csv.str());
      json j{{"metadata", metadata(app, gl, {})},
             {"optimizer", {{"epochs", ll_opt.epochs}, {"learning_rate", ll_opt.learning_rate}, {"weight_decay", ll_opt.weight_decay},
                            {"batch", "full"}, {"init", "zero"}}}};
      write_file(out_path(gl, "losslab.json").string(), j.dump(2) + "\n");
      std::printf("%s", csv.str().c_str());
    } else if (*diag) {
      const Proportions p{{dg_cl1, dg_cl2}, {dg_cu1, dg_cu2}, dg_c0};
      const HyperParams hp{dg_al, dg_au, dg_lambda, gl.lambda_inflation};
      Mat2 g;
      g << dg_g11, dg_g12, dg_g12, dg_g22;
      const auto fp = solve_fixed_point(p, hp, so.variant);
      json j{{"fixed_point", to_json(fp)}};
      try {
        j["stats"] = to_json(theory_statistics(fp, p, GramEstimate::exact(g), hp));
      } catch (const Error& e) {
        j["stats_error"] = e.what();
      }
      std::printf("%s\n", j.dump(2).c_str());
    }
  } catch (const Error& e) {
    print_error(e);
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    print_error(Error(ErrorKind::ParseError, e.what()));
    return 2;
  }
  return 0;
}
