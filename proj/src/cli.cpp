#include "drm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "drm/classifier.hpp"
#include "drm/error.hpp"
#include "drm/evaluation.hpp"
#include "drm/model_io.hpp"

namespace drm::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("invalid " + what + " '" + text + "'");
  }
}

long parse_long(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("invalid " + what + " '" + text + "'");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

struct DataFlags {
  std::string format;  // empty: infer from the extension
  int label_col = 0;
  bool has_header = false;

  void add_to(CLI::App& app) {
    app.add_option("--format", format, "Input format")->check(CLI::IsMember({"libsvm", "csv"}));
    app.add_option("--label-col", label_col, "CSV column holding the label (0-based)");
    app.add_flag("--has-header", has_header, "CSV input starts with a header row");
  }

  LabeledData load(const std::string& path, const ParseOptions& options = {}) const {
    std::string fmt = format;
    if (fmt.empty()) fmt = fs::path(path).extension() == ".csv" ? "csv" : "libsvm";
    const std::string text = read_text(path);
    if (fmt == "csv") {
      CsvOptions csv;
      csv.label_column = label_col;
      csv.has_header = has_header;
      return parse_csv(text, csv, options);
    }
    return parse_libsvm(text, options);
  }
};

struct ModelFlags {
  std::string kernel = "linear";
  double gamma = 1.0;
  int degree = 2;
  double coef0 = 1.0;
  double alpha = 0.0;
  double beta = 1.0;
  std::string solver;  // empty: size-based default
  double eps = 1e-5;
  int max_iter = 150;
  std::string c_strategy = "power";
  bool scale = false;

  CLI::Option* solver_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* max_iter_opt = nullptr;
  CLI::Option* c_opt = nullptr;

  void add_kernel(CLI::App& app) {
    app.add_option("--kernel", kernel, "Kernel family")->check(CLI::IsMember({"linear", "rbf", "poly"}));
    app.add_option("--gamma", gamma, "RBF width");
    app.add_option("--degree", degree, "Polynomial degree");
    app.add_option("--coef0", coef0, "Polynomial offset");
    app.add_option("--alpha", alpha, "Within-class scatter weight (>= 0)");
    app.add_option("--beta", beta, "Ridge weight (> 0)");
    app.add_flag("--scale", scale, "Divide each feature by its training max |value|");
  }

  void add_solver(CLI::App& app) {
    solver_opt = app.add_option("--solver", solver, "closed|gd|ppa|apg")
                     ->check(CLI::IsMember({"closed", "gd", "ppa", "apg"}));
    eps_opt = app.add_option("--eps", eps, "Step-norm tolerance for iterative solvers");
    max_iter_opt = app.add_option("--max-iter", max_iter, "Iteration cap for iterative solvers");
    c_opt = app.add_option("--c-strategy", c_strategy, "power|gershgorin|fixed:<v>");
  }

  KernelSpec kernel_spec() const {
    KernelSpec k;
    k.family = parse_family(kernel);
    k.gamma = gamma;
    k.degree = degree;
    k.coef0 = coef0;
    k.validate();
    return k;
  }

  SolverConfig solver_config(Index n) const {
    SolverConfig cfg;
    cfg.method = solver.empty() ? default_method(n) : parse_method(solver);
    cfg.eps = eps;
    cfg.max_iter = max_iter;
    cfg.c_strategy = CStrategy::parse(c_strategy);
    cfg.validate();
    return cfg;
  }

  /// Applies only the solver flags given explicitly on the command line.
  void override(SolverConfig& cfg) const {
    if (solver_opt && solver_opt->count()) cfg.method = parse_method(solver);
    if (eps_opt && eps_opt->count()) cfg.eps = eps;
    if (max_iter_opt && max_iter_opt->count()) cfg.max_iter = max_iter;
    if (c_opt && c_opt->count()) cfg.c_strategy = CStrategy::parse(c_strategy);
    cfg.validate();
  }
};

std::string join_sizes(const std::vector<Index>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? "," : "") + std::to_string(sizes[i]);
  return s;
}

void write_predictions(std::ostream& out, const DrmModel& model, const std::vector<Prediction>& preds) {
  out << std::setprecision(17);
  out << "index,label";
  for (int label : model.train.original_labels) out << ",delta_" << label;
  out << ",iterations\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    out << i << ',';
    if (p.ok()) out << p.label;
    for (Index k = 0; k < model.train.num_classes(); ++k) {
      out << ',';
      if (p.ok()) out << p.scores(k);
    }
    out << ',' << p.iterations << '\n';
  }
}

// Predicts every example of `test`, reporting per-example failures on `err`.
// Returns the number of failed examples.
std::size_t predict_all(const DrmClassifier& clf, const LabeledData& test, std::vector<Prediction>& preds,
                        std::ostream& err) {
  preds = clf.predict_batch(test.features);
  std::size_t failed = 0, unconverged = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].ok()) {
      unconverged += !preds[i].converged;
      continue;
    }
    ++failed;
    err << error_json("numerical_error", preds[i].error, static_cast<long>(i)) << '\n';
  }
  if (unconverged)
    err << nlohmann::json{{"warning", {{"kind", "max_iter"}, {"examples", unconverged},
                                       {"message", "solver stopped at max_iter before reaching eps"}}}}
               .dump()
        << '\n';
  return failed;
}

LabeledData load_test(const DataFlags& flags, const std::string& path, const DrmModel& model) {
  ParseOptions opts;
  opts.allow_empty = true;
  opts.min_features = model.train.num_features();
  return flags.load(path, opts);
}

KernelSpec parse_kernel_token(const std::string& token, double coef0) {
  const auto colon = token.find(':');
  const std::string family = token.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : token.substr(colon + 1);
  KernelSpec k;
  if (family == "linear") {
    k = KernelSpec::linear();
  } else if (family == "rbf") {
    k = KernelSpec::rbf(arg.empty() ? 1.0 : parse_double(arg, "rbf gamma"));
  } else if (family == "poly") {
    k = KernelSpec::polynomial(arg.empty() ? 2 : static_cast<int>(parse_long(arg, "polynomial degree")), coef0);
  } else {
    throw ValidationError("unknown kernel '" + token + "' (expected linear, rbf:<gamma> or poly:<degree>)");
  }
  k.validate();
  return k;
}

std::vector<bool> parse_scaling(const std::string& text) {
  if (text == "off") return {false};
  if (text == "on") return {true};
  if (text == "both") return {false, true};
  throw ValidationError("scaling must be off, on or both");
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(item, what));
  return out;
}

SplitSpec parse_split(const std::string& text, Index n, std::uint64_t seed) {
  if (text == "auto") return auto_split(n, seed);
  if (text == "loo") return SplitSpec::leave_one_out();
  if (text.rfind("kfold:", 0) == 0) return SplitSpec::kfold(static_cast<int>(parse_long(text.substr(6), "fold count")), seed);
  if (text.rfind("holdout:", 0) == 0) return SplitSpec::holdout(parse_double(text.substr(8), "holdout fraction"), seed);
  throw ValidationError("split must be auto, loo, kfold:<k> or holdout:<fraction>");
}

struct Median {
  static double of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  }
};

int cmd_train(const std::string& data_path, const DataFlags& data, const ModelFlags& mf, const std::string& out_dir,
              std::ostream& out) {
  const LabeledData raw = data.load(data_path);
  const GroupedDataset ds = group_by_label(raw.features, raw.labels);
  DrmModel model;
  model.train = ds;
  model.kernel = mf.kernel_spec();
  model.params = {mf.alpha, mf.beta};
  model.params.validate();
  model.solver = mf.solver_config(ds.num_examples());
  if (mf.scale) {
    model.scaling = scale_fit(ds.features);
    model.train.features = model.scaling->apply(ds.features);
  }
  save_model(model, out_dir);
  out << "n=" << ds.num_examples() << " p=" << ds.num_features() << " g=" << ds.num_classes()
      << " group_sizes=" << join_sizes(ds.blocks.sizes()) << '\n';
  return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& test_path, const DataFlags& data,
                const ModelFlags& mf, const std::string& out_path, std::ostream& out, std::ostream& err) {
  DrmModel model = load_model(model_dir);
  mf.override(model.solver);
  const LabeledData test = load_test(data, test_path, model);
  std::vector<Prediction> preds;
  std::size_t failed = 0;
  if (test.num_examples() > 0) {
    const DrmClassifier clf(std::move(model));
    failed = predict_all(clf, test, preds, err);
    model = clf.model();
  }
  if (out_path.empty()) {
    write_predictions(out, model, preds);
  } else {
    auto file = open_output(out_path);
    write_predictions(file, model, preds);
  }
  return failed ? 1 : 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& test_path, const DataFlags& data,
                 const ModelFlags& mf, const std::string& metric, std::optional<int> positive,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
  DrmModel model = load_model(model_dir);
  mf.override(model.solver);
  const LabeledData test = load_test(data, test_path, model);
  if (test.num_examples() == 0) throw ValidationError("evaluation needs at least one test example");
  const DrmClassifier clf(std::move(model));
  std::vector<Prediction> preds;
  const std::size_t failed = predict_all(clf, test, preds, err);
  std::vector<int> predicted;
  for (const auto& p : preds) predicted.push_back(p.ok() ? p.label : 0);
  if (!out_path.empty()) {
    auto file = open_output(out_path);
    write_predictions(file, clf.model(), preds);
  }

  out << std::setprecision(6);
  out << "examples=" << test.num_examples() << '\n';
  out << "accuracy=" << accuracy(predicted, test.labels) << '\n';
  if (parse_metric(metric) == Metric::gmean) out << "gmean=" << g_mean(predicted, test.labels, positive) << '\n';
  const ConfusionMatrix cm = confusion(predicted, test.labels);
  out << "confusion actual\\predicted";
  for (int l : cm.labels) out << ',' << l;
  out << '\n';
  for (Index r = 0; r < cm.counts.rows(); ++r) {
    out << cm.labels[static_cast<std::size_t>(r)];
    for (Index c = 0; c < cm.counts.cols(); ++c) out << ',' << cm.counts(r, c);
    out << '\n';
  }
  return failed ? 1 : 0;
}

struct CvFlags {
  std::string grid_file;
  std::string kernels;
  std::string alphas;
  std::string betas;
  std::string scaling;
  std::string split = "auto";
  std::string metric = "accuracy";
  std::uint64_t seed = 0;
  std::optional<int> positive;
  long subsample_cap = 3000;
};

Grid build_grid(const CvFlags& f, double coef0) {
  std::map<std::string, std::string> spec;
  if (!f.grid_file.empty()) {
    std::istringstream in(read_text(f.grid_file));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("grid file: expected key=value", line_no);
      const std::string key = trim(line.substr(0, eq));
      if (key != "kernels" && key != "alphas" && key != "betas" && key != "scaling")
        throw ParseError("grid file: unknown key '" + key + "'", line_no);
      spec[key] = trim(line.substr(eq + 1));
    }
  }
  if (!f.kernels.empty()) spec["kernels"] = f.kernels;
  if (!f.alphas.empty()) spec["alphas"] = f.alphas;
  if (!f.betas.empty()) spec["betas"] = f.betas;
  if (!f.scaling.empty()) spec["scaling"] = f.scaling;

  // A user-specified grid is taken literally: scaling stays off unless asked for.
  Grid grid = Grid::standard();
  if (!spec.empty()) grid.scaling = {false};
  if (spec.count("kernels")) {
    grid.kernels.clear();
    for (const auto& t : split_list(spec["kernels"])) grid.kernels.push_back(parse_kernel_token(t, coef0));
  }
  if (spec.count("alphas")) grid.alphas = parse_doubles(spec["alphas"], "alpha");
  if (spec.count("betas")) grid.betas = parse_doubles(spec["betas"], "beta");
  if (spec.count("scaling")) grid.scaling = parse_scaling(spec["scaling"]);
  grid.validate();
  return grid;
}

int cmd_cv(const std::string& data_path, const DataFlags& data, const CvFlags& f, double coef0,
           const std::string& out_path, std::ostream& out) {
  const LabeledData raw = data.load(data_path);
  const GroupedDataset ds = group_by_label(raw.features, raw.labels);
  CvOptions options;
  options.metric = parse_metric(f.metric);
  options.seed = f.seed;
  options.positive_label = f.positive;
  options.subsample_cap = f.subsample_cap;
  options.split = parse_split(f.split, std::min<Index>(ds.num_examples(), f.subsample_cap), f.seed);
  const Grid grid = build_grid(f, coef0);
  const CvResult result = grid_search(ds, grid, options);
  {
    auto file = open_output(out_path);
    write_cv_csv(file, result);
  }
  std::size_t flagged = 0;
  for (const auto& c : result.cells) flagged += c.flagged();
  const CvCell& best = result.best();
  out << std::setprecision(6);
  out << "cells=" << result.cells.size() << " flagged=" << flagged << " examples=" << result.examples_used << '\n';
  out << "best kernel=" << best.kernel.name() << " kernel_param=" << best.kernel.parameter() << " alpha=" << best.alpha
      << " beta=" << best.beta << " scaled=" << (best.scaled ? 1 : 0) << ' ' << metric_name(result.metric) << '='
      << best.mean_metric << " std=" << best.std_metric << '\n';
  return 0;
}

struct BenchFlags {
  std::string solvers = "gd,ppa,apg";
  std::string sizes;
  int repeats = 1;
  std::string backend = "auto";
  std::uint64_t seed = 0;
};

int cmd_bench(const std::string& data_path, const DataFlags& data, const ModelFlags& mf, const BenchFlags& bf,
              const std::string& out_dir, std::ostream& out) {
  if (bf.repeats < 1) throw ValidationError("--repeats must be >= 1");
  const LabeledData raw = data.load(data_path);
  GroupedDataset ds = group_by_label(raw.features, raw.labels);
  if (mf.scale) ds.features = scale_fit(ds.features).apply(ds.features);
  std::vector<SolverMethod> methods;
  for (const auto& s : split_list(bf.solvers)) methods.push_back(parse_method(s));
  std::vector<Index> sizes;
  for (const auto& s : split_list(bf.sizes)) {
    const long v = parse_long(s, "size");
    if (v < 2) throw ValidationError("bench sizes must be >= 2");
    if (v > ds.num_examples())
      throw ValidationError("bench size " + s + " exceeds the " + std::to_string(ds.num_examples()) +
                            " available examples");
    sizes.push_back(v);
  }
  if (methods.empty() || sizes.empty()) throw ValidationError("bench needs at least one solver and one size");
  if (bf.backend != "auto" && bf.backend != "dense" && bf.backend != "linear")
    throw ValidationError("--backend must be auto, dense or linear");
  const KernelSpec kernel = mf.kernel_spec();
  const DrmHyperParams params{mf.alpha, mf.beta};
  params.validate();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  auto summary = open_output(fs::path(out_dir) / "summary.csv");
  summary << std::setprecision(17);
  summary << "solver,n,repeats,median_ns_per_iteration,median_iterations,final_objective,termination\n";
  out << std::setprecision(6);

  for (Index size : sizes) {
    for (SolverMethod method : methods) {
      std::vector<double> per_iter, iters;
      double final_objective = 0.0;
      std::string termination;
      for (int r = 0; r < bf.repeats; ++r) {
        const std::uint64_t seed = bf.seed + static_cast<std::uint64_t>(r);
        const std::vector<Index> cols = stratified_subsample(ds, size, seed);
        // Test point: a held-out column when one exists, else the data mean.
        Eigen::VectorXd x = ds.features.rowwise().mean();
        if (size < ds.num_examples()) {
          std::vector<Index> rest;
          std::size_t c = 0;
          for (Index j = 0; j < ds.num_examples(); ++j) {
            if (c < cols.size() && cols[c] == j) {
              ++c;
              continue;
            }
            rest.push_back(j);
          }
          deterministic_shuffle(rest, seed);
          x = ds.features.col(rest.front());
        }
        DrmModel model;
        model.train = subset(ds, cols);
        model.kernel = kernel;
        model.params = params;
        model.solver = mf.solver_config(size);
        model.solver.method = method;
        DrmClassifier::Options options;
        if (bf.backend == "auto")
          options.linear_backend = kernel.family == KernelSpec::Family::linear;
        else
          options.linear_backend = bf.backend == "linear";
        const DrmClassifier clf(std::move(model), options);
        const SolverReport report = clf.solve_for(x);

        const fs::path trace_path = fs::path(out_dir) / ("trace_" + method_name(method) + "_n" + std::to_string(size) +
                                                         "_r" + std::to_string(r) + ".csv");
        auto trace = open_output(trace_path);
        write_trace_csv(trace, report);
        const double elapsed = report.trace.empty() ? 0.0 : static_cast<double>(report.trace.back().elapsed_ns);
        per_iter.push_back(elapsed / std::max(1, report.iterations));
        iters.push_back(report.iterations);
        const Eigen::VectorXd kx = compute_cross(kernel, clf.model().train.features, x).col(0);
        final_objective = objective(clf.op(), kx, params.beta, report.w);
        termination = termination_name(report.termination);
      }
      summary << method_name(method) << ',' << size << ',' << bf.repeats << ',' << Median::of(per_iter) << ','
              << Median::of(iters) << ',' << final_objective << ',' << termination << '\n';
      out << method_name(method) << " n=" << size << " median_ns_per_iteration=" << Median::of(per_iter)
          << " iterations=" << Median::of(iters) << " objective=" << final_objective << '\n';
    }
  }
  return 0;
}

}  // namespace

std::string error_json(const std::string& kind, const std::string& message, long example) {
  nlohmann::json j{{"kind", kind}, {"message", message}};
  if (example >= 0) j["example"] = example;
  return nlohmann::json{{"error", j}}.dump();
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_path.empty()) return kept;

  auto given = [&](const std::string& flag) {
    return std::any_of(kept.begin(), kept.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::istringstream in(read_text(config_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key=value", line_no);
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw ParseError("config: empty key", line_no);
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "true") {
      kept.push_back(flag);
    } else if (value != "false") {
      kept.push_back(flag);
      kept.push_back(value);
    }
  }
  return kept;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discriminative regression machine classifier"};
  app.require_subcommand(1);

  DataFlags data;
  ModelFlags mf;
  std::string data_path, model_dir, out_path;

  auto* train = app.add_subcommand("train", "Fit a model and write model.json + train.bin");
  train->add_option("data", data_path, "Training data")->required();
  data.add_to(*train);
  mf.add_kernel(*train);
  mf.add_solver(*train);
  train->add_option("--out", out_path, "Model directory")->required();

  DataFlags pdata;
  ModelFlags pmf;
  auto* predict = app.add_subcommand("predict", "Predict labels for a test file");
  predict->add_option("--model", model_dir, "Model directory")->required();
  predict->add_option("test", data_path, "Test data")->required();
  pdata.add_to(*predict);
  pmf.add_solver(*predict);
  predict->add_option("--out", out_path, "Predictions CSV (default: stdout)");

  DataFlags edata;
  ModelFlags emf;
  std::string metric = "accuracy";
  std::optional<int> positive;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on labelled test data");
  evaluate->add_option("--model", model_dir, "Model directory")->required();
  evaluate->add_option("test", data_path, "Test data")->required();
  edata.add_to(*evaluate);
  emf.add_solver(*evaluate);
  evaluate->add_option("--metric", metric, "accuracy|gmean")->check(CLI::IsMember({"accuracy", "gmean"}));
  evaluate->add_option("--positive-label", positive, "Positive class for G-mean (default: minority)");
  evaluate->add_option("--out", out_path, "Also write the predictions CSV here");

  DataFlags cdata;
  CvFlags cf;
  double cv_coef0 = 1.0;
  auto* cv = app.add_subcommand("cv", "Grid-search cross-validation");
  cv->add_option("data", data_path, "Training data")->required();
  cdata.add_to(*cv);
  cv->add_option("--grid-file", cf.grid_file, "key=value file with kernels, alphas, betas, scaling");
  cv->add_option("--kernels", cf.kernels, "e.g. linear,rbf:0.1,poly:3");
  cv->add_option("--alphas", cf.alphas, "Comma-separated alpha values");
  cv->add_option("--betas", cf.betas, "Comma-separated beta values");
  cv->add_option("--scaling", cf.scaling, "off|on|both");
  cv->add_option("--coef0", cv_coef0, "Polynomial offset for poly kernels");
  cv->add_option("--split", cf.split, "auto|loo|kfold:<k>|holdout:<fraction>");
  cv->add_option("--metric", cf.metric, "accuracy|gmean")->check(CLI::IsMember({"accuracy", "gmean"}));
  cv->add_option("--positive-label", cf.positive, "Positive class for G-mean (default: minority)");
  cv->add_option("--subsample-cap", cf.subsample_cap, "Training examples used for CV at most");
  cv->add_option("--seed", cf.seed, "Seed for splits and subsampling");
  cv->add_option("--out", out_path, "CV table CSV")->required();

  DataFlags bdata;
  ModelFlags bmf;
  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Time solvers over training-set sizes");
  bench->add_option("data", data_path, "Training data")->required();
  bdata.add_to(*bench);
  bmf.add_kernel(*bench);
  bmf.add_solver(*bench);
  bench->add_option("--solvers", bf.solvers, "Comma-separated solver list");
  bench->add_option("--sizes", bf.sizes, "Comma-separated training sizes")->required();
  bench->add_option("--repeats", bf.repeats, "Runs per (solver, size)");
  bench->add_option("--backend", bf.backend, "auto|dense|linear");
  bench->add_option("--seed", bf.seed, "Subsampling seed");
  bench->add_option("--out", out_path, "Output directory")->required();

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage_error", e.what()) << '\n';
    return 2;
  } catch (const Error& e) {
    err << error_json(e.kind(), e.what()) << '\n';
    return 1;
  }

  try {
    if (*train) return cmd_train(data_path, data, mf, out_path, out);
    if (*predict) return cmd_predict(model_dir, data_path, pdata, pmf, out_path, out, err);
    if (*evaluate) return cmd_evaluate(model_dir, data_path, edata, emf, metric, positive, out_path, out, err);
    if (*cv) return cmd_cv(data_path, cdata, cf, cv_coef0, out_path, out);
    if (*bench) return cmd_bench(data_path, bdata, bmf, bf, out_path, out);
  } catch (const Error& e) {
    err << error_json(e.kind(), e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << error_json("internal_error", e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace drm::cli
