#include "drm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "drm/error.hpp"

namespace drm {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: prediction and truth lengths differ");
  if (truth.empty()) throw ValidationError("accuracy of an empty prediction set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double g_mean(const BinaryConfusion& cm) {
  if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0) throw ValidationError("confusion counts must be >= 0");
  if (cm.tp + cm.fn == 0) throw ValidationError("G-mean undefined: no actual positive examples");
  if (cm.tn + cm.fp == 0) throw ValidationError("G-mean undefined: no actual negative examples");
  const double tpr = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  const double tnr = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  return std::sqrt(tpr * tnr);
}

Index ConfusionMatrix::index_of(int label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  return it != labels.end() && *it == label ? static_cast<Index>(it - labels.begin()) : -1;
}

BinaryConfusion ConfusionMatrix::binary(int positive_label) const {
  const Index pos = index_of(positive_label);
  BinaryConfusion b;
  for (Index r = 0; r < counts.rows(); ++r)
    for (Index c = 0; c < counts.cols(); ++c) {
      const long v = counts(r, c);
      const bool actual_pos = r == pos;
      const bool pred_pos = c == pos;
      if (actual_pos && pred_pos) b.tp += v;
      else if (actual_pos) b.fn += v;
      else if (pred_pos) b.fp += v;
      else b.tn += v;
    }
  return b;
}

ConfusionMatrix confusion(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("confusion: prediction and truth lengths differ");
  if (truth.empty()) throw ValidationError("confusion matrix of an empty prediction set");
  std::set<int> all(truth.begin(), truth.end());
  all.insert(predicted.begin(), predicted.end());
  ConfusionMatrix cm;
  cm.labels.assign(all.begin(), all.end());
  const auto g = static_cast<Index>(cm.labels.size());
  cm.counts = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(g, g);
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts(cm.index_of(truth[i]), cm.index_of(predicted[i]));
  return cm;
}

int minority_label(const std::vector<int>& truth) {
  if (truth.empty()) throw ValidationError("minority label of an empty label set");
  std::map<int, long> counts;
  for (int l : truth) ++counts[l];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second < best->second) best = it;
  return best->first;
}

double g_mean(const std::vector<int>& predicted, const std::vector<int>& truth, std::optional<int> positive) {
  std::set<int> distinct(truth.begin(), truth.end());
  if (distinct.size() != 2) throw ValidationError("G-mean needs exactly two classes in the ground truth");
  const int pos = positive.value_or(minority_label(truth));
  if (!distinct.count(pos)) throw ValidationError("positive label " + std::to_string(pos) + " not in ground truth");
  return g_mean(confusion(predicted, truth).binary(pos));
}

std::string metric_name(Metric m) { return m == Metric::accuracy ? "accuracy" : "gmean"; }

Metric parse_metric(const std::string& name) {
  if (name == "accuracy") return Metric::accuracy;
  if (name == "gmean" || name == "g-mean") return Metric::gmean;
  throw ValidationError("unknown metric '" + name + "' (expected accuracy or gmean)");
}

std::vector<double> Grid::decades() { return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

Grid Grid::standard() {
  Grid g;
  g.kernels.push_back(KernelSpec::linear());
  for (double gamma : decades()) g.kernels.push_back(KernelSpec::rbf(gamma));
  for (int degree : {2, 3, 4, 5, 8, 10}) g.kernels.push_back(KernelSpec::polynomial(degree));
  g.alphas = decades();
  g.betas = decades();
  g.scaling = {false, true};
  return g;
}

void Grid::validate() const {
  if (kernels.empty() || alphas.empty() || betas.empty() || scaling.empty())
    throw ValidationError("grid must have at least one kernel, alpha, beta and scaling option");
  for (const auto& k : kernels) k.validate();
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("grid alpha values must be >= 0");
  for (double b : betas)
    if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("grid beta values must be > 0");
}

SplitSpec auto_split(Index n, std::uint64_t seed) {
  return n <= 300 ? SplitSpec::leave_one_out() : SplitSpec::kfold(5, seed, true);
}

namespace {

int family_rank(KernelSpec::Family f) {
  switch (f) {
    case KernelSpec::Family::linear:
      return 0;
    case KernelSpec::Family::rbf:
      return 1;
    case KernelSpec::Family::polynomial:
      return 2;
  }
  return 3;
}

// True when `a` should be preferred over `b` at equal mean metric.
bool tie_preferred(const CvCell& a, const CvCell& b) {
  if (a.beta != b.beta) return a.beta < b.beta;
  if (a.alpha != b.alpha) return a.alpha < b.alpha;
  const int fa = family_rank(a.kernel.family), fb = family_rank(b.kernel.family);
  if (fa != fb) return fa < fb;
  if (a.kernel.parameter() != b.kernel.parameter()) return a.kernel.parameter() < b.kernel.parameter();
  return !a.scaled && b.scaled;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

CvResult grid_search(const GroupedDataset& train_in, const Grid& grid, const CvOptions& options) {
  grid.validate();
  options.solver.validate();

  const GroupedDataset data = train_in.num_examples() > options.subsample_cap
                                  ? subset(train_in, stratified_subsample(train_in, options.subsample_cap, options.seed))
                                  : train_in;
  CvResult result;
  result.metric = options.metric;
  result.split = options.split.value_or(auto_split(data.num_examples(), options.seed));
  result.examples_used = data.num_examples();
  const std::vector<Fold> folds = split(data, result.split);
  const bool pooled = options.metric == Metric::gmean && result.split.mode == SplitSpec::Mode::leave_one_out;
  const std::vector<int> all_labels = data.column_labels();

  std::optional<int> positive = options.positive_label;
  if (options.metric == Metric::gmean) {
    if (data.num_classes() != 2) throw ValidationError("G-mean model selection needs a two-class problem");
    if (!positive) positive = minority_label(all_labels);
  }

  // Cell order: scaling, kernel, alpha, beta.
  for (bool scaled : grid.scaling)
    for (const auto& kernel : grid.kernels)
      for (double alpha : grid.alphas)
        for (double beta : grid.betas) {
          CvCell cell;
          cell.kernel = kernel;
          cell.alpha = alpha;
          cell.beta = beta;
          cell.scaled = scaled;
          cell.folds = static_cast<int>(folds.size());
          result.cells.push_back(cell);
        }
  const std::size_t per_scaling = grid.kernels.size() * grid.alphas.size() * grid.betas.size();
  std::vector<std::vector<double>> fold_metrics(result.cells.size());
  std::vector<std::vector<int>> pooled_predictions(result.cells.size(),
                                                   std::vector<int>(static_cast<std::size_t>(data.num_examples()), 0));

  auto record_failure = [&](std::size_t cell, const std::string& message) {
    auto& c = result.cells[cell];
    if (c.failed_folds++ == 0) c.failure = message;
  };

  // Predictions of every (kernel, alpha, beta) cell for one fold.
  struct Outcome {
    std::vector<int> predicted;
    std::string failure;  // non-empty when the cell failed on this fold
  };
  auto evaluate_fold = [&](const GroupedDataset& fold_train, const Eigen::MatrixXd& test_x) {
    std::vector<Outcome> outcomes;
    outcomes.reserve(per_scaling);
    const auto m = static_cast<std::size_t>(test_x.cols());
    for (const auto& kernel : grid.kernels) {
      const Eigen::MatrixXd K = compute_K(kernel, fold_train.features);
      const Eigen::MatrixXd kx = compute_cross(kernel, fold_train.features, test_x);
      for (double alpha : grid.alphas) {
        std::optional<QOperator> op;
        std::string op_failure;
        if (options.solver.method == SolverMethod::closed_form) {
          try {
            op = QOperator::dense(K, fold_train.blocks, alpha);
          } catch (const Error& e) {
            op_failure = e.what();
          }
        }
        for (double beta : grid.betas) {
          Outcome o;
          o.predicted.assign(m, 0);
          try {
            if (!op_failure.empty()) throw NumericalError(op_failure);
            Eigen::MatrixXd delta;
            if (op) {
              // Same computation DrmClassifier performs, without rebuilding Q per beta.
              const ClosedFormSolver solver(*op, beta);
              delta = dissimilarities(solver.solve_many(kx), *op, kx);
              for (std::size_t j = 0; j < m; ++j) {
                const Eigen::VectorXd scores = delta.col(static_cast<Index>(j));
                if (!scores.allFinite()) throw NumericalError("non-finite dissimilarity scores");
                o.predicted[j] = fold_train.original_labels[static_cast<std::size_t>(argmin_lowest(scores))];
              }
            } else {
              DrmModel model;
              model.train = fold_train;
              model.kernel = kernel;
              model.params = {alpha, beta};
              model.solver = options.solver;
              DrmClassifier::Options clf_options;
              clf_options.precomputed_kernel = &K;
              const DrmClassifier clf(std::move(model), clf_options);
              const auto preds = clf.decide_batch(kx);
              for (std::size_t j = 0; j < m; ++j) {
                if (!preds[j].ok()) throw NumericalError(preds[j].error);
                o.predicted[j] = preds[j].label;
              }
            }
          } catch (const Error& e) {
            o.failure = e.what();
            std::fill(o.predicted.begin(), o.predicted.end(), 0);
          }
          outcomes.push_back(std::move(o));
        }
      }
    }
    return outcomes;
  };

  for (const Fold& fold : folds) {
    std::vector<int> truth;
    for (Index j : fold.test) truth.push_back(data.original_label(j));
    Eigen::MatrixXd test_x(data.num_features(), static_cast<Index>(fold.test.size()));
    for (std::size_t j = 0; j < fold.test.size(); ++j) test_x.col(static_cast<Index>(j)) = data.features.col(fold.test[j]);

    std::optional<GroupedDataset> fold_train;
    std::string fold_failure;
    try {
      fold_train = subset(data, fold.train);
    } catch (const Error& e) {
      fold_failure = e.what();
    }

    std::optional<std::vector<Outcome>> unscaled;
    for (std::size_t s = 0; s < grid.scaling.size(); ++s) {
      std::vector<Outcome> outcomes;
      if (!fold_failure.empty()) {
        outcomes.assign(per_scaling, Outcome{std::vector<int>(truth.size(), 0), fold_failure});
      } else if (!grid.scaling[s]) {
        if (!unscaled) unscaled = evaluate_fold(*fold_train, test_x);
        outcomes = *unscaled;
      } else {
        const ScalingTransform t = scale_fit(fold_train->features);
        if ((t.divisors.array() == 1.0).all()) {
          // Scaling is the identity here; the unscaled cells already hold the answer.
          if (!unscaled) unscaled = evaluate_fold(*fold_train, test_x);
          outcomes = *unscaled;
        } else {
          GroupedDataset scaled_train = *fold_train;
          scaled_train.features = t.apply(fold_train->features);
          outcomes = evaluate_fold(scaled_train, t.apply(test_x));
        }
      }

      for (std::size_t c = 0; c < per_scaling; ++c) {
        const std::size_t cell = s * per_scaling + c;
        const Outcome& o = outcomes[c];
        const bool failed = !o.failure.empty();
        if (failed) record_failure(cell, o.failure);
        if (pooled) {
          for (std::size_t j = 0; j < fold.test.size(); ++j)
            pooled_predictions[cell][static_cast<std::size_t>(fold.test[j])] = o.predicted[j];
        } else if (failed) {
          fold_metrics[cell].push_back(0.0);
        } else if (options.metric == Metric::accuracy) {
          fold_metrics[cell].push_back(accuracy(o.predicted, truth));
        } else {
          double gm = 0.0;
          try {
            gm = g_mean(confusion(o.predicted, truth).binary(*positive));
          } catch (const ValidationError& e) {
            record_failure(cell, e.what());
          }
          fold_metrics[cell].push_back(gm);
        }
      }
    }
  }

  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    if (pooled) {
      cell.mean_metric = g_mean(confusion(pooled_predictions[c], all_labels).binary(*positive));
      cell.std_metric = 0.0;
    } else {
      cell.mean_metric = mean_of(fold_metrics[c]);
      cell.std_metric = sample_std(fold_metrics[c]);
    }
  }

  std::size_t best = 0;
  for (std::size_t c = 1; c < result.cells.size(); ++c) {
    const auto& a = result.cells[c];
    const auto& b = result.cells[best];
    if (a.mean_metric > b.mean_metric || (a.mean_metric == b.mean_metric && tie_preferred(a, b))) best = c;
  }
  result.selected = best;
  return result;
}

void write_cv_csv(std::ostream& out, const CvResult& result) {
  const auto old_precision = out.precision(17);
  out << "kernel,kernel_param,alpha,beta,scaled,mean_metric,std_metric\n";
  for (const auto& c : result.cells)
    out << c.kernel.name() << ',' << c.kernel.parameter() << ',' << c.alpha << ',' << c.beta << ','
        << (c.scaled ? 1 : 0) << ',' << c.mean_metric << ',' << c.std_metric << '\n';
  out.precision(old_precision);
}

}  // namespace drm
