#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "drm/classifier.hpp"
#include "drm/dataset.hpp"
#include "drm/kernels.hpp"
#include "drm/solvers.hpp"

namespace drm {

/// Fraction of positions where predicted == truth. Throws on empty or
/// mismatched input.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Counts for a binary problem; "positive" is usually the minority class.
struct BinaryConfusion {
  long tp = 0;
  long fn = 0;
  long fp = 0;
  long tn = 0;

  long total() const { return tp + fn + fp + tn; }
};

/// sqrt(TP/(TP+FN) * TN/(TN+FP)). Throws ValidationError when either class
/// has no actual examples.
double g_mean(const BinaryConfusion& cm);

/// g x g counts, rows = actual label, columns = predicted label. The label set
/// is the sorted union of both inputs.
struct ConfusionMatrix {
  std::vector<int> labels;
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;

  long total() const { return counts.sum(); }
  /// Index of `label` in `labels`, or -1.
  Index index_of(int label) const;
  BinaryConfusion binary(int positive_label) const;
};

ConfusionMatrix confusion(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Label with the fewest occurrences (lowest label on ties).
int minority_label(const std::vector<int>& truth);

/// G-mean with `positive` (or the minority class of `truth`) as positive.
/// Requires exactly two distinct labels in `truth`.
double g_mean(const std::vector<int>& predicted, const std::vector<int>& truth,
              std::optional<int> positive = std::nullopt);

enum class Metric { accuracy, gmean };

std::string metric_name(Metric m);
Metric parse_metric(const std::string& name);

/// Hyperparameter grid. Every combination of kernel x alpha x beta x scaling
/// is one cell.
struct Grid {
  std::vector<KernelSpec> kernels;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<bool> scaling{false};

  /// linear, rbf gamma in {1e-3..1e3}, poly degree in {2,3,4,5,8,10};
  /// alpha, beta in {1e-3..1e3}; scaling off and on.
  static Grid standard();
  /// The seven decades 1e-3, 1e-2, ..., 1e3.
  static std::vector<double> decades();

  std::size_t size() const { return kernels.size() * alphas.size() * betas.size() * scaling.size(); }
  void validate() const;
};

struct CvCell {
  KernelSpec kernel;
  double alpha = 0.0;
  double beta = 1.0;
  bool scaled = false;
  double mean_metric = 0.0;
  double std_metric = 0.0;
  int folds = 0;
  int failed_folds = 0;  // folds where fitting or solving failed; they score 0
  std::string failure;   // first failure message

  bool flagged() const { return failed_folds > 0; }
};

struct CvResult {
  std::vector<CvCell> cells;
  std::size_t selected = 0;
  Metric metric = Metric::accuracy;
  SplitSpec split;
  Index examples_used = 0;

  const CvCell& best() const { return cells.at(selected); }
};

struct CvOptions {
  Metric metric = Metric::accuracy;
  /// nullopt selects leave-one-out when n <= 300, stratified 5-fold otherwise.
  std::optional<SplitSpec> split;
  /// Larger training sets are subsampled (stratified, seeded) before CV.
  Index subsample_cap = 3000;
  std::uint64_t seed = 0;
  /// Positive class for G-mean; defaults to the minority class.
  std::optional<int> positive_label;
  SolverConfig solver;
};

/// The split `grid_search` would use for n examples.
SplitSpec auto_split(Index n, std::uint64_t seed);

/// Cross-validates every grid cell and selects the best mean metric.
/// Ties go to smaller beta, then smaller alpha, then kernel family order
/// linear < rbf < poly, then smaller kernel parameter, then unscaled.
///
/// Per-fold metrics are averaged (sample standard deviation across folds).
/// Under leave-one-out the G-mean is computed once on the pooled
/// out-of-fold predictions and its std is reported as 0.
CvResult grid_search(const GroupedDataset& train, const Grid& grid, const CvOptions& options);

/// `kernel,kernel_param,alpha,beta,scaled,mean_metric,std_metric` rows.
void write_cv_csv(std::ostream& out, const CvResult& result);

}  // namespace drm
