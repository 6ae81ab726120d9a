#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "drm/dataset.hpp"
#include "drm/kernels.hpp"
#include "drm/q_operator.hpp"
#include "drm/solvers.hpp"

namespace drm {

/// w with every entry outside class block k zeroed.
Eigen::VectorXd restrict_to_class(const Eigen::VectorXd& w, Index k, const ClassBlocks& blocks);
/// w with every entry inside class block k zeroed.
Eigen::VectorXd restrict_to_complement(const Eigen::VectorXd& w, Index k, const ClassBlocks& blocks);

/// Kernel-space dissimilarity of the test point to every class:
///   delta_k = (w|C_k)'K(w|C_k) + (w|~C_k)'K(w|~C_k) - 2 (w|C_k)'Kx.
/// Uses one shared K w and the class-block quadratic forms; K(w|~C_k) is never
/// formed. delta_k differs from the input-space ||x - psi_k||^2 + ||psi~_k||^2
/// by the constant k(x, x), so argmins agree.
Eigen::VectorXd dissimilarities(const Eigen::VectorXd& w, const QOperator& op, const Eigen::VectorXd& kx);
/// Column-wise version; returns a g x m matrix.
Eigen::MatrixXd dissimilarities(const Eigen::MatrixXd& w, const QOperator& op, const Eigen::MatrixXd& kx);

/// Index of the smallest entry; ties resolve to the lowest index.
Index argmin_lowest(const Eigen::VectorXd& scores);

struct Prediction {
  int label = 0;            // original label
  Index class_index = -1;   // 0-based class block
  Eigen::VectorXd scores;   // delta per class
  int iterations = 0;
  bool converged = true;    // false when the iterative solver hit max_iter
  std::string error;        // non-empty when this example could not be scored

  bool ok() const { return error.empty(); }
};

/// Everything needed to rebuild a trained classifier. `train.features` are
/// already scaled when `scaling` is set.
struct DrmModel {
  GroupedDataset train;
  KernelSpec kernel;
  DrmHyperParams params;
  SolverConfig solver;
  std::optional<ScalingTransform> scaling;
};

/// Solver suggested for a training set of n examples: closed form up to 2000,
/// PPA beyond.
SolverMethod default_method(Index n);

class DrmClassifier {
 public:
  struct Options {
    /// Use the matrix-free linear backend for linear kernels with iterative
    /// solvers. Defaults to n > 2000.
    std::optional<bool> linear_backend;
    /// Precomputed Gram matrix of model.train.features (skips recomputation).
    const Eigen::MatrixXd* precomputed_kernel = nullptr;
  };

  explicit DrmClassifier(DrmModel model) : DrmClassifier(std::move(model), Options{}) {}
  DrmClassifier(DrmModel model, const Options& options);

  /// Groups nothing: `train` is already grouped and unscaled. With `scale`,
  /// the scaling transform is fitted on `train` and applied.
  static DrmClassifier fit(const GroupedDataset& train, const KernelSpec& kernel, const DrmHyperParams& params,
                           const SolverConfig& solver, bool scale);

  const DrmModel& model() const { return model_; }
  const QOperator& op() const { return op_; }
  /// PPA constant in use (0 for other solvers).
  double ppa_constant() const { return c_; }

  Prediction predict_one(const Eigen::VectorXd& x) const;
  std::vector<Prediction> predict_batch(const Eigen::MatrixXd& x) const;

  /// Decision from a precomputed kernel vector Kx (test point already scaled).
  Prediction decide(const Eigen::VectorXd& kx) const;
  /// Decisions for every column of a precomputed n x m cross-kernel matrix.
  std::vector<Prediction> decide_batch(const Eigen::MatrixXd& kx) const;

  /// Solver report for one test point, for inspection and benchmarking.
  SolverReport solve_for(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd prepare(const Eigen::MatrixXd& x) const;
  Prediction make_prediction(const Eigen::VectorXd& scores, const SolverReport* report) const;

  DrmModel model_;
  QOperator op_;
  std::optional<ClosedFormSolver> closed_;
  double c_ = 0.0;
};

}  // namespace drm
