#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Core>

#include "drm/dataset.hpp"
#include "drm/kernels.hpp"

namespace drm {

/// The symmetric PSD system operator v -> (K + alpha*H - alpha*B) v.
///
/// Three backends share one interface:
///  - dense: K is held explicitly and Q is materialized once (n^2 per matvec);
///  - linear: K = A'A for the training matrix A (p x n); K is never formed and
///    a matvec costs two passes over A;
///  - factorized: K ~= G'G for a user-supplied factor G (r x n), same algebra
///    as the linear backend with G in place of A.
///
/// The operator is immutable and cheap to copy; apply() is reentrant.
class QOperator {
 public:
  enum class Backend { dense, linear, factorized };

  static QOperator dense(Eigen::MatrixXd K, ClassBlocks blocks, double alpha);
  static QOperator linear(Eigen::MatrixXd A, ClassBlocks blocks, double alpha);
  static QOperator factorized(Eigen::MatrixXd G, ClassBlocks blocks, double alpha);

  Backend backend() const { return backend_; }
  Index size() const { return blocks_.total(); }
  double alpha() const { return alpha_; }
  const ClassBlocks& blocks() const { return blocks_; }

  /// Diagonal of H, i.e. k(x_i, x_i).
  const Eigen::VectorXd& kernel_diagonal() const { return h_; }

  /// out = Q v.
  void apply(const Eigen::VectorXd& v, Eigen::VectorXd& out) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  /// K v.
  Eigen::VectorXd apply_kernel(const Eigen::VectorXd& v) const;
  /// K W for a block of vectors (dense backend uses one GEMM).
  Eigen::MatrixXd apply_kernel(const Eigen::MatrixXd& w) const;

  /// (v|C_k)' K (v|C_k): the kernel quadratic form restricted to class k.
  double class_quadratic(Index k, const Eigen::VectorXd& v) const;
  /// Column-wise version of class_quadratic for a block of vectors.
  Eigen::RowVectorXd class_quadratic(Index k, const Eigen::MatrixXd& w) const;

  /// True for the linear and factorized backends, where K = F'F.
  bool feature_backed() const { return features_ != nullptr; }

  /// Feature backends only. Per-class projections P with P.col(k) = F_k v_k;
  /// Qv and v'Qv are both determined by P and v.
  Eigen::MatrixXd project(const Eigen::VectorXd& v) const;
  /// v'Qv from v and its projections, without touching F.
  double quadratic(const Eigen::MatrixXd& proj, const Eigen::VectorXd& v) const;

  /// Receives one column block of Qv (rows [offset, offset + qv.size())) and
  /// writes the matching block of y.
  using SweepFn = std::function<void(Index offset, const Eigen::Ref<const Eigen::VectorXd>& qv,
                                     Eigen::Ref<Eigen::VectorXd> y)>;
  /// Feature backends only. One streaming pass over F: forms Qv block by block
  /// from v and proj = project(v), lets `emit` turn each block into y, and
  /// returns project(y) accumulated while the block is still in cache.
  Eigen::MatrixXd sweep(const Eigen::VectorXd& v, const Eigen::MatrixXd& proj, Eigen::VectorXd& y,
                        const SweepFn& emit) const;

  /// Q as an explicit n x n matrix (computed on demand for non-dense backends).
  Eigen::MatrixXd to_dense() const;
  /// The explicit Q of the dense backend, nullptr otherwise.
  const Eigen::MatrixXd* dense_q() const;

  /// Tr(K).
  double kernel_trace() const;
  /// max_i sum_j |K_ij|; only available on the dense backend.
  std::optional<double> kernel_inf_norm() const;
  /// Mean of diag(Q).
  double mean_diagonal() const;

 private:
  struct DenseData {
    Eigen::MatrixXd k;
    Eigen::MatrixXd q;
  };

  QOperator() = default;
  static QOperator from_features(Eigen::MatrixXd F, ClassBlocks blocks, double alpha, Backend backend);

  Backend backend_ = Backend::dense;
  ClassBlocks blocks_;
  double alpha_ = 0.0;
  Eigen::VectorXd h_;
  std::shared_ptr<const DenseData> dense_;
  std::shared_ptr<const Eigen::MatrixXd> features_;  // A or G, one column per example
};

QOperator make_factor_operator(Eigen::MatrixXd G, ClassBlocks blocks, double alpha);

/// Builds the operator for `kernel` on grouped training data, choosing the
/// linear backend when requested and the kernel is linear.
QOperator make_operator(const KernelSpec& kernel, const GroupedDataset& ds, double alpha, bool prefer_linear_backend);

struct SpectralEstimate {
  double c = 0.0;          // upper estimate of sigma_max(Q)
  bool certified = false;  // false: power iteration hit max_iter, c is the Gershgorin-style bound
  int iterations = 0;
};

/// Power iteration on Q; on convergence returns the Rayleigh quotient inflated
/// by (1 + 2 tol). Falls back to gershgorin_bound() when max_iter is reached.
SpectralEstimate sigma_max_estimate(const QOperator& op, double tol = 1e-3, int max_iter = 200);

/// min{Tr K, |K|_inf} + alpha * max_i k(x_i, x_i) for the dense backend,
/// Tr K + alpha * max_i k(x_i, x_i) otherwise. Always >= sigma_max(Q).
double gershgorin_bound(const QOperator& op);

}  // namespace drm
