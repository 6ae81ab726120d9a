#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "drm/dataset.hpp"

namespace drm {

/// Kernel family and parameters.
///   linear:     k(x, y) = x'y
///   rbf:        k(x, y) = exp(-gamma * |x - y|^2)
///   polynomial: k(x, y) = (scale * x'y + coef0)^degree
struct KernelSpec {
  enum class Family { linear, rbf, polynomial };

  Family family = Family::linear;
  double gamma = 1.0;
  int degree = 2;
  double coef0 = 1.0;
  double scale = 1.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double gamma);
  static KernelSpec polynomial(int degree, double coef0 = 1.0, double scale = 1.0);

  void validate() const;

  /// The family's tunable parameter (gamma or degree; 0 for linear).
  double parameter() const;
  std::string name() const;
  std::string describe() const;

  bool operator==(const KernelSpec&) const = default;
};

std::string family_name(KernelSpec::Family family);
KernelSpec::Family parse_family(const std::string& name);

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// n x n Gram matrix of the columns of `a`.
Eigen::MatrixXd compute_K(const KernelSpec& spec, const Eigen::MatrixXd& a);
/// Cross kernel: entry (i, j) = k(a_i, x_j); n x m.
Eigen::MatrixXd compute_cross(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x);
/// Diagonal k(x_i, x_i) of the Gram matrix.
Eigen::VectorXd compute_H(const KernelSpec& spec, const Eigen::MatrixXd& a);
/// Per-class blocks K^i / n_i.
std::vector<Eigen::MatrixXd> compute_B(const KernelSpec& spec, const GroupedDataset& ds);
/// [k(x, x_1), ..., k(x, x_n)] in grouped column order.
Eigen::VectorXd compute_Kx(const KernelSpec& spec, const GroupedDataset& ds, const Eigen::VectorXd& x);

/// Convenience bundle used by the closed-form path and the tests.
struct KernelMatrices {
  Eigen::MatrixXd K;
  Eigen::VectorXd H;
  std::vector<Eigen::MatrixXd> B;
};

KernelMatrices compute_kernel_matrices(const KernelSpec& spec, const GroupedDataset& ds);

/// Per-block B blocks taken from an already computed K.
std::vector<Eigen::MatrixXd> blocks_from_K(const Eigen::MatrixXd& K, const ClassBlocks& blocks);

}  // namespace drm
