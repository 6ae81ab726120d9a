#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "drm/dataset.hpp"
#include "drm/kernels.hpp"
#include "drm/q_operator.hpp"
#include "drm/solvers.hpp"

namespace drm::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Index uniform_int(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

inline Eigen::VectorXd random_vector(Rng& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

/// Grouped dataset with the given class sizes; features ~ N(class offset, 1/p)
/// so inner products stay O(1) regardless of p.
inline GroupedDataset random_dataset(Rng& rng, Index p, const std::vector<Index>& sizes, double spread = 1.0) {
  Index n = 0;
  for (Index s : sizes) n += s;
  Eigen::MatrixXd a(p, n);
  std::vector<int> labels;
  Index col = 0;
  const double sd = 1.0 / std::sqrt(static_cast<double>(p));
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const Eigen::VectorXd centre = random_vector(rng, p, spread * sd);
    for (Index i = 0; i < sizes[k]; ++i, ++col) {
      a.col(col) = centre + random_vector(rng, p, sd);
      labels.push_back(static_cast<int>(k) + 1);
    }
  }
  // Shuffle the columns so grouping has real work to do.
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::MatrixXd shuffled(p, n);
  std::vector<int> shuffled_labels;
  for (Index i = 0; i < n; ++i) {
    shuffled.col(i) = a.col(order[static_cast<std::size_t>(i)]);
    shuffled_labels.push_back(labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  return group_by_label(shuffled, shuffled_labels);
}

/// Class sizes summing to n over g classes, each at least 1.
inline std::vector<Index> random_sizes(Rng& rng, Index n, Index g) {
  std::vector<Index> sizes(static_cast<std::size_t>(g), 1);
  for (Index i = g; i < n; ++i) ++sizes[static_cast<std::size_t>(uniform_int(rng, 0, g - 1))];
  return sizes;
}

inline KernelSpec random_kernel(Rng& rng, KernelSpec::Family family) {
  switch (family) {
    case KernelSpec::Family::linear:
      return KernelSpec::linear();
    case KernelSpec::Family::rbf:
      return KernelSpec::rbf(std::pow(10.0, uniform(rng, -1.0, 0.5)));
    case KernelSpec::Family::polynomial:
      return KernelSpec::polynomial(static_cast<int>(uniform_int(rng, 1, 3)));
  }
  return KernelSpec::linear();
}

inline const std::vector<KernelSpec::Family>& all_families() {
  static const std::vector<KernelSpec::Family> f{KernelSpec::Family::linear, KernelSpec::Family::rbf,
                                                 KernelSpec::Family::polynomial};
  return f;
}

inline Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Q = K + alpha*diag(K) - alpha*blockdiag(K^i / n_i), built entry by entry.
inline Eigen::MatrixXd reference_q(const Eigen::MatrixXd& K, const ClassBlocks& blocks, double alpha) {
  Eigen::MatrixXd q = K;
  for (Index i = 0; i < K.rows(); ++i) q(i, i) += alpha * K(i, i);
  for (Index k = 0; k < blocks.num_classes(); ++k) {
    const Index o = blocks.offset(k), s = blocks.size(k);
    for (Index i = o; i < o + s; ++i)
      for (Index j = o; j < o + s; ++j) q(i, j) -= alpha * K(i, j) / static_cast<double>(s);
  }
  return q;
}

/// A random DRM problem together with oracle quantities: the explicit Q, its
/// spectrum, and w* from a QR solve that shares no code with the solvers.
struct Instance {
  GroupedDataset ds;
  KernelSpec kernel;
  DrmHyperParams params;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Q;
  QOperator op;
  Eigen::VectorXd kx;
  Eigen::VectorXd wstar;
  double fstar = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  Instance(GroupedDataset d, KernelSpec k, DrmHyperParams p, const Eigen::VectorXd& x)
      : ds(std::move(d)),
        kernel(k),
        params(p),
        K(compute_K(kernel, ds.features)),
        Q(reference_q(K, ds.blocks, params.alpha)),
        op(QOperator::dense(K, ds.blocks, params.alpha)),
        kx(compute_cross(kernel, ds.features, x).col(0)) {
    Eigen::MatrixXd system = Q;
    system.diagonal().array() += params.beta;
    wstar = system.colPivHouseholderQr().solve(kx);
    fstar = 0.5 * wstar.dot(Q * wstar) - wstar.dot(kx) + 0.5 * params.beta * wstar.squaredNorm();
    const Eigen::VectorXd ev = eigenvalues(Q);
    sigma_min = std::max(0.0, ev.minCoeff());
    sigma_max = ev.maxCoeff();
  }

  double f(const Eigen::VectorXd& w) const {
    return 0.5 * w.dot(Q * w) - w.dot(kx) + 0.5 * params.beta * w.squaredNorm();
  }
};

inline Instance random_instance(Rng& rng, Index n, Index p, Index g, KernelSpec::Family family, double alpha,
                                double beta) {
  auto ds = random_dataset(rng, p, random_sizes(rng, n, g));
  const Eigen::VectorXd x = random_vector(rng, p, 1.0 / std::sqrt(static_cast<double>(p)));
  return Instance(std::move(ds), random_kernel(rng, family), {alpha, beta}, x);
}

inline std::string data_file(const std::string& name) { return std::string(DRM_DATA_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// One of the bundled CSV datasets (label in the first column, header row).
inline LabeledData load_bundled(const std::string& name) {
  CsvOptions csv;
  csv.has_header = true;
  return parse_csv(read_text(data_file(name)), csv);
}

}  // namespace drm::testing
