#include "drm/q_operator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "drm/error.hpp"

namespace drm {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be finite and >= 0");
}

Eigen::MatrixXd q_from_kernel(const Eigen::MatrixXd& K, const Eigen::VectorXd& h, const ClassBlocks& blocks,
                              double alpha) {
  Eigen::MatrixXd q = K;
  if (alpha == 0.0) return q;
  q.diagonal() += alpha * h;
  for (Index k = 0; k < blocks.num_classes(); ++k) {
    const auto off = blocks.offset(k);
    const auto sz = blocks.size(k);
    q.block(off, off, sz, sz) -= (alpha / static_cast<double>(sz)) * K.block(off, off, sz, sz);
  }
  return q;
}

}  // namespace

QOperator QOperator::dense(Eigen::MatrixXd K, ClassBlocks blocks, double alpha) {
  check_alpha(alpha);
  if (K.rows() != K.cols() || K.rows() != blocks.total())
    throw DimensionError("kernel matrix is " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()) +
                         " but class blocks cover " + std::to_string(blocks.total()) + " examples");
  if (!K.allFinite()) throw NumericalError("kernel matrix has non-finite entries");
  QOperator op;
  op.backend_ = Backend::dense;
  op.alpha_ = alpha;
  op.h_ = K.diagonal();
  auto data = std::make_shared<DenseData>();
  data->q = q_from_kernel(K, op.h_, blocks, alpha);
  data->k = std::move(K);
  op.dense_ = std::move(data);
  op.blocks_ = std::move(blocks);
  return op;
}

QOperator QOperator::from_features(Eigen::MatrixXd F, ClassBlocks blocks, double alpha, Backend backend) {
  check_alpha(alpha);
  if (F.cols() != blocks.total())
    throw DimensionError("feature matrix has " + std::to_string(F.cols()) + " columns but class blocks cover " +
                         std::to_string(blocks.total()) + " examples");
  if (!F.allFinite()) throw ValidationError("factor entries must be finite");
  QOperator op;
  op.backend_ = backend;
  op.alpha_ = alpha;
  op.h_ = F.colwise().squaredNorm().transpose();
  op.features_ = std::make_shared<const Eigen::MatrixXd>(std::move(F));
  op.blocks_ = std::move(blocks);
  return op;
}

QOperator QOperator::linear(Eigen::MatrixXd A, ClassBlocks blocks, double alpha) {
  return from_features(std::move(A), std::move(blocks), alpha, Backend::linear);
}

QOperator QOperator::factorized(Eigen::MatrixXd G, ClassBlocks blocks, double alpha) {
  return from_features(std::move(G), std::move(blocks), alpha, Backend::factorized);
}

QOperator make_factor_operator(Eigen::MatrixXd G, ClassBlocks blocks, double alpha) {
  return QOperator::factorized(std::move(G), std::move(blocks), alpha);
}

QOperator make_operator(const KernelSpec& kernel, const GroupedDataset& ds, double alpha, bool prefer_linear_backend) {
  if (prefer_linear_backend && kernel.family == KernelSpec::Family::linear)
    return QOperator::linear(ds.features, ds.blocks, alpha);
  return QOperator::dense(compute_K(kernel, ds.features), ds.blocks, alpha);
}

void QOperator::apply(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  if (v.size() != size())
    throw DimensionError("operator of size " + std::to_string(size()) + " applied to vector of length " +
                         std::to_string(v.size()));
  if (dense_) {
    out.noalias() = dense_->q * v;
    return;
  }
  // Per class: u_k = F_k v_k, u = sum_k u_k; then
  // (Qv)_k = F_k' (u - alpha/n_k u_k) + alpha h_k .* v_k.
  const Eigen::MatrixXd& f = *features_;
  const Index g = blocks_.num_classes();
  Eigen::MatrixXd per_class(f.rows(), g);
  for (Index k = 0; k < g; ++k)
    per_class.col(k).noalias() = f.middleCols(blocks_.offset(k), blocks_.size(k)) * v.segment(blocks_.offset(k), blocks_.size(k));
  const Eigen::VectorXd total = per_class.rowwise().sum();
  out.resize(v.size());
  Eigen::VectorXd z(f.rows());
  for (Index k = 0; k < g; ++k) {
    const auto off = blocks_.offset(k);
    const auto sz = blocks_.size(k);
    z = total - (alpha_ / static_cast<double>(sz)) * per_class.col(k);
    out.segment(off, sz).noalias() = f.middleCols(off, sz).transpose() * z;
  }
  if (alpha_ != 0.0) out += alpha_ * h_.cwiseProduct(v);
}

Eigen::VectorXd QOperator::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out;
  apply(v, out);
  return out;
}

Eigen::MatrixXd QOperator::project(const Eigen::VectorXd& v) const {
  if (!features_) throw ValidationError("projections need a feature-backed operator");
  if (v.size() != size()) throw DimensionError("projection: vector length mismatch");
  const Eigen::MatrixXd& f = *features_;
  Eigen::MatrixXd proj(f.rows(), blocks_.num_classes());
  for (Index k = 0; k < blocks_.num_classes(); ++k)
    proj.col(k).noalias() = f.middleCols(blocks_.offset(k), blocks_.size(k)) * v.segment(blocks_.offset(k), blocks_.size(k));
  return proj;
}

double QOperator::quadratic(const Eigen::MatrixXd& proj, const Eigen::VectorXd& v) const {
  // v'Kv = |sum_k P_k|^2 and v'Bv = sum_k |P_k|^2 / n_k.
  double value = proj.rowwise().sum().squaredNorm();
  if (alpha_ == 0.0) return value;
  double scatter = 0.0;
  for (Index k = 0; k < blocks_.num_classes(); ++k)
    scatter += proj.col(k).squaredNorm() / static_cast<double>(blocks_.size(k));
  return value + alpha_ * (h_.cwiseProduct(v.cwiseAbs2()).sum() - scatter);
}

Eigen::MatrixXd QOperator::sweep(const Eigen::VectorXd& v, const Eigen::MatrixXd& proj, Eigen::VectorXd& y,
                                 const SweepFn& emit) const {
  if (!features_) throw ValidationError("sweep needs a feature-backed operator");
  if (v.size() != size()) throw DimensionError("sweep: vector length mismatch");
  const Eigen::MatrixXd& f = *features_;
  const Index g = blocks_.num_classes();
  if (proj.rows() != f.rows() || proj.cols() != g) throw DimensionError("sweep: projection shape mismatch");
  constexpr Index kBlock = 256;
  const Eigen::VectorXd total = proj.rowwise().sum();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), g);
  Eigen::VectorXd z(f.rows());
  Eigen::VectorXd qv(kBlock);
  y.resize(v.size());
  for (Index k = 0; k < g; ++k) {
    const auto off = blocks_.offset(k);
    const auto sz = blocks_.size(k);
    z = total - (alpha_ / static_cast<double>(sz)) * proj.col(k);
    for (Index start = off; start < off + sz; start += kBlock) {
      const Index len = std::min(kBlock, off + sz - start);
      const auto fb = f.middleCols(start, len);
      auto qb = qv.head(len);
      qb.noalias() = fb.transpose() * z;
      if (alpha_ != 0.0) qb += alpha_ * h_.segment(start, len).cwiseProduct(v.segment(start, len));
      emit(start, qb, y.segment(start, len));
      out.col(k).noalias() += fb * y.segment(start, len);
    }
  }
  return out;
}

Eigen::VectorXd QOperator::apply_kernel(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw DimensionError("kernel matvec: vector length mismatch");
  if (dense_) return dense_->k * v;
  const Eigen::MatrixXd& f = *features_;
  const Eigen::VectorXd u = f * v;
  return f.transpose() * u;
}

Eigen::MatrixXd QOperator::apply_kernel(const Eigen::MatrixXd& w) const {
  if (w.rows() != size()) throw DimensionError("kernel matmul: row count mismatch");
  if (dense_) return dense_->k * w;
  const Eigen::MatrixXd& f = *features_;
  const Eigen::MatrixXd u = f * w;
  return f.transpose() * u;
}

double QOperator::class_quadratic(Index k, const Eigen::VectorXd& v) const {
  if (k < 0 || k >= blocks_.num_classes()) throw DimensionError("class index out of range");
  const auto off = blocks_.offset(k);
  const auto sz = blocks_.size(k);
  const auto vk = v.segment(off, sz);
  if (dense_) return vk.dot(dense_->k.block(off, off, sz, sz) * vk);
  return (features_->middleCols(off, sz) * vk).squaredNorm();
}

Eigen::RowVectorXd QOperator::class_quadratic(Index k, const Eigen::MatrixXd& w) const {
  if (k < 0 || k >= blocks_.num_classes()) throw DimensionError("class index out of range");
  const auto off = blocks_.offset(k);
  const auto sz = blocks_.size(k);
  const auto wk = w.middleRows(off, sz);
  if (dense_) {
    const Eigen::MatrixXd kw = dense_->k.block(off, off, sz, sz) * wk;
    return wk.cwiseProduct(kw).colwise().sum();
  }
  return (features_->middleCols(off, sz) * wk).colwise().squaredNorm();
}

Eigen::MatrixXd QOperator::to_dense() const {
  if (dense_) return dense_->q;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(size(), size());
  k.selfadjointView<Eigen::Lower>().rankUpdate(features_->transpose());
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return q_from_kernel(k, h_, blocks_, alpha_);
}

const Eigen::MatrixXd* QOperator::dense_q() const { return dense_ ? &dense_->q : nullptr; }

double QOperator::kernel_trace() const { return h_.sum(); }

std::optional<double> QOperator::kernel_inf_norm() const {
  if (!dense_) return std::nullopt;
  return dense_->k.cwiseAbs().rowwise().sum().maxCoeff();
}

double QOperator::mean_diagonal() const {
  double sum = 0.0;
  for (Index k = 0; k < blocks_.num_classes(); ++k) {
    const auto off = blocks_.offset(k);
    const auto sz = blocks_.size(k);
    const double factor = 1.0 + alpha_ - alpha_ / static_cast<double>(sz);
    sum += factor * h_.segment(off, sz).sum();
  }
  return size() ? sum / static_cast<double>(size()) : 0.0;
}

double gershgorin_bound(const QOperator& op) {
  const double h_max = op.size() ? op.kernel_diagonal().maxCoeff() : 0.0;
  double k_bound = op.kernel_trace();
  if (auto inf = op.kernel_inf_norm()) k_bound = std::min(k_bound, *inf);
  return k_bound + op.alpha() * h_max;
}

SpectralEstimate sigma_max_estimate(const QOperator& op, double tol, int max_iter) {
  if (!(tol > 0.0)) throw ValidationError("power iteration tolerance must be positive");
  if (max_iter < 1) throw ValidationError("power iteration needs max_iter >= 1");
  const Index n = op.size();

  // Deterministic start with positive, non-constant entries so that it is not
  // orthogonal to the dominant eigenvector of structured operators.
  std::mt19937_64 rng(0x5DEECE66DULL);
  Eigen::VectorXd x(n);
  for (Index i = 0; i < n; ++i) x(i) = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
  x.normalize();

  Eigen::VectorXd qx(n);
  SpectralEstimate est;
  for (int it = 1; it <= max_iter; ++it) {
    op.apply(x, qx);
    const double theta = x.dot(qx);
    const double residual = (qx - theta * x).norm();
    est.iterations = it;
    if (theta <= 0.0 && qx.norm() == 0.0) {
      est.c = 0.0;
      est.certified = true;
      return est;
    }
    if (residual <= tol * theta) {
      est.c = theta * (1.0 + 2.0 * tol);
      est.certified = true;
      return est;
    }
    x = qx / qx.norm();
  }
  est.c = gershgorin_bound(op);
  est.certified = false;
  return est;
}

}  // namespace drm
