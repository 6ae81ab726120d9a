#include "drm/kernels.hpp"

#include <cmath>
#include <sstream>

#include "drm/error.hpp"

namespace drm {

KernelSpec KernelSpec::rbf(double gamma) {
  KernelSpec s;
  s.family = Family::rbf;
  s.gamma = gamma;
  return s;
}

KernelSpec KernelSpec::polynomial(int degree, double coef0, double scale) {
  KernelSpec s;
  s.family = Family::polynomial;
  s.degree = degree;
  s.coef0 = coef0;
  s.scale = scale;
  return s;
}

void KernelSpec::validate() const {
  switch (family) {
    case Family::linear:
      break;
    case Family::rbf:
      if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("rbf gamma must be positive");
      break;
    case Family::polynomial:
      if (degree < 1) throw ValidationError("polynomial degree must be >= 1");
      if (!std::isfinite(coef0) || !std::isfinite(scale))
        throw ValidationError("polynomial coef0 and scale must be finite");
      break;
  }
}

double KernelSpec::parameter() const {
  switch (family) {
    case Family::rbf:
      return gamma;
    case Family::polynomial:
      return degree;
    default:
      return 0.0;
  }
}

std::string family_name(KernelSpec::Family family) {
  switch (family) {
    case KernelSpec::Family::linear:
      return "linear";
    case KernelSpec::Family::rbf:
      return "rbf";
    case KernelSpec::Family::polynomial:
      return "poly";
  }
  return "unknown";
}

KernelSpec::Family parse_family(const std::string& name) {
  if (name == "linear") return KernelSpec::Family::linear;
  if (name == "rbf") return KernelSpec::Family::rbf;
  if (name == "poly" || name == "polynomial") return KernelSpec::Family::polynomial;
  throw ValidationError("unknown kernel '" + name + "' (expected linear, rbf or poly)");
}

std::string KernelSpec::name() const { return family_name(family); }

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << name();
  if (family == Family::rbf) os << "(gamma=" << gamma << ")";
  if (family == Family::polynomial) os << "(degree=" << degree << ", coef0=" << coef0 << ", scale=" << scale << ")";
  return os.str();
}

namespace {

double int_pow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

// Applies the kernel's scalar map to an inner-product matrix. `row_sq` and
// `col_sq` are squared norms of the row/column points (rbf only).
void finish_from_inner(const KernelSpec& spec, Eigen::MatrixXd& m, const Eigen::VectorXd& row_sq,
                       const Eigen::VectorXd& col_sq) {
  switch (spec.family) {
    case KernelSpec::Family::linear:
      return;
    case KernelSpec::Family::rbf:
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          const double d2 = std::max(0.0, row_sq(i) + col_sq(j) - 2.0 * m(i, j));
          m(i, j) = std::exp(-spec.gamma * d2);
        }
      return;
    case KernelSpec::Family::polynomial:
      m = m.unaryExpr([&](double v) { return int_pow(spec.scale * v + spec.coef0, spec.degree); });
      return;
  }
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size())
    throw DimensionError("kernel arguments have lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  switch (spec.family) {
    case KernelSpec::Family::linear:
      return x.dot(y);
    case KernelSpec::Family::rbf:
      return std::exp(-spec.gamma * (x - y).squaredNorm());
    case KernelSpec::Family::polynomial:
      return int_pow(spec.scale * x.dot(y) + spec.coef0, spec.degree);
  }
  return 0.0;
}

Eigen::MatrixXd compute_K(const KernelSpec& spec, const Eigen::MatrixXd& a) {
  spec.validate();
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  k.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  if (spec.family == KernelSpec::Family::rbf) {
    const Eigen::VectorXd sq = k.diagonal();
    finish_from_inner(spec, k, sq, sq);
    k.diagonal().setOnes();
  } else {
    finish_from_inner(spec, k, {}, {});
  }
  return k;
}

Eigen::MatrixXd compute_cross(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  spec.validate();
  if (a.rows() != x.rows())
    throw DimensionError("expected " + std::to_string(a.rows()) + " features, got " + std::to_string(x.rows()));
  Eigen::MatrixXd m = a.transpose() * x;
  if (spec.family == KernelSpec::Family::rbf) {
    const Eigen::VectorXd row_sq = a.colwise().squaredNorm().transpose();
    const Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose();
    finish_from_inner(spec, m, row_sq, col_sq);
  } else {
    finish_from_inner(spec, m, {}, {});
  }
  return m;
}

Eigen::VectorXd compute_H(const KernelSpec& spec, const Eigen::MatrixXd& a) {
  spec.validate();
  Eigen::VectorXd h(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double sq = a.col(j).squaredNorm();
    switch (spec.family) {
      case KernelSpec::Family::linear:
        h(j) = sq;
        break;
      case KernelSpec::Family::rbf:
        h(j) = 1.0;
        break;
      case KernelSpec::Family::polynomial:
        h(j) = int_pow(spec.scale * sq + spec.coef0, spec.degree);
        break;
    }
  }
  return h;
}

std::vector<Eigen::MatrixXd> blocks_from_K(const Eigen::MatrixXd& K, const ClassBlocks& blocks) {
  if (K.rows() != blocks.total() || K.cols() != blocks.total())
    throw DimensionError("kernel matrix does not match class blocks");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(blocks.num_classes()));
  for (Eigen::Index k = 0; k < blocks.num_classes(); ++k) {
    const auto off = blocks.offset(k);
    const auto sz = blocks.size(k);
    out.emplace_back(K.block(off, off, sz, sz) / static_cast<double>(sz));
  }
  return out;
}

std::vector<Eigen::MatrixXd> compute_B(const KernelSpec& spec, const GroupedDataset& ds) {
  std::vector<Eigen::MatrixXd> out;
  for (Eigen::Index k = 0; k < ds.num_classes(); ++k) {
    const auto sz = ds.blocks.size(k);
    out.emplace_back(compute_K(spec, ds.features.middleCols(ds.blocks.offset(k), sz)) / static_cast<double>(sz));
  }
  return out;
}

Eigen::VectorXd compute_Kx(const KernelSpec& spec, const GroupedDataset& ds, const Eigen::VectorXd& x) {
  if (x.size() != ds.num_features())
    throw DimensionError("expected " + std::to_string(ds.num_features()) + " features, got " +
                         std::to_string(x.size()));
  return compute_cross(spec, ds.features, x);
}

KernelMatrices compute_kernel_matrices(const KernelSpec& spec, const GroupedDataset& ds) {
  KernelMatrices m;
  m.K = compute_K(spec, ds.features);
  m.H = m.K.diagonal();
  m.B = blocks_from_K(m.K, ds.blocks);
  return m;
}

}  // namespace drm
