#include "drm/classifier.hpp"

#include "drm/error.hpp"

namespace drm {

Eigen::VectorXd restrict_to_class(const Eigen::VectorXd& w, Index k, const ClassBlocks& blocks) {
  if (k < 0 || k >= blocks.num_classes()) throw DimensionError("class index " + std::to_string(k) + " out of range");
  if (w.size() != blocks.total()) throw DimensionError("restrict: vector length does not match class blocks");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
  out.segment(blocks.offset(k), blocks.size(k)) = w.segment(blocks.offset(k), blocks.size(k));
  return out;
}

Eigen::VectorXd restrict_to_complement(const Eigen::VectorXd& w, Index k, const ClassBlocks& blocks) {
  if (k < 0 || k >= blocks.num_classes()) throw DimensionError("class index " + std::to_string(k) + " out of range");
  if (w.size() != blocks.total()) throw DimensionError("restrict: vector length does not match class blocks");
  Eigen::VectorXd out = w;
  out.segment(blocks.offset(k), blocks.size(k)).setZero();
  return out;
}

Eigen::MatrixXd dissimilarities(const Eigen::MatrixXd& w, const QOperator& op, const Eigen::MatrixXd& kx) {
  if (w.rows() != op.size() || kx.rows() != op.size() || w.cols() != kx.cols())
    throw DimensionError("dissimilarities: size mismatch");
  const ClassBlocks& blocks = op.blocks();
  const Eigen::MatrixXd kw = op.apply_kernel(w);
  const Eigen::RowVectorXd wkw = w.cwiseProduct(kw).colwise().sum();
  Eigen::MatrixXd delta(blocks.num_classes(), w.cols());
  for (Index k = 0; k < blocks.num_classes(); ++k) {
    const auto off = blocks.offset(k);
    const auto sz = blocks.size(k);
    // With a = w|C_k:  a'Ka + (w-a)'K(w-a) = 2 a'Ka + w'Kw - 2 a'Kw.
    const Eigen::RowVectorXd aka = op.class_quadratic(k, w);
    const Eigen::RowVectorXd akw = w.middleRows(off, sz).cwiseProduct(kw.middleRows(off, sz)).colwise().sum();
    const Eigen::RowVectorXd akx = w.middleRows(off, sz).cwiseProduct(kx.middleRows(off, sz)).colwise().sum();
    delta.row(k) = 2.0 * aka + wkw - 2.0 * akw - 2.0 * akx;
  }
  return delta;
}

Eigen::VectorXd dissimilarities(const Eigen::VectorXd& w, const QOperator& op, const Eigen::VectorXd& kx) {
  if (w.size() != op.size() || kx.size() != op.size()) throw DimensionError("dissimilarities: size mismatch");
  const ClassBlocks& blocks = op.blocks();
  const Eigen::VectorXd kw = op.apply_kernel(w);
  const double wkw = w.dot(kw);
  Eigen::VectorXd delta(blocks.num_classes());
  for (Index k = 0; k < blocks.num_classes(); ++k) {
    const auto off = blocks.offset(k);
    const auto sz = blocks.size(k);
    const double aka = op.class_quadratic(k, w);
    const double akw = w.segment(off, sz).dot(kw.segment(off, sz));
    const double akx = w.segment(off, sz).dot(kx.segment(off, sz));
    delta(k) = 2.0 * aka + wkw - 2.0 * akw - 2.0 * akx;
  }
  return delta;
}

Index argmin_lowest(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) throw DimensionError("argmin of an empty score vector");
  Index best = 0;
  for (Index k = 1; k < scores.size(); ++k)
    if (scores(k) < scores(best)) best = k;
  return best;
}

SolverMethod default_method(Index n) { return n <= 2000 ? SolverMethod::closed_form : SolverMethod::ppa; }

namespace {

QOperator build_operator(const DrmModel& model, const DrmClassifier::Options& options) {
  model.params.validate();
  model.solver.validate();
  model.kernel.validate();
  const auto& train = model.train;
  if (train.num_classes() < 2) throw ValidationError("training data needs at least two classes");
  const bool iterative = model.solver.method != SolverMethod::closed_form;
  const bool linear = model.kernel.family == KernelSpec::Family::linear && iterative &&
                      options.linear_backend.value_or(train.num_examples() > 2000);
  if (linear) return QOperator::linear(train.features, train.blocks, model.params.alpha);
  if (options.precomputed_kernel) {
    if (options.precomputed_kernel->rows() != train.num_examples())
      throw DimensionError("precomputed kernel does not match the training set");
    return QOperator::dense(*options.precomputed_kernel, train.blocks, model.params.alpha);
  }
  return QOperator::dense(compute_K(model.kernel, train.features), train.blocks, model.params.alpha);
}

}  // namespace

DrmClassifier::DrmClassifier(DrmModel model, const Options& options)
    : model_(std::move(model)), op_(build_operator(model_, options)) {
  if (model_.scaling && model_.scaling->divisors.size() != model_.train.num_features())
    throw DimensionError("scaling divisors do not match the feature count");
  switch (model_.solver.method) {
    case SolverMethod::closed_form:
      closed_.emplace(op_, model_.params.beta);
      break;
    case SolverMethod::ppa:
      c_ = resolve_c(op_, model_.solver.c_strategy);
      break;
    default:
      break;
  }
}

DrmClassifier DrmClassifier::fit(const GroupedDataset& train, const KernelSpec& kernel, const DrmHyperParams& params,
                                 const SolverConfig& solver, bool scale) {
  DrmModel model;
  model.train = train;
  model.kernel = kernel;
  model.params = params;
  model.solver = solver;
  if (scale) {
    model.scaling = scale_fit(train.features);
    model.train.features = model.scaling->apply(train.features);
  }
  return DrmClassifier(std::move(model));
}

Eigen::MatrixXd DrmClassifier::prepare(const Eigen::MatrixXd& x) const {
  const Index p = model_.train.num_features();
  if (x.rows() != p)
    throw DimensionError("expected " + std::to_string(p) + " features, got " + std::to_string(x.rows()));
  return model_.scaling ? model_.scaling->apply(x) : x;
}

Prediction DrmClassifier::make_prediction(const Eigen::VectorXd& scores, const SolverReport* report) const {
  Prediction pred;
  pred.scores = scores;
  if (!scores.allFinite()) {
    pred.error = "non-finite dissimilarity scores";
    return pred;
  }
  pred.class_index = argmin_lowest(scores);
  pred.label = model_.train.original_labels[static_cast<std::size_t>(pred.class_index)];
  if (report) {
    pred.iterations = report->iterations;
    pred.converged = report->converged();
  }
  return pred;
}

SolverReport DrmClassifier::solve_for(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd kx = compute_cross(model_.kernel, model_.train.features, prepare(x));
  if (closed_) return closed_->solve(kx);
  if (model_.solver.method == SolverMethod::ppa) return solve_ppa(op_, kx, model_.params, model_.solver, c_);
  return solve(op_, kx, model_.params, model_.solver);
}

Prediction DrmClassifier::decide(const Eigen::VectorXd& kx) const {
  if (kx.size() != op_.size())
    throw DimensionError("Kx has length " + std::to_string(kx.size()) + ", expected " + std::to_string(op_.size()));
  SolverReport report;
  if (closed_) {
    report = closed_->solve(kx);
  } else if (model_.solver.method == SolverMethod::ppa) {
    report = solve_ppa(op_, kx, model_.params, model_.solver, c_);
  } else {
    report = solve(op_, kx, model_.params, model_.solver);
  }
  return make_prediction(dissimilarities(report.w, op_, kx), &report);
}

std::vector<Prediction> DrmClassifier::decide_batch(const Eigen::MatrixXd& kx) const {
  if (kx.rows() != op_.size()) throw DimensionError("cross-kernel matrix has the wrong number of rows");
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(kx.cols()));
  if (closed_) {
    const Eigen::MatrixXd w = closed_->solve_many(kx);
    const Eigen::MatrixXd delta = dissimilarities(w, op_, kx);
    for (Index j = 0; j < kx.cols(); ++j) out.push_back(make_prediction(delta.col(j), nullptr));
    return out;
  }
  for (Index j = 0; j < kx.cols(); ++j) {
    try {
      out.push_back(decide(kx.col(j)));
    } catch (const NumericalError& e) {
      Prediction failed;
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

Prediction DrmClassifier::predict_one(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd prepared = prepare(x);
  if (!prepared.allFinite()) throw ValidationError("test example has non-finite features");
  return decide(compute_cross(model_.kernel, model_.train.features, prepared).col(0));
}

std::vector<Prediction> DrmClassifier::predict_batch(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd prepared = prepare(x);
  std::vector<Index> good;
  for (Index j = 0; j < prepared.cols(); ++j)
    if (prepared.col(j).allFinite()) good.push_back(j);

  Eigen::MatrixXd finite(prepared.rows(), static_cast<Index>(good.size()));
  for (std::size_t j = 0; j < good.size(); ++j) finite.col(static_cast<Index>(j)) = prepared.col(good[j]);
  std::vector<Prediction> scored = decide_batch(compute_cross(model_.kernel, model_.train.features, finite));

  std::vector<Prediction> out(static_cast<std::size_t>(prepared.cols()));
  for (auto& p : out) p.error = "test example has non-finite features";
  for (std::size_t j = 0; j < good.size(); ++j) out[static_cast<std::size_t>(good[j])] = std::move(scored[j]);
  return out;
}

}  // namespace drm
