#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace drm {

using Index = Eigen::Index;

/// Contiguous class blocks over the columns of a grouped matrix. Class `k`
/// (0-based) owns columns [offset(k), offset(k) + size(k)).
class ClassBlocks {
 public:
  ClassBlocks() = default;
  explicit ClassBlocks(std::vector<Index> sizes);

  Index num_classes() const { return static_cast<Index>(sizes_.size()); }
  Index total() const { return total_; }
  Index offset(Index k) const { return offsets_[static_cast<std::size_t>(k)]; }
  Index size(Index k) const { return sizes_[static_cast<std::size_t>(k)]; }
  const std::vector<Index>& sizes() const { return sizes_; }
  const std::vector<Index>& offsets() const { return offsets_; }

  /// Class index owning column `column`.
  Index class_of(Index column) const;

  bool operator==(const ClassBlocks&) const = default;

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

/// Features (p x n, one example per column) and the labels as read.
struct LabeledData {
  Eigen::MatrixXd features;
  std::vector<int> labels;

  Index num_features() const { return features.rows(); }
  Index num_examples() const { return features.cols(); }
};

/// Training matrix with columns sorted so that each class is one contiguous
/// block. Class ids are 1..g in ascending order of the original labels.
struct GroupedDataset {
  Eigen::MatrixXd features;
  std::vector<int> class_ids;        // per column, 1..g
  ClassBlocks blocks;
  std::vector<int> original_labels;  // class k (0-based) came from original_labels[k]
  std::vector<Index> permutation;    // grouped column m was input column permutation[m]

  Index num_features() const { return features.rows(); }
  Index num_examples() const { return features.cols(); }
  Index num_classes() const { return blocks.num_classes(); }

  /// Original label of grouped column `column`.
  int original_label(Index column) const;
  /// Original labels of every grouped column, in grouped order.
  std::vector<int> column_labels() const;
};

struct CsvOptions {
  Index label_column = 0;
  bool has_header = false;
  char delimiter = ',';
};

struct ParseOptions {
  /// Accept input without any example and return a 0-column matrix.
  bool allow_empty = false;
  /// Lower bound on the number of feature rows (libsvm only). Lets test files
  /// whose largest index is smaller than the model's feature count line up.
  Index min_features = 0;
};

/// Parses `<label> <idx>:<val> ...` lines. Indices are 1-based and strictly
/// ascending; absent indices are zero. Blank lines and `#` comments are skipped.
LabeledData parse_libsvm(std::string_view text, const ParseOptions& options = {});

/// Parses a rectangular numeric CSV. Rows are examples; every column except
/// `label_column` becomes a feature row of the returned matrix.
LabeledData parse_csv(std::string_view text, const CsvOptions& csv = {},
                      const ParseOptions& options = {});

/// Stable-sorts columns by label and remaps labels to 1..g.
/// Throws ValidationError with fewer than two distinct labels.
GroupedDataset group_by_label(const Eigen::MatrixXd& features, const std::vector<int>& labels);

/// Columns `columns` (indices into the grouped order) regrouped as a new dataset.
GroupedDataset subset(const GroupedDataset& ds, const std::vector<Index>& columns);

/// Undoes the grouping permutation: column permutation[m] of the result is
/// grouped column m.
Eigen::MatrixXd ungroup(const GroupedDataset& ds);

/// Per-feature divisors so that training values land in [-1, 1].
struct ScalingTransform {
  Eigen::VectorXd divisors;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
  Eigen::VectorXd apply_vector(const Eigen::VectorXd& x) const;
};

/// Infinity norm of each feature row; all-zero rows get divisor 1.
ScalingTransform scale_fit(const Eigen::MatrixXd& train_features);
inline ScalingTransform scale_fit(const GroupedDataset& train) { return scale_fit(train.features); }
Eigen::MatrixXd scale_apply(const ScalingTransform& transform, const Eigen::MatrixXd& features);

struct SplitSpec {
  enum class Mode { holdout, kfold, leave_one_out };

  Mode mode = Mode::kfold;
  double holdout_fraction = 0.25;  // test share, holdout mode
  int folds = 5;
  std::uint64_t seed = 0;
  bool stratified = true;

  static SplitSpec holdout(double fraction, std::uint64_t seed, bool stratified = true);
  static SplitSpec kfold(int k, std::uint64_t seed, bool stratified = true);
  static SplitSpec leave_one_out();

  void validate() const;
};

/// Train/test column indices (grouped order), each sorted ascending.
struct Fold {
  std::vector<Index> train;
  std::vector<Index> test;
};

std::vector<Fold> split(const GroupedDataset& ds, const SplitSpec& spec);

/// Seeded stratified subsample of at most `cap` columns (sorted). Returns all
/// columns when the dataset is already small enough.
std::vector<Index> stratified_subsample(const GroupedDataset& ds, Index cap, std::uint64_t seed);

/// Fisher-Yates shuffle driven by a 64-bit Mersenne twister; identical output
/// on every platform for a given seed.
void deterministic_shuffle(std::vector<Index>& values, std::uint64_t seed);

}  // namespace drm
