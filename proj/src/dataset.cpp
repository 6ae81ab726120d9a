#include "drm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "drm/error.hpp"

namespace drm {

// ---------------------------------------------------------------------------
// ClassBlocks

ClassBlocks::ClassBlocks(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  offsets_.reserve(sizes_.size());
  for (Index s : sizes_) {
    if (s < 1) throw ValidationError("class block sizes must be >= 1");
    offsets_.push_back(total_);
    total_ += s;
  }
}

Index ClassBlocks::class_of(Index column) const {
  if (column < 0 || column >= total_) throw DimensionError("column index out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), column);
  return static_cast<Index>(it - offsets_.begin()) - 1;
}

int GroupedDataset::original_label(Index column) const {
  return original_labels[static_cast<std::size_t>(blocks.class_of(column))];
}

std::vector<int> GroupedDataset::column_labels() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(num_examples()));
  for (Index k = 0; k < blocks.num_classes(); ++k)
    out.insert(out.end(), static_cast<std::size_t>(blocks.size(k)),
               original_labels[static_cast<std::size_t>(k)]);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(out);
}

int parse_label(std::string_view token, std::size_t line) {
  double v = 0;
  if (!parse_double(token, v)) throw ParseError("non-numeric label '" + std::string(token) + "'", line);
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw ParseError("label '" + std::string(token) + "' is not an integer", line);
  return static_cast<int>(v);
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    f(text.substr(pos, end - pos), line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

}  // namespace

LabeledData parse_libsvm(std::string_view text, const ParseOptions& options) {
  struct Entry {
    Index row;
    double value;
  };
  std::vector<std::vector<Entry>> columns;
  std::vector<int> labels;
  Index max_index = 0;

  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    auto hash = raw.find('#');
    std::string_view line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (line.empty()) return;

    std::vector<Entry> entries;
    Index last = 0;
    bool first = true;
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto end = line.find_first_of(" \t", pos);
      if (end == std::string_view::npos) end = line.size();
      std::string_view token = line.substr(pos, end - pos);
      pos = line.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) pos = line.size();
      if (token.empty()) continue;

      if (first) {
        labels.push_back(parse_label(token, line_no));
        first = false;
        continue;
      }
      auto colon = token.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected <index>:<value>, got '" + std::string(token) + "'", line_no);
      std::string_view idx_tok = token.substr(0, colon);
      std::string_view val_tok = token.substr(colon + 1);
      long long idx = 0;
      auto [p, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
      if (ec != std::errc() || p != idx_tok.data() + idx_tok.size() || idx < 1)
        throw ParseError("invalid feature index '" + std::string(idx_tok) + "'", line_no);
      if (idx <= last)
        throw ParseError("feature indices must be strictly ascending (" + std::to_string(idx) +
                             " after " + std::to_string(last) + ")",
                         line_no);
      double value = 0;
      if (!parse_double(val_tok, value))
        throw ParseError("non-numeric value '" + std::string(val_tok) + "'", line_no);
      last = static_cast<Index>(idx);
      entries.push_back({last - 1, value});
    }
    max_index = std::max(max_index, last);
    columns.push_back(std::move(entries));
  });

  if (columns.empty() && !options.allow_empty) throw ParseError("empty input: no examples found");

  LabeledData out;
  const Index p = std::max(max_index, options.min_features);
  out.features = Eigen::MatrixXd::Zero(p, static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (const auto& e : columns[j]) out.features(e.row, static_cast<Index>(j)) = e.value;
  out.labels = std::move(labels);
  return out;
}

LabeledData parse_csv(std::string_view text, const CsvOptions& csv, const ParseOptions& options) {
  if (csv.label_column < 0) throw ValidationError("label column must be >= 0");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  bool header_pending = csv.has_header;

  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    std::string_view line = trim(raw);
    if (line.empty()) return;
    if (header_pending) {
      header_pending = false;
      return;
    }
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
      auto end = line.find(csv.delimiter, pos);
      cells.push_back(trim(line.substr(pos, end == std::string_view::npos ? line.npos : end - pos)));
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
    if (width == 0) {
      width = cells.size();
      if (static_cast<std::size_t>(csv.label_column) >= width)
        throw ParseError("label column " + std::to_string(csv.label_column) + " out of range for " +
                             std::to_string(width) + " columns",
                         line_no);
    } else if (cells.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == static_cast<std::size_t>(csv.label_column)) {
        labels.push_back(parse_label(cells[c], line_no));
        continue;
      }
      double v = 0;
      if (!parse_double(cells[c], v))
        throw ParseError("non-numeric cell '" + std::string(cells[c]) + "'", line_no);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  });

  if (rows.empty() && !options.allow_empty) throw ParseError("empty input: no examples found");

  LabeledData out;
  const Index p = rows.empty() ? 0 : static_cast<Index>(width - 1);
  out.features.resize(p, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (Index i = 0; i < p; ++i) out.features(i, static_cast<Index>(j)) = rows[j][static_cast<std::size_t>(i)];
  out.labels = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------
// Grouping

GroupedDataset group_by_label(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != features.cols())
    throw DimensionError("label count " + std::to_string(labels.size()) + " does not match " +
                         std::to_string(features.cols()) + " examples");
  if (!features.allFinite()) throw ValidationError("feature values must be finite");

  std::map<int, Index> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw ValidationError("at least two distinct class labels are required");

  GroupedDataset ds;
  std::vector<Index> sizes;
  std::map<int, int> class_of_label;
  for (const auto& [label, count] : counts) {
    class_of_label[label] = static_cast<int>(sizes.size()) + 1;
    ds.original_labels.push_back(label);
    sizes.push_back(count);
  }
  ds.blocks = ClassBlocks(std::move(sizes));

  ds.permutation.resize(labels.size());
  std::iota(ds.permutation.begin(), ds.permutation.end(), Index{0});
  std::stable_sort(ds.permutation.begin(), ds.permutation.end(), [&](Index a, Index b) {
    return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
  });

  ds.features.resize(features.rows(), features.cols());
  ds.class_ids.resize(labels.size());
  for (std::size_t m = 0; m < labels.size(); ++m) {
    const Index src = ds.permutation[m];
    ds.features.col(static_cast<Index>(m)) = features.col(src);
    ds.class_ids[m] = class_of_label[labels[static_cast<std::size_t>(src)]];
  }
  return ds;
}

GroupedDataset subset(const GroupedDataset& ds, const std::vector<Index>& columns) {
  Eigen::MatrixXd features(ds.num_features(), static_cast<Index>(columns.size()));
  std::vector<int> labels;
  labels.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    features.col(static_cast<Index>(j)) = ds.features.col(columns[j]);
    labels.push_back(ds.original_label(columns[j]));
  }
  return group_by_label(features, labels);
}

Eigen::MatrixXd ungroup(const GroupedDataset& ds) {
  Eigen::MatrixXd out(ds.features.rows(), ds.features.cols());
  for (Index m = 0; m < ds.features.cols(); ++m)
    out.col(ds.permutation[static_cast<std::size_t>(m)]) = ds.features.col(m);
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

ScalingTransform scale_fit(const Eigen::MatrixXd& train_features) {
  ScalingTransform t;
  t.divisors.resize(train_features.rows());
  for (Index i = 0; i < train_features.rows(); ++i) {
    const double norm = train_features.cols() ? train_features.row(i).cwiseAbs().maxCoeff() : 0.0;
    t.divisors(i) = norm > 0.0 ? norm : 1.0;
  }
  return t;
}

Eigen::MatrixXd ScalingTransform::apply(const Eigen::MatrixXd& features) const {
  if (features.rows() != divisors.size())
    throw DimensionError("scaling expects " + std::to_string(divisors.size()) + " features, got " +
                         std::to_string(features.rows()));
  return divisors.cwiseInverse().asDiagonal() * features;
}

Eigen::VectorXd ScalingTransform::apply_vector(const Eigen::VectorXd& x) const {
  if (x.size() != divisors.size())
    throw DimensionError("scaling expects " + std::to_string(divisors.size()) + " features, got " +
                         std::to_string(x.size()));
  return x.cwiseQuotient(divisors);
}

Eigen::MatrixXd scale_apply(const ScalingTransform& transform, const Eigen::MatrixXd& features) {
  return transform.apply(features);
}

// ---------------------------------------------------------------------------
// Splitting

SplitSpec SplitSpec::holdout(double fraction, std::uint64_t seed, bool stratified) {
  SplitSpec s;
  s.mode = Mode::holdout;
  s.holdout_fraction = fraction;
  s.seed = seed;
  s.stratified = stratified;
  return s;
}

SplitSpec SplitSpec::kfold(int k, std::uint64_t seed, bool stratified) {
  SplitSpec s;
  s.mode = Mode::kfold;
  s.folds = k;
  s.seed = seed;
  s.stratified = stratified;
  return s;
}

SplitSpec SplitSpec::leave_one_out() {
  SplitSpec s;
  s.mode = Mode::leave_one_out;
  s.stratified = false;
  return s;
}

void SplitSpec::validate() const {
  if (mode == Mode::holdout && !(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ValidationError("holdout fraction must lie in (0, 1)");
  if (mode == Mode::kfold && folds < 2) throw ValidationError("k-fold needs k >= 2");
}

void deterministic_shuffle(std::vector<Index>& values, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = values.size(); i > 1; --i) {
    // Rejection sampling keeps the draw unbiased and independent of the
    // standard library's distribution implementation.
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = 0;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(values[i - 1], values[static_cast<std::size_t>(r % bound)]);
  }
}

namespace {

std::vector<Index> iota_range(Index begin, Index count) {
  std::vector<Index> v(static_cast<std::size_t>(count));
  std::iota(v.begin(), v.end(), begin);
  return v;
}

Fold make_fold(std::vector<Index> test, Index n) {
  std::sort(test.begin(), test.end());
  Fold f;
  f.train.reserve(static_cast<std::size_t>(n) - test.size());
  std::size_t t = 0;
  for (Index i = 0; i < n; ++i) {
    if (t < test.size() && test[t] == i) {
      ++t;
      continue;
    }
    f.train.push_back(i);
  }
  f.test = std::move(test);
  return f;
}

}  // namespace

std::vector<Fold> split(const GroupedDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const Index n = ds.num_examples();
  const Index g = ds.num_classes();
  std::vector<Fold> folds;

  switch (spec.mode) {
    case SplitSpec::Mode::leave_one_out: {
      for (Index i = 0; i < n; ++i) folds.push_back(make_fold({i}, n));
      break;
    }
    case SplitSpec::Mode::holdout: {
      std::vector<Index> test;
      if (spec.stratified) {
        for (Index k = 0; k < g; ++k) {
          auto idx = iota_range(ds.blocks.offset(k), ds.blocks.size(k));
          deterministic_shuffle(idx, spec.seed + static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL);
          Index take = static_cast<Index>(std::llround(spec.holdout_fraction * static_cast<double>(idx.size())));
          take = std::min(take, static_cast<Index>(idx.size()) - 1);  // keep >= 1 for training
          test.insert(test.end(), idx.begin(), idx.begin() + take);
        }
      } else {
        auto idx = iota_range(0, n);
        deterministic_shuffle(idx, spec.seed);
        Index take = static_cast<Index>(std::llround(spec.holdout_fraction * static_cast<double>(n)));
        take = std::clamp<Index>(take, 1, n - 1);
        test.assign(idx.begin(), idx.begin() + take);
      }
      folds.push_back(make_fold(std::move(test), n));
      break;
    }
    case SplitSpec::Mode::kfold: {
      const auto k = static_cast<std::size_t>(spec.folds);
      if (static_cast<Index>(k) > n) throw ValidationError("k-fold with k > number of examples");
      std::vector<std::vector<Index>> tests(k);
      if (spec.stratified) {
        Index min_size = n;
        for (Index c = 0; c < g; ++c) min_size = std::min(min_size, ds.blocks.size(c));
        if (static_cast<Index>(k) > min_size)
          throw ValidationError("stratified " + std::to_string(k) + "-fold needs every class to have at least " +
                                std::to_string(k) + " examples (smallest has " + std::to_string(min_size) + ")");
        // Deal classes round-robin, continuing the fold cursor across classes
        // so fold sizes differ by at most one.
        std::size_t cursor = 0;
        for (Index c = 0; c < g; ++c) {
          auto idx = iota_range(ds.blocks.offset(c), ds.blocks.size(c));
          deterministic_shuffle(idx, spec.seed + static_cast<std::uint64_t>(c) * 0x9E3779B97F4A7C15ULL);
          for (Index i : idx) tests[cursor++ % k].push_back(i);
        }
      } else {
        auto idx = iota_range(0, n);
        deterministic_shuffle(idx, spec.seed);
        for (std::size_t i = 0; i < idx.size(); ++i) tests[i % k].push_back(idx[i]);
      }
      for (auto& t : tests) folds.push_back(make_fold(std::move(t), n));
      break;
    }
  }
  return folds;
}

std::vector<Index> stratified_subsample(const GroupedDataset& ds, Index cap, std::uint64_t seed) {
  const Index n = ds.num_examples();
  if (cap >= n) return iota_range(0, n);
  std::vector<Index> out;
  const Index g = ds.num_classes();
  // Largest-remainder allocation, with at least one example per class.
  std::vector<Index> take(static_cast<std::size_t>(g));
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index k = 0; k < g; ++k) {
    const double exact = static_cast<double>(cap) * static_cast<double>(ds.blocks.size(k)) / static_cast<double>(n);
    take[static_cast<std::size_t>(k)] = std::max<Index>(1, static_cast<Index>(std::floor(exact)));
    assigned += take[static_cast<std::size_t>(k)];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < cap && r < remainders.size(); ++r) {
    auto k = static_cast<std::size_t>(remainders[r].second);
    if (take[k] < ds.blocks.size(static_cast<Index>(k))) {
      ++take[k];
      ++assigned;
    }
  }
  for (Index k = 0; k < g; ++k) {
    auto idx = iota_range(ds.blocks.offset(k), ds.blocks.size(k));
    deterministic_shuffle(idx, seed + static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL);
    out.insert(out.end(), idx.begin(), idx.begin() + std::min(take[static_cast<std::size_t>(k)], ds.blocks.size(k)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace drm
