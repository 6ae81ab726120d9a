#include "drm/synthetic.hpp"

#include <array>
#include <random>
#include <set>
#include <sstream>

#include "drm/error.hpp"

namespace drm {

namespace {

using Board = std::array<int, 9>;

int winner(const Board& b) {
  static constexpr int lines[8][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6},
                                      {1, 4, 7}, {2, 5, 8}, {0, 4, 8}, {2, 4, 6}};
  for (const auto& l : lines)
    if (b[l[0]] != 0 && b[l[0]] == b[l[1]] && b[l[1]] == b[l[2]]) return b[l[0]];
  return 0;
}

void play(Board& b, int to_move, int placed, std::set<Board>& finals) {
  if (winner(b) != 0 || placed == 9) {
    finals.insert(b);
    return;
  }
  for (int s = 0; s < 9; ++s) {
    if (b[s] != 0) continue;
    b[s] = to_move;
    play(b, -to_move, placed + 1, finals);
    b[s] = 0;
  }
}

}  // namespace

LabeledData tictactoe_endgames() {
  std::set<Board> finals;
  Board empty{};
  play(empty, 1, 0, finals);
  LabeledData out;
  out.features.resize(9, static_cast<Index>(finals.size()));
  Index j = 0;
  for (const Board& b : finals) {
    for (int s = 0; s < 9; ++s) out.features(s, j) = b[s];
    out.labels.push_back(winner(b) == 1 ? 1 : -1);
    ++j;
  }
  return out;
}

std::string tictactoe_csv() {
  const LabeledData d = tictactoe_endgames();
  std::ostringstream out;
  out << "label,tl,tm,tr,ml,mm,mr,bl,bm,br\n";
  for (Index j = 0; j < d.num_examples(); ++j) {
    out << d.labels[static_cast<std::size_t>(j)];
    for (Index s = 0; s < 9; ++s) out << ',' << static_cast<int>(d.features(s, j));
    out << '\n';
  }
  return out.str();
}

LabeledData gaussian_classes(const std::vector<Index>& sizes, const Eigen::MatrixXd& means,
                             const std::vector<double>& stddevs, std::uint64_t seed) {
  if (sizes.size() != static_cast<std::size_t>(means.cols()) || sizes.size() != stddevs.size())
    throw DimensionError("gaussian_classes: sizes, means and stddevs disagree on the class count");
  Index n = 0;
  for (Index s : sizes) {
    if (s < 0) throw ValidationError("class sizes must be >= 0");
    n += s;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledData out;
  out.features.resize(means.rows(), n);
  Index j = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k)
    for (Index i = 0; i < sizes[k]; ++i, ++j) {
      for (Index r = 0; r < means.rows(); ++r)
        out.features(r, j) = means(r, static_cast<Index>(k)) + stddevs[k] * normal(rng);
      out.labels.push_back(static_cast<int>(k) + 1);
    }
  return out;
}

LabeledData random_classes(Index n, Index p, Index g, double separation, std::uint64_t seed) {
  if (g < 1 || n < g || p < 1) throw ValidationError("random_classes needs n >= g >= 1 and p >= 1");
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  std::normal_distribution<double> normal(0.0, separation);
  Eigen::MatrixXd means(p, g);
  for (Index k = 0; k < g; ++k)
    for (Index r = 0; r < p; ++r) means(r, k) = normal(rng);
  std::vector<Index> sizes(static_cast<std::size_t>(g), n / g);
  for (Index k = 0; k < n % g; ++k) ++sizes[static_cast<std::size_t>(k)];
  return gaussian_classes(sizes, means, std::vector<double>(static_cast<std::size_t>(g), 1.0), seed);
}

}  // namespace drm
