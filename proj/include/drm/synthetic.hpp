#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "drm/dataset.hpp"

namespace drm {

/// Every distinct final board of a tic-tac-toe game where x moves first and
/// play stops at the first three-in-a-row or a full board. Features are the
/// nine squares row by row (x = 1, o = -1, blank = 0); label 1 when x won,
/// -1 otherwise. Boards come out in lexicographic order of their encoding.
LabeledData tictactoe_endgames();

/// The same boards as CSV: header `label,tl,tm,tr,ml,mm,mr,bl,bm,br`.
std::string tictactoe_csv();

/// Isotropic Gaussian classes: class k (label k + 1) draws sizes[k] points
/// from N(means.col(k), stddevs[k]^2 I). Columns are interleaved in class
/// order, not shuffled.
LabeledData gaussian_classes(const std::vector<Index>& sizes, const Eigen::MatrixXd& means,
                             const std::vector<double>& stddevs, std::uint64_t seed);

/// n points in p dimensions split as evenly as possible over g classes whose
/// means are drawn from N(0, separation^2 I); unit noise.
LabeledData random_classes(Index n, Index p, Index g, double separation, std::uint64_t seed);

}  // namespace drm
