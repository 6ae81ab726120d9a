#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "drm/classifier.hpp"

namespace drm {

inline constexpr const char* kManifestName = "model.json";
inline constexpr const char* kTrainDataName = "train.bin";

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Column-major IEEE-754 binary64, little-endian regardless of host order.
std::string encode_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_matrix(std::string_view bytes, Index rows, Index cols);

/// Writes `dir/model.json` and `dir/train.bin`, creating `dir` if needed.
/// Output is byte-identical for identical models.
void save_model(const DrmModel& model, const std::filesystem::path& dir);

/// Reads a model directory. Throws LoadError when a file is missing, the
/// manifest is malformed, or train.bin does not match its recorded hash.
DrmModel load_model(const std::filesystem::path& dir);

/// Manifest text for `model` with the given train.bin hash.
std::string manifest_text(const DrmModel& model, const std::string& train_sha256);

}  // namespace drm
