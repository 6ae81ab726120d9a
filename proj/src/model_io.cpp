#include "drm/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "drm/error.hpp"

namespace drm {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | ((v >> (8 * i)) & 0xffu);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw LoadError(std::string("manifest is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::string encode_matrix(const Eigen::MatrixXd& m) {
  std::string out(static_cast<std::size_t>(m.size()) * 8, '\0');
  for (Index i = 0; i < m.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(m.data()[i]));
    std::memcpy(out.data() + 8 * i, &bits, 8);
  }
  return out;
}

Eigen::MatrixXd decode_matrix(std::string_view bytes, Index rows, Index cols) {
  if (rows < 0 || cols < 0 || bytes.size() != static_cast<std::size_t>(rows * cols) * 8)
    throw LoadError("train.bin holds " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(rows * cols * 8));
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    m.data()[i] = std::bit_cast<double>(to_little(bits));
  }
  return m;
}

std::string manifest_text(const DrmModel& model, const std::string& train_sha256) {
  const auto& ds = model.train;
  json j;
  j["format"] = "drm-model";
  j["version"] = kFormatVersion;
  j["byte_order"] = "little";
  j["dims"] = {{"p", ds.num_features()}, {"n", ds.num_examples()}, {"g", ds.num_classes()}};
  j["group_sizes"] = ds.blocks.sizes();
  j["label_map"] = ds.original_labels;
  j["kernel"] = {{"family", model.kernel.name()},
                 {"gamma", model.kernel.gamma},
                 {"degree", model.kernel.degree},
                 {"coef0", model.kernel.coef0},
                 {"scale", model.kernel.scale}};
  j["alpha"] = model.params.alpha;
  j["beta"] = model.params.beta;
  j["solver"] = {{"method", method_name(model.solver.method)},
                 {"eps", model.solver.eps},
                 {"max_iter", model.solver.max_iter},
                 {"c_strategy", model.solver.c_strategy.to_string()},
                 {"apg_b0", model.solver.apg_b0},
                 {"apg_eta", model.solver.apg_eta},
                 {"apg_backtracking", model.solver.apg_backtracking}};
  if (model.scaling)
    j["scaling"] = std::vector<double>(model.scaling->divisors.data(),
                                       model.scaling->divisors.data() + model.scaling->divisors.size());
  else
    j["scaling"] = nullptr;
  j["train_bin"] = {{"file", kTrainDataName}, {"sha256", train_sha256}};
  return j.dump(2) + "\n";
}

void save_model(const DrmModel& model, const std::filesystem::path& dir) {
  model.params.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string bin = encode_matrix(model.train.features);
  write_file(dir / kTrainDataName, bin);
  write_file(dir / kManifestName, manifest_text(model, sha256_hex(bin)));
}

DrmModel load_model(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / kManifestName));
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed model.json: ") + e.what());
  }
  if (field<std::string>(j, "format") != "drm-model") throw LoadError("model.json is not a DRM model manifest");
  if (field<int>(j, "version") != kFormatVersion) throw LoadError("unsupported model format version");
  if (field<std::string>(j, "byte_order") != "little") throw LoadError("unsupported byte order");

  const json dims = field<json>(j, "dims");
  const auto p = field<Index>(dims, "p");
  const auto n = field<Index>(dims, "n");
  const auto g = field<Index>(dims, "g");
  const auto sizes = field<std::vector<Index>>(j, "group_sizes");
  const auto labels = field<std::vector<int>>(j, "label_map");
  if (static_cast<Index>(sizes.size()) != g || static_cast<Index>(labels.size()) != g)
    throw LoadError("group_sizes / label_map do not match g");

  const json bin_info = field<json>(j, "train_bin");
  const std::string bin = read_file(dir / field<std::string>(bin_info, "file"));
  if (sha256_hex(bin) != field<std::string>(bin_info, "sha256"))
    throw LoadError("train.bin content hash does not match model.json");

  DrmModel model;
  try {
    model.train.blocks = ClassBlocks(sizes);
  } catch (const Error& e) {
    throw LoadError(std::string("invalid group sizes: ") + e.what());
  }
  if (model.train.blocks.total() != n) throw LoadError("group sizes do not sum to n");
  model.train.features = decode_matrix(bin, p, n);
  model.train.original_labels = labels;
  model.train.class_ids.resize(static_cast<std::size_t>(n));
  model.train.permutation.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    model.train.class_ids[static_cast<std::size_t>(i)] = static_cast<int>(model.train.blocks.class_of(i)) + 1;
    model.train.permutation[static_cast<std::size_t>(i)] = i;
  }

  try {
    const json k = field<json>(j, "kernel");
    model.kernel.family = parse_family(field<std::string>(k, "family"));
    model.kernel.gamma = field<double>(k, "gamma");
    model.kernel.degree = field<int>(k, "degree");
    model.kernel.coef0 = field<double>(k, "coef0");
    model.kernel.scale = field<double>(k, "scale");
    model.kernel.validate();

    model.params.alpha = field<double>(j, "alpha");
    model.params.beta = field<double>(j, "beta");
    model.params.validate();

    const json s = field<json>(j, "solver");
    model.solver.method = parse_method(field<std::string>(s, "method"));
    model.solver.eps = field<double>(s, "eps");
    model.solver.max_iter = field<int>(s, "max_iter");
    model.solver.c_strategy = CStrategy::parse(field<std::string>(s, "c_strategy"));
    model.solver.apg_b0 = field<double>(s, "apg_b0");
    model.solver.apg_eta = field<double>(s, "apg_eta");
    model.solver.apg_backtracking = field<bool>(s, "apg_backtracking");
    model.solver.validate();
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("invalid manifest: ") + e.what());
  }

  if (!j.contains("scaling")) throw LoadError("manifest is missing 'scaling'");
  if (!j["scaling"].is_null()) {
    const auto div = field<std::vector<double>>(j, "scaling");
    if (static_cast<Index>(div.size()) != p) throw LoadError("scaling divisors do not match p");
    model.scaling = ScalingTransform{Eigen::Map<const Eigen::VectorXd>(div.data(), p)};
  }
  return model;
}

}  // namespace drm
