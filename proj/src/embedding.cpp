#include "vocada/embedding.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "vocada/error.hpp"

namespace vocada {

namespace {

constexpr std::array<char, 4> kMagic{'V', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(bytes, 4);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open embedding file " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EmbeddingMatrix parse_vemb(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16) {
    throw DataError(path.string() + ": truncated VEMB header");
  }
  const std::uint32_t version = read_u32_le(bytes.data() + 4);
  const std::uint32_t rows = read_u32_le(bytes.data() + 8);
  const std::uint32_t dim = read_u32_le(bytes.data() + 12);
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported VEMB version " + std::to_string(version));
  }
  const std::size_t expected = 16 + static_cast<std::size_t>(rows) * dim * 4;
  if (bytes.size() != expected) {
    throw DataError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  std::vector<float> values(static_cast<std::size_t>(rows) * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(read_u32_le(bytes.data() + 16 + 4 * i));
  }

  const auto sidecar = keys_sidecar(path);
  std::ifstream kin(sidecar);
  if (!kin) {
    throw DataError("missing key sidecar " + sidecar.string());
  }
  std::vector<std::string> keys;
  try {
    keys = nlohmann::json::parse(kin).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  if (keys.size() != rows) {
    throw DataError(sidecar.string() + ": " + std::to_string(keys.size()) + " keys for " + std::to_string(rows) +
                    " rows");
  }
  return EmbeddingMatrix(dim, std::move(keys), std::move(values));
}

EmbeddingMatrix parse_json(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  try {
    const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto dim = doc.at("dim").get<std::size_t>();
    std::vector<std::string> keys;
    std::vector<float> values;
    for (const auto& entry : doc.at("entries")) {
      keys.push_back(entry.at("key").get<std::string>());
      const auto vec = entry.at("vec").get<std::vector<float>>();
      if (vec.size() != dim) {
        throw DataError(path.string() + ": entry '" + keys.back() + "' has width " + std::to_string(vec.size()) +
                        ", expected " + std::to_string(dim));
      }
      values.insert(values.end(), vec.begin(), vec.end());
    }
    return EmbeddingMatrix(dim, std::move(keys), std::move(values));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<std::string> keys, std::vector<float> values)
    : dim_(dim), keys_(std::move(keys)), values_(std::move(values)) {
  if (values_.size() != keys_.size() * dim_) {
    throw DataError("embedding matrix has " + std::to_string(values_.size()) + " values for " +
                    std::to_string(keys_.size()) + " rows of width " + std::to_string(dim_));
  }
  if (dim_ == 0 && !keys_.empty()) {
    throw DataError("embedding matrix with rows must have dim > 0");
  }
  index_.reserve(keys_.size());
  for (std::size_t r = 0; r < keys_.size(); ++r) {
    if (!index_.emplace(keys_[r], r).second) {
      throw DataError("duplicate embedding key '" + keys_[r] + "'");
    }
    std::span<float> row(values_.data() + r * dim_, dim_);
    double sq = 0.0;
    for (float v : row) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite value in embedding row '" + keys_[r] + "'");
      }
      sq += static_cast<double>(v) * v;
    }
    if (sq <= 0.0) {
      throw DataError("zero-norm embedding row '" + keys_[r] + "'");
    }
    const double norm = std::sqrt(sq);
    for (float& v : row) {
      v = static_cast<float>(v / norm);
    }
  }
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view key) const {
  if (auto it = index_.find(std::string(key)); it != index_.end()) {
    return it->second;
  }
  return std::nullopt;
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::string> keys) const {
  std::vector<float> values;
  values.reserve(keys.size() * dim_);
  for (const auto& k : keys) {
    const auto r = find(k);
    if (!r) {
      throw DataError("no embedding for key '" + k + "'");
    }
    const auto src = row(*r);
    values.insert(values.end(), src.begin(), src.end());
  }
  return EmbeddingMatrix(dim_, {keys.begin(), keys.end()}, std::move(values));
}

std::filesystem::path keys_sidecar(const std::filesystem::path& vemb_path) {
  return std::filesystem::path(vemb_path.string() + ".keys.json");
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    return parse_vemb(path, bytes);
  }
  return parse_json(path, bytes);
}

void save_vemb(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out.write(kMagic.data(), kMagic.size());
  write_u32_le(out, kVersion);
  write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.values()) {
    write_u32_le(out, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream kout(keys_sidecar(path), std::ios::trunc);
  kout << nlohmann::json(m.keys()).dump() << '\n';
}

void save_embeddings_json(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  nlohmann::json doc;
  doc["dim"] = m.dim();
  doc["entries"] = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    doc["entries"].push_back({{"key", m.keys()[r]}, {"vec", std::vector<float>(row.begin(), row.end())}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << doc.dump() << '\n';
}

}  // namespace vocada
