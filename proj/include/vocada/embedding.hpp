#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vocada {

/// Row-major matrix of unit-normalized embeddings addressed by string key.
/// Rows are L2-normalized at construction; a zero row is a load error.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::vector<std::string> keys, std::vector<float> values);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::span<const float> values() const { return values_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key).has_value(); }

  /// Copies the rows named by `keys`, in that order. Throws DataError on a missing key.
  EmbeddingMatrix select(std::span<const std::string> keys) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// On-disk formats. Binary: "VEMB", u32 version=1, u32 rows, u32 dim, rows*dim f32,
// all little-endian, with keys in "<file>.keys.json". JSON: {"dim": D, "entries": [{"key", "vec"}]}.

/// Loads either format, detected from the leading magic bytes.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_vemb(const std::filesystem::path& path, const EmbeddingMatrix& m);
void save_embeddings_json(const std::filesystem::path& path, const EmbeddingMatrix& m);

std::filesystem::path keys_sidecar(const std::filesystem::path& vemb_path);

}  // namespace vocada
