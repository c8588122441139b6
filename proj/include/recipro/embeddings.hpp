#pragma once

// Frozen-encoder embeddings in the RPEMB1 interchange format:
//
//   "RPEMB1" | u8 version (1) | u32 dim | u64 count |
//   count x ( u32 id_len | id bytes (UTF-8) | dim x f32 )
//
// All integers and floats little-endian.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recipro/binio.hpp"
#include "recipro/error.hpp"
#include "recipro/hash.hpp"

namespace recipro {

inline constexpr std::string_view kEmbeddingMagic = "RPEMB1";
inline constexpr std::uint8_t kEmbeddingVersion = 1;

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::uint32_t dim, std::string source_model)
      : dim_(dim), source_model_(std::move(source_model)) {
    if (dim_ == 0) throw data_error("corrupt_embeddings", "dim must be positive");
  }

  void add(std::string id, std::vector<float> vec) {
    if (vec.size() != dim_)
      throw data_error("corrupt_embeddings", "vector for '" + id + "' has wrong dimension");
    for (float v : vec)
      if (!std::isfinite(v)) throw data_error("corrupt_embeddings", "non-finite value for '" + id + "'");
    if (!index_.emplace(id, ids_.size()).second)
      throw data_error("corrupt_embeddings", "duplicate id '" + id + "'");
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vec));
  }

  const std::vector<float>* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &vectors_[it->second];
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::string& source_model() const { return source_model_; }
  void set_source_model(std::string s) { source_model_ = std::move(s); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& vector_at(std::size_t i) const { return vectors_[i]; }

 private:
  std::uint32_t dim_ = 0;
  std::string source_model_;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::string serialize(const EmbeddingTable& t) {
  bin::Writer w;
  w.raw(kEmbeddingMagic);
  w.u8(kEmbeddingVersion);
  w.u32(t.dim());
  w.u64(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    w.str(t.ids()[i]);
    for (float v : t.vector_at(i)) w.f32(v);
  }
  return w.bytes();
}

// The format carries no model name; the caller supplies it.
inline EmbeddingTable deserialize_embeddings(std::string_view bytes, std::string source_model) {
  bin::Reader r(bytes, "corrupt_embeddings");
  if (r.raw(kEmbeddingMagic.size()) != kEmbeddingMagic) r.fail("bad magic");
  if (r.u8() != kEmbeddingVersion) r.fail("unsupported version");
  const auto dim = r.u32();
  const auto count = r.u64();
  if (dim == 0) r.fail("dim must be positive");
  if (count > r.remaining() / (4 + 4ull * dim)) r.fail("count larger than file");
  EmbeddingTable t(dim, std::move(source_model));
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string id = r.str();
    std::vector<float> vec(dim);
    for (auto& v : vec) v = r.f32();
    t.add(std::move(id), std::move(vec));
  }
  if (!r.done()) r.fail("trailing bytes");
  return t;
}

inline EmbeddingTable load_embeddings(const std::string& path, std::string source_model) {
  return deserialize_embeddings(read_file(path), std::move(source_model));
}

inline void save_embeddings(const EmbeddingTable& t, const std::string& path) {
  bin::Writer w;
  w.raw(serialize(t));
  w.save(path);
}

}  // namespace recipro
