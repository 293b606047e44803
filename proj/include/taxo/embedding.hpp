#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "taxo/corpus.hpp"

namespace taxo {

using Embedding = std::vector<double>;

/// Embeddings for a set of papers. Ids are kept sorted; `vec(i)` is the
/// embedding of `ids()[i]`.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::vector<std::string> ids, std::vector<Embedding> vecs);

  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const Embedding& vec(std::size_t i) const { return vecs_[i]; }
  const Embedding& by_id(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  std::size_t index_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Embedding> vecs_;
  std::map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

/// Text-to-vector backend. Implementations must be deterministic: identical
/// text yields an identical vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed(const std::string& text) const = 0;
};

/// Signed feature hashing over lowercase tokens, L2-normalized. The empty
/// token set maps to the zero vector.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256);
  std::string name() const override { return "hash"; }
  std::size_t dim() const override { return dim_; }
  Embedding embed(const std::string& text) const override;

 private:
  std::size_t dim_;
};

Embedding hash_embed(const std::string& text, std::size_t dim);

/// Embeds `title + "\n" + abstract` for every paper. When `cache_dir` is
/// non-empty, results are cached one file per (embedder name, dim, content
/// digest): a 4-byte little-endian dim header followed by little-endian
/// 32-bit floats.
EmbeddingSet embed_corpus(const Embedder& embedder, const Corpus& corpus,
                          const std::filesystem::path& cache_dir = {},
                          int parallelism = 4);

/// Centered truncated principal-component projection. Deterministic: Jacobi
/// eigensolve with a fixed sweep order and the sign convention that the
/// largest-magnitude loading of each component is positive. Components
/// beyond the data rank come out as zeros.
EmbeddingSet reduce(const EmbeddingSet& embs, std::size_t target_dim, uint64_t seed);

/// Standard cosine; 0 when either vector is zero. Throws on dim mismatch.
double cosine(const Embedding& a, const Embedding& b);

}  // namespace taxo
