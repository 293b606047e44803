#include "taxo/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "taxo/kernels.hpp"
#include "taxo/util.hpp"

namespace taxo {

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::vector<Embedding> vecs)
    : ids_(std::move(ids)), vecs_(std::move(vecs)) {
  if (ids_.size() != vecs_.size()) fail("EmbeddingSet: ids and vectors differ in count");
  if (!std::is_sorted(ids_.begin(), ids_.end())) fail("EmbeddingSet: ids must be sorted");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) fail("EmbeddingSet: duplicate id " + ids_[i]);
    if (i == 0) {
      dim_ = vecs_[i].size();
    } else if (vecs_[i].size() != dim_) {
      fail("dimension mismatch across papers: '" + ids_[i] + "' has dim " +
           std::to_string(vecs_[i].size()) + ", expected " + std::to_string(dim_));
    }
    for (double v : vecs_[i])
      if (!std::isfinite(v)) fail("non-finite embedding entry for '" + ids_[i] + "'");
  }
}

const Embedding& EmbeddingSet::by_id(const std::string& id) const {
  return vecs_[index_of(id)];
}

std::size_t EmbeddingSet::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail("no embedding for id '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Hash embedder
// ---------------------------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ < 8) fail("hash embedder dim must be >= 8");
}

Embedding hash_embed(const std::string& text, std::size_t dim) {
  if (dim < 8) fail("hash_embed: dim must be >= 8");
  Embedding v(dim, 0.0);
  bool any = false;
  for (const std::string& tok : tokenize(text)) {
    const std::size_t bucket = fnv1a64("b|" + tok) % dim;
    const double sign = (fnv1a64("s|" + tok) & 1) ? 1.0 : -1.0;
    v[bucket] += sign;
    any = true;
  }
  if (!any) return v;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return v;  // all signed counts cancelled
  for (double& x : v) x /= norm;
  return v;
}

Embedding HashEmbedder::embed(const std::string& text) const {
  return hash_embed(text, dim_);
}

// ---------------------------------------------------------------------------
// Corpus embedding with content-addressed cache
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path cache_path(const std::filesystem::path& dir,
                                 const Embedder& embedder, const std::string& digest) {
  return dir / (embedder.name() + "-" + std::to_string(embedder.dim())) / digest;
}

bool load_cached(const std::filesystem::path& file, std::size_t dim, Embedding& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return false;
  uint32_t header = 0;
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  header = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  if (header != dim) return false;
  out.assign(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    unsigned char fb[4];
    if (!in.read(reinterpret_cast<char*>(fb), 4)) return false;
    uint32_t bits = static_cast<uint32_t>(fb[0]) | (static_cast<uint32_t>(fb[1]) << 8) |
                    (static_cast<uint32_t>(fb[2]) << 16) |
                    (static_cast<uint32_t>(fb[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = static_cast<double>(f);
  }
  return true;
}

void store_cached(const std::filesystem::path& file, const Embedding& v) {
  std::string bytes;
  bytes.reserve(4 + 4 * v.size());
  const uint32_t dim = static_cast<uint32_t>(v.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((dim >> (8 * i)) & 0xff));
  for (double d : v) {
    const float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  write_file_atomic(file, bytes);
}

}  // namespace

EmbeddingSet embed_corpus(const Embedder& embedder, const Corpus& corpus,
                          const std::filesystem::path& cache_dir, int parallelism) {
  if (corpus.empty()) fail("embed_corpus: corpus is empty");
  const std::vector<std::string> ids = corpus.sorted_ids();
  const std::size_t n = ids.size();
  std::vector<Embedding> vecs(n);
  std::vector<std::string> errors(n);

  const bool use_cache = !cache_dir.empty();
  if (use_cache)
    std::filesystem::create_directories(
        cache_dir / (embedder.name() + "-" + std::to_string(embedder.dim())));

  const std::int64_t sn = static_cast<std::int64_t>(n);
  int threads = 1;
#ifdef _OPENMP
  threads = std::max(1, std::min(parallelism, omp_get_max_threads()));
#else
  (void)parallelism;
#endif

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < sn; ++i) {
    const Paper& p = corpus.by_id(ids[i]);
    const std::string text = p.title + "\n" + p.abstract;
    try {
      if (use_cache) {
        const std::string digest = sha256_hex(text);
        const std::filesystem::path file = cache_path(cache_dir, embedder, digest);
        Embedding cached;
        if (load_cached(file, embedder.dim(), cached)) {
          vecs[i] = std::move(cached);
          continue;
        }
        Embedding fresh = [&] {
          for (int attempt = 1;; ++attempt) {
            try {
              return embedder.embed(text);
            } catch (const std::exception&) {
              if (attempt >= 3) throw;
            }
          }
        }();
        store_cached(file, fresh);
        vecs[i] = std::move(fresh);
      } else {
        for (int attempt = 1;; ++attempt) {
          try {
            vecs[i] = embedder.embed(text);
            break;
          } catch (const std::exception&) {
            if (attempt >= 3) throw;
          }
        }
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty())
      fail("embedding failed for paper '" + ids[i] + "': " + errors[i]);
  return EmbeddingSet(ids, std::move(vecs));
}

// ---------------------------------------------------------------------------
// Principal-component reduction via the Gram matrix
// ---------------------------------------------------------------------------

namespace {

/// Cyclic Jacobi on a symmetric matrix (row-major n x n). Returns
/// eigenvalues in `eig`; V's columns are the eigenvectors.
void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& eig,
                  std::vector<double>& v) {
  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  eig.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
}

}  // namespace

EmbeddingSet reduce(const EmbeddingSet& embs, std::size_t target_dim, uint64_t seed) {
  (void)seed;  // the projection is deterministic; recorded in provenance only
  const std::size_t n = embs.size();
  const std::size_t d = embs.dim();
  if (n < 2) fail("reduce: need at least 2 papers");
  if (target_dim == 0 || target_dim >= d)
    fail("reduce: target_dim must be in [1, dim)");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += embs.vec(i)[k];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> xc(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) xc[i * d + k] = embs.vec(i)[k] - mean[k];

  const std::vector<double> g = kernels::gram_matrix(xc, n, d);

  std::vector<double> eig, v;
  jacobi_eigen(g, n, eig, v);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });

  const double lead = std::max(eig[order[0]], 0.0);
  const std::size_t m = std::min(target_dim, n);

  std::vector<Embedding> out(n, Embedding(target_dim, 0.0));
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t col = order[c];
    const double lambda = eig[col];
    if (lambda <= 0.0 || lambda < lead * 1e-12) continue;  // below data rank
    const double sigma = std::sqrt(lambda);
    // Loading vector w = X^T u / sigma decides the sign convention.
    std::size_t arg = 0;
    double best = -1.0;
    double best_signed = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double w = 0.0;
      for (std::size_t i = 0; i < n; ++i) w += xc[i * d + k] * v[i * n + col];
      w /= sigma;
      if (std::abs(w) > best) {
        best = std::abs(w);
        best_signed = w;
        arg = k;
      }
    }
    (void)arg;
    const double flip = best_signed < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out[i][c] = flip * v[i * n + col] * sigma;
  }
  return EmbeddingSet(embs.ids(), std::move(out));
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    fail("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
         std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace taxo
