#include "taxo/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "taxo/kernels.hpp"
#include "taxo/util.hpp"

namespace taxo {

void validate(const ClusterParams& p) {
  if (p.max_depth < 1) fail("cluster: max_depth must be >= 1");
  if (p.min_split_size < 4) fail("cluster: min_split_size must be >= 4");
  if (p.k_min < 2) fail("cluster: k_min must be >= 2");
  if (p.k_max < p.k_min) fail("cluster: k_max must be >= k_min");
}

namespace {

std::vector<double> gather_points(const std::vector<std::string>& ids,
                                  const EmbeddingSet& embs) {
  const std::size_t dim = embs.dim();
  std::vector<double> pts(ids.size() * dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Embedding& v = embs.by_id(ids[i]);
    std::copy(v.begin(), v.end(), pts.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return pts;
}

Embedding mean_of(const std::vector<std::string>& ids, const EmbeddingSet& embs) {
  Embedding m(embs.dim(), 0.0);
  for (const std::string& id : ids) {
    const Embedding& v = embs.by_id(id);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += v[k];
  }
  for (double& x : m) x /= static_cast<double>(ids.size());
  return m;
}

/// Farthest-point seeding: start at seed % n, then repeatedly take the point
/// maximizing the distance to the chosen set (ties to the smallest index).
std::vector<std::size_t> seed_centroids(const std::vector<double>& sq_dist,
                                        std::size_t n, std::size_t k, uint64_t seed) {
  std::vector<std::size_t> chosen;
  chosen.push_back(seed % n);
  std::vector<double> min_d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) min_d[i] = sq_dist[i * n + chosen[0]];
  while (chosen.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    chosen.push_back(best);
    for (std::size_t i = 0; i < n; ++i)
      min_d[i] = std::min(min_d[i], sq_dist[i * n + best]);
  }
  return chosen;
}

struct Candidate {
  std::vector<int> labels;
  std::size_t k = 0;
  double silhouette = -2.0;
  bool ok = false;
};

Candidate run_kmeans(const std::vector<double>& pts, const std::vector<double>& sq_dist,
                     std::size_t n, std::size_t dim, std::size_t k, uint64_t seed) {
  Candidate cand;
  cand.k = k;
  const std::vector<std::size_t> seeds = seed_centroids(sq_dist, n, k, seed);
  std::vector<double> centroids(k * dim);
  for (std::size_t c = 0; c < k; ++c)
    std::copy(pts.begin() + static_cast<std::ptrdiff_t>(seeds[c] * dim),
              pts.begin() + static_cast<std::ptrdiff_t>((seeds[c] + 1) * dim),
              centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));

  std::vector<int> labels(n, -1);
  std::vector<std::size_t> counts;
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<int> next = kernels::assign_nearest(pts, n, centroids, k, dim);
    if (next == labels) break;
    labels = std::move(next);
    std::vector<double> means = kernels::cluster_means(pts, n, labels, k, dim, counts);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep the stale centroid
      std::copy(means.begin() + static_cast<std::ptrdiff_t>(c * dim),
                means.begin() + static_cast<std::ptrdiff_t>((c + 1) * dim),
                centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
  }
  counts.assign(k, 0);
  for (int l : labels) ++counts[l];
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] == 0) return cand;  // degenerate
  cand.labels = labels;
  cand.silhouette = kernels::mean_silhouette(sq_dist, n, labels, k);
  cand.ok = true;
  return cand;
}

/// First principal direction via deterministic power iteration on the
/// centered points.
std::vector<double> principal_direction(const std::vector<double>& pts, std::size_t n,
                                        std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i * dim + d];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<double> next(dim);
  for (int iter = 0; iter < 200; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double proj = 0.0;
      for (std::size_t d = 0; d < dim; ++d) proj += (pts[i * dim + d] - mean[d]) * v[d];
      for (std::size_t d = 0; d < dim; ++d) next[d] += proj * (pts[i * dim + d] - mean[d]);
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-30) break;
    for (std::size_t d = 0; d < dim; ++d) next[d] /= norm;
    double delta = 0.0;
    for (std::size_t d = 0; d < dim; ++d) delta += std::abs(next[d] - v[d]);
    v = next;
    if (delta < 1e-14) break;
  }
  return v;
}

std::vector<std::vector<std::string>> order_parts(
    std::vector<std::vector<std::string>> parts) {
  for (auto& p : parts) std::sort(p.begin(), p.end());
  std::stable_sort(parts.begin(), parts.end(),
                   [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
                     if (a.size() != b.size()) return a.size() > b.size();
                     return a.front() < b.front();
                   });
  return parts;
}

}  // namespace

std::vector<std::vector<std::string>> split_node(const std::vector<std::string>& paper_ids,
                                                 const EmbeddingSet& embs,
                                                 int k_min, int k_max, uint64_t seed) {
  if (k_min < 2 || k_max < k_min) fail("split_node: bad k range");
  std::vector<std::string> ids = paper_ids;
  std::sort(ids.begin(), ids.end());
  const std::size_t n = ids.size();
  if (n < static_cast<std::size_t>(k_min)) return {};

  const std::size_t dim = embs.dim();
  const std::vector<double> pts = gather_points(ids, embs);
  const std::vector<double> sq_dist = kernels::pairwise_sq_dist(pts, n, dim);

  Candidate best;
  for (int k = k_min; k <= k_max && static_cast<std::size_t>(k) <= n; ++k) {
    Candidate cand = run_kmeans(pts, sq_dist, n, dim, static_cast<std::size_t>(k), seed);
    if (!cand.ok) continue;
    if (!best.ok || cand.silhouette > best.silhouette + 1e-9) best = std::move(cand);
  }

  std::vector<std::vector<std::string>> parts;
  if (best.ok) {
    parts.assign(best.k, {});
    for (std::size_t i = 0; i < n; ++i) parts[best.labels[i]].push_back(ids[i]);
  } else {
    // Median split along the first principal direction.
    const std::vector<double> dir = principal_direction(pts, n, dim);
    std::vector<std::pair<double, std::size_t>> proj(n);
    for (std::size_t i = 0; i < n; ++i) {
      double x = 0.0;
      for (std::size_t d = 0; d < dim; ++d) x += pts[i * dim + d] * dir[d];
      proj[i] = {x, i};
    }
    std::stable_sort(proj.begin(), proj.end());
    if (proj.back().first - proj.front().first < 1e-12) return {};  // no spread
    const std::size_t half = (n + 1) / 2;
    parts.assign(2, {});
    for (std::size_t r = 0; r < n; ++r)
      parts[r < half ? 0 : 1].push_back(ids[proj[r].second]);
  }
  for (const auto& p : parts)
    if (p.empty()) return {};
  return order_parts(std::move(parts));
}

namespace {

void expand_bfs(ClusterNode& root, const EmbeddingSet& embs, const ClusterParams& params,
                uint64_t seed) {
  std::deque<ClusterNode*> queue{&root};
  while (!queue.empty()) {
    ClusterNode* node = queue.front();
    queue.pop_front();
    node->centroid = mean_of(node->paper_ids, embs);
    if (node->depth >= params.max_depth) continue;
    if (node->paper_ids.size() < static_cast<std::size_t>(params.min_split_size)) continue;
    const auto parts = split_node(node->paper_ids, embs, params.k_min, params.k_max, seed);
    if (parts.size() < 2) continue;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      ClusterNode child;
      child.id = node->id + "." + std::to_string(i);
      child.paper_ids = parts[i];
      child.depth = node->depth + 1;
      node->children.push_back(std::move(child));
    }
    for (ClusterNode& c : node->children) queue.push_back(&c);
  }
}

}  // namespace

ClusterNode build_cluster_tree(const EmbeddingSet& embs, const ClusterParams& params) {
  validate(params);
  if (embs.size() < 2) fail("build_cluster_tree: need at least 2 papers");
  ClusterNode root;
  root.id = "c0";
  root.paper_ids = embs.ids();
  root.depth = 0;
  expand_bfs(root, embs, params, params.seed);
  return root;
}

ClusterNode recluster_subtree(const ClusterNode& node, const EmbeddingSet& embs,
                              const ClusterParams& params) {
  if (node.paper_ids.size() < static_cast<std::size_t>(params.min_split_size)) return node;
  ClusterNode fresh;
  fresh.id = node.id;
  fresh.paper_ids = node.paper_ids;
  fresh.depth = node.depth;
  expand_bfs(fresh, embs, params, mix_seed(params.seed, fnv1a64(node.id)));
  return fresh;
}

std::vector<const ClusterNode*> cluster_leaves(const ClusterNode& root) {
  std::vector<const ClusterNode*> out;
  std::deque<const ClusterNode*> queue{&root};
  while (!queue.empty()) {
    const ClusterNode* n = queue.front();
    queue.pop_front();
    if (n->leaf()) out.push_back(n);
    for (const ClusterNode& c : n->children) queue.push_back(&c);
  }
  return out;
}

std::size_t cluster_node_count(const ClusterNode& root) {
  std::size_t n = 1;
  for (const ClusterNode& c : root.children) n += cluster_node_count(c);
  return n;
}

void validate_cluster_tree(const ClusterNode& root, const EmbeddingSet& embs) {
  std::function<void(const ClusterNode&)> rec = [&](const ClusterNode& n) {
    if (n.paper_ids.empty()) fail("cluster node '" + n.id + "' holds no papers");
    if (!std::is_sorted(n.paper_ids.begin(), n.paper_ids.end()))
      fail("cluster node '" + n.id + "' has unsorted papers");
    if (n.children.size() == 1) fail("single-child cluster node '" + n.id + "'");
    const Embedding m = mean_of(n.paper_ids, embs);
    for (std::size_t k = 0; k < m.size(); ++k)
      if (std::abs(m[k] - n.centroid[k]) > 1e-6)
        fail("stale centroid on cluster node '" + n.id + "'");
    if (!n.children.empty()) {
      std::vector<std::string> merged;
      for (const ClusterNode& c : n.children) {
        rec(c);
        merged.insert(merged.end(), c.paper_ids.begin(), c.paper_ids.end());
      }
      std::sort(merged.begin(), merged.end());
      if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
        fail("overlapping children under cluster node '" + n.id + "'");
      if (merged != n.paper_ids)
        fail("children do not cover cluster node '" + n.id + "'");
    }
  };
  rec(root);
  (void)embs;
}

}  // namespace taxo
