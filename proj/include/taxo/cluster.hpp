#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taxo/embedding.hpp"

namespace taxo {

struct ClusterParams {
  int max_depth = 3;
  int min_split_size = 6;
  int k_min = 2;
  int k_max = 5;
  uint64_t seed = 0;
};

void validate(const ClusterParams& p);

/// A node of the structural backbone. `paper_ids` is cumulative: every paper
/// under the node, children partitioning the parent exactly. A node has
/// either no children or at least two.
struct ClusterNode {
  std::string id;
  std::vector<std::string> paper_ids;  // sorted
  std::vector<ClusterNode> children;
  int depth = 0;
  Embedding centroid;

  bool leaf() const { return children.empty(); }
};

/// Deterministic k-way partition of `paper_ids`. Runs a centroid-based
/// partition for each k in [k_min, k_max] (farthest-point seeding from a
/// seed-fixed start, 50 iterations or convergence) and keeps the k with the
/// best mean silhouette; ties go to the smaller k. Degenerate candidates
/// (an empty part) are dropped; if every k degenerates, a median split along
/// the first principal direction is tried. Returns an empty list when no
/// meaningful split exists. Parts are ordered by size descending, then by
/// smallest contained paper id.
std::vector<std::vector<std::string>> split_node(const std::vector<std::string>& paper_ids,
                                                 const EmbeddingSet& embs,
                                                 int k_min, int k_max, uint64_t seed);

/// Breadth-first expansion: every node with at least `min_split_size` papers
/// and depth below `max_depth` is partitioned by split_node.
ClusterNode build_cluster_tree(const EmbeddingSet& embs, const ClusterParams& params);

/// Rebuilds the subtree under `node` with a seed derived from
/// (params.seed, node.id), so the retry partitions differently from the
/// original pass. Nodes smaller than min_split_size come back unchanged.
ClusterNode recluster_subtree(const ClusterNode& node, const EmbeddingSet& embs,
                              const ClusterParams& params);

/// Leaves of the subtree in breadth-first order.
std::vector<const ClusterNode*> cluster_leaves(const ClusterNode& root);

std::size_t cluster_node_count(const ClusterNode& root);

/// Throws on a partition violation (child sets not disjoint or not covering
/// the parent), a single-child node, or a stale centroid.
void validate_cluster_tree(const ClusterNode& root, const EmbeddingSet& embs);

}  // namespace taxo
