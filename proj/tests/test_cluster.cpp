#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "taxo/cluster.hpp"
#include "taxo/corpus.hpp"
#include "taxo/util.hpp"

using namespace taxo;

namespace {

/// Hand-built embedding set: ids p000.. with given coordinates.
EmbeddingSet points_set(const std::vector<Embedding>& pts) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%03zu", i);
    ids.push_back(buf);
  }
  return EmbeddingSet(ids, pts);
}

std::string serialize(const ClusterNode& n) {
  std::string s = "(" + n.id + ":";
  for (const auto& p : n.paper_ids) s += p + ",";
  for (const auto& c : n.children) s += serialize(c);
  return s + ")";
}

}  // namespace

TEST_CASE("split_node: two well-separated blobs come back exactly") {
  uint64_t state = 3;
  std::vector<Embedding> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({next_unit(state) * 0.3, next_unit(state) * 0.3});
  for (int i = 0; i < 6; ++i)
    pts.push_back({8.0 + next_unit(state) * 0.3, 8.0 + next_unit(state) * 0.3});
  const EmbeddingSet embs = points_set(pts);

  const auto parts = split_node(embs.ids(), embs, 2, 4, 17);
  REQUIRE(parts.size() == 2);  // k=2 maximizes silhouette
  std::set<std::string> first(parts[0].begin(), parts[0].end());
  const std::set<std::string> blob_a = {"p000", "p001", "p002", "p003", "p004", "p005"};
  const std::set<std::string> blob_b = {"p006", "p007", "p008", "p009", "p010", "p011"};
  CHECK((first == blob_a || first == blob_b));
  CHECK(parts[0].size() + parts[1].size() == 12);
}

TEST_CASE("split_node: identical points give the no-split signal") {
  const std::vector<Embedding> pts(8, Embedding{1.0, 2.0});
  const EmbeddingSet embs = points_set(pts);
  CHECK(split_node(embs.ids(), embs, 2, 5, 0).empty());
}

TEST_CASE("split_node: exact silhouette ties resolve to the smallest k") {
  // Four pairwise-equidistant points (scaled 4-dim simplex): every candidate
  // partition scores silhouette 0, so k=2 wins the tie.
  std::vector<Embedding> pts;
  for (int i = 0; i < 4; ++i) {
    Embedding v(4, 0.0);
    v[i] = 1.0;
    pts.push_back(v);
  }
  const EmbeddingSet embs = points_set(pts);
  const auto parts = split_node(embs.ids(), embs, 2, 4, 9);
  CHECK(parts.size() == 2);
}

TEST_CASE("split_node: parts are ordered by size then smallest id") {
  // 3 points near zero, 5 points near ten: expect the size-5 part first.
  std::vector<Embedding> pts;
  uint64_t state = 8;
  for (int i = 0; i < 3; ++i) pts.push_back({next_unit(state) * 0.1});
  for (int i = 0; i < 5; ++i) pts.push_back({10.0 + next_unit(state) * 0.1});
  const EmbeddingSet embs = points_set(pts);
  const auto parts = split_node(embs.ids(), embs, 2, 3, 1);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 5);
  CHECK(parts[0].front() == "p003");
}

TEST_CASE("build_cluster_tree: recovers the planted 2x2 structure") {
  const auto [corpus, gold] = synth_corpus({2, 2, 3, 7});
  const HashEmbedder embedder(256);
  const EmbeddingSet raw = embed_corpus(embedder, corpus);
  const EmbeddingSet red = reduce(raw, 16, 7);

  ClusterParams params;
  params.seed = 7;
  const ClusterNode root = build_cluster_tree(red, params);
  validate_cluster_tree(root, red);

  // Planted leaves from the gold tree.
  std::set<std::set<std::string>> expected;
  walk(gold.root, [&](const TaxNode& n, int) {
    if (n.leaf()) expected.insert({n.paper_ids.begin(), n.paper_ids.end()});
  });
  std::set<std::set<std::string>> got;
  for (const ClusterNode* leaf : cluster_leaves(root))
    got.insert({leaf->paper_ids.begin(), leaf->paper_ids.end()});
  CHECK(got == expected);
}

TEST_CASE("build_cluster_tree: below min_split_size nothing splits") {
  uint64_t state = 1;
  std::vector<Embedding> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({next_unit(state), next_unit(state)});
  const EmbeddingSet embs = points_set(pts);
  ClusterParams params;  // min_split_size 6
  const ClusterNode root = build_cluster_tree(embs, params);
  CHECK(root.leaf());
  CHECK(root.paper_ids.size() == 5);
}

TEST_CASE("build_cluster_tree: deterministic including node ids") {
  const auto [corpus, gold] = synth_corpus({2, 2, 3, 11});
  const HashEmbedder embedder(128);
  const EmbeddingSet red = reduce(embed_corpus(embedder, corpus), 8, 11);
  ClusterParams params;
  params.seed = 11;
  CHECK(serialize(build_cluster_tree(red, params)) ==
        serialize(build_cluster_tree(red, params)));
}

TEST_CASE("build_cluster_tree: depth cap and partition invariants hold") {
  const auto [corpus, gold] = synth_corpus({3, 2, 2, 5});
  const HashEmbedder embedder(256);
  const EmbeddingSet red = reduce(embed_corpus(embedder, corpus), 12, 5);
  ClusterParams params;
  params.max_depth = 2;
  params.min_split_size = 4;
  params.seed = 5;
  const ClusterNode root = build_cluster_tree(red, params);
  validate_cluster_tree(root, red);
  int max_depth_seen = 0;
  std::function<void(const ClusterNode&, int)> rec = [&](const ClusterNode& n, int d) {
    max_depth_seen = std::max(max_depth_seen, d);
    CHECK(n.depth == d);
    for (const auto& c : n.children) rec(c, d + 1);
  };
  rec(root, 0);
  CHECK(max_depth_seen <= 2);
  // Leaf paper multiset equals the corpus ids.
  std::vector<std::string> all;
  for (const ClusterNode* leaf : cluster_leaves(root))
    all.insert(all.end(), leaf->paper_ids.begin(), leaf->paper_ids.end());
  std::sort(all.begin(), all.end());
  CHECK(all == corpus.sorted_ids());
  CHECK(build_cluster_tree(red, params).paper_ids == corpus.sorted_ids());
}

TEST_CASE("recluster_subtree: same papers, fresh partition, deterministic") {
  uint64_t state = 21;
  std::vector<Embedding> pts;
  for (int i = 0; i < 8; ++i)
    pts.push_back({next_unit(state) * 2, next_unit(state) * 2, next_unit(state)});
  const EmbeddingSet embs = points_set(pts);
  ClusterParams params;
  params.min_split_size = 4;
  params.seed = 2;
  const ClusterNode root = build_cluster_tree(embs, params);

  const ClusterNode again = recluster_subtree(root, embs, params);
  CHECK(again.paper_ids == root.paper_ids);
  validate_cluster_tree(again, embs);
  CHECK(serialize(recluster_subtree(root, embs, params)) == serialize(again));

  // Too-small nodes come back unchanged.
  ClusterNode small;
  small.id = "c9";
  small.paper_ids = {"p000", "p001", "p002"};
  small.centroid = {0, 0, 0};
  const ClusterNode same = recluster_subtree(small, embs, params);
  CHECK(serialize(same) == serialize(small));
}
