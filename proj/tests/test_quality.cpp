#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "taxo/quality.hpp"
#include "taxo/util.hpp"

using namespace taxo;
using taxo::testing::CountingProvider;
using taxo::testing::ScriptedProvider;
using taxo::testing::TempDir;

namespace {

TaxNode node_of(const std::string& title, std::vector<std::string> papers,
                std::vector<TaxNode> children = {}) {
  TaxNode n;
  n.title = title;
  std::sort(papers.begin(), papers.end());
  n.paper_ids = std::move(papers);
  n.children = std::move(children);
  return n;
}

Corpus corpus_for(const TaxNode& root) {
  std::vector<Paper> papers;
  walk(root, [&](const TaxNode& n, int) {
    for (const std::string& p : n.paper_ids)
      papers.push_back({p, "paper " + p, "body of " + p, "en"});
  });
  return Corpus(papers, "");
}

std::vector<std::string> papers_of(const TaxNode& n) { return subtree_paper_ids(n); }

}  // namespace

TEST_CASE("score_and_prune: a low-scored node is hoisted into its parent") {
  TempDir dir("score");
  TaxNode root = node_of("root topic", {},
                         {node_of("strong heading here", {"p1", "p2"}),
                          node_of("weak", {"p3", "p4"})});
  const Corpus corpus = corpus_for(root);
  // Fixture forces the "weak" node to score 3; the mock rule would give 6.
  const LlmRequest weak_req = make_score_request("weak", 2, {"paper p3", "paper p4"});
  write_file_atomic(dir / payload_digest(weak_req), "<<<{\"score\": 3}>>>");
  MockProvider mock(dir.path());

  const TaxNode out = score_and_prune(root, corpus, mock, 5);
  REQUIRE(out.children.size() == 1);
  CHECK(out.children[0].title == "strong heading here");
  CHECK(out.paper_ids == std::vector<std::string>{"p3", "p4"});  // hoisted
  CHECK(papers_of(out) == papers_of(root));
  CHECK(out.children[0].score.has_value());
}

TEST_CASE("score_and_prune: all nodes at or above threshold stay, scores recorded") {
  TaxNode root = node_of("root", {},
                         {node_of("alpha heading", {"p1"}), node_of("beta heading", {"p2"})});
  const Corpus corpus = corpus_for(root);
  MockProvider mock;
  const TaxNode out = score_and_prune(root, corpus, mock, 5);
  CHECK(out.children.size() == 2);
  for (const TaxNode& c : out.children) {
    REQUIRE(c.score.has_value());
    CHECK(*c.score >= 5);
    CHECK_FALSE(c.score_defaulted);
  }
  CHECK(tree_to_string(score_and_prune(root, corpus, mock, 5)) == tree_to_string(out));
}

TEST_CASE("score_and_prune: persistent out-of-range responses default the score") {
  TaxNode root = node_of("root", {}, {node_of("child topic", {"p1", "p2"})});
  const Corpus corpus = corpus_for(root);
  ScriptedProvider scripted({"<<<{\"score\": 11}>>>"});  // replayed every attempt
  const TaxNode out = score_and_prune(root, corpus, scripted, 5);
  REQUIRE(out.children.size() == 1);
  CHECK(out.children[0].score == 5);  // defaulted to threshold, not pruned
  CHECK(out.children[0].score_defaulted);
}

TEST_CASE("merge_redundant: equal token bags merge with the survivor tie chain") {
  TaxNode root = node_of("root", {},
                         {node_of("graph pruning", {"p1"}), node_of("graph-pruning", {"p2"}),
                          node_of("quantization", {"p3"})});
  const HashEmbedder embedder(128);
  MockProvider mock;
  const TaxNode out = merge_redundant(root, embedder, mock, 0.90);
  REQUIRE(out.children.size() == 2);
  // Equal normalized token counts; tie falls through score to lexicographic:
  // "graph pruning" < "graph-pruning" (space sorts before hyphen).
  CHECK(out.children[0].title == "graph pruning");
  CHECK(out.children[0].paper_ids == std::vector<std::string>{"p1", "p2"});
  CHECK(papers_of(out) == papers_of(root));
}

TEST_CASE("merge_redundant: dissimilar siblings never reach the provider") {
  TaxNode root = node_of("root", {},
                         {node_of("pruning", {"p1"}), node_of("quantization", {"p2"})});
  const HashEmbedder embedder(128);
  MockProvider mock;
  CountingProvider counting(mock);
  const TaxNode out = merge_redundant(root, embedder, counting, 0.90);
  CHECK(out.children.size() == 2);
  CHECK(counting.count(ReqKind::VerifyRedundancy) == 0);
}

TEST_CASE("merge_redundant: near-duplicates across different parents stay put") {
  TaxNode root = node_of("root", {},
                         {node_of("left stuff", {}, {node_of("graph pruning", {"p1"})}),
                          node_of("right stuff", {}, {node_of("Graph Pruning", {"p2"})})});
  const HashEmbedder embedder(128);
  MockProvider mock;
  const TaxNode out = merge_redundant(root, embedder, mock, 0.90);
  CHECK(node_count(out) == node_count(root));  // siblings only, no cross-parent merge
}

TEST_CASE("merge_redundant: provider denial leaves the pair alone") {
  TaxNode root = node_of("root", {},
                         {node_of("graph pruning", {"p1"}), node_of("pruning graph", {"p2"})});
  const HashEmbedder embedder(128);
  // Always answers "not redundant".
  ScriptedProvider denier({"<<<{\"redundant\": false}>>>"});
  const TaxNode out = merge_redundant(root, embedder, denier, 0.90);
  CHECK(out.children.size() == 2);
}

TEST_CASE("check_structure: single-child chain collapses onto the parent title") {
  TaxNode chain = node_of("knowledge distillation", {},
                          {node_of("offline knowledge distillation", {"p25"})});
  TaxNode root = node_of("root", {}, {std::move(chain), node_of("other", {"p1"})});
  const Taxonomy out = check_structure(root, QualityParams{});
  REQUIRE(out.root.children.size() == 2);
  const TaxNode& kd = out.root.children[0];
  CHECK(kd.title == "knowledge distillation");
  CHECK(kd.leaf());
  CHECK(kd.paper_ids == std::vector<std::string>{"p25"});
  CHECK(papers_of(out.root) == papers_of(root));
}

TEST_CASE("check_structure: depth beyond depth_max is flattened, papers conserved") {
  // A 6-deep chain of binary branches.
  TaxNode deep = node_of("l6", {"p6"});
  for (int level = 5; level >= 1; --level) {
    deep = node_of("l" + std::to_string(level), {"x" + std::to_string(level)},
                   {std::move(deep), node_of("s" + std::to_string(level),
                                             {"y" + std::to_string(level)})});
  }
  TaxNode root = node_of("root", {}, {std::move(deep), node_of("side", {"p0"})});
  QualityParams params;
  params.depth_max = 4;
  const Taxonomy out = check_structure(root, params);
  CHECK(tree_depth(out.root) <= 4);
  CHECK(papers_of(out.root) == papers_of(root));
  validate_tree(out.root, {params.depth_max, params.branch_max});
}

TEST_CASE("check_structure: branching beyond branch_max keeps the best-scored children") {
  TaxNode root = node_of("root", {});
  for (int i = 0; i < 10; ++i) {
    TaxNode c = node_of("child " + std::to_string(i), {"p" + std::to_string(i)});
    c.score = i;  // 0..9; the two lowest go
    root.children.push_back(std::move(c));
  }
  QualityParams params;
  params.branch_max = 8;
  const Taxonomy out = check_structure(root, params);
  CHECK(out.root.children.size() == 8);
  std::set<std::string> kept;
  for (const TaxNode& c : out.root.children) kept.insert(c.title);
  CHECK(kept.count("child 0") == 0);
  CHECK(kept.count("child 1") == 0);
  // The dropped children's papers hoist into the parent.
  CHECK(std::binary_search(out.root.paper_ids.begin(), out.root.paper_ids.end(), "p0"));
  CHECK(std::binary_search(out.root.paper_ids.begin(), out.root.paper_ids.end(), "p1"));
  CHECK(papers_of(out.root) == papers_of(root));
}

TEST_CASE("quality stage: idempotent on its own output") {
  TaxNode root = node_of(
      "root", {"r1"},
      {node_of("graph pruning", {"p1"}, {node_of("structured pruning methods", {"p2"})}),
       node_of("graph-pruning", {"p3"}),
       node_of("chains", {}, {node_of("only child", {"p4"})})});
  const Corpus corpus = corpus_for(root);
  const HashEmbedder embedder(128);
  MockProvider mock;
  QualityParams params;

  auto run = [&](const TaxNode& in) {
    const TaxNode scored = score_and_prune(in, corpus, mock, params.score_threshold);
    const TaxNode merged = merge_redundant(scored, embedder, mock, params.tau_red);
    return check_structure(merged, params).root;
  };
  const TaxNode once = run(root);
  const TaxNode twice = run(once);
  CHECK(tree_to_string(once) == tree_to_string(twice));
  CHECK(papers_of(once) == papers_of(root));
  validate_tree(once, {params.depth_max, params.branch_max});
}
