#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "taxo/concepts.hpp"
#include "taxo/corpus.hpp"
#include "taxo/util.hpp"

using namespace taxo;
using taxo::testing::ScriptedProvider;

namespace {

/// Mock wrapper that fails ExtractConcepts for chosen paper ids.
class PartialFailProvider : public Provider {
 public:
  explicit PartialFailProvider(std::set<std::string> fail_ids)
      : fail_ids_(std::move(fail_ids)) {}
  std::string name() const override { return "partial"; }
  std::string raw_complete(const LlmRequest& req, const std::string& prompt) override {
    if (req.kind == ReqKind::ExtractConcepts &&
        fail_ids_.count(req.payload.at("id").get<std::string>()))
      fail("simulated outage");
    return inner_.raw_complete(req, prompt);
  }

 private:
  MockProvider inner_;
  std::set<std::string> fail_ids_;
};

std::vector<std::string> surfaces(const std::vector<Concept>& cs) {
  std::vector<std::string> out;
  for (const Concept& c : cs) out.push_back(c.surface);
  return out;
}

}  // namespace

TEST_CASE("extract_concepts: planted leaf tokens survive, normalized and pooled") {
  const auto [corpus, gold] = synth_corpus({2, 2, 3, 7});
  MockProvider mock;
  const std::vector<Concept> cs = extract_concepts(corpus, mock, 2);
  const std::vector<std::string> found = surfaces(cs);
  for (const std::string leaf : {"t2aa", "t2ab", "t2ba", "t2bb"}) {
    auto it = std::find(found.begin(), found.end(), leaf);
    REQUIRE(it != found.end());
    CHECK(cs[static_cast<std::size_t>(it - found.begin())].freq() == 3);
  }
  // Branch tokens supported by six papers each.
  auto it = std::find(found.begin(), found.end(), "t1a");
  REQUIRE(it != found.end());
  CHECK(cs[static_cast<std::size_t>(it - found.begin())].freq() == 6);

  // Determinism.
  const std::vector<Concept> again = extract_concepts(corpus, mock, 2);
  CHECK(surfaces(again) == found);
}

TEST_CASE("extract_concepts: empty abstracts fall back to title tokens") {
  const Corpus corpus({{"p1", "neural pruning methods", "", "en"},
                       {"p2", "neural quantization methods", "", "en"}},
                      "");
  MockProvider mock;
  const std::vector<Concept> cs = extract_concepts(corpus, mock, 1);
  CHECK(!cs.empty());
  const std::vector<std::string> found = surfaces(cs);
  CHECK(std::find(found.begin(), found.end(), "pruning") != found.end());
}

TEST_CASE("extract_concepts: tolerates isolated failures, aborts past 20%") {
  const auto [corpus, gold] = synth_corpus({2, 2, 3, 3});  // 12 papers
  {
    PartialFailProvider flaky({"p0000", "p0001"});  // 2/12 < 20%
    const std::vector<Concept> cs = extract_concepts(corpus, flaky, 1);
    CHECK(!cs.empty());
  }
  {
    PartialFailProvider flaky({"p0000", "p0001", "p0002"});  // 3/12 = 25%
    CHECK_THROWS_WITH_AS(extract_concepts(corpus, flaky, 1), doctest::Contains("20%"),
                         Error);
  }
}

TEST_CASE("merge_and_filter: hyphen variant merges into the frequent surface") {
  const HashEmbedder embedder(64);
  std::vector<Concept> raw = {{"graph pruning", {}, {"p1", "p2", "p3"}},
                              {"graph-pruning", {}, {"p4", "p5"}}};
  // Normalization in extraction would fold these, but merged variants can
  // still reach this stage via aliases from other embedders.
  raw[1].surface = "graph  pruning";  // same token bag, different spelling
  const std::vector<Concept> merged = merge_and_filter(raw, embedder, 1, 0.95);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].surface == "graph pruning");
  CHECK(merged[0].freq() == 5);
  REQUIRE(merged[0].aliases.size() == 1);
  CHECK(merged[0].aliases[0] == "graph  pruning");
}

TEST_CASE("merge_and_filter: frequency filter and empty input") {
  const HashEmbedder embedder(64);
  const std::vector<Concept> raw = {{"alpha", {}, {"p1"}}, {"beta", {}, {"p1", "p2"}}};
  const std::vector<Concept> kept = merge_and_filter(raw, embedder, 2, 0.9);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].surface == "beta");
  CHECK(merge_and_filter({}, embedder, 1, 0.9).empty());
}

TEST_CASE("merge_and_filter: survivors are dissimilar and support is conserved") {
  const HashEmbedder embedder(64);
  uint64_t state = 31;
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
  std::vector<Concept> raw;
  std::set<std::string> all_papers;
  for (int i = 0; i < 25; ++i) {
    std::string surface = words[splitmix64(state) % 5];
    if (splitmix64(state) % 2) surface += std::string(" ") + words[splitmix64(state) % 5];
    Concept c;
    c.surface = surface + " " + std::to_string(i % 7);
    for (std::size_t k = 0; k <= splitmix64(state) % 3; ++k) {
      const std::string pid = "p" + std::to_string(splitmix64(state) % 40);
      c.paper_ids.push_back(pid);
    }
    std::sort(c.paper_ids.begin(), c.paper_ids.end());
    c.paper_ids.erase(std::unique(c.paper_ids.begin(), c.paper_ids.end()),
                      c.paper_ids.end());
    for (const auto& p : c.paper_ids) all_papers.insert(p);
    raw.push_back(std::move(c));
  }
  const double merge_sim = 0.92;
  const std::vector<Concept> merged = merge_and_filter(raw, embedder, 1, merge_sim);
  std::set<std::string> merged_papers;
  for (const Concept& c : merged) {
    for (const auto& p : c.paper_ids) merged_papers.insert(p);
    for (const Concept& d : merged) {
      if (&c == &d) continue;
      CHECK(cosine(embedder.embed(c.surface), embedder.embed(d.surface)) < merge_sim);
    }
  }
  CHECK(merged_papers == all_papers);  // min_freq 1: nothing lost
}

TEST_CASE("induce_concept_tree: leading-token grouping via the mock") {
  MockProvider mock;
  const std::vector<Concept> cs = {
      {"topic-A", {}, {"p1", "p2"}}, {"topic-A1", {}, {"p1"}}, {"topic-A2", {}, {"p2"}}};
  const ConceptTree tree = induce_concept_tree(cs, mock);
  CHECK(tree.is_proper_ancestor("topic-A", "topic-A1"));
  CHECK(tree.is_proper_ancestor("topic-A", "topic-A2"));
  CHECK_FALSE(tree.is_proper_ancestor("topic-A1", "topic-A"));
  CHECK(tree.node_count() <= cs.size() + 1);

  // Determinism and the minimal case.
  const ConceptTree again = induce_concept_tree(cs, mock);
  CHECK(again.node_count() == tree.node_count());
  const ConceptTree single = induce_concept_tree({{"solo", {}, {"p1"}}}, mock);
  REQUIRE(single.root.children.size() == 1);
  CHECK(single.root.children[0].label == "solo");
}

TEST_CASE("induce_concept_tree: batching over 100 concepts still covers all") {
  MockProvider mock;
  std::vector<Concept> cs;
  for (int i = 0; i < 150; ++i) {
    Concept c;
    c.surface = "grp" + std::to_string(i % 12) + " item" + std::to_string(i);
    c.paper_ids = {"p" + std::to_string(i)};
    cs.push_back(std::move(c));
  }
  const ConceptTree tree = induce_concept_tree(cs, mock);
  std::set<std::string> seen;
  std::function<void(const ConceptTree::Node&)> rec = [&](const ConceptTree::Node& n) {
    if (n.label != "root") {
      CHECK(seen.insert(n.label).second);  // each concept appears once
    }
    for (const auto& c : n.children) rec(c);
  };
  rec(tree.root);
  CHECK(seen.size() == cs.size());
}

TEST_CASE("induce_concept_tree: unknown labels are repaired then salvaged") {
  // The provider keeps inventing a label that is not a supplied concept.
  ScriptedProvider scripted(
      {"<<<{\"tree\": {\"label\": \"root\", \"children\": ["
       "{\"label\": \"invented\", \"children\": [{\"label\": \"alpha\", \"children\": []}]}"
       "]}}>>>"});
  const std::vector<Concept> cs = {{"alpha", {}, {"p1"}}, {"beta", {}, {"p2"}}};
  const ConceptTree tree = induce_concept_tree(cs, scripted);
  // "invented" dropped; alpha bubbles up; beta attached under root.
  REQUIRE(tree.root.children.size() == 2);
  std::set<std::string> top;
  for (const auto& c : tree.root.children) top.insert(c.label);
  CHECK(top == std::set<std::string>{"alpha", "beta"});
}
