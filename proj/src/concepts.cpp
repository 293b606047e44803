#include "taxo/concepts.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "taxo/util.hpp"

namespace taxo {

std::vector<Concept> extract_concepts(const Corpus& corpus, Provider& provider,
                                      int parallelism) {
  if (corpus.empty()) fail("extract_concepts: corpus is empty");
  const std::vector<std::string> ids = corpus.sorted_ids();
  const std::size_t n = ids.size();
  std::vector<std::vector<std::string>> per_paper(n);
  std::vector<char> failed(n, 0);

  int threads = 1;
#ifdef _OPENMP
  threads = std::max(1, std::min(parallelism, omp_get_max_threads()));
#else
  (void)parallelism;
#endif
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < sn; ++i) {
    try {
      const LlmResponse resp = complete(provider, make_extract_request(corpus.by_id(ids[i])));
      per_paper[i] = response_concepts(resp);
    } catch (const std::exception&) {
      failed[i] = 1;
    }
  }

  std::size_t failures = 0;
  for (char f : failed) failures += f;
  if (failures * 5 > n)
    fail("concept extraction failed for " + std::to_string(failures) + " of " +
         std::to_string(n) + " papers (more than 20%)");

  std::map<std::string, std::set<std::string>> pooled;  // normalized term -> ids
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::string& term : per_paper[i]) {
      const std::string norm = normalize_text(term);
      if (norm.empty()) continue;
      pooled[norm].insert(ids[i]);
    }
  }

  std::vector<Concept> out;
  out.reserve(pooled.size());
  for (auto& [surface, papers] : pooled) {
    Concept c;
    c.surface = surface;
    c.paper_ids.assign(papers.begin(), papers.end());
    out.push_back(std::move(c));
  }
  return out;  // map iteration is already sorted by surface
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<Concept> merge_and_filter(const std::vector<Concept>& raw,
                                      const Embedder& embedder, std::size_t min_freq,
                                      double merge_sim) {
  if (min_freq < 1) fail("merge_and_filter: min_freq must be >= 1");
  if (!(merge_sim > 0.0 && merge_sim <= 1.0))
    fail("merge_and_filter: merge_sim must be in (0, 1]");
  if (raw.empty()) return {};

  std::vector<Concept> sorted = raw;
  std::sort(sorted.begin(), sorted.end(),
            [](const Concept& a, const Concept& b) { return a.surface < b.surface; });

  const std::size_t n = sorted.size();
  std::vector<Embedding> vecs(n);
  for (std::size_t i = 0; i < n; ++i) vecs[i] = embedder.embed(sorted[i].surface);

  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cosine(vecs[i], vecs[j]) >= merge_sim) uf.unite(i, j);

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

  std::vector<Concept> merged;
  for (auto& [root, members] : components) {
    // Canonical variant: highest pre-merge frequency, ties to the shortest
    // surface, then lexicographic.
    std::size_t best = members.front();
    for (std::size_t m : members) {
      const Concept& a = sorted[m];
      const Concept& b = sorted[best];
      if (a.freq() != b.freq()) {
        if (a.freq() > b.freq()) best = m;
      } else if (a.surface.size() != b.surface.size()) {
        if (a.surface.size() < b.surface.size()) best = m;
      } else if (a.surface < b.surface) {
        best = m;
      }
    }
    Concept c;
    c.surface = sorted[best].surface;
    std::set<std::string> papers, aliases;
    for (std::size_t m : members) {
      papers.insert(sorted[m].paper_ids.begin(), sorted[m].paper_ids.end());
      for (const std::string& al : sorted[m].aliases) aliases.insert(al);
      if (m != best) aliases.insert(sorted[m].surface);
    }
    aliases.erase(c.surface);
    c.paper_ids.assign(papers.begin(), papers.end());
    c.aliases.assign(aliases.begin(), aliases.end());
    merged.push_back(std::move(c));
  }

  std::vector<Concept> out;
  for (Concept& c : merged)
    if (c.freq() >= min_freq) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(),
            [](const Concept& a, const Concept& b) { return a.surface < b.surface; });
  return out;
}

// ---------------------------------------------------------------------------
// Concept tree induction
// ---------------------------------------------------------------------------

namespace {

using CNode = ConceptTree::Node;

/// Converts a response tree into CNode children, keeping only labels from
/// `known` (first mention wins). Children of dropped nodes bubble up.
void harvest(const nlohmann::json& j, const std::map<std::string, std::string>& known,
             std::set<std::string>& used, std::vector<CNode>& out) {
  std::string norm = normalize_text(j.at("label").get<std::string>());
  auto it = known.find(norm);
  const bool keep = it != known.end() && !used.count(norm);
  std::vector<CNode>* sink = &out;
  CNode node;
  if (keep) {
    used.insert(norm);
    node.label = it->second;
    sink = &node.children;
  }
  if (j.contains("children"))
    for (const auto& c : j["children"]) harvest(c, known, used, *sink);
  if (keep) out.push_back(std::move(node));
}

CNode induce_batch(const std::vector<std::string>& surfaces, Provider& provider,
                   bool merge_pass) {
  std::map<std::string, std::string> known;  // normalized -> surface
  for (const std::string& s : surfaces) known[normalize_text(s)] = s;

  auto unknown_labels = [&](const nlohmann::json& tree) {
    std::vector<std::string> bad;
    std::function<void(const nlohmann::json&)> rec = [&](const nlohmann::json& n) {
      const std::string norm = normalize_text(n.at("label").get<std::string>());
      if (norm != "root" && !known.count(norm)) bad.push_back(n["label"].get<std::string>());
      if (n.contains("children"))
        for (const auto& c : n["children"]) rec(c);
    };
    rec(tree);
    return bad;
  };

  LlmRequest req = make_induce_request(surfaces, merge_pass);
  nlohmann::json tree = response_tree(complete(provider, req));
  if (!unknown_labels(tree).empty()) {
    // One repair round: the marker changes the payload, so fixtures can
    // target the retry separately.
    req.payload["repair"] = true;
    tree = response_tree(complete(provider, req));
  }

  CNode root;
  root.label = "root";
  std::set<std::string> used;
  if (normalize_text(tree.at("label").get<std::string>()) == "root") {
    if (tree.contains("children"))
      for (const auto& c : tree["children"]) harvest(c, known, used, root.children);
  } else {
    harvest(tree, known, used, root.children);
  }
  // Anything the response never placed hangs off the root.
  for (const std::string& s : surfaces)
    if (!used.count(normalize_text(s))) root.children.push_back(CNode{s, {}});
  return root;
}

}  // namespace

bool ConceptTree::is_proper_ancestor(const std::string& ancestor,
                                     const std::string& descendant) const {
  if (ancestor == descendant) return false;
  bool found = false;
  std::function<bool(const Node&)> contains = [&](const Node& n) {
    if (n.label == descendant) return true;
    for (const Node& c : n.children)
      if (contains(c)) return true;
    return false;
  };
  std::function<void(const Node&)> rec = [&](const Node& n) {
    if (found) return;
    if (n.label == ancestor) {
      for (const Node& c : n.children)
        if (contains(c)) {
          found = true;
          return;
        }
      return;
    }
    for (const Node& c : n.children) rec(c);
  };
  rec(root);
  return found;
}

std::size_t ConceptTree::node_count() const {
  std::function<std::size_t(const Node&)> rec = [&](const Node& n) {
    std::size_t k = 1;
    for (const Node& c : n.children) k += rec(c);
    return k;
  };
  return rec(root);
}

ConceptTree induce_concept_tree(const std::vector<Concept>& concepts, Provider& provider) {
  if (concepts.empty()) fail("induce_concept_tree: no concepts");
  std::vector<std::string> surfaces;
  surfaces.reserve(concepts.size());
  for (const Concept& c : concepts) surfaces.push_back(c.surface);
  std::sort(surfaces.begin(), surfaces.end());

  constexpr std::size_t kBatch = 100;
  ConceptTree tree;
  if (surfaces.size() <= kBatch) {
    tree.root = induce_batch(surfaces, provider, false);
    return tree;
  }

  std::vector<CNode> batch_roots;
  for (std::size_t off = 0; off < surfaces.size(); off += kBatch) {
    const std::vector<std::string> chunk(
        surfaces.begin() + static_cast<std::ptrdiff_t>(off),
        surfaces.begin() + static_cast<std::ptrdiff_t>(std::min(off + kBatch, surfaces.size())));
    batch_roots.push_back(induce_batch(chunk, provider, false));
  }

  // Merge pass over the batch top levels; each top-level label drags its
  // batch subtree along.
  std::map<std::string, CNode> top;  // label -> subtree
  std::vector<std::string> top_labels;
  for (CNode& br : batch_roots) {
    for (CNode& c : br.children) {
      if (top.count(c.label)) {  // same label from two batches: merge children
        CNode& prev = top[c.label];
        prev.children.insert(prev.children.end(), c.children.begin(), c.children.end());
      } else {
        top_labels.push_back(c.label);
        top.emplace(c.label, std::move(c));
      }
    }
  }
  std::sort(top_labels.begin(), top_labels.end());
  if (top_labels.size() > kBatch) {
    // Too many groups to merge in one request; attach them all to the root.
    tree.root.label = "root";
    for (const std::string& l : top_labels) tree.root.children.push_back(std::move(top[l]));
    return tree;
  }
  CNode merged = induce_batch(top_labels, provider, true);
  std::function<void(CNode&)> attach = [&](CNode& n) {
    for (CNode& c : n.children) attach(c);
    auto it = top.find(n.label);
    if (it != top.end())
      for (CNode& sub : it->second.children) n.children.push_back(std::move(sub));
  };
  attach(merged);
  tree.root = std::move(merged);
  return tree;
}

}  // namespace taxo
