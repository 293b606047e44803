#pragma once

#include <string>
#include <vector>

#include "taxo/corpus.hpp"
#include "taxo/embedding.hpp"
#include "taxo/llm.hpp"

namespace taxo {

/// An extracted technical term. `surface` is the normalized canonical form;
/// `aliases` the merged variants; `paper_ids` the supporting papers.
struct Concept {
  std::string surface;
  std::vector<std::string> aliases;     // sorted, excludes surface
  std::vector<std::string> paper_ids;   // sorted, unique

  std::size_t freq() const { return paper_ids.size(); }
};

/// One ExtractConcepts request per paper; terms are normalized (lowercase,
/// whitespace collapse) and pooled with their supporting paper ids. A failing
/// paper contributes nothing; more than 20% failures abort the run. Output is
/// sorted by surface.
std::vector<Concept> extract_concepts(const Corpus& corpus, Provider& provider,
                                      int parallelism = 4);

/// Connected-component merge over the term-embedding similarity graph
/// (cosine >= merge_sim), then a frequency filter. The surviving surface of
/// a component is its highest-frequency variant, ties to the shortest, then
/// lexicographic.
std::vector<Concept> merge_and_filter(const std::vector<Concept>& raw,
                                      const Embedder& embedder, std::size_t min_freq,
                                      double merge_sim);

struct ConceptTree {
  struct Node {
    std::string label;
    std::vector<Node> children;
  };
  Node root;  // label "root"; children are concept nodes

  /// True when `ancestor` lies strictly above `descendant`.
  bool is_proper_ancestor(const std::string& ancestor, const std::string& descendant) const;
  std::size_t node_count() const;
};

/// One InduceHierarchy request over the concept surfaces, batched at 100 per
/// request with a final merge request when batching occurred. Responses may
/// only reference supplied concepts; a violating response is retried once
/// with a repair marker and then salvaged (unknown labels dropped, orphaned
/// known concepts attached under root). Concepts the response never mentions
/// are attached under root.
ConceptTree induce_concept_tree(const std::vector<Concept>& concepts, Provider& provider);

}  // namespace taxo
