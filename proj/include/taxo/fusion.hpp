#pragma once

#include <map>
#include <string>
#include <vector>

#include "taxo/cluster.hpp"
#include "taxo/concepts.hpp"
#include "taxo/corpus.hpp"
#include "taxo/embedding.hpp"
#include "taxo/llm.hpp"
#include "taxo/tree.hpp"

namespace taxo {

struct FusionParams {
  double tau_conc = 0.5;
  std::size_t min_support = 2;
  double tau_align = 0.35;
  std::size_t min_claim = 2;
  double tau_claim = 0.02;
};

void validate(const FusionParams& p);

struct ConceptSupportEntry {
  double concentration = 0.0;      // max over leaf clusters of |P_c ∩ L| / |P_c|
  std::string dominant_cluster;    // leaf attaining the max
  std::size_t freq = 0;
};
using ConceptSupport = std::map<std::string, ConceptSupportEntry>;

/// Round 1: keeps concepts with freq >= min_support whose papers concentrate
/// in a single leaf cluster (concentration >= tau_conc). The support table
/// covers every input concept, retained or not.
std::pair<std::vector<Concept>, ConceptSupport> round1_validate(
    const std::vector<Concept>& concepts, const ClusterNode& tree, double tau_conc,
    std::size_t min_support);

struct Round2Result {
  TaxNode tax;        // labeled mirror of `tree`
  ClusterNode tree;   // input tree with any re-clustered subtrees swapped in
};

/// Round 2: labels every cluster node with its most representative validated
/// concept, confirmed by a LabelCluster call. Nodes without any supported
/// concept are re-clustered once; if support is still absent they are titled
/// from their paper titles with align_flag = forced. The root takes
/// `root_title` (the global constraint the later rounds condition on).
Round2Result round2_label(const ClusterNode& tree, const std::vector<Concept>& valid,
                          const ConceptSupport& support, const ConceptTree& concept_tree,
                          Provider& provider, const Corpus& corpus,
                          const EmbeddingSet& reduced, const ClusterParams& params,
                          const std::string& root_title);

/// Round 3: one bottom-up abstraction pass over internal nodes, then one
/// top-down consistency pass over non-root nodes. A title is consistent when
/// its embedding is within tau_align cosine of its paper-subset centroid or
/// the provider re-affirms it; otherwise it is regenerated once
/// (align_flag = regenerated, or forced when the regenerated title still
/// fails). Structure and paper placement never change.
TaxNode round3_align(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                     const Embedder& embedder, double tau_align);

/// Round 4: per internal node, one ExpandSiblings call; each proposal must
/// claim at least min_claim papers from the parent pool that sit closer to it
/// than to every existing sibling by a tau_claim cosine margin. Accepted
/// proposals become new leaf children holding the claimed papers (moved from
/// their previous nodes); existing nodes are never removed or re-parented.
TaxNode round4_expand(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                      const Embedder& embedder, std::size_t min_claim, double tau_claim);

/// Labeling fallback used by the bottom-up-only pipeline variant: each node
/// is titled by the most frequent content token of its papers' titles that no
/// ancestor or earlier sibling already used.
TaxNode label_by_title_frequency(const ClusterNode& tree, const Corpus& corpus,
                                 const std::string& fallback_prefix = "cluster");

/// The exact AlignTitle request round 3 issues for `node` (both passes use
/// this shape), exposed so fixtures can be keyed to its payload digest.
LlmRequest align_request_for(const TaxNode& node, const std::string& root_title,
                             const std::string& parent_title, const Corpus& corpus);

}  // namespace taxo
