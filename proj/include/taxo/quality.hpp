#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taxo/corpus.hpp"
#include "taxo/embedding.hpp"
#include "taxo/llm.hpp"
#include "taxo/tree.hpp"

namespace taxo {

struct QualityParams {
  int score_threshold = 5;
  double tau_red = 0.90;
  int depth_max = 4;
  int branch_max = 8;
};

void validate(const QualityParams& p);

struct StageDigest {
  std::string stage;
  std::string input;
  std::string output;
};

struct BuildProvenance {
  std::string config_digest;
  std::string provider_name;
  uint64_t seed = 0;
  std::vector<StageDigest> stages;
};

struct Taxonomy {
  TaxNode root;
  BuildProvenance provenance;
};

/// Scores every non-root node (1..10) and prunes those below the threshold,
/// hoisting their papers and children to the parent. A provider failure
/// defaults the node to the threshold (kept, marked score_defaulted).
TaxNode score_and_prune(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                        int threshold);

/// Merges confirmed-redundant sibling pairs: candidates are siblings whose
/// title embeddings reach tau_red cosine; each is confirmed by a
/// VerifyRedundancy call. The survivor keeps the longer token sequence
/// (ties: higher score, then lexicographic) and the union of papers and
/// children. Repeats per parent until no confirmed pair remains.
TaxNode merge_redundant(const TaxNode& tax, const Embedder& embedder, Provider& provider,
                        double tau_red);

/// Total repair pass: collapses single-child chains (parent title kept),
/// flattens nodes beyond depth_max into their depth_max-level ancestor, and
/// trims parents over branch_max to their best-scored children, hoisting the
/// rest's papers. Identically-titled siblings are folded together so the
/// output always satisfies the tree invariants.
Taxonomy check_structure(const TaxNode& tax, const QualityParams& params,
                         BuildProvenance provenance = {});

}  // namespace taxo
