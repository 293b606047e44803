#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "taxo/corpus.hpp"
#include "taxo/embedding.hpp"
#include "taxo/tree.hpp"

namespace taxo {

/// Papers labeled by the node holding them (each paper sits at exactly one
/// node; the map is keyed by paper id).
using FlatPartition = std::map<std::string, std::string>;

FlatPartition flatten(const TaxNode& tree);

/// I(X;Y) / sqrt(H(X) * H(Y)) with natural logs over the shared papers.
/// When either entropy is zero: 1 if the partitions agree as set partitions,
/// else 0. Fewer than 2 shared papers is an error.
double nmi(const FlatPartition& pred, const FlatPartition& gold);

/// (1/N) * sum over predicted clusters of the best gold-class overlap.
double purity(const FlatPartition& pred, const FlatPartition& gold);

/// Ordered tree edit distance (post-order dynamic program over keyroots)
/// with unit insert/delete and a caller-supplied substitution cost.
using SubstCost = std::function<int(const std::string&, const std::string&)>;
int tree_edit_distance(const TaxNode& a, const TaxNode& b, const SubstCost& cost);

/// 1 - TED / max(|pred|, |gold|), clamped to [0, 1]. Both trees are first
/// canonicalized (children sorted by normalized title), and substitution is
/// free for titles that match after normalization or whose embeddings reach
/// tau_sub cosine.
double ceds(const TaxNode& pred, const TaxNode& gold, const Embedder& embedder,
            double tau_sub);

struct HsrOptions {
  uint64_t seed = 0;
  std::size_t max_pairs = 1000000;
};

struct HsrResult {
  double value = 0.0;
  std::size_t pairs = 0;
  bool subsampled = false;
};

/// Mean over shared paper pairs of the bounded LCA-depth ratio
/// min(d_pred, d_gold) / max(d_pred, d_gold) (1 when both depths are 0).
/// Pair counts beyond max_pairs are reduced by seeded reservoir sampling.
HsrResult hsr(const TaxNode& pred, const TaxNode& gold, const HsrOptions& opts = {});

struct EvalReport {
  double nmi = 0.0, purity = 0.0, ceds = 0.0, hsr = 0.0;  // all in [0, 1]
  std::size_t papers_evaluated = 0;
  std::size_t pred_nodes = 0, gold_nodes = 0;
  double tau_sub = 0.85;
  std::size_t hsr_pairs = 0;
  bool hsr_subsampled = false;
  uint64_t hsr_seed = 0;
};

EvalReport evaluate(const TaxNode& pred, const TaxNode& gold, const Embedder& embedder,
                    double tau_sub, uint64_t hsr_seed = 0);

/// Report document with the four metrics scaled to [0, 100] at one decimal.
nlohmann::ordered_json report_to_json(const EvalReport& r);

/// "NMI=.. Purity=.. CEDS=.. HSR=.." (scaled to 100, one decimal).
std::string summary_line(const EvalReport& r);

}  // namespace taxo
