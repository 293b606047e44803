#include "taxo/fusion.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "taxo/util.hpp"

namespace taxo {

void validate(const FusionParams& p) {
  if (!(p.tau_conc > 0.0 && p.tau_conc <= 1.0)) fail("fusion: tau_conc must be in (0, 1]");
  if (p.min_support < 1) fail("fusion: min_support must be >= 1");
  if (!(p.tau_align >= 0.0 && p.tau_align <= 1.0)) fail("fusion: tau_align must be in [0, 1]");
  if (p.min_claim < 1) fail("fusion: min_claim must be >= 1");
  if (p.tau_claim < 0.0) fail("fusion: tau_claim must be >= 0");
}

// ---------------------------------------------------------------------------
// Round 1
// ---------------------------------------------------------------------------

std::pair<std::vector<Concept>, ConceptSupport> round1_validate(
    const std::vector<Concept>& concepts, const ClusterNode& tree, double tau_conc,
    std::size_t min_support) {
  if (!(tau_conc > 0.0 && tau_conc <= 1.0)) fail("round1: tau_conc must be in (0, 1]");
  if (min_support < 1) fail("round1: min_support must be >= 1");

  const std::vector<const ClusterNode*> leaves = cluster_leaves(tree);
  ConceptSupport support;
  std::vector<Concept> retained;
  for (const Concept& c : concepts) {
    ConceptSupportEntry entry;
    entry.freq = c.freq();
    for (const ClusterNode* leaf : leaves) {
      std::size_t inter = 0;
      for (const std::string& p : c.paper_ids)
        if (std::binary_search(leaf->paper_ids.begin(), leaf->paper_ids.end(), p)) ++inter;
      const double conc =
          c.freq() == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(c.freq());
      if (conc > entry.concentration) {
        entry.concentration = conc;
        entry.dominant_cluster = leaf->id;
      }
    }
    support[c.surface] = entry;
    if (entry.freq >= min_support && entry.concentration >= tau_conc)
      retained.push_back(c);
  }
  return {std::move(retained), std::move(support)};
}

// ---------------------------------------------------------------------------
// Round 2
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> paper_titles(const Corpus& corpus,
                                      const std::vector<std::string>& ids, std::size_t cap) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> out;
  for (const std::string& id : sorted) {
    if (out.size() >= cap) break;
    out.push_back(corpus.by_id(id).title);
  }
  return out;
}

struct NodeCandidates {
  std::vector<LabelCandidate> ordered;
};

NodeCandidates collect_candidates(const ClusterNode& node, const std::vector<Concept>& valid,
                                  const ConceptSupport& support,
                                  const ConceptTree& concept_tree) {
  struct Scored {
    const Concept* concept_ptr;
    std::size_t count;
    double concentration;
    bool prefers = false;
  };
  std::vector<Scored> scored;
  for (const Concept& c : valid) {
    std::size_t count = 0;
    for (const std::string& p : c.paper_ids)
      if (std::binary_search(node.paper_ids.begin(), node.paper_ids.end(), p)) ++count;
    if (count == 0) continue;
    const auto it = support.find(c.surface);
    scored.push_back({&c, count, it == support.end() ? 0.0 : it->second.concentration});
  }
  // A concept that sits above another candidate in the concept tree labels
  // the node in preference to its descendants.
  for (Scored& a : scored)
    for (const Scored& b : scored) {
      if (a.concept_ptr == b.concept_ptr) continue;
      if (concept_tree.is_proper_ancestor(a.concept_ptr->surface, b.concept_ptr->surface)) {
        a.prefers = true;
        break;
      }
    }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.prefers != b.prefers) return a.prefers;
    if (a.count != b.count) return a.count > b.count;
    if (a.concentration != b.concentration) return a.concentration > b.concentration;
    return a.concept_ptr->surface < b.concept_ptr->surface;
  });
  NodeCandidates out;
  for (const Scored& s : scored)
    out.ordered.push_back({s.concept_ptr->surface, s.count, s.concentration});
  return out;
}

}  // namespace

Round2Result round2_label(const ClusterNode& tree, const std::vector<Concept>& valid,
                          const ConceptSupport& support, const ConceptTree& concept_tree,
                          Provider& provider, const Corpus& corpus,
                          const EmbeddingSet& reduced, const ClusterParams& params,
                          const std::string& root_title) {
  if (normalize_text(root_title).empty()) fail("round2: root title is empty");

  Round2Result result;
  result.tree = tree;

  std::function<TaxNode(ClusterNode&, bool)> label = [&](ClusterNode& cn,
                                                         bool is_root) -> TaxNode {
    TaxNode tn;
    tn.id = cn.id;
    tn.provenance = Provenance::cluster;

    if (is_root) {
      tn.title = root_title;
    } else {
      NodeCandidates cands = collect_candidates(cn, valid, support, concept_tree);
      if (cands.ordered.empty() &&
          cn.paper_ids.size() >= static_cast<std::size_t>(params.min_split_size)) {
        cn = recluster_subtree(cn, reduced, params);
        cands = collect_candidates(cn, valid, support, concept_tree);
      }
      if (cands.ordered.empty()) {
        // Still unsupported: title from the paper titles alone.
        const LlmRequest req =
            make_label_request({}, paper_titles(corpus, cn.paper_ids, 10));
        tn.title = response_title(complete(provider, req));
        tn.align_flag = AlignFlag::forced;
      } else {
        try {
          const LlmRequest req =
              make_label_request(cands.ordered, paper_titles(corpus, cn.paper_ids, 10));
          tn.title = response_title(complete(provider, req));
        } catch (const Error&) {
          tn.title = cands.ordered.front().surface;  // deterministic representative
        }
      }
    }

    if (cn.leaf()) {
      tn.paper_ids = cn.paper_ids;
    } else {
      for (ClusterNode& child : cn.children) tn.children.push_back(label(child, false));
    }
    return tn;
  };

  result.tax = label(result.tree, true);
  return result;
}

// ---------------------------------------------------------------------------
// Round 3
// ---------------------------------------------------------------------------

namespace {

class PaperEmbeddings {
 public:
  PaperEmbeddings(const Corpus& corpus, const Embedder& embedder)
      : corpus_(corpus), embedder_(embedder) {}

  const Embedding& of(const std::string& paper_id) {
    auto it = cache_.find(paper_id);
    if (it != cache_.end()) return it->second;
    const Paper& p = corpus_.by_id(paper_id);
    return cache_.emplace(paper_id, embedder_.embed(p.title + "\n" + p.abstract))
        .first->second;
  }

  Embedding centroid(const std::vector<std::string>& ids) {
    Embedding m(embedder_.dim(), 0.0);
    if (ids.empty()) return m;
    for (const std::string& id : ids) {
      const Embedding& v = of(id);
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += v[k];
    }
    for (double& x : m) x /= static_cast<double>(ids.size());
    return m;
  }

 private:
  const Corpus& corpus_;
  const Embedder& embedder_;
  std::map<std::string, Embedding> cache_;
};

std::vector<std::string> child_titles(const TaxNode& n) {
  std::vector<std::string> out;
  for (const TaxNode& c : n.children) out.push_back(c.title);
  return out;
}

}  // namespace

LlmRequest align_request_for(const TaxNode& node, const std::string& root_title,
                             const std::string& parent_title, const Corpus& corpus) {
  LlmRequest req = make_align_request(root_title, parent_title, node.title,
                                      prompt_papers(corpus, subtree_paper_ids(node)));
  req.payload["child_titles"] = child_titles(node);
  return req;
}

TaxNode round3_align(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                     const Embedder& embedder, double tau_align) {
  TaxNode out = tax;
  const std::string root_title = out.title;
  PaperEmbeddings papers(corpus, embedder);

  // Pass 1, bottom-up: re-abstract internal headings from child titles and
  // the paper subset. Leaves keep their grounded labels for pass 2 to vet.
  std::function<void(TaxNode&, const std::string&)> bottom_up =
      [&](TaxNode& node, const std::string& parent_title) {
        for (TaxNode& c : node.children) bottom_up(c, node.title);
        if (node.leaf()) return;
        try {
          node.title = response_title(
              complete(provider, align_request_for(node, root_title, parent_title, corpus)));
        } catch (const Error&) {
          // degrade: keep the current heading
        }
      };
  bottom_up(out, out.title);

  // Pass 2, top-down: vet every non-root heading against root, parent, and
  // the paper subset.
  std::function<void(TaxNode&, const std::string&)> top_down = [&](TaxNode& node,
                                                                   const std::string& parent_title) {
    const std::vector<std::string> subset = subtree_paper_ids(node);
    const Embedding centroid = papers.centroid(subset);
    const double cos = cosine(embedder.embed(node.title), centroid);
    if (cos < tau_align) {
      bool provider_ok = false;
      std::string regenerated;
      try {
        regenerated = response_title(
            complete(provider, align_request_for(node, out.title, parent_title, corpus)));
        provider_ok = true;
      } catch (const Error&) {
        provider_ok = false;
      }
      if (!provider_ok) {
        node.align_flag = AlignFlag::forced;  // embedding-only mode, nothing to swap in
      } else if (normalize_text(regenerated) == normalize_text(node.title)) {
        // provider affirmation: heading stands
      } else {
        node.title = regenerated;
        node.align_flag = AlignFlag::regenerated;
        if (cosine(embedder.embed(node.title), centroid) < tau_align)
          node.align_flag = AlignFlag::forced;
      }
    }
    for (TaxNode& c : node.children) top_down(c, node.title);
  };
  for (TaxNode& c : out.children) top_down(c, out.title);
  return out;
}

// ---------------------------------------------------------------------------
// Round 4
// ---------------------------------------------------------------------------

TaxNode round4_expand(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                      const Embedder& embedder, std::size_t min_claim, double tau_claim) {
  if (min_claim < 1) fail("round4: min_claim must be >= 1");
  TaxNode out = tax;
  PaperEmbeddings papers(corpus, embedder);

  std::function<void(TaxNode&)> expand = [&](TaxNode& parent) {
    if (parent.leaf()) return;
    const std::size_t original_children = parent.children.size();

    std::vector<std::string> proposals;
    try {
      const LlmRequest req = make_expand_request(parent.title, child_titles(parent));
      proposals = response_proposals(complete(provider, req));
    } catch (const Error&) {
      proposals.clear();  // provider error: node skipped
    }

    std::size_t added = 0;
    for (const std::string& proposal : proposals) {
      const std::string norm = normalize_text(proposal);
      if (norm.empty()) continue;
      bool duplicate = false;
      for (const TaxNode& c : parent.children)
        if (normalize_text(c.title) == norm) duplicate = true;
      if (duplicate) continue;

      const Embedding prop_emb = embedder.embed(proposal);
      std::vector<Embedding> sib_embs;
      for (const TaxNode& c : parent.children) sib_embs.push_back(embedder.embed(c.title));

      std::vector<std::string> claimed;
      for (const std::string& pid : subtree_paper_ids(parent)) {
        const Embedding& pe = papers.of(pid);
        const double to_prop = cosine(pe, prop_emb);
        bool wins = true;
        for (const Embedding& se : sib_embs)
          if (to_prop < cosine(pe, se) + tau_claim) {
            wins = false;
            break;
          }
        if (wins) claimed.push_back(pid);
      }
      if (claimed.size() < min_claim) continue;

      // Move the claimed papers out of their current nodes.
      std::set<std::string> claim_set(claimed.begin(), claimed.end());
      walk_mut(parent, [&](TaxNode& n, int) {
        std::vector<std::string> kept;
        for (std::string& p : n.paper_ids)
          if (!claim_set.count(p)) kept.push_back(std::move(p));
        n.paper_ids = std::move(kept);
      });

      TaxNode fresh;
      fresh.id = parent.id + ".x" + std::to_string(added++);
      fresh.title = proposal;
      fresh.paper_ids = claimed;
      fresh.provenance = Provenance::expanded;
      parent.children.push_back(std::move(fresh));
    }

    // Recurse only into the pre-existing children; fresh nodes are leaves.
    for (std::size_t i = 0; i < original_children; ++i) expand(parent.children[i]);
  };
  expand(out);
  return out;
}

// ---------------------------------------------------------------------------
// Bottom-up-only labeling
// ---------------------------------------------------------------------------

TaxNode label_by_title_frequency(const ClusterNode& tree, const Corpus& corpus,
                                 const std::string& fallback_prefix) {
  std::function<TaxNode(const ClusterNode&, std::set<std::string>)> label =
      [&](const ClusterNode& cn, std::set<std::string> used) -> TaxNode {
    TaxNode tn;
    tn.id = cn.id;
    tn.provenance = Provenance::cluster;

    std::map<std::string, std::size_t> counts;
    for (const std::string& pid : cn.paper_ids)
      for (const std::string& tok : tokenize(corpus.by_id(pid).title))
        if (tok.size() >= 2 && !is_stopword(tok)) ++counts[tok];
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [tok, count] : counts) {
      if (used.count(tok)) continue;
      if (count > best_count) {
        best = tok;
        best_count = count;
      }
    }
    tn.title = best.empty() ? fallback_prefix + "-" + cn.id : best;
    used.insert(tn.title);

    if (cn.leaf()) {
      tn.paper_ids = cn.paper_ids;
    } else {
      for (const ClusterNode& c : cn.children) {
        TaxNode child = label(c, used);
        used.insert(normalize_text(child.title));
        tn.children.push_back(std::move(child));
      }
    }
    return tn;
  };
  return label(tree, {});
}

}  // namespace taxo
