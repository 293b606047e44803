#include "taxo/quality.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "taxo/util.hpp"

namespace taxo {

void validate(const QualityParams& p) {
  if (p.score_threshold < 1 || p.score_threshold > 10)
    fail("quality: score_threshold must be in [1, 10]");
  if (!(p.tau_red > 0.0 && p.tau_red <= 1.0)) fail("quality: tau_red must be in (0, 1]");
  if (p.depth_max < 1) fail("quality: depth_max must be >= 1");
  if (p.branch_max < 2) fail("quality: branch_max must be >= 2");
}

namespace {

void merge_ids(std::vector<std::string>& into, const std::vector<std::string>& from) {
  into.insert(into.end(), from.begin(), from.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

std::vector<std::string> sample_titles(const TaxNode& node, const Corpus& corpus,
                                       std::size_t cap) {
  std::vector<std::string> ids = subtree_paper_ids(node);
  if (ids.size() > cap) ids.resize(cap);
  std::vector<std::string> titles;
  for (const std::string& id : ids) titles.push_back(corpus.by_id(id).title);
  return titles;
}

}  // namespace

TaxNode score_and_prune(const TaxNode& tax, const Corpus& corpus, Provider& provider,
                        int threshold) {
  if (threshold < 1 || threshold > 10) fail("score_and_prune: threshold must be in [1, 10]");
  TaxNode out = tax;

  // Score first, then prune bottom-up so hoisted grandchildren keep the
  // verdicts they already received.
  std::function<void(TaxNode&, bool)> score = [&](TaxNode& node, bool is_root) {
    if (!is_root) {
      const std::vector<std::string> subtree = subtree_paper_ids(node);
      try {
        const LlmRequest req =
            make_score_request(node.title, subtree.size(), sample_titles(node, corpus, 5));
        node.score = response_score(complete(provider, req));
        node.score_defaulted = false;
      } catch (const Error&) {
        node.score = threshold;
        node.score_defaulted = true;
      }
    }
    for (TaxNode& c : node.children) score(c, false);
  };
  score(out, true);

  std::function<void(TaxNode&)> prune = [&](TaxNode& node) {
    for (TaxNode& c : node.children) prune(c);
    std::vector<TaxNode> kept;
    for (TaxNode& c : node.children) {
      if (c.score && *c.score < threshold) {
        merge_ids(node.paper_ids, c.paper_ids);
        for (TaxNode& gc : c.children) kept.push_back(std::move(gc));
      } else {
        kept.push_back(std::move(c));
      }
    }
    node.children = std::move(kept);
  };
  prune(out);
  return out;
}

namespace {

std::size_t title_token_count(const std::string& title) { return tokenize(title).size(); }

/// Survivor-first ordering for a confirmed redundant pair.
bool first_survives(const TaxNode& a, const TaxNode& b) {
  const std::size_t ta = title_token_count(a.title);
  const std::size_t tb = title_token_count(b.title);
  if (ta != tb) return ta > tb;  // most complete terminology
  const int sa = a.score.value_or(0);
  const int sb = b.score.value_or(0);
  if (sa != sb) return sa > sb;
  return a.title < b.title;
}

}  // namespace

TaxNode merge_redundant(const TaxNode& tax, const Embedder& embedder, Provider& provider,
                        double tau_red) {
  if (!(tau_red > 0.0 && tau_red <= 1.0)) fail("merge_redundant: tau_red must be in (0, 1]");
  TaxNode out = tax;

  std::function<void(TaxNode&)> process = [&](TaxNode& parent) {
    std::set<std::pair<std::string, std::string>> rejected;  // normalized pairs
    bool merged_any = true;
    std::size_t rounds = 0;
    const std::size_t bound = parent.children.size() + 1;
    while (merged_any && rounds++ < bound) {
      merged_any = false;
      std::vector<Embedding> embs;
      embs.reserve(parent.children.size());
      for (const TaxNode& c : parent.children) embs.push_back(embedder.embed(c.title));
      for (std::size_t i = 0; i < parent.children.size() && !merged_any; ++i) {
        for (std::size_t j = i + 1; j < parent.children.size() && !merged_any; ++j) {
          if (cosine(embs[i], embs[j]) < tau_red) continue;
          const std::string ni = normalize_text(parent.children[i].title);
          const std::string nj = normalize_text(parent.children[j].title);
          const auto key = std::minmax(ni, nj);
          if (rejected.count({key.first, key.second})) continue;
          bool redundant = false;
          try {
            const LlmRequest req =
                make_verify_request(parent.children[i].title, parent.children[j].title);
            redundant = response_redundant(complete(provider, req));
          } catch (const Error&) {
            redundant = false;  // provider error: pair not merged
          }
          if (!redundant) {
            rejected.insert({key.first, key.second});
            continue;
          }
          const bool keep_i = first_survives(parent.children[i], parent.children[j]);
          const std::size_t w = keep_i ? i : j;
          const std::size_t l = keep_i ? j : i;
          TaxNode& winner = parent.children[w];
          TaxNode& loser = parent.children[l];
          merge_ids(winner.paper_ids, loser.paper_ids);
          for (TaxNode& gc : loser.children) winner.children.push_back(std::move(gc));
          if (loser.score && (!winner.score || *loser.score > *winner.score))
            winner.score = loser.score;
          parent.children.erase(parent.children.begin() + static_cast<std::ptrdiff_t>(l));
          merged_any = true;
        }
      }
    }
    for (TaxNode& c : parent.children) process(c);
  };
  process(out);
  return out;
}

namespace {

void collapse_single_chains(TaxNode& node) {
  for (TaxNode& c : node.children) collapse_single_chains(c);
  while (node.children.size() == 1) {
    TaxNode child = std::move(node.children.front());
    merge_ids(node.paper_ids, child.paper_ids);
    node.children = std::move(child.children);
    node.provenance = Provenance::collapsed;
  }
}

/// Siblings whose normalized titles coincide carry no distinguishable
/// structure; fold them so the output invariants always hold.
void fold_identical_siblings(TaxNode& node) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < node.children.size() && !changed; ++i)
      for (std::size_t j = i + 1; j < node.children.size() && !changed; ++j) {
        if (normalize_text(node.children[i].title) != normalize_text(node.children[j].title))
          continue;
        TaxNode& winner = node.children[i];
        TaxNode& loser = node.children[j];
        merge_ids(winner.paper_ids, loser.paper_ids);
        for (TaxNode& gc : loser.children) winner.children.push_back(std::move(gc));
        if (loser.score && (!winner.score || *loser.score > *winner.score))
          winner.score = loser.score;
        node.children.erase(node.children.begin() + static_cast<std::ptrdiff_t>(j));
        changed = true;
      }
  }
  for (TaxNode& c : node.children) fold_identical_siblings(c);
}

void flatten_below(TaxNode& node, int depth, int depth_max) {
  if (depth == depth_max && !node.children.empty()) {
    const std::vector<std::string> all = subtree_paper_ids(node);
    node.paper_ids = all;
    node.children.clear();
    return;
  }
  for (TaxNode& c : node.children) flatten_below(c, depth + 1, depth_max);
}

void trim_branching(TaxNode& node, int branch_max) {
  if (static_cast<int>(node.children.size()) > branch_max) {
    std::vector<std::size_t> order(node.children.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const int sa = node.children[a].score.value_or(0);
      const int sb = node.children[b].score.value_or(0);
      if (sa != sb) return sa > sb;
      return normalize_text(node.children[a].title) < normalize_text(node.children[b].title);
    });
    std::vector<TaxNode> kept;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (r < static_cast<std::size_t>(branch_max)) continue;
      merge_ids(node.paper_ids, subtree_paper_ids(node.children[order[r]]));
    }
    std::set<std::size_t> keep_idx(order.begin(), order.begin() + branch_max);
    for (std::size_t i = 0; i < node.children.size(); ++i)
      if (keep_idx.count(i)) kept.push_back(std::move(node.children[i]));
    node.children = std::move(kept);
  }
  for (TaxNode& c : node.children) trim_branching(c, branch_max);
}

}  // namespace

Taxonomy check_structure(const TaxNode& tax, const QualityParams& params,
                         BuildProvenance provenance) {
  validate(params);
  TaxNode root = tax;
  collapse_single_chains(root);
  fold_identical_siblings(root);
  flatten_below(root, 0, params.depth_max);
  trim_branching(root, params.branch_max);
  collapse_single_chains(root);  // trimming to one child re-collapses
  validate_tree(root, {params.depth_max, params.branch_max});
  return Taxonomy{std::move(root), std::move(provenance)};
}

}  // namespace taxo
