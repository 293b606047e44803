#include "taxo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "taxo/kernels.hpp"
#include "taxo/util.hpp"

namespace taxo {

FlatPartition flatten(const TaxNode& tree) {
  FlatPartition out;
  walk(tree, [&](const TaxNode& n, int) {
    for (const std::string& p : n.paper_ids) {
      auto [it, inserted] = out.emplace(p, n.id);
      if (!inserted) fail("flatten: paper '" + p + "' appears in two nodes");
    }
  });
  return out;
}

namespace {

std::vector<std::string> shared_papers(const FlatPartition& a, const FlatPartition& b) {
  std::vector<std::string> shared;
  for (const auto& [paper, label] : a)
    if (b.count(paper)) shared.push_back(paper);
  return shared;  // map order: already sorted
}

/// Set-partition equality over the given papers, ignoring label names.
bool same_partition(const FlatPartition& a, const FlatPartition& b,
                    const std::vector<std::string>& papers) {
  std::map<std::string, std::set<std::string>> ga, gb;
  for (const std::string& p : papers) {
    ga[a.at(p)].insert(p);
    gb[b.at(p)].insert(p);
  }
  std::set<std::set<std::string>> sa, sb;
  for (auto& [l, s] : ga) sa.insert(s);
  for (auto& [l, s] : gb) sb.insert(s);
  return sa == sb;
}

struct Contingency {
  std::map<std::string, std::map<std::string, std::size_t>> joint;  // pred -> gold -> n
  std::map<std::string, std::size_t> pred_sizes, gold_sizes;
  std::size_t total = 0;
};

Contingency contingency(const FlatPartition& pred, const FlatPartition& gold,
                        const std::vector<std::string>& papers) {
  Contingency c;
  for (const std::string& p : papers) {
    const std::string& lp = pred.at(p);
    const std::string& lg = gold.at(p);
    ++c.joint[lp][lg];
    ++c.pred_sizes[lp];
    ++c.gold_sizes[lg];
    ++c.total;
  }
  return c;
}

double entropy(const std::map<std::string, std::size_t>& sizes, std::size_t total) {
  double h = 0.0;
  for (const auto& [label, n] : sizes) {
    const double p = static_cast<double>(n) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double nmi(const FlatPartition& pred, const FlatPartition& gold) {
  const std::vector<std::string> papers = shared_papers(pred, gold);
  if (papers.size() < 2) fail("nmi: fewer than 2 shared papers");
  const Contingency c = contingency(pred, gold, papers);
  const double hx = entropy(c.pred_sizes, c.total);
  const double hy = entropy(c.gold_sizes, c.total);
  if (hx == 0.0 || hy == 0.0) return same_partition(pred, gold, papers) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [lp, row] : c.joint) {
    for (const auto& [lg, n] : row) {
      const double pxy = static_cast<double>(n) / static_cast<double>(c.total);
      const double px = static_cast<double>(c.pred_sizes.at(lp)) / static_cast<double>(c.total);
      const double py = static_cast<double>(c.gold_sizes.at(lg)) / static_cast<double>(c.total);
      mi += pxy * std::log(pxy / (px * py));
    }
  }
  const double v = mi / std::sqrt(hx * hy);
  return std::clamp(v, 0.0, 1.0);
}

double purity(const FlatPartition& pred, const FlatPartition& gold) {
  const std::vector<std::string> papers = shared_papers(pred, gold);
  if (papers.size() < 2) fail("purity: fewer than 2 shared papers");
  const Contingency c = contingency(pred, gold, papers);
  std::size_t hits = 0;
  for (const auto& [lp, row] : c.joint) {
    std::size_t best = 0;
    for (const auto& [lg, n] : row) best = std::max(best, n);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(c.total);
}

// ---------------------------------------------------------------------------
// Tree edit distance (ordered trees, keyroot dynamic program)
// ---------------------------------------------------------------------------

namespace {

struct PostOrder {
  std::vector<std::string> labels;  // post-order
  std::vector<int> lml;             // leftmost leaf descendant, post-order index
  std::vector<int> keyroots;
};

void build_postorder(const TaxNode& node, PostOrder& po, int& counter, int& my_lml) {
  int leftmost = -1;
  for (const TaxNode& c : node.children) {
    int child_lml = -1;
    build_postorder(c, po, counter, child_lml);
    if (leftmost == -1) leftmost = child_lml;
  }
  const int index = counter++;
  if (leftmost == -1) leftmost = index;
  po.labels.push_back(node.title);
  po.lml.push_back(leftmost);
  my_lml = leftmost;
}

PostOrder postorder(const TaxNode& root) {
  PostOrder po;
  int counter = 0, lml = -1;
  build_postorder(root, po, counter, lml);
  const int n = static_cast<int>(po.labels.size());
  std::set<int> lml_seen;
  for (int i = n - 1; i >= 0; --i)
    if (lml_seen.insert(po.lml[i]).second) po.keyroots.push_back(i);
  std::sort(po.keyroots.begin(), po.keyroots.end());
  return po;
}

}  // namespace

int tree_edit_distance(const TaxNode& a, const TaxNode& b, const SubstCost& cost) {
  const PostOrder pa = postorder(a);
  const PostOrder pb = postorder(b);
  const int na = static_cast<int>(pa.labels.size());
  const int nb = static_cast<int>(pb.labels.size());
  std::vector<std::vector<int>> treedist(na, std::vector<int>(nb, 0));

  for (int i : pa.keyroots) {
    for (int j : pb.keyroots) {
      const int ioff = pa.lml[i] - 1;
      const int joff = pb.lml[j] - 1;
      const int m = i - ioff + 1;
      const int n = j - joff + 1;
      std::vector<std::vector<int>> fd(m, std::vector<int>(n, 0));
      for (int x = 1; x < m; ++x) fd[x][0] = fd[x - 1][0] + 1;
      for (int y = 1; y < n; ++y) fd[0][y] = fd[0][y - 1] + 1;
      for (int x = 1; x < m; ++x) {
        for (int y = 1; y < n; ++y) {
          if (pa.lml[i] == pa.lml[x + ioff] && pb.lml[j] == pb.lml[y + joff]) {
            const int sub = cost(pa.labels[x + ioff], pb.labels[y + joff]);
            fd[x][y] = std::min({fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[x - 1][y - 1] + sub});
            treedist[x + ioff][y + joff] = fd[x][y];
          } else {
            const int p = pa.lml[x + ioff] - 1 - ioff;
            const int q = pb.lml[y + joff] - 1 - joff;
            fd[x][y] = std::min({fd[x - 1][y] + 1, fd[x][y - 1] + 1,
                                 fd[p][q] + treedist[x + ioff][y + joff]});
          }
        }
      }
    }
  }
  return treedist[na - 1][nb - 1];
}

double ceds(const TaxNode& pred, const TaxNode& gold, const Embedder& embedder,
            double tau_sub) {
  if (normalize_text(pred.title).empty() && pred.children.empty() && pred.paper_ids.empty())
    fail("ceds: empty predicted tree");
  const TaxNode ca = canonicalize(pred);
  const TaxNode cb = canonicalize(gold);

  std::map<std::string, Embedding> emb_cache;
  auto emb = [&](const std::string& title) -> const Embedding& {
    auto it = emb_cache.find(title);
    if (it != emb_cache.end()) return it->second;
    return emb_cache.emplace(title, embedder.embed(title)).first->second;
  };
  const SubstCost cost = [&](const std::string& x, const std::string& y) -> int {
    if (normalize_text(x) == normalize_text(y)) return 0;
    return cosine(emb(x), emb(y)) >= tau_sub ? 0 : 1;
  };

  const int ted = tree_edit_distance(ca, cb, cost);
  const double denom = static_cast<double>(std::max(node_count(ca), node_count(cb)));
  return std::clamp(1.0 - static_cast<double>(ted) / denom, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// HSR
// ---------------------------------------------------------------------------

namespace {

/// Depth of the deepest node holding each paper (root depth 0), plus the
/// root-to-node id path for LCA computation.
struct PaperDepths {
  std::map<std::string, std::vector<std::string>> paths;  // paper -> node-id path
};

PaperDepths paper_paths(const TaxNode& root) {
  PaperDepths out;
  std::vector<std::string> path;
  std::function<void(const TaxNode&)> rec = [&](const TaxNode& n) {
    path.push_back(n.id);
    for (const std::string& p : n.paper_ids) {
      if (out.paths.count(p)) fail("hsr: paper '" + p + "' appears in two nodes");
      out.paths[p] = path;
    }
    for (const TaxNode& c : n.children) rec(c);
    path.pop_back();
  };
  rec(root);
  return out;
}

int lca_depth(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t k = 0;
  while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
  return static_cast<int>(k) - 1;
}

double pair_ratio(int dp, int dg) {
  if (dp == 0 && dg == 0) return 1.0;
  const int lo = std::min(dp, dg);
  const int hi = std::max(dp, dg);
  return hi == 0 ? 1.0 : static_cast<double>(lo) / static_cast<double>(hi);
}

}  // namespace

HsrResult hsr(const TaxNode& pred, const TaxNode& gold, const HsrOptions& opts) {
  const PaperDepths dp = paper_paths(pred);
  const PaperDepths dg = paper_paths(gold);
  std::vector<std::string> shared;
  for (const auto& [paper, path] : dp.paths)
    if (dg.paths.count(paper)) shared.push_back(paper);
  const std::size_t m = shared.size();
  if (m < 2) fail("hsr: fewer than 2 shared papers");

  const std::size_t total_pairs = m * (m - 1) / 2;
  HsrResult res;
  if (total_pairs <= opts.max_pairs) {
    res.pairs = total_pairs;
    // Full enumeration through the pair-mean kernel.
    std::vector<double> ratios(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& pi = dp.paths.at(shared[i]);
      const auto& gi = dg.paths.at(shared[i]);
      for (std::size_t j = i + 1; j < m; ++j) {
        const int d_pred = lca_depth(pi, dp.paths.at(shared[j]));
        const int d_gold = lca_depth(gi, dg.paths.at(shared[j]));
        ratios[i * m + j] = pair_ratio(d_pred, d_gold);
      }
    }
    res.value = kernels::pair_mean(ratios, m);
    return res;
  }

  // Seeded reservoir over the pair stream.
  res.subsampled = true;
  std::vector<std::pair<std::size_t, std::size_t>> reservoir;
  reservoir.reserve(opts.max_pairs);
  uint64_t state = opts.seed ^ 0x5851f42d4c957f2dULL;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      ++seen;
      if (reservoir.size() < opts.max_pairs) {
        reservoir.emplace_back(i, j);
      } else {
        const std::size_t r = splitmix64(state) % seen;
        if (r < opts.max_pairs) reservoir[r] = {i, j};
      }
    }
  }
  double total = 0.0;
  for (const auto& [i, j] : reservoir) {
    const int d_pred = lca_depth(dp.paths.at(shared[i]), dp.paths.at(shared[j]));
    const int d_gold = lca_depth(dg.paths.at(shared[i]), dg.paths.at(shared[j]));
    total += pair_ratio(d_pred, d_gold);
  }
  res.pairs = reservoir.size();
  res.value = total / static_cast<double>(reservoir.size());
  return res;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

EvalReport evaluate(const TaxNode& pred, const TaxNode& gold, const Embedder& embedder,
                    double tau_sub, uint64_t hsr_seed) {
  EvalReport r;
  r.tau_sub = tau_sub;
  r.hsr_seed = hsr_seed;
  const FlatPartition fp = flatten(pred);
  const FlatPartition fg = flatten(gold);
  r.papers_evaluated = shared_papers(fp, fg).size();
  r.nmi = nmi(fp, fg);
  r.purity = purity(fp, fg);
  r.ceds = ceds(pred, gold, embedder, tau_sub);
  const HsrResult h = hsr(pred, gold, {hsr_seed, 1000000});
  r.hsr = h.value;
  r.hsr_pairs = h.pairs;
  r.hsr_subsampled = h.subsampled;
  r.pred_nodes = node_count(pred);
  r.gold_nodes = node_count(gold);
  return r;
}

namespace {

double scaled(double v) { return std::round(v * 1000.0) / 10.0; }

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", scaled(v));
  return buf;
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["nmi"] = scaled(r.nmi);
  j["purity"] = scaled(r.purity);
  j["ceds"] = scaled(r.ceds);
  j["hsr"] = scaled(r.hsr);
  j["counts"] = {{"papers_evaluated", r.papers_evaluated},
                 {"pred_nodes", r.pred_nodes},
                 {"gold_nodes", r.gold_nodes},
                 {"hsr_pairs", r.hsr_pairs}};
  j["parameters"] = {{"tau_sub", r.tau_sub},
                     {"hsr_subsampled", r.hsr_subsampled},
                     {"hsr_seed", r.hsr_seed}};
  return j;
}

std::string summary_line(const EvalReport& r) {
  return "NMI=" + one_decimal(r.nmi) + " Purity=" + one_decimal(r.purity) +
         " CEDS=" + one_decimal(r.ceds) + " HSR=" + one_decimal(r.hsr);
}

}  // namespace taxo
