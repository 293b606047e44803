#include "taxo/tree.hpp"

#include <algorithm>
#include <map>

#include "taxo/util.hpp"

namespace taxo {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::cluster: return "cluster";
    case Provenance::expanded: return "expanded";
    case Provenance::collapsed: return "collapsed";
  }
  return "cluster";
}

std::string to_string(AlignFlag f) {
  switch (f) {
    case AlignFlag::ok: return "ok";
    case AlignFlag::regenerated: return "regenerated";
    case AlignFlag::forced: return "forced";
  }
  return "ok";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "cluster") return Provenance::cluster;
  if (s == "expanded") return Provenance::expanded;
  if (s == "collapsed") return Provenance::collapsed;
  fail("unknown provenance: " + s);
}

AlignFlag align_flag_from_string(const std::string& s) {
  if (s == "ok") return AlignFlag::ok;
  if (s == "regenerated") return AlignFlag::regenerated;
  if (s == "forced") return AlignFlag::forced;
  fail("unknown align_flag: " + s);
}

std::size_t node_count(const TaxNode& root) {
  std::size_t n = 1;
  for (const TaxNode& c : root.children) n += node_count(c);
  return n;
}

int tree_depth(const TaxNode& root) {
  int best = 0;
  for (const TaxNode& c : root.children) best = std::max(best, 1 + tree_depth(c));
  return best;
}

std::vector<std::string> subtree_paper_ids(const TaxNode& root) {
  std::vector<std::string> out;
  walk(root, [&](const TaxNode& n, int) {
    out.insert(out.end(), n.paper_ids.begin(), n.paper_ids.end());
  });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void walk(const TaxNode& root, const std::function<void(const TaxNode&, int)>& fn) {
  std::function<void(const TaxNode&, int)> rec = [&](const TaxNode& n, int d) {
    fn(n, d);
    for (const TaxNode& c : n.children) rec(c, d + 1);
  };
  rec(root, 0);
}

void walk_mut(TaxNode& root, const std::function<void(TaxNode&, int)>& fn) {
  std::function<void(TaxNode&, int)> rec = [&](TaxNode& n, int d) {
    fn(n, d);
    for (TaxNode& c : n.children) rec(c, d + 1);
  };
  rec(root, 0);
}

void assign_preorder_ids(TaxNode& root) {
  std::size_t next = 0;
  walk_mut(root, [&](TaxNode& n, int) { n.id = "n" + std::to_string(next++); });
}

nlohmann::ordered_json tree_to_json(const TaxNode& root) {
  nlohmann::ordered_json j;
  j["title"] = root.title;
  j["papers"] = root.paper_ids;
  if (root.score) j["score"] = *root.score;
  if (root.score_defaulted) j["score_defaulted"] = true;
  j["provenance"] = to_string(root.provenance);
  if (root.align_flag != AlignFlag::ok) j["align_flag"] = to_string(root.align_flag);
  nlohmann::ordered_json kids = nlohmann::ordered_json::array();
  for (const TaxNode& c : root.children) kids.push_back(tree_to_json(c));
  j["children"] = std::move(kids);
  return j;
}

namespace {

TaxNode node_from_json(const nlohmann::json& j, int depth) {
  if (depth > 10000) fail("taxonomy nesting too deep");
  if (!j.is_object()) fail("taxonomy node is not an object");
  if (!j.contains("title") || !j["title"].is_string())
    fail("taxonomy node missing string field 'title'");
  TaxNode n;
  n.title = j["title"].get<std::string>();
  if (j.contains("papers")) {
    if (!j["papers"].is_array()) fail("taxonomy field 'papers' must be an array");
    for (const auto& p : j["papers"]) {
      if (!p.is_string()) fail("paper id must be a string");
      n.paper_ids.push_back(p.get<std::string>());
    }
    std::sort(n.paper_ids.begin(), n.paper_ids.end());
    n.paper_ids.erase(std::unique(n.paper_ids.begin(), n.paper_ids.end()),
                      n.paper_ids.end());
  }
  if (j.contains("score")) n.score = j["score"].get<int>();
  if (j.contains("score_defaulted")) n.score_defaulted = j["score_defaulted"].get<bool>();
  if (j.contains("provenance"))
    n.provenance = provenance_from_string(j["provenance"].get<std::string>());
  if (j.contains("align_flag"))
    n.align_flag = align_flag_from_string(j["align_flag"].get<std::string>());
  if (j.contains("children")) {
    if (!j["children"].is_array()) fail("taxonomy field 'children' must be an array");
    for (const auto& c : j["children"]) n.children.push_back(node_from_json(c, depth + 1));
  }
  return n;
}

}  // namespace

TaxNode tree_from_json(const nlohmann::json& j) {
  TaxNode root = node_from_json(j, 0);
  assign_preorder_ids(root);
  return root;
}

std::string tree_to_string(const TaxNode& root) {
  return tree_to_json(root).dump(2) + "\n";
}

TaxNode tree_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("taxonomy file is not valid JSON: ") + e.what());
  }
  return tree_from_json(j);
}

std::string canonical_form(const TaxNode& root) {
  std::vector<std::string> kids;
  kids.reserve(root.children.size());
  for (const TaxNode& c : root.children) kids.push_back(canonical_form(c));
  std::sort(kids.begin(), kids.end());
  std::string out = "(" + normalize_text(root.title);
  std::vector<std::string> papers = root.paper_ids;
  std::sort(papers.begin(), papers.end());
  for (const std::string& p : papers) out += "|" + p;
  for (const std::string& k : kids) out += k;
  out += ")";
  return out;
}

TaxNode canonicalize(const TaxNode& root) {
  TaxNode out = root;
  for (TaxNode& c : out.children) c = canonicalize(c);
  std::stable_sort(out.children.begin(), out.children.end(),
                   [](const TaxNode& a, const TaxNode& b) {
                     const std::string na = normalize_text(a.title);
                     const std::string nb = normalize_text(b.title);
                     if (na != nb) return na < nb;
                     return canonical_form(a) < canonical_form(b);
                   });
  return out;
}

void validate_single_membership(const TaxNode& root) {
  std::map<std::string, std::string> seen;  // paper id -> node title
  walk(root, [&](const TaxNode& n, int) {
    for (const std::string& p : n.paper_ids) {
      auto [it, inserted] = seen.emplace(p, n.title);
      if (!inserted)
        fail("paper '" + p + "' attached to both '" + it->second + "' and '" +
             n.title + "'");
    }
  });
}

void validate_tree(const TaxNode& root, const TreeLimits& limits) {
  validate_single_membership(root);
  walk(root, [&](const TaxNode& n, int depth) {
    if (normalize_text(n.title).empty()) fail("node with empty title at depth " +
                                              std::to_string(depth));
    if (n.children.size() == 1)
      fail("single-child internal node '" + n.title + "'");
    if (depth > limits.depth_max)
      fail("depth " + std::to_string(depth) + " exceeds limit " +
           std::to_string(limits.depth_max));
    if (static_cast<int>(n.children.size()) > limits.branch_max)
      fail("node '" + n.title + "' has " + std::to_string(n.children.size()) +
           " children, limit " + std::to_string(limits.branch_max));
    std::set<std::string> titles;
    for (const TaxNode& c : n.children) {
      if (!titles.insert(normalize_text(c.title)).second)
        fail("duplicate sibling title '" + c.title + "' under '" + n.title + "'");
    }
  });
}

}  // namespace taxo
