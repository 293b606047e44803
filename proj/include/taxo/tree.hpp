#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace taxo {

enum class Provenance { cluster, expanded, collapsed };
enum class AlignFlag { ok, regenerated, forced };

std::string to_string(Provenance p);
std::string to_string(AlignFlag f);
Provenance provenance_from_string(const std::string& s);
AlignFlag align_flag_from_string(const std::string& s);

/// One node of a taxonomy tree. `paper_ids` holds the papers attached at
/// this node itself; papers placed deeper in the subtree live on the
/// descendant nodes (see subtree_paper_ids). Ids are internal bookkeeping
/// and are not part of the file format.
struct TaxNode {
  std::string id;
  std::string title;
  std::vector<std::string> paper_ids;  // sorted, unique
  std::vector<TaxNode> children;
  Provenance provenance = Provenance::cluster;
  AlignFlag align_flag = AlignFlag::ok;
  std::optional<int> score;
  bool score_defaulted = false;

  bool leaf() const { return children.empty(); }
};

// -- traversal helpers ------------------------------------------------------

std::size_t node_count(const TaxNode& root);
int tree_depth(const TaxNode& root);  // root alone -> 0

/// All papers attached anywhere in the subtree, sorted and deduplicated.
std::vector<std::string> subtree_paper_ids(const TaxNode& root);

void walk(const TaxNode& root, const std::function<void(const TaxNode&, int depth)>& fn);
void walk_mut(TaxNode& root, const std::function<void(TaxNode&, int depth)>& fn);

/// Pre-order ids "n0", "n1", ... — applied after loading files, which carry
/// no ids.
void assign_preorder_ids(TaxNode& root);

// -- file schema ------------------------------------------------------------
//
// {"title": "...", "papers": ["id", ...], "children": [ ... ]}
// with optional per-node "score" (int), "provenance" (string) and
// "align_flag" (string, written only when not "ok").

nlohmann::ordered_json tree_to_json(const TaxNode& root);
TaxNode tree_from_json(const nlohmann::json& j);

std::string tree_to_string(const TaxNode& root);  // pretty, trailing newline
TaxNode tree_from_string(const std::string& text);

/// Canonical single-line serialization of the normalized tree shape;
/// children sorted by (normalized title, serialization). Equal for trees
/// that differ only in child order. Used for digests and tie-breaking.
std::string canonical_form(const TaxNode& root);

/// Copy with children recursively sorted into canonical order.
TaxNode canonicalize(const TaxNode& root);

// -- invariants -------------------------------------------------------------

struct TreeLimits {
  int depth_max = 4;
  int branch_max = 8;
};

/// Throws Error naming the first violated invariant: duplicate paper
/// attachment, single-child internal node, duplicate normalized sibling
/// titles, empty title, depth or branching beyond the limits.
void validate_tree(const TaxNode& root, const TreeLimits& limits);

/// Paper attachment check only (each id at most once in the whole tree).
void validate_single_membership(const TaxNode& root);

}  // namespace taxo
