#include "taxo/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "taxo/util.hpp"

namespace taxo {

Corpus::Corpus(std::vector<Paper> papers, std::string source)
    : papers_(std::move(papers)), source_(std::move(source)) {
  for (std::size_t i = 0; i < papers_.size(); ++i) {
    const Paper& p = papers_[i];
    if (p.id.empty()) fail("paper with empty id at position " + std::to_string(i));
    if (normalize_text(p.title).empty()) fail("paper '" + p.id + "' has empty title");
    if (!index_.emplace(p.id, i).second) fail("duplicate paper id '" + p.id + "'");
  }
}

const Paper& Corpus::by_id(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail("unknown paper id '" + id + "'");
  return papers_[it->second];
}

std::vector<std::string> Corpus::sorted_ids() const {
  std::vector<std::string> ids;
  ids.reserve(papers_.size());
  for (const Paper& p : papers_) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Corpus load_corpus(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Paper> papers;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("malformed corpus record at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("title") || !j["title"].is_string())
      fail("corpus record at line " + std::to_string(line_no) +
           " must be an object with string 'id' and 'title'");
    Paper p;
    p.id = j["id"].get<std::string>();
    p.title = j["title"].get<std::string>();
    if (j.contains("abstract")) p.abstract = j["abstract"].get<std::string>();
    if (j.contains("lang")) p.lang = j["lang"].get<std::string>();
    if (!seen.insert(p.id).second)
      fail("duplicate paper id '" + p.id + "' at line " + std::to_string(line_no));
    if (normalize_text(p.title).empty())
      fail("paper '" + p.id + "' at line " + std::to_string(line_no) + " has empty title");
    papers.push_back(std::move(p));
  }
  return Corpus(std::move(papers), path.string());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const Paper& p : corpus.papers()) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["title"] = p.title;
    j["abstract"] = p.abstract;
    j["lang"] = p.lang;
    out += j.dump();
    out += "\n";
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Gold taxonomies
// ---------------------------------------------------------------------------

namespace {

// Optional "id" fields let a file express that a node recurs below itself;
// a repeat along the root-to-node path is reported as a cycle, a repeat in
// disjoint branches as a duplicate.
void check_node_ids(const nlohmann::json& j, std::vector<std::string>& path,
                    std::set<std::string>& all, int depth) {
  if (depth > 10000) fail("taxonomy nesting too deep");
  std::string id;
  if (j.is_object() && j.contains("id") && j["id"].is_string())
    id = j["id"].get<std::string>();
  if (!id.empty()) {
    if (std::find(path.begin(), path.end(), id) != path.end())
      fail("cycle: node '" + id + "' is its own descendant");
    if (!all.insert(id).second) fail("duplicate node id '" + id + "'");
    path.push_back(id);
  }
  if (j.is_object() && j.contains("children") && j["children"].is_array())
    for (const auto& c : j["children"]) check_node_ids(c, path, all, depth + 1);
  if (!id.empty()) path.pop_back();
}

}  // namespace

GoldTaxonomy gold_from_tree(TaxNode root, const Corpus& corpus) {
  assign_preorder_ids(root);
  validate_single_membership(root);
  GoldTaxonomy gold;
  gold.root = std::move(root);
  walk(gold.root, [&](const TaxNode& n, int) {
    for (const std::string& p : n.paper_ids) {
      if (!corpus.contains(p))
        fail("gold taxonomy references unknown paper id '" + p + "'");
      gold.paper_to_node[p] = n.id;
    }
  });
  return gold;
}

GoldTaxonomy load_gold(const std::filesystem::path& path, const Corpus& corpus) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail("gold taxonomy file " + path.string() + " is not valid JSON: " + e.what());
  }
  std::vector<std::string> id_path;
  std::set<std::string> all_ids;
  check_node_ids(j, id_path, all_ids, 0);
  return gold_from_tree(tree_from_json(j), corpus);
}

void save_gold(const GoldTaxonomy& gold, const std::filesystem::path& path) {
  write_file_atomic(path, tree_to_string(gold.root));
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace {

struct SynthTopic {
  std::string label;
  std::vector<SynthTopic> children;
};

SynthTopic make_topics(int depth, int branching, int level, const std::string& path) {
  SynthTopic t;
  t.label = "t" + std::to_string(level) + path;
  if (level < depth) {
    for (int b = 0; b < branching; ++b)
      t.children.push_back(
          make_topics(depth, branching, level + 1, path + static_cast<char>('a' + b)));
  }
  return t;
}

void collect_labels(const SynthTopic& t, std::vector<std::string>& out) {
  if (!t.label.empty()) out.push_back(t.label);
  for (const SynthTopic& c : t.children) collect_labels(c, out);
}

std::string repeat_token(const std::string& tok, int times) {
  std::string out;
  for (int i = 0; i < times; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace

std::pair<Corpus, GoldTaxonomy> synth_corpus(const SynthSpec& spec) {
  if (spec.depth < 1 || spec.depth > 6) fail("synth: depth must be in [1, 6]");
  if (spec.branching < 2 || spec.branching > 12)
    fail("synth: branching must be in [2, 12]");
  if (spec.papers_per_leaf < 1 || spec.papers_per_leaf > 999)
    fail("synth: papers_per_leaf must be in [1, 999]");

  SynthTopic topics = make_topics(spec.depth, spec.branching, 0, "");
  topics.label.clear();  // the root is titled below, not labeled as a topic

  std::vector<std::string> labels;
  collect_labels(topics, labels);
  std::string root_title = "Survey of";
  for (const std::string& l : labels) root_title += " " + l;

  static const char* kVerbs[] = {"examine", "explore", "revisit"};

  std::vector<Paper> papers;
  TaxNode gold_root;
  gold_root.title = root_title;

  std::size_t paper_idx = 0;
  std::function<TaxNode(const SynthTopic&, std::vector<std::string>)> build =
      [&](const SynthTopic& t, std::vector<std::string> path) -> TaxNode {
    TaxNode node;
    node.title = t.label;
    if (!t.label.empty()) path.push_back(t.label);
    if (t.children.empty()) {
      for (int i = 0; i < spec.papers_per_leaf; ++i) {
        char pid[16];
        std::snprintf(pid, sizeof(pid), "p%04zu", paper_idx);
        const std::string leaf = path.back();
        const std::string parent = path.size() >= 2 ? path[path.size() - 2] : "general";
        const char* verb = kVerbs[mix_seed(spec.seed, paper_idx) % 3];

        Paper p;
        p.id = pid;
        p.title = "Advances in " + leaf + " methods (" + std::string(pid) + ")";
        // Level weights: a label at level l appears 3 * (depth - l + 1) times
        // in total across title and abstract, so upper levels dominate the
        // token profile and the hierarchy splits top levels first.
        std::string keywords;
        for (std::size_t l = 0; l < path.size(); ++l) {
          const int target = 3 * static_cast<int>(path.size() - l);
          int used = 0;
          if (path[l] == leaf) used += 2;           // title + technique sentence
          if (path[l] == parent) used += 1;         // technique sentence
          if (target > used) {
            if (!keywords.empty()) keywords.push_back(' ');
            keywords += repeat_token(path[l], target - used);
          }
        }
        if (!keywords.empty()) keywords.push_back(' ');
        keywords += pid;  // third occurrence; per-paper noise
        p.abstract = std::string("We ") + verb + " how " + leaf +
                     " techniques build on " + parent + " ideas. Results on " +
                     pid + " data are reported. Keywords: " + keywords + ".";
        papers.push_back(std::move(p));
        node.paper_ids.push_back(pid);
        ++paper_idx;
      }
    } else {
      for (const SynthTopic& c : t.children) node.children.push_back(build(c, path));
    }
    return node;
  };

  for (const SynthTopic& c : topics.children)
    gold_root.children.push_back(build(c, {}));

  std::ostringstream src;
  src << "synth depth=" << spec.depth << " branching=" << spec.branching
      << " per_leaf=" << spec.papers_per_leaf << " seed=" << spec.seed;
  Corpus corpus(std::move(papers), src.str());
  GoldTaxonomy gold = gold_from_tree(std::move(gold_root), corpus);
  return {std::move(corpus), std::move(gold)};
}

}  // namespace taxo
