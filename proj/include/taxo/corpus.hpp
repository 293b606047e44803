#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "taxo/tree.hpp"

namespace taxo {

struct Paper {
  std::string id;
  std::string title;
  std::string abstract;
  std::string lang = "en";

  bool operator==(const Paper&) const = default;
};

/// Ordered paper collection with unique ids. `source` is provenance
/// metadata (file path or generator spec) and does not take part in
/// value comparison.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Paper> papers, std::string source = "");

  const std::vector<Paper>& papers() const { return papers_; }
  std::size_t size() const { return papers_.size(); }
  bool empty() const { return papers_.empty(); }
  const std::string& source() const { return source_; }
  void set_source(std::string s) { source_ = std::move(s); }

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const Paper& by_id(const std::string& id) const;

  /// Paper ids sorted lexicographically; the deterministic iteration order
  /// used throughout clustering and fusion.
  std::vector<std::string> sorted_ids() const;

 private:
  std::vector<Paper> papers_;
  std::map<std::string, std::size_t> index_;
  std::string source_;
};

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct GoldTaxonomy {
  TaxNode root;
  std::map<std::string, std::string> paper_to_node;  // paper id -> node id
};

GoldTaxonomy load_gold(const std::filesystem::path& path, const Corpus& corpus);
GoldTaxonomy gold_from_tree(TaxNode root, const Corpus& corpus);
void save_gold(const GoldTaxonomy& gold, const std::filesystem::path& path);

struct SynthSpec {
  int depth = 2;
  int branching = 2;
  int papers_per_leaf = 3;
  uint64_t seed = 0;
};

/// Deterministic corpus with a planted hierarchy. Every paper's text embeds
/// its leaf's full topic-label path as tokens, level weights decreasing with
/// depth, so embedding-based clustering can recover the planted tree. The
/// gold root title lists every topic label.
std::pair<Corpus, GoldTaxonomy> synth_corpus(const SynthSpec& spec);

}  // namespace taxo
