#include "taxo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "taxo/util.hpp"

namespace taxo {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

BuildConfig config_from_json(const nlohmann::json& j) {
  BuildConfig c;
  read_field(j, "seed", c.seed);
  read_field(j, "root_title", c.root_title);
  read_field(j, "lang", c.lang);
  if (j.contains("embedder")) {
    const auto& e = j.at("embedder");
    read_field(e, "name", c.embedder.name);
    read_field(e, "dim", c.embedder.dim);
    read_field(e, "reduce_dim", c.embedder.reduce_dim);
    read_field(e, "cache_dir", c.embedder.cache_dir);
  }
  if (j.contains("cluster")) {
    const auto& e = j.at("cluster");
    read_field(e, "max_depth", c.cluster.max_depth);
    read_field(e, "min_split_size", c.cluster.min_split_size);
    read_field(e, "k_min", c.cluster.k_min);
    read_field(e, "k_max", c.cluster.k_max);
  }
  if (j.contains("concepts")) {
    const auto& e = j.at("concepts");
    read_field(e, "min_freq", c.concepts.min_freq);
    read_field(e, "merge_sim", c.concepts.merge_sim);
  }
  if (j.contains("fusion")) {
    const auto& e = j.at("fusion");
    read_field(e, "tau_conc", c.fusion.tau_conc);
    read_field(e, "min_support", c.fusion.min_support);
    read_field(e, "tau_align", c.fusion.tau_align);
    read_field(e, "min_claim", c.fusion.min_claim);
    read_field(e, "tau_claim", c.fusion.tau_claim);
  }
  if (j.contains("quality")) {
    const auto& e = j.at("quality");
    read_field(e, "score_threshold", c.quality.score_threshold);
    read_field(e, "tau_red", c.quality.tau_red);
    read_field(e, "depth_max", c.quality.depth_max);
    read_field(e, "branch_max", c.quality.branch_max);
  }
  if (j.contains("provider")) {
    const auto& e = j.at("provider");
    read_field(e, "kind", c.provider.kind);
    read_field(e, "fixtures_dir", c.provider.fixtures_dir);
    read_field(e, "audit_log", c.provider.audit_log);
    read_field(e, "parallelism", c.provider.parallelism);
    read_field(e, "base_url", c.provider.base_url);
    read_field(e, "model", c.provider.model);
    read_field(e, "key", c.provider.key);
  }
  if (j.contains("ablation")) {
    const auto& e = j.at("ablation");
    read_field(e, "bu_only", c.ablation.bu_only);
    read_field(e, "no_bi", c.ablation.no_bi);
    read_field(e, "no_peer", c.ablation.no_peer);
    read_field(e, "no_refine", c.ablation.no_refine);
  }
  c.cluster.seed = c.seed;
  validate_config(c);
  return c;
}

nlohmann::ordered_json config_to_json(const BuildConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["root_title"] = c.root_title;
  j["lang"] = c.lang;
  j["embedder"] = {{"name", c.embedder.name},
                   {"dim", c.embedder.dim},
                   {"reduce_dim", c.embedder.reduce_dim},
                   {"cache_dir", c.embedder.cache_dir}};
  j["cluster"] = {{"max_depth", c.cluster.max_depth},
                  {"min_split_size", c.cluster.min_split_size},
                  {"k_min", c.cluster.k_min},
                  {"k_max", c.cluster.k_max}};
  j["concepts"] = {{"min_freq", c.concepts.min_freq}, {"merge_sim", c.concepts.merge_sim}};
  j["fusion"] = {{"tau_conc", c.fusion.tau_conc},
                 {"min_support", c.fusion.min_support},
                 {"tau_align", c.fusion.tau_align},
                 {"min_claim", c.fusion.min_claim},
                 {"tau_claim", c.fusion.tau_claim}};
  j["quality"] = {{"score_threshold", c.quality.score_threshold},
                  {"tau_red", c.quality.tau_red},
                  {"depth_max", c.quality.depth_max},
                  {"branch_max", c.quality.branch_max}};
  j["provider"] = {{"kind", c.provider.kind},
                   {"fixtures_dir", c.provider.fixtures_dir},
                   {"audit_log", c.provider.audit_log},
                   {"parallelism", c.provider.parallelism},
                   {"base_url", c.provider.base_url},
                   {"model", c.provider.model},
                   {"key", ""}};  // secrets stay out of digests and provenance
  j["ablation"] = {{"bu_only", c.ablation.bu_only},
                   {"no_bi", c.ablation.no_bi},
                   {"no_peer", c.ablation.no_peer},
                   {"no_refine", c.ablation.no_refine}};
  return j;
}

BuildConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const BuildConfig& c) {
  if (c.embedder.name != "hash") fail("config: unknown embedder '" + c.embedder.name + "'");
  if (c.embedder.dim < 8) fail("config: embedder.dim must be >= 8");
  if (c.embedder.reduce_dim < 1 || c.embedder.reduce_dim >= c.embedder.dim)
    fail("config: reduce_dim must be in [1, dim)");
  validate(c.cluster);
  if (c.concepts.min_freq < 1) fail("config: concepts.min_freq must be >= 1");
  if (!(c.concepts.merge_sim > 0.0 && c.concepts.merge_sim <= 1.0))
    fail("config: concepts.merge_sim must be in (0, 1]");
  validate(c.fusion);
  validate(c.quality);
  if (c.provider.kind != "mock" && c.provider.kind != "remote")
    fail("config: provider.kind must be 'mock' or 'remote'");
  if (c.provider.parallelism < 1) fail("config: provider.parallelism must be >= 1");
}

std::string config_digest(const BuildConfig& c) {
  const nlohmann::json sorted = config_to_json(c);
  return sha256_hex(sorted.dump());
}

// ---------------------------------------------------------------------------
// Providers / embedders
// ---------------------------------------------------------------------------

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : fallback;
}

}  // namespace

std::unique_ptr<Provider> make_provider(const BuildConfig& c) {
  if (c.provider.kind == "mock")
    return std::make_unique<MockProvider>(c.provider.fixtures_dir);
  const std::string base = env_or("TAXO_LLM_BASE_URL", c.provider.base_url);
  const std::string model = env_or("TAXO_LLM_MODEL", c.provider.model);
  const std::string key = env_or("TAXO_LLM_KEY", c.provider.key);
  return std::make_unique<HttpProvider>(base, model, key);
}

std::unique_ptr<Embedder> make_embedder(const BuildConfig& c) {
  return std::make_unique<HashEmbedder>(c.embedder.dim);
}

// ---------------------------------------------------------------------------
// Stage trace
// ---------------------------------------------------------------------------

bool StageTrace::has(const std::string& stage) const {
  for (const StageRecord& s : stages)
    if (s.stage == stage) return true;
  return false;
}

nlohmann::ordered_json trace_to_json(const StageTrace& t) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const StageRecord& s : t.stages) {
    nlohmann::ordered_json j;
    j["stage"] = s.stage;
    j["input_digest"] = s.input_digest;
    j["output_digest"] = s.output_digest;
    j["millis"] = s.millis;
    arr.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["stages"] = std::move(arr);
  return out;
}

// ---------------------------------------------------------------------------
// Build
// ---------------------------------------------------------------------------

namespace {

std::string corpus_canonical(const Corpus& corpus) {
  std::string s;
  for (const Paper& p : corpus.papers())
    s += p.id + "\x1f" + p.title + "\x1f" + p.abstract + "\x1f" + p.lang + "\x1e";
  return s;
}

std::string embeddings_canonical(const EmbeddingSet& e) {
  std::string s;
  char buf[32];
  for (std::size_t i = 0; i < e.size(); ++i) {
    s += e.ids()[i];
    for (double v : e.vec(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      s += ",";
      s += buf;
    }
    s += "\n";
  }
  return s;
}

/// Cluster backbone in the taxonomy file schema, titled "cluster-<id>".
TaxNode cluster_as_tree(const ClusterNode& n) {
  TaxNode t;
  t.id = n.id;
  t.title = "cluster-" + n.id;
  if (n.leaf()) t.paper_ids = n.paper_ids;
  for (const ClusterNode& c : n.children) t.children.push_back(cluster_as_tree(c));
  return t;
}

std::string cluster_dump(const ClusterNode& n) { return tree_to_string(cluster_as_tree(n)); }

/// Line-delimited concept dump: {surface, freq, paper_ids, aliases} per
/// concept, then the induced hierarchy as a final record.
std::string concepts_dump(const std::vector<Concept>& cs, const ConceptTree& tree) {
  std::string out;
  for (const Concept& c : cs) {
    nlohmann::ordered_json j;
    j["surface"] = c.surface;
    j["freq"] = c.freq();
    j["paper_ids"] = c.paper_ids;
    j["aliases"] = c.aliases;
    out += j.dump() + "\n";
  }
  std::function<nlohmann::ordered_json(const ConceptTree::Node&)> conv =
      [&](const ConceptTree::Node& n) {
        nlohmann::ordered_json j;
        j["label"] = n.label;
        nlohmann::ordered_json kids = nlohmann::ordered_json::array();
        for (const auto& c : n.children) kids.push_back(conv(c));
        j["children"] = std::move(kids);
        return j;
      };
  nlohmann::ordered_json tj;
  tj["concept_tree"] = conv(tree.root);
  out += tj.dump() + "\n";
  return out;
}

/// Tracks the digest chain and dumps completed stage artifacts.
class StageRunner {
 public:
  StageRunner(StageTrace& trace, std::string initial_digest, std::filesystem::path dump_dir)
      : trace_(trace), chain_(std::move(initial_digest)), dump_dir_(std::move(dump_dir)) {}

  template <typename Fn>
  void run(const std::string& stage, Fn&& body) {
    const auto start = std::chrono::steady_clock::now();
    std::string artifact = body();  // canonical serialization of the output
    const auto end = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.stage = stage;
    rec.input_digest = chain_;
    rec.output_digest = sha256_hex(chain_ + "|" + stage + "|" + artifact);
    rec.millis = std::chrono::duration<double, std::milli>(end - start).count();
    chain_ = rec.output_digest;
    trace_.stages.push_back(rec);
    if (!dump_dir_.empty()) {
      std::filesystem::create_directories(dump_dir_);
      char idx[8];
      std::snprintf(idx, sizeof(idx), "%02zu", trace_.stages.size() - 1);
      write_file_atomic(dump_dir_ / (std::string(idx) + "-" + stage + ".txt"), artifact);
    }
  }

  const std::string& chain() const { return chain_; }

 private:
  StageTrace& trace_;
  std::string chain_;
  std::filesystem::path dump_dir_;
};

}  // namespace

BuildResult build_taxonomy(const Corpus& corpus, const BuildConfig& config,
                           Provider& provider, const Embedder& embedder,
                           const std::filesystem::path& partial_dir) {
  validate_config(config);
  if (corpus.empty()) fail("build: corpus is empty");

  const std::string root_title = !config.root_title.empty()
                                     ? config.root_title
                                     : (!corpus.source().empty() ? corpus.source() : "Corpus");

  BuildResult r;
  const std::string d0 = sha256_hex("corpus:" + corpus_canonical(corpus) +
                                    "|config:" + config_digest(config));
  StageRunner stages(r.trace, d0, partial_dir);

  stages.run("embed", [&] {
    r.embeddings = embed_corpus(embedder, corpus, config.embedder.cache_dir,
                                config.provider.parallelism);
    return embeddings_canonical(r.embeddings);
  });

  stages.run("reduce", [&] {
    r.reduced = reduce(r.embeddings, config.embedder.reduce_dim, config.seed);
    return embeddings_canonical(r.reduced);
  });

  stages.run("cluster", [&] {
    r.cluster_tree = build_cluster_tree(r.reduced, config.cluster);
    return cluster_dump(r.cluster_tree);
  });

  if (config.ablation.bu_only) {
    TaxNode labeled;
    stages.run("label", [&] {
      labeled = label_by_title_frequency(r.cluster_tree, corpus);
      return tree_to_string(labeled);
    });
    if (config.ablation.no_refine) {
      r.taxonomy.root = std::move(labeled);
    } else {
      stages.run("quality", [&] {
        const TaxNode scored =
            score_and_prune(labeled, corpus, provider, config.quality.score_threshold);
        const TaxNode deduped =
            merge_redundant(scored, embedder, provider, config.quality.tau_red);
        r.taxonomy = check_structure(deduped, config.quality);
        return tree_to_string(r.taxonomy.root);
      });
    }
  } else {
    stages.run("concepts", [&] {
      const std::vector<Concept> raw =
          extract_concepts(corpus, provider, config.provider.parallelism);
      r.concepts = merge_and_filter(raw, embedder, config.concepts.min_freq,
                                    config.concepts.merge_sim);
      if (r.concepts.empty())
        fail("no concepts survive merge_and_filter; corpus too small or thresholds too "
             "strict");
      r.concept_tree = induce_concept_tree(r.concepts, provider);
      return concepts_dump(r.concepts, r.concept_tree);
    });

    stages.run("round1", [&] {
      auto [valid, support] = round1_validate(r.concepts, r.cluster_tree,
                                              config.fusion.tau_conc,
                                              config.fusion.min_support);
      r.validated = std::move(valid);
      r.support = std::move(support);
      std::string s;
      for (const Concept& c : r.validated) s += c.surface + ";";
      return s;
    });

    stages.run("round2", [&] {
      Round2Result r2 = round2_label(r.cluster_tree, r.validated, r.support, r.concept_tree,
                                     provider, corpus, r.reduced, config.cluster, root_title);
      r.cluster_tree = std::move(r2.tree);
      r.after_round2 = std::move(r2.tax);
      // The labeled tree plus the backbone it mirrors (re-clustering shows up
      // here), both in the taxonomy file schema.
      return tree_to_string(*r.after_round2) + cluster_dump(r.cluster_tree);
    });

    TaxNode current = *r.after_round2;
    if (!config.ablation.no_bi) {
      stages.run("round3", [&] {
        current = round3_align(current, corpus, provider, embedder, config.fusion.tau_align);
        r.after_round3 = current;
        return tree_to_string(current);
      });
    }
    if (!config.ablation.no_peer) {
      stages.run("round4", [&] {
        current = round4_expand(current, corpus, provider, embedder, config.fusion.min_claim,
                                config.fusion.tau_claim);
        r.after_round4 = current;
        return tree_to_string(current);
      });
    }
    if (config.ablation.no_refine) {
      r.taxonomy.root = std::move(current);
    } else {
      stages.run("quality", [&] {
        const TaxNode scored =
            score_and_prune(current, corpus, provider, config.quality.score_threshold);
        const TaxNode deduped =
            merge_redundant(scored, embedder, provider, config.quality.tau_red);
        r.taxonomy = check_structure(deduped, config.quality);
        return tree_to_string(r.taxonomy.root);
      });
    }
  }

  assign_preorder_ids(r.taxonomy.root);
  r.taxonomy.provenance.config_digest = config_digest(config);
  r.taxonomy.provenance.provider_name = provider.name();
  r.taxonomy.provenance.seed = config.seed;
  for (const StageRecord& s : r.trace.stages)
    r.taxonomy.provenance.stages.push_back({s.stage, s.input_digest, s.output_digest});
  return r;
}

// ---------------------------------------------------------------------------
// Taxonomy file
// ---------------------------------------------------------------------------

std::string taxonomy_to_string(const BuildResult& result) {
  nlohmann::ordered_json j = tree_to_json(result.taxonomy.root);
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const StageDigest& s : result.taxonomy.provenance.stages)
    stages.push_back({{"stage", s.stage}, {"input", s.input}, {"output", s.output}});
  j["build"] = {{"config_digest", result.taxonomy.provenance.config_digest},
                {"provider", result.taxonomy.provenance.provider_name},
                {"seed", result.taxonomy.provenance.seed},
                {"stages", std::move(stages)}};
  return j.dump(2) + "\n";
}

void write_taxonomy(const BuildResult& result, const std::filesystem::path& path) {
  write_file_atomic(path, taxonomy_to_string(result));
}

TaxNode load_taxonomy(const std::filesystem::path& path) {
  return tree_from_string(read_file(path));
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

void render_md_node(const TaxNode& n, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += "- " + n.title + " (papers: " + std::to_string(subtree_paper_ids(n).size());
  if (n.score) out += ", score: " + std::to_string(*n.score);
  out += ")\n";
  for (const TaxNode& c : n.children) render_md_node(c, depth + 1, out);
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

void render_dot_node(const TaxNode& n, const std::string& my_id, std::size_t& next,
                     std::string& nodes, std::string& edges) {
  nodes += "  " + my_id + " [label=\"" + dot_escape(n.title) + " (" +
           std::to_string(subtree_paper_ids(n).size()) + ")\"];\n";
  for (const TaxNode& c : n.children) {
    const std::string cid = "n" + std::to_string(next++);
    edges += "  " + my_id + " -> " + cid + ";\n";
    render_dot_node(c, cid, next, nodes, edges);
  }
}

}  // namespace

std::string render_markdown(const TaxNode& root) {
  const TaxNode canon = canonicalize(root);
  std::string out;
  render_md_node(canon, 0, out);
  return out;
}

std::string render_dot(const TaxNode& root) {
  const TaxNode canon = canonicalize(root);
  std::string nodes, edges;
  std::size_t next = 1;
  render_dot_node(canon, "n0", next, nodes, edges);
  return "digraph taxonomy {\n  rankdir=LR;\n  node [shape=box];\n" + nodes + edges + "}\n";
}

// ---------------------------------------------------------------------------
// CLI commands
// ---------------------------------------------------------------------------

namespace {

void apply_ablation(BuildConfig& config, const std::string& ablate) {
  if (ablate.empty()) return;
  if (ablate == "bu_only") config.ablation.bu_only = true;
  else if (ablate == "no_bi") config.ablation.no_bi = true;
  else if (ablate == "no_peer") config.ablation.no_peer = true;
  else if (ablate == "no_refine") config.ablation.no_refine = true;
  else fail("unknown ablation '" + ablate + "' (bu_only|no_bi|no_peer|no_refine)");
}

}  // namespace

int cmd_build(const std::filesystem::path& corpus_path, const std::filesystem::path& config_path,
              const std::filesystem::path& out_path, const std::string& ablate,
              const std::filesystem::path& dump_dir) {
  try {
    const Corpus corpus = load_corpus(corpus_path);
    BuildConfig config = load_config(config_path);
    apply_ablation(config, ablate);

    std::unique_ptr<Provider> provider = make_provider(config);
    std::unique_ptr<AuditLog> audit;
    if (!config.provider.audit_log.empty()) {
      audit = std::make_unique<AuditLog>(config.provider.audit_log);
      provider->set_audit(audit.get());
    }
    std::unique_ptr<Embedder> embedder = make_embedder(config);

    // Stages dump into .partial/ as they complete; a failed build leaves
    // them behind, a successful one moves them to --dump-stages or drops them.
    const std::filesystem::path partial = out_path.string() + ".partial";
    std::filesystem::remove_all(partial);
    BuildResult result;
    try {
      result = build_taxonomy(corpus, config, *provider, *embedder, partial);
    } catch (const std::exception& e) {
      std::cerr << "build failed: " << e.what() << "\n";
      std::cerr << "partial intermediates under " << partial << "\n";
      return 1;
    }
    if (!dump_dir.empty()) {
      std::filesystem::remove_all(dump_dir);
      if (dump_dir.has_parent_path()) std::filesystem::create_directories(dump_dir.parent_path());
      std::filesystem::rename(partial, dump_dir);
    } else {
      std::filesystem::remove_all(partial);
    }

    write_taxonomy(result, out_path);
    write_file_atomic(out_path.string() + ".trace.json",
                      trace_to_json(result.trace).dump(2) + "\n");
    std::cout << "taxonomy written to " << out_path.string() << " ("
              << node_count(result.taxonomy.root) << " nodes)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const std::filesystem::path& pred_path, const std::filesystem::path& gold_path,
             const std::filesystem::path& corpus_path, const std::filesystem::path& report_path,
             double tau_sub) {
  try {
    const Corpus corpus = load_corpus(corpus_path);
    const TaxNode pred = load_taxonomy(pred_path);
    const GoldTaxonomy gold = load_gold(gold_path, corpus);
    const HashEmbedder embedder(256);
    const EvalReport report = evaluate(pred, gold.root, embedder, tau_sub);
    if (!report_path.empty())
      write_file_atomic(report_path, report_to_json(report).dump(2) + "\n");
    std::cout << summary_line(report) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_render(const std::filesystem::path& in_path, const std::string& format) {
  try {
    const TaxNode tree = load_taxonomy(in_path);
    if (format == "md") {
      std::cout << render_markdown(tree);
    } else if (format == "dot") {
      std::cout << render_dot(tree);
    } else {
      std::cerr << "error: unknown format '" << format << "' (md|dot)\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_synth(int depth, int branching, int per_leaf, uint64_t seed,
              const std::filesystem::path& out_dir) {
  try {
    const auto [corpus, gold] = synth_corpus({depth, branching, per_leaf, seed});
    std::filesystem::create_directories(out_dir);
    save_corpus(corpus, out_dir / "corpus.jsonl");
    save_gold(gold, out_dir / "gold.json");
    std::cout << "wrote " << (out_dir / "corpus.jsonl").string() << " (" << corpus.size()
              << " papers) and " << (out_dir / "gold.json").string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace taxo
