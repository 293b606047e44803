#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxo/cluster.hpp"
#include "taxo/concepts.hpp"
#include "taxo/corpus.hpp"
#include "taxo/embedding.hpp"
#include "taxo/fusion.hpp"
#include "taxo/llm.hpp"
#include "taxo/metrics.hpp"
#include "taxo/quality.hpp"
#include "taxo/tree.hpp"

namespace taxo {

struct BuildConfig {
  uint64_t seed = 0;
  std::string root_title;  // empty -> corpus source string
  std::string lang = "en";

  struct EmbedderCfg {
    std::string name = "hash";
    std::size_t dim = 256;
    std::size_t reduce_dim = 16;
    std::string cache_dir;
  } embedder;

  ClusterParams cluster;  // cluster.seed mirrors the top-level seed

  struct ConceptCfg {
    std::size_t min_freq = 2;
    double merge_sim = 0.92;
  } concepts;

  FusionParams fusion;
  QualityParams quality;

  struct ProviderCfg {
    std::string kind = "mock";  // mock | remote
    std::string fixtures_dir;
    std::string audit_log;
    int parallelism = 4;
    std::string base_url, model, key;  // remote; env vars fill gaps
  } provider;

  struct Ablation {
    bool bu_only = false;
    bool no_bi = false;
    bool no_peer = false;
    bool no_refine = false;
  } ablation;
};

BuildConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const BuildConfig& c);
BuildConfig load_config(const std::filesystem::path& path);
void validate_config(const BuildConfig& c);
std::string config_digest(const BuildConfig& c);

struct StageRecord {
  std::string stage;
  std::string input_digest;
  std::string output_digest;
  double millis = 0.0;
};

struct StageTrace {
  std::vector<StageRecord> stages;
  bool has(const std::string& stage) const;
};

nlohmann::ordered_json trace_to_json(const StageTrace& t);

struct BuildResult {
  Taxonomy taxonomy;
  StageTrace trace;
  // Intermediates, kept for inspection, stage dumps, and the test suites.
  EmbeddingSet embeddings;
  EmbeddingSet reduced;
  ClusterNode cluster_tree;  // final backbone (after any re-clustering)
  std::vector<Concept> concepts;   // merged + filtered
  ConceptTree concept_tree;
  std::vector<Concept> validated;  // after round 1
  ConceptSupport support;
  std::optional<TaxNode> after_round2, after_round3, after_round4;
};

std::unique_ptr<Provider> make_provider(const BuildConfig& c);
std::unique_ptr<Embedder> make_embedder(const BuildConfig& c);

/// Runs the full pipeline (subject to ablation flags). When `partial_dir` is
/// set, every completed stage is dumped there as it finishes, so a failing
/// build leaves its intermediates behind.
BuildResult build_taxonomy(const Corpus& corpus, const BuildConfig& config,
                           Provider& provider, const Embedder& embedder,
                           const std::filesystem::path& partial_dir = {});

/// Taxonomy file: the root node object plus a top-level "build" block with
/// config digest, provider name, seed, and the stage digest chain.
std::string taxonomy_to_string(const BuildResult& result);
void write_taxonomy(const BuildResult& result, const std::filesystem::path& path);
TaxNode load_taxonomy(const std::filesystem::path& path);

std::string render_markdown(const TaxNode& root);
std::string render_dot(const TaxNode& root);

// CLI entry points; return process exit codes.
int cmd_build(const std::filesystem::path& corpus_path, const std::filesystem::path& config_path,
              const std::filesystem::path& out_path, const std::string& ablate,
              const std::filesystem::path& dump_dir);
int cmd_eval(const std::filesystem::path& pred_path, const std::filesystem::path& gold_path,
             const std::filesystem::path& corpus_path, const std::filesystem::path& report_path,
             double tau_sub);
int cmd_render(const std::filesystem::path& in_path, const std::string& format);
int cmd_synth(int depth, int branching, int per_leaf, uint64_t seed,
              const std::filesystem::path& out_dir);

}  // namespace taxo
