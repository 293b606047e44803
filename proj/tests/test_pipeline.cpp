#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "taxo/pipeline.hpp"
#include "taxo/util.hpp"

using namespace taxo;
using taxo::testing::TempDir;

namespace {

BuildConfig base_config(uint64_t seed, const std::string& root_title) {
  BuildConfig c;
  c.seed = seed;
  c.cluster.seed = seed;
  c.root_title = root_title;
  return c;
}

struct BuiltSynth {
  Corpus corpus;
  GoldTaxonomy gold;
  BuildConfig config;
  BuildResult result;

  BuiltSynth(uint64_t seed, BuildConfig cfg_template = {}) {
    auto [c, g] = synth_corpus({2, 2, 5, seed});
    corpus = std::move(c);
    gold = std::move(g);
    config = std::move(cfg_template);
    config.seed = seed;
    config.cluster.seed = seed;
    config.root_title = gold.root.title;
    MockProvider provider(config.provider.fixtures_dir);
    const HashEmbedder embedder(config.embedder.dim);
    result = build_taxonomy(corpus, config, provider, embedder);
  }
};

std::vector<std::string> stage_names(const StageTrace& t) {
  std::vector<std::string> out;
  for (const auto& s : t.stages) out.push_back(s.stage);
  return out;
}

}  // namespace

TEST_CASE("config: defaults validate, violations are rejected") {
  BuildConfig c;
  CHECK_NOTHROW(validate_config(c));
  CHECK(!config_digest(c).empty());

  BuildConfig bad = c;
  bad.quality.score_threshold = 11;
  CHECK_THROWS_AS(validate_config(bad), Error);
  bad = c;
  bad.provider.kind = "both";
  CHECK_THROWS_AS(validate_config(bad), Error);
  bad = c;
  bad.embedder.reduce_dim = bad.embedder.dim;
  CHECK_THROWS_AS(validate_config(bad), Error);
  bad = c;
  bad.fusion.tau_conc = 0.0;
  CHECK_THROWS_AS(validate_config(bad), Error);
}

TEST_CASE("config: file round trip preserves the digest") {
  TempDir dir("cfg");
  BuildConfig c = base_config(9, "some title");
  c.fusion.tau_align = 0.4;
  c.provider.parallelism = 2;
  write_file_atomic(dir / "c.json", config_to_json(c).dump(2));
  const BuildConfig loaded = load_config(dir / "c.json");
  CHECK(config_digest(loaded) == config_digest(c));
  CHECK(loaded.fusion.tau_align == 0.4);
}

TEST_CASE("build: stage digest chain links every stage") {
  const BuiltSynth built(7);
  const StageTrace& t = built.result.trace;
  REQUIRE(t.stages.size() >= 7);
  for (std::size_t i = 1; i < t.stages.size(); ++i)
    CHECK(t.stages[i].input_digest == t.stages[i - 1].output_digest);
  CHECK(stage_names(t) == std::vector<std::string>{"embed", "reduce", "cluster", "concepts",
                                                   "round1", "round2", "round3", "round4",
                                                   "quality"});
}

TEST_CASE("build: two runs produce identical bytes and trace digests") {
  const BuiltSynth a(7);
  const BuiltSynth b(7);
  CHECK(taxonomy_to_string(a.result) == taxonomy_to_string(b.result));
  REQUIRE(a.result.trace.stages.size() == b.result.trace.stages.size());
  for (std::size_t i = 0; i < a.result.trace.stages.size(); ++i)
    CHECK(a.result.trace.stages[i].output_digest == b.result.trace.stages[i].output_digest);
}

TEST_CASE("build: fusion invariants hold on the synth corpus") {
  const BuiltSynth built(7);
  const BuildResult& r = built.result;

  // Round 1 thresholds, from the returned support table.
  for (const Concept& c : r.validated) {
    CHECK(r.support.at(c.surface).freq >= built.config.fusion.min_support);
    CHECK(r.support.at(c.surface).concentration >= built.config.fusion.tau_conc);
  }
  // Rounds 2/3 preserve structure; round 4 conserves papers.
  REQUIRE(r.after_round2.has_value());
  REQUIRE(r.after_round3.has_value());
  REQUIRE(r.after_round4.has_value());
  CHECK(node_count(*r.after_round3) == node_count(*r.after_round2));
  CHECK(subtree_paper_ids(*r.after_round3) == subtree_paper_ids(*r.after_round2));
  CHECK(subtree_paper_ids(*r.after_round4) == subtree_paper_ids(*r.after_round3));
  CHECK(subtree_paper_ids(r.taxonomy.root) == built.corpus.sorted_ids());

  validate_tree(r.taxonomy.root,
                {built.config.quality.depth_max, built.config.quality.branch_max});
}

TEST_CASE("build: ablation flags remove exactly their stage") {
  const std::vector<std::string> full = {"embed",  "reduce", "cluster", "concepts", "round1",
                                         "round2", "round3", "round4",  "quality"};
  auto run_with = [&](const std::string& which) {
    BuildConfig cfg;
    if (which == "bu_only") cfg.ablation.bu_only = true;
    if (which == "no_bi") cfg.ablation.no_bi = true;
    if (which == "no_peer") cfg.ablation.no_peer = true;
    if (which == "no_refine") cfg.ablation.no_refine = true;
    const BuiltSynth built(7, cfg);
    return stage_names(built.result.trace);
  };
  {
    auto expect = full;
    expect.erase(std::find(expect.begin(), expect.end(), "round3"));
    CHECK(run_with("no_bi") == expect);
  }
  {
    auto expect = full;
    expect.erase(std::find(expect.begin(), expect.end(), "round4"));
    CHECK(run_with("no_peer") == expect);
  }
  {
    auto expect = full;
    expect.erase(std::find(expect.begin(), expect.end(), "quality"));
    CHECK(run_with("no_refine") == expect);
  }
  CHECK(run_with("bu_only") ==
        std::vector<std::string>{"embed", "reduce", "cluster", "label", "quality"});
}

TEST_CASE("build: audit log replays as fixtures and reproduces the output") {
  TempDir dir("replay");
  auto [corpus, gold] = synth_corpus({2, 2, 4, 3});
  BuildConfig config = base_config(3, gold.root.title);

  std::string first;
  {
    MockProvider provider;
    AuditLog audit(dir / "audit.jsonl");
    provider.set_audit(&audit);
    const HashEmbedder embedder(config.embedder.dim);
    first = taxonomy_to_string(build_taxonomy(corpus, config, provider, embedder));
  }
  fixtures_from_audit(dir / "audit.jsonl", dir / "fx");
  {
    MockProvider provider(dir / "fx");
    const HashEmbedder embedder(config.embedder.dim);
    const std::string replayed =
        taxonomy_to_string(build_taxonomy(corpus, config, provider, embedder));
    CHECK(replayed == first);
  }
}

TEST_CASE("build: a failing stage leaves completed intermediates behind") {
  TempDir dir("partial");
  const Corpus tiny({{"p1", "only paper", "text", "en"}}, "");
  BuildConfig config = base_config(1, "root");
  MockProvider provider;
  const HashEmbedder embedder(config.embedder.dim);
  CHECK_THROWS_AS(build_taxonomy(tiny, config, provider, embedder, dir / "part"), Error);
  // embed completed; reduce failed (needs >= 2 papers).
  CHECK(std::filesystem::exists(dir / "part" / "00-embed.txt"));
  CHECK_FALSE(std::filesystem::exists(dir / "part" / "01-reduce.txt"));
}

TEST_CASE("taxonomy file: build block survives a round trip as plain tree") {
  TempDir dir("file");
  const BuiltSynth built(5);
  write_taxonomy(built.result, dir / "t.json");
  const TaxNode loaded = load_taxonomy(dir / "t.json");
  CHECK(node_count(loaded) == node_count(built.result.taxonomy.root));
  CHECK(tree_to_string(loaded) == tree_to_string(built.result.taxonomy.root));
}

TEST_CASE("cli commands: exit codes for bad inputs, dump-stages on success") {
  TempDir dir("cli");
  // synth rejects invalid bounds.
  CHECK(cmd_synth(0, 2, 1, 0, dir / "s") != 0);
  CHECK(cmd_synth(2, 2, 2, 1, dir / "s") == 0);

  // A usable config.
  BuildConfig cfg = base_config(1, "");
  write_file_atomic(dir / "config.json", config_to_json(cfg).dump(2));

  CHECK(cmd_build(dir / "s" / "corpus.jsonl", dir / "config.json", dir / "tax.json", "",
                  dir / "stages") == 0);
  CHECK(std::filesystem::exists(dir / "stages" / "02-cluster.txt"));
  CHECK_FALSE(std::filesystem::exists(dir / "tax.json.partial"));

  // eval: missing gold file fails; the real one succeeds.
  CHECK(cmd_eval(dir / "tax.json", dir / "nope.json", dir / "s" / "corpus.jsonl",
                 dir / "report.json", 0.85) != 0);
  CHECK(cmd_eval(dir / "tax.json", dir / "s" / "gold.json", dir / "s" / "corpus.jsonl",
                 dir / "report.json", 0.85) == 0);
  CHECK(std::filesystem::exists(dir / "report.json"));

  // eval of the gold tree against itself scores 100 everywhere.
  CHECK(cmd_eval(dir / "s" / "gold.json", dir / "s" / "gold.json",
                 dir / "s" / "corpus.jsonl", dir / "self.json", 0.85) == 0);
  const nlohmann::json self = nlohmann::json::parse(read_file(dir / "self.json"));
  for (const char* key : {"nmi", "purity", "ceds", "hsr"})
    CHECK(self.at(key).get<double>() == doctest::Approx(100.0));

  // render: unknown format fails, known ones succeed.
  CHECK(cmd_render(dir / "tax.json", "svg") != 0);
  CHECK(cmd_render(dir / "tax.json", "dot") == 0);

  // A failing build preserves .partial/.
  write_file_atomic(dir / "one.jsonl", R"({"id":"p1","title":"only"})" "\n");
  CHECK(cmd_build(dir / "one.jsonl", dir / "config.json", dir / "bad.json", "", "") != 0);
  CHECK(std::filesystem::exists(dir / "bad.json.partial" / "00-embed.txt"));
}

TEST_CASE("render: markdown bullets mirror depth; dot is well-formed") {
  TaxNode root;
  root.title = "root";
  TaxNode a;
  a.title = "alpha";
  a.paper_ids = {"p1"};
  TaxNode b;
  b.title = "beta";
  root.children = {a, b};

  const std::string md = render_markdown(root);
  CHECK(md == "- root (papers: 1)\n  - alpha (papers: 1)\n  - beta (papers: 0)\n");
  CHECK(render_markdown(root) == md);

  const std::string dot = render_dot(root);
  CHECK(dot.find("digraph") == 0);
  std::size_t labels = 0, pos = 0;
  while ((pos = dot.find("label=", pos)) != std::string::npos) {
    ++labels;
    pos += 6;
  }
  CHECK(labels == node_count(root));  // one labeled statement per node
  std::size_t edges = 0;
  pos = 0;
  while ((pos = dot.find(" -> ", pos)) != std::string::npos) {
    ++edges;
    pos += 4;
  }
  CHECK(edges == node_count(root) - 1);
}
