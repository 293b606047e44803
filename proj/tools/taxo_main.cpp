#include <string>

#include <CLI11.hpp>

#include "taxo/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"taxo - hierarchical taxonomy construction and evaluation"};
  app.require_subcommand(1);

  // build
  std::string corpus_path, config_path, out_path, ablate, dump_dir;
  CLI::App* build = app.add_subcommand("build", "run the full pipeline on a corpus");
  build->add_option("--corpus", corpus_path, "corpus file (one JSON record per line)")
      ->required();
  build->add_option("--config", config_path, "build config file")->required();
  build->add_option("--out", out_path, "output taxonomy file")->required();
  build->add_option("--ablate", ablate, "disable one component")
      ->check(CLI::IsMember({"bu_only", "no_bi", "no_peer", "no_refine"}));
  build->add_option("--dump-stages", dump_dir, "directory for per-stage artifacts");

  // eval
  std::string pred_path, gold_path, eval_corpus, report_path;
  double tau_sub = 0.85;
  CLI::App* eval = app.add_subcommand("eval", "score a taxonomy against a gold tree");
  eval->add_option("--pred", pred_path, "predicted taxonomy file")->required();
  eval->add_option("--gold", gold_path, "gold taxonomy file")->required();
  eval->add_option("--corpus", eval_corpus, "corpus file")->required();
  eval->add_option("--report", report_path, "report output file");
  eval->add_option("--tau-sub", tau_sub, "cosine for zero-cost title substitution");

  // render
  std::string in_path, format = "md";
  CLI::App* render = app.add_subcommand("render", "print a taxonomy as markdown or dot");
  render->add_option("--in", in_path, "taxonomy file")->required();
  render->add_option("--format", format, "md or dot");

  // synth
  int depth = 2, branching = 2, per_leaf = 3;
  uint64_t seed = 0;
  std::string out_dir;
  CLI::App* synth = app.add_subcommand("synth", "generate a corpus with a planted hierarchy");
  synth->add_option("--depth", depth, "levels below the root")->required();
  synth->add_option("--branching", branching, "children per internal node")->required();
  synth->add_option("--per-leaf", per_leaf, "papers per leaf")->required();
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (build->parsed()) return taxo::cmd_build(corpus_path, config_path, out_path, ablate, dump_dir);
  if (eval->parsed()) return taxo::cmd_eval(pred_path, gold_path, eval_corpus, report_path, tau_sub);
  if (render->parsed()) return taxo::cmd_render(in_path, format);
  if (synth->parsed()) return taxo::cmd_synth(depth, branching, per_leaf, seed, out_dir);
  return 1;
}
