#include <CLI11.hpp>

#include "calving/cli/commands.hpp"
#include "calving/cli/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"multi-stream calving-sign detection pipeline"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::string corpus_dir;
  std::string models_dir;
  std::string out_dir;
  int jobs = 1;

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  synth->add_option("--config", config_path, "run configuration (JSON)");
  synth->add_option("--out", out_dir, "corpus output directory");

  auto* train = app.add_subcommand("train", "train per-fold stream and fusion models");
  train->add_option("--config", config_path, "run configuration (JSON)");
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("--out", out_dir, "model output directory");
  train->add_option("--jobs", jobs, "parallel folds (default 1; results are identical)");

  auto* evaluate = app.add_subcommand("evaluate", "score held-out windows and emit reports");
  evaluate->add_option("--config", config_path, "run configuration (JSON)");
  evaluate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  evaluate->add_option("--models", models_dir, "trained model directory")->required();
  evaluate->add_option("--out", out_dir, "report output directory");

  auto* verify = app.add_subcommand("verify", "run the fast invariant suite");
  bool inject_fault = false;
  verify->add_flag("--inject-gradient-fault", inject_fault,
                   "test hook: corrupt one analytic gradient (must make verify fail)");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) return calving::cli::cmd_synth(config_path, out_dir);
  if (train->parsed()) return calving::cli::cmd_train(config_path, corpus_dir, out_dir, jobs);
  if (evaluate->parsed())
    return calving::cli::cmd_evaluate(config_path, corpus_dir, models_dir, out_dir);
  return calving::cli::cmd_verify({inject_fault});
}
