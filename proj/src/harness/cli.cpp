#include "caml/harness/cli.hpp"

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "caml/harness/commands.hpp"
#include "caml/version.hpp"

namespace caml::harness {

namespace {

void add_common(CLI::App* cmd, CommandOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
  cmd->add_option("--seed", opts.seed,
                  "Seed override (master seed; the population seed for gen-population)");
  cmd->add_option("--out", opts.out, "Output directory override");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Cluster-adaptive meta-learning for personalized 2D navigation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommandOptions gen_opts, study_opts, train_opts, eval_opts;

  auto* gen = app.add_subcommand("gen-population", "Generate and save an entity-type population");
  add_common(gen, gen_opts);

  auto* study = app.add_subcommand(
      "divergence-study", "Train one policy per entity and checkpoint pairwise divergences");
  add_common(study, study_opts);

  auto* train = app.add_subcommand("train", "Train one learner and write its checkpoint");
  add_common(train, train_opts);
  train->add_option("--learner", train_opts.learner, "caml | reptile | joint | pretrain-matched | pretrain-unmatched | random")
      ->required();

  auto* eval = app.add_subcommand("evaluate", "Few-shot evaluation of trained checkpoints");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_opts.checkpoints, "Checkpoint file (repeatable)")
      ->required();

  // CLI11 wants argv in reverse order when parsing a vector.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) cmd_gen_population(gen_opts);
    if (study->parsed()) cmd_divergence_study(study_opts);
    if (train->parsed()) cmd_train(train_opts);
    if (eval->parsed()) cmd_evaluate(eval_opts);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace caml::harness
