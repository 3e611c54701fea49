#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caml/harness/config.hpp"

namespace caml::harness {

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides master_seed (population seed for gen-population)
  std::optional<std::string> out;     // overrides out_dir
  std::string learner;                // train only
  std::vector<std::string> checkpoints;  // evaluate only
};

inline const std::vector<std::string>& learner_names() {
  static const std::vector<std::string> names{"caml",            "reptile",
                                              "joint",           "pretrain-matched",
                                              "pretrain-unmatched", "random"};
  return names;
}

/// Query entity types exactly as the train and evaluate commands resolve them.
std::vector<EntityType> resolve_queries(const ExperimentConfig& cfg,
                                        const Population& population);

void cmd_gen_population(const CommandOptions& opts);
void cmd_divergence_study(const CommandOptions& opts);
void cmd_train(const CommandOptions& opts);
void cmd_evaluate(const CommandOptions& opts);

}  // namespace caml::harness
