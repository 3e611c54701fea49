#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "caml/env.hpp"

namespace caml::harness {

struct PopulationSpec {
  int num_latent = 6;
  int variants_per_latent = 4;
  double variance_magnitude = 0.5;
  std::uint64_t seed = 1;
};

struct PolicySpec {
  std::vector<int> layout{2, 32, 32, 4};
  std::uint64_t init_seed = 7;
};

struct TrainSpec {
  double alpha = 3e-4;  // the library TrainConfig default is too hot for raw
  double gamma = 0.9;   // squared-distance returns; these are tuned for it
  int rollouts = 10;
};

struct StudySpec {
  int updates = 40;
  int checkpoint_every = 10;
  int k = 6;
  int m_samples = 100;
};

struct CamlSpec {
  int n = 24;
  int k = 6;
  int total_iterations = 100;
  int m_samples = 100;
};

struct ReptileSpec {
  int inner_steps = 3;
  double epsilon = 0.5;
  int total_iterations = 100;
};

struct PretrainSpec {
  int total_iterations = 100;
  int unmatched_support_index = 0;
};

struct EvalSpec {
  int num_updates = 5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string query_split = "unseen-latent";  // or "unseen-variant"
  int num_query_types = 3;
  std::uint64_t query_seed = 101;
};

/// Resolved experiment configuration. Every field has a default; the JSON
/// file may set any subset. Unknown keys are rejected so typos cannot
/// silently fall back to defaults.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string out_dir = "runs/out";
  std::string population_file;  // empty: <out_dir>/population.json
  PopulationSpec population;
  EnvConfig env;
  PolicySpec policy;
  TrainSpec train;
  StudySpec study;
  CamlSpec caml;
  ReptileSpec reptile;
  PretrainSpec pretrain;
  EvalSpec evaluate;

  std::filesystem::path resolved_population_file() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);

/// Full echo of the resolved configuration (defaults filled in).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field invariants (checkpoint cadence divides updates, seeds present,
/// split name known, ...). Throws std::invalid_argument.
void validate_config(const ExperimentConfig& cfg);

QuerySplit parse_query_split(const std::string& name);

}  // namespace caml::harness
