#include "caml/harness/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "caml/clustering.hpp"
#include "caml/divergence.hpp"
#include "caml/fmt.hpp"
#include "caml/harness/csv.hpp"
#include "caml/harness/manifest.hpp"
#include "caml/meta.hpp"
#include "caml/version.hpp"

namespace caml::harness {

namespace {

using nlohmann::json;

// Stream labels for deriving disjoint rng families from the master seed.
constexpr std::uint64_t kStreamStudyTrain = 0x5354; // per-entity study training
constexpr std::uint64_t kStreamStudyCheckpoint = 0x434b; // per-checkpoint divergence draw
constexpr std::uint64_t kStreamEvalCell = 0x4556; // per (learner, query, seed) cell

ExperimentConfig load_with_overrides(const CommandOptions& opts, bool seed_targets_population) {
  if (opts.config_path.empty()) throw std::invalid_argument("--config is required");
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.out) cfg.out_dir = *opts.out;
  if (opts.seed) {
    if (seed_targets_population)
      cfg.population.seed = *opts.seed;
    else
      cfg.master_seed = *opts.seed;
  }
  return cfg;
}

Population load_population_for(const ExperimentConfig& cfg) {
  return load_population(cfg.resolved_population_file());
}

json header_body(const std::string& command, const ExperimentConfig& cfg) {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["master_seed"] = cfg.master_seed;
  j["config"] = config_to_json(cfg);
  return j;
}

json policy_to_json(const PolicyParams& p) {
  return json{{"layout", p.layout}, {"weights", p.weights}};
}

PolicyParams policy_from_json(const json& j) {
  PolicyParams p;
  p.layout = j.at("layout").get<std::vector<int>>();
  p.weights = j.at("weights").get<std::vector<double>>();
  return p;
}

TrainConfig train_config_of(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.alpha = cfg.train.alpha;
  tc.gamma = cfg.train.gamma;
  tc.rollouts = cfg.train.rollouts;
  tc.env = cfg.env;
  return tc;
}

MetaConfig meta_config_of(const ExperimentConfig& cfg, int total_iterations, int m_samples) {
  MetaConfig mc;
  mc.n = cfg.caml.n;
  mc.k = cfg.caml.k;
  mc.total_iterations = total_iterations;
  mc.train = train_config_of(cfg);
  mc.divergence.m_samples = m_samples;
  mc.policy_layout = cfg.policy.layout;
  mc.policy_init_seed = cfg.policy.init_seed;
  return mc;
}

EventSink manifest_sink(ManifestWriter& manifest) {
  return [&manifest](const TrainEvent& ev) {
    if (ev.kind == "recluster") {
      manifest.event("recluster", {{"iteration", ev.iteration}, {"generation", ev.generation}});
    } else {
      manifest.event("iteration", {{"iteration", ev.iteration},
                                   {"mean_return", ev.mean_return},
                                   {"entity_id", ev.entity_id}});
    }
  };
}

std::string learner_of_checkpoint_path(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  const std::string prefix = "checkpoint_";
  if (stem.rfind(prefix, 0) == 0) return stem.substr(prefix.size());
  return {};
}

struct LoadedCheckpoint {
  std::string learner;
  std::vector<PolicyParams> medoids;                    // caml
  std::vector<std::pair<int, PolicyParams>> per_query;  // pretrain-matched
  PolicyParams policy;                                  // everyone else
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    const std::string learner = learner_of_checkpoint_path(path);
    std::string msg = "checkpoint not found";
    if (!learner.empty()) msg += " for learner '" + learner + "'";
    throw std::invalid_argument(msg + ": " + path.string());
  }
  json j;
  in >> j;
  LoadedCheckpoint ck;
  ck.learner = j.at("learner").get<std::string>();
  if (ck.learner == "caml") {
    for (const auto& jp : j.at("medoids")) ck.medoids.push_back(policy_from_json(jp));
    if (ck.medoids.empty())
      throw std::invalid_argument("caml checkpoint has no medoids: " + path.string());
  } else if (ck.learner == "pretrain-matched") {
    for (const auto& jp : j.at("policies"))
      ck.per_query.emplace_back(jp.at("query_id").get<int>(),
                                policy_from_json(jp.at("policy")));
  } else {
    ck.policy = policy_from_json(j.at("policy"));
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const json& body) {
  atomic_write_text(path, body.dump(2) + "\n");
}

}  // namespace

std::vector<EntityType> resolve_queries(const ExperimentConfig& cfg,
                                        const Population& population) {
  return make_queries(population.entities, cfg.evaluate.num_query_types,
                      parse_query_split(cfg.evaluate.query_split),
                      cfg.population.variance_magnitude, cfg.evaluate.query_seed);
}

void cmd_gen_population(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts, /*seed_targets_population=*/true);
  // Generate before touching the filesystem so validation failures write nothing.
  const Population pop =
      generate_population(cfg.population.num_latent, cfg.population.variants_per_latent,
                          cfg.population.variance_magnitude, cfg.population.seed);

  std::filesystem::create_directories(cfg.out_dir);
  const auto pop_path = cfg.resolved_population_file();
  if (pop_path.has_parent_path()) std::filesystem::create_directories(pop_path.parent_path());
  save_population(pop_path, pop);

  std::cout << "population: " << pop.entities.size() << " entity types ("
            << cfg.population.num_latent << " latent groups x "
            << cfg.population.variants_per_latent << " variants), seed " << cfg.population.seed
            << "\n";
  std::cout << "id\tgroup\tremap\t\toffsets\n";
  for (const auto& e : pop.entities) {
    std::cout << e.id << '\t' << e.latent_group << '\t' << '[' << e.remap[0] << ',' << e.remap[1]
              << ',' << e.remap[2] << ',' << e.remap[3] << ']' << "\t[";
    for (int a = 0; a < kNumActions; ++a)
      std::cout << (a ? "," : "") << format_double(e.offsets[a]);
    std::cout << "]\n";
  }

  ManifestWriter manifest(std::filesystem::path(cfg.out_dir) / "manifest_gen-population.jsonl");
  json header = header_body("gen-population", cfg);
  header["population_file"] = pop_path.generic_string();
  header["population_hash"] = hash_file(pop_path);
  manifest.header(std::move(header));
  manifest.output_file(pop_path);
  manifest.close();
}

void cmd_divergence_study(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts, false);
  const Population pop = load_population_for(cfg);
  const int n = static_cast<int>(pop.entities.size());
  std::filesystem::create_directories(cfg.out_dir);

  const TrainConfig tc = train_config_of(cfg);
  DivergenceOptions dopts;
  dopts.m_samples = cfg.study.m_samples;

  ManifestWriter manifest(std::filesystem::path(cfg.out_dir) / "manifest_divergence-study.jsonl");
  json header = header_body("divergence-study", cfg);
  header["population_file"] = cfg.resolved_population_file().generic_string();
  header["population_hash"] = hash_file(cfg.resolved_population_file());
  manifest.header(std::move(header));

  const PolicyParams theta0 = init_params(cfg.policy.init_seed, cfg.policy.layout);
  std::vector<PolicyParams> policies(n, theta0);
  std::vector<Rng> streams;
  streams.reserve(n);
  const std::uint64_t train_base = derive_seed(cfg.master_seed, kStreamStudyTrain);
  for (int i = 0; i < n; ++i)
    streams.emplace_back(derive_seed(train_base, static_cast<std::uint64_t>(i)));

  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = pop.entities[i].id;

  std::vector<std::filesystem::path> outputs;
  const int blocks = cfg.study.updates / cfg.study.checkpoint_every;
  for (int block = 1; block <= blocks; ++block) {
    std::vector<Trajectory> snapshots(n);
    // Entities train independently on their own streams; snapshot trajectories
    // are drawn from the same stream right after the block's last update.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int u = 0; u < cfg.study.checkpoint_every; ++u) {
        const auto batch =
            collect_batch(policies[i], pop.entities[i], tc.env, tc.rollouts, streams[i]);
        policies[i] = reinforce_update(policies[i], batch, tc);
      }
      snapshots[i] = collect_trajectory(policies[i], pop.entities[i], tc.env, streams[i]);
    }

    const int update = block * cfg.study.checkpoint_every;
    Rng cp_rng(derive_seed(derive_seed(cfg.master_seed, kStreamStudyCheckpoint),
                           static_cast<std::uint64_t>(update)));
    const DistanceMatrix d = pairwise_divergence(policies, snapshots, dopts, cp_rng);
    const MedoidAssignment assignment = k_medoids(d, cfg.study.k, cp_rng.next_u64());

    const auto dist_path =
        std::filesystem::path(cfg.out_dir) / ("distances_u" + std::to_string(update) + ".csv");
    const auto asg_path =
        std::filesystem::path(cfg.out_dir) / ("assignment_u" + std::to_string(update) + ".csv");
    write_distance_csv(dist_path, d, ids);
    write_assignment_csv(asg_path, assignment);
    validate_csv(asg_path, assignment_schema());
    outputs.push_back(dist_path);
    outputs.push_back(asg_path);
    manifest.event("checkpoint",
                   {{"update", update}, {"k", cfg.study.k}, {"cost", assignment.cost}});
    std::cout << "checkpoint u=" << update << ": wrote " << dist_path.filename().string()
              << ", " << asg_path.filename().string() << " (cost "
              << format_double(assignment.cost) << ")\n";
  }
  for (const auto& p : outputs) manifest.output_file(p);
  manifest.close();
}

void cmd_train(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts, false);
  const std::string& learner = opts.learner;
  const auto& names = learner_names();
  if (std::find(names.begin(), names.end(), learner) == names.end()) {
    std::string msg = "unknown learner '" + learner + "'; valid learners:";
    for (const auto& name : names) msg += " " + name;
    throw std::invalid_argument(msg);
  }
  const Population pop = load_population_for(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  ManifestWriter manifest(std::filesystem::path(cfg.out_dir) /
                          ("manifest_train_" + learner + ".jsonl"));
  json header = header_body("train", cfg);
  header["learner"] = learner;
  header["population_file"] = cfg.resolved_population_file().generic_string();
  header["population_hash"] = hash_file(cfg.resolved_population_file());
  manifest.header(std::move(header));

  Rng rng(cfg.master_seed);
  const EventSink sink = manifest_sink(manifest);
  const auto ckpt_path =
      std::filesystem::path(cfg.out_dir) / ("checkpoint_" + learner + ".json");

  json body;
  body["format_version"] = 1;
  body["learner"] = learner;
  if (learner == "caml") {
    const MetaConfig mc = meta_config_of(cfg, cfg.caml.total_iterations, cfg.caml.m_samples);
    const MedoidPolicySet set = caml_train(pop.entities, mc, rng, sink);
    body["generation"] = set.generation;
    auto& medoids = body["medoids"] = json::array();
    for (const auto& p : set.medoid_policies) medoids.push_back(policy_to_json(p));
  } else if (learner == "reptile") {
    const MetaConfig mc = meta_config_of(cfg, cfg.reptile.total_iterations, cfg.caml.m_samples);
    body["policy"] = policy_to_json(
        reptile_train(pop.entities, mc, cfg.reptile.inner_steps, cfg.reptile.epsilon, rng, sink));
  } else if (learner == "joint") {
    const MetaConfig mc = meta_config_of(cfg, cfg.pretrain.total_iterations, cfg.caml.m_samples);
    body["policy"] = policy_to_json(joint_pretrain(pop.entities, mc, rng, sink));
  } else if (learner == "pretrain-matched") {
    const MetaConfig mc = meta_config_of(cfg, cfg.pretrain.total_iterations, cfg.caml.m_samples);
    const auto queries = resolve_queries(cfg, pop);
    auto& policies = body["policies"] = json::array();
    for (const auto& q : queries) {
      const PolicyParams p = pretrain_single(q, mc, rng, sink);
      policies.push_back(json{{"query_id", q.id}, {"policy", policy_to_json(p)}});
    }
  } else if (learner == "pretrain-unmatched") {
    const MetaConfig mc = meta_config_of(cfg, cfg.pretrain.total_iterations, cfg.caml.m_samples);
    const int idx = cfg.pretrain.unmatched_support_index;
    if (idx >= static_cast<int>(pop.entities.size()))
      throw std::invalid_argument("pretrain.unmatched_support_index out of range");
    body["policy"] = policy_to_json(pretrain_single(pop.entities[idx], mc, rng, sink));
  } else {  // random: initialization only, no environment interaction
    body["policy"] = policy_to_json(init_params(cfg.policy.init_seed, cfg.policy.layout));
  }
  write_checkpoint(ckpt_path, body);
  std::cout << "wrote " << ckpt_path.string() << "\n";
  manifest.output_file(ckpt_path);
  manifest.close();
}

void cmd_evaluate(const CommandOptions& opts) {
  const ExperimentConfig cfg = load_with_overrides(opts, false);
  if (opts.checkpoints.empty())
    throw std::invalid_argument("evaluate: at least one --checkpoint is required");
  const Population pop = load_population_for(cfg);
  const auto queries = resolve_queries(cfg, pop);
  std::filesystem::create_directories(cfg.out_dir);

  std::vector<LoadedCheckpoint> checkpoints;
  for (const auto& path : opts.checkpoints) checkpoints.push_back(load_checkpoint(path));

  const TrainConfig tc = train_config_of(cfg);
  const int num_updates = cfg.evaluate.num_updates;
  const auto& seeds = cfg.evaluate.seeds;

  struct Cell {
    EvalCurve curve;
    BanditLog bandit;
    bool has_bandit = false;
  };
  const int n_cells =
      static_cast<int>(checkpoints.size() * queries.size() * seeds.size());
  std::vector<Cell> cells(n_cells);
  const std::uint64_t eval_base = derive_seed(cfg.master_seed, kStreamEvalCell);

  // Each (checkpoint, query, seed) cell runs on its own stream; rows are
  // emitted afterwards in deterministic order.
#pragma omp parallel for schedule(static)
  for (int cell_idx = 0; cell_idx < n_cells; ++cell_idx) {
    const int per_ckpt = static_cast<int>(queries.size() * seeds.size());
    const int c = cell_idx / per_ckpt;
    const int q = (cell_idx % per_ckpt) / static_cast<int>(seeds.size());
    const int s = cell_idx % static_cast<int>(seeds.size());
    const LoadedCheckpoint& ck = checkpoints[c];
    const EntityType& query = queries[q];

    std::uint64_t cell_seed = eval_base;
    for (char ch : ck.learner) cell_seed = derive_seed(cell_seed, static_cast<std::uint64_t>(ch));
    cell_seed = derive_seed(cell_seed, static_cast<std::uint64_t>(query.id));
    cell_seed = derive_seed(cell_seed, seeds[s]);
    Rng rng(cell_seed);

    Cell& cell = cells[cell_idx];
    PolicyParams init;
    if (ck.learner == "caml") {
      MedoidPolicySet set;
      set.medoid_policies = ck.medoids;
      auto [params, log] = bandit_select(set, query, tc.rollouts, tc.env, rng);
      init = std::move(params);
      cell.bandit = std::move(log);
      cell.has_bandit = true;
    } else if (ck.learner == "pretrain-matched") {
      const auto it = std::find_if(ck.per_query.begin(), ck.per_query.end(),
                                   [&](const auto& pair) { return pair.first == query.id; });
      if (it == ck.per_query.end())
        throw std::invalid_argument("pretrain-matched checkpoint has no policy for query id " +
                                    std::to_string(query.id));
      init = it->second;
    } else {
      init = ck.policy;
    }
    cell.curve = evaluate(init, query, tc, num_updates, rng);
  }

  std::string curves = "update,mean_return,std_return,learner,query_id,seed\n";
  std::string endpoints = "learner,query_id,seed,update,episode,end_x,end_y\n";
  std::string bandit = "learner,query_id,seed,pull,medoid_index,episode_return,chosen\n";
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const std::string& learner = checkpoints[c].learner;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const Cell& cell =
            cells[(c * queries.size() + q) * seeds.size() + s];
        const std::string tail =
            learner + ',' + std::to_string(queries[q].id) + ',' + std::to_string(seeds[s]);
        for (std::size_t u = 0; u < cell.curve.mean_returns.size(); ++u) {
          curves += std::to_string(u) + ',' + format_double(cell.curve.mean_returns[u]) + ',' +
                    format_double(cell.curve.std_returns[u]) + ',' + tail + '\n';
          for (std::size_t e = 0; e < cell.curve.end_positions[u].size(); ++e) {
            const Vec2 pos = cell.curve.end_positions[u][e];
            endpoints += tail + ',' + std::to_string(u) + ',' + std::to_string(e) + ',' +
                         format_double(pos.x) + ',' + format_double(pos.y) + '\n';
          }
        }
        if (cell.has_bandit) {
          for (std::size_t p = 0; p < cell.bandit.pulls.size(); ++p) {
            const auto& pull = cell.bandit.pulls[p];
            bandit += tail + ',' + std::to_string(p) + ',' + std::to_string(pull.medoid_index) +
                      ',' + format_double(pull.episode_return) + ',' +
                      (pull.medoid_index == cell.bandit.chosen_index ? "1" : "0") + '\n';
          }
        }
      }
    }
  }

  const auto out_dir = std::filesystem::path(cfg.out_dir);
  const auto curves_path = out_dir / "curves.csv";
  const auto endpoints_path = out_dir / "endpoints.csv";
  const auto bandit_path = out_dir / "bandit.csv";
  atomic_write_text(curves_path, curves);
  atomic_write_text(endpoints_path, endpoints);
  atomic_write_text(bandit_path, bandit);
  validate_csv(curves_path, curves_schema());
  validate_csv(endpoints_path, endpoints_schema());
  validate_csv(bandit_path, bandit_schema());

  ManifestWriter manifest(out_dir / "manifest_evaluate.jsonl");
  json header = header_body("evaluate", cfg);
  header["population_file"] = cfg.resolved_population_file().generic_string();
  header["population_hash"] = hash_file(cfg.resolved_population_file());
  auto& ckpts = header["checkpoints"] = json::array();
  for (const auto& path : opts.checkpoints) ckpts.push_back(path);
  manifest.header(std::move(header));
  manifest.output_file(curves_path);
  manifest.output_file(endpoints_path);
  manifest.output_file(bandit_path);
  manifest.close();

  std::cout << "evaluated " << checkpoints.size() << " checkpoint(s) x " << queries.size()
            << " query type(s) x " << seeds.size() << " seed(s); wrote "
            << curves_path.string() << "\n";
}

}  // namespace caml::harness
