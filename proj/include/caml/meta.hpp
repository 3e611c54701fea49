#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caml/clustering.hpp"
#include "caml/divergence.hpp"
#include "caml/env.hpp"
#include "caml/policy.hpp"
#include "caml/rng.hpp"

namespace caml {

struct MetaConfig {
  int n = 24;                // saved policies per clustering round
  int k = 6;                 // medoid count
  int total_iterations = 100;
  TrainConfig train;         // inner update: alpha, gamma, rollouts (the shot count K), env
  DivergenceOptions divergence;
  std::vector<int> policy_layout{2, 32, 32, 4};
  std::uint64_t policy_init_seed = 0;  // shared fresh-policy seed

  int shots() const { return train.rollouts; }
};

void validate_meta_config(const MetaConfig& cfg);

/// Medoid policies with their representative trajectories and the clustering
/// they came from. `generation` counts clustering rounds.
struct MedoidPolicySet {
  std::vector<PolicyParams> medoid_policies;
  std::vector<Trajectory> medoid_trajectories;
  MedoidAssignment assignment;
  int generation = 0;
};

struct TrainEvent {
  int iteration = 0;         // 1-based
  std::string kind;          // "iteration" or "recluster"
  double mean_return = 0.0;  // batch mean episode return (iteration events)
  int generation = 0;        // current clustering generation
  int entity_id = -1;        // sampled entity (iteration events)
};
using EventSink = std::function<void(const TrainEvent&)>;

/// Cluster-adaptive meta-training. Phase 1: n iterations each adapt a fresh
/// shared-init policy to a sampled entity (K rollouts, one update) and save
/// the updated policy with one post-update trajectory; the saved batch is
/// clustered into k medoids via the pairwise divergence matrix. Phase 2:
/// iterations adapt a uniformly sampled medoid instead of the shared init;
/// every n saved policies the union of those n and the current medoids is
/// re-clustered.
MedoidPolicySet caml_train(std::span<const EntityType> population, const MetaConfig& cfg, Rng& rng,
                           const EventSink& sink = {});

struct BanditLog {
  struct Pull {
    int medoid_index = 0;
    double episode_return = 0.0;  // undiscounted sum of rewards
  };
  std::vector<Pull> pulls;
  int chosen_index = 0;  // max recorded return; ties take the lowest index
};

/// Spends exactly `shots` episodes on the query entity, allocated round-robin
/// over the medoids (remainder arms drawn uniformly without replacement), and
/// returns the parameters of the best-scoring medoid.
std::pair<PolicyParams, BanditLog> bandit_select(const MedoidPolicySet& medoids,
                                                 const EntityType& query_entity, int shots,
                                                 const EnvConfig& env, Rng& rng);

struct EvalCurve {
  std::vector<double> mean_returns;               // length num_updates + 1; entry 0 is pre-update
  std::vector<double> std_returns;                // sample std over the batch episodes
  std::vector<std::vector<double>> episode_returns;
  std::vector<std::vector<Vec2>> end_positions;   // episode-end particle positions
};

/// Few-shot fine-tuning curve: each entry logs a K-rollout batch under the
/// current parameters, then applies one update (except after the last entry).
EvalCurve evaluate(const PolicyParams& init, const EntityType& query_entity,
                   const TrainConfig& cfg, int num_updates, Rng& rng);

/// First-order meta-learning: several inner updates on a sampled entity, then
/// the initialization moves a fraction epsilon toward the adapted weights.
/// Requires inner_steps > 1.
PolicyParams reptile_train(std::span<const EntityType> population, const MetaConfig& cfg,
                           int inner_steps, double epsilon, Rng& rng, const EventSink& sink = {});

/// Joint pretraining: every episode of every batch samples a fresh entity.
PolicyParams joint_pretrain(std::span<const EntityType> population, const MetaConfig& cfg,
                            Rng& rng, const EventSink& sink = {});

/// Plain policy-gradient training on one fixed entity.
PolicyParams pretrain_single(const EntityType& entity, const MetaConfig& cfg, Rng& rng,
                             const EventSink& sink = {});

}  // namespace caml
