#include "caml/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace caml {

namespace {

double batch_mean_return(std::span<const Trajectory> batch) {
  double sum = 0.0;
  for (const Trajectory& t : batch) sum += episode_return(t);
  return sum / static_cast<double>(batch.size());
}

void emit(const EventSink& sink, TrainEvent ev) {
  if (sink) sink(ev);
}

struct SavedPolicy {
  PolicyParams params;
  Trajectory post_update;
};

// One adaptation step: K rollouts, one update, one post-update trajectory.
SavedPolicy adapt_once(const PolicyParams& start, const EntityType& entity, const MetaConfig& cfg,
                       Rng& rng, double* mean_return) {
  const auto batch = collect_batch(start, entity, cfg.train.env, cfg.train.rollouts, rng);
  if (mean_return) *mean_return = batch_mean_return(batch);
  SavedPolicy saved;
  saved.params = reinforce_update(start, batch, cfg.train);
  saved.post_update = collect_trajectory(saved.params, entity, cfg.train.env, rng);
  return saved;
}

MedoidPolicySet cluster_pool(const std::vector<SavedPolicy>& pool, const MetaConfig& cfg,
                             int generation, Rng& rng) {
  std::vector<PolicyParams> policies;
  std::vector<Trajectory> trajectories;
  policies.reserve(pool.size());
  trajectories.reserve(pool.size());
  for (const SavedPolicy& s : pool) {
    policies.push_back(s.params);
    trajectories.push_back(s.post_update);
  }
  const DistanceMatrix d = pairwise_divergence(policies, trajectories, cfg.divergence, rng);
  MedoidPolicySet set;
  set.assignment = k_medoids(d, cfg.k, rng.next_u64());
  set.generation = generation;
  for (int idx : set.assignment.medoid_indices) {
    set.medoid_policies.push_back(pool[idx].params);
    set.medoid_trajectories.push_back(pool[idx].post_update);
  }
  return set;
}

}  // namespace

void validate_meta_config(const MetaConfig& cfg) {
  if (cfg.k < 1 || cfg.n < cfg.k) throw std::invalid_argument("MetaConfig: need n >= k >= 1");
  if (cfg.total_iterations < cfg.n)
    throw std::invalid_argument("MetaConfig: need total_iterations >= n");
  if (cfg.train.rollouts < 1) throw std::invalid_argument("MetaConfig: need rollouts >= 1");
}

MedoidPolicySet caml_train(std::span<const EntityType> population, const MetaConfig& cfg, Rng& rng,
                           const EventSink& sink) {
  validate_meta_config(cfg);
  if (population.empty()) throw std::invalid_argument("caml_train: empty population");

  const PolicyParams theta0 = init_params(cfg.policy_init_seed, cfg.policy_layout);
  const int pop_size = static_cast<int>(population.size());

  // Phase 1: adapt the shared initialization once per iteration.
  std::vector<SavedPolicy> saved;
  saved.reserve(cfg.n);
  for (int iter = 1; iter <= cfg.n; ++iter) {
    const EntityType& entity = population[rng.uniform_int(pop_size)];
    double mean = 0.0;
    saved.push_back(adapt_once(theta0, entity, cfg, rng, &mean));
    emit(sink, {iter, "iteration", mean, 0, entity.id});
  }
  MedoidPolicySet medoids = cluster_pool(saved, cfg, 1, rng);
  emit(sink, {cfg.n, "recluster", 0.0, medoids.generation, -1});

  // Phase 2: adapt a sampled medoid; recluster every n saved policies over the
  // union of the recent batch and the current medoids.
  saved.clear();
  for (int iter = cfg.n + 1; iter <= cfg.total_iterations; ++iter) {
    const EntityType& entity = population[rng.uniform_int(pop_size)];
    const int medoid_idx = rng.uniform_int(static_cast<int>(medoids.medoid_policies.size()));
    double mean = 0.0;
    saved.push_back(adapt_once(medoids.medoid_policies[medoid_idx], entity, cfg, rng, &mean));
    emit(sink, {iter, "iteration", mean, medoids.generation, entity.id});

    if (static_cast<int>(saved.size()) == cfg.n) {
      std::vector<SavedPolicy> pool = saved;
      for (std::size_t m = 0; m < medoids.medoid_policies.size(); ++m)
        pool.push_back({medoids.medoid_policies[m], medoids.medoid_trajectories[m]});
      medoids = cluster_pool(pool, cfg, medoids.generation + 1, rng);
      emit(sink, {iter, "recluster", 0.0, medoids.generation, -1});
      saved.clear();
    }
  }
  return medoids;
}

std::pair<PolicyParams, BanditLog> bandit_select(const MedoidPolicySet& medoids,
                                                 const EntityType& query_entity, int shots,
                                                 const EnvConfig& env, Rng& rng) {
  const int k = static_cast<int>(medoids.medoid_policies.size());
  if (k < 1) throw std::invalid_argument("bandit_select: no medoid policies");
  if (shots < 1) throw std::invalid_argument("bandit_select: shots must be >= 1");

  std::vector<int> schedule;
  schedule.reserve(shots);
  for (int r = 0; r < shots / k; ++r)
    for (int arm = 0; arm < k; ++arm) schedule.push_back(arm);
  const int remainder = shots % k;
  if (remainder > 0) {
    std::vector<int> arms(k);
    std::iota(arms.begin(), arms.end(), 0);
    for (int i = 0; i < remainder; ++i) {
      const int j = i + rng.uniform_int(k - i);
      std::swap(arms[i], arms[j]);
      schedule.push_back(arms[i]);
    }
  }

  BanditLog log;
  for (int arm : schedule) {
    const Trajectory traj =
        collect_trajectory(medoids.medoid_policies[arm], query_entity, env, rng);
    log.pulls.push_back({arm, episode_return(traj)});
  }
  int best_arm = log.pulls[0].medoid_index;
  double best_return = log.pulls[0].episode_return;
  for (const auto& pull : log.pulls) {
    if (pull.episode_return > best_return ||
        (pull.episode_return == best_return && pull.medoid_index < best_arm)) {
      best_return = pull.episode_return;
      best_arm = pull.medoid_index;
    }
  }
  log.chosen_index = best_arm;
  return {medoids.medoid_policies[best_arm], log};
}

EvalCurve evaluate(const PolicyParams& init, const EntityType& query_entity,
                   const TrainConfig& cfg, int num_updates, Rng& rng) {
  if (num_updates < 0) throw std::invalid_argument("evaluate: num_updates must be >= 0");
  EvalCurve curve;
  PolicyParams params = init;
  for (int update = 0; update <= num_updates; ++update) {
    const auto batch = collect_batch(params, query_entity, cfg.env, cfg.rollouts, rng);
    std::vector<double> returns;
    std::vector<Vec2> ends;
    returns.reserve(batch.size());
    ends.reserve(batch.size());
    for (const Trajectory& t : batch) {
      returns.push_back(episode_return(t));
      ends.push_back(t.states.back());
    }
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) /
                        static_cast<double>(returns.size());
    double var = 0.0;
    if (returns.size() > 1) {
      for (double r : returns) var += (r - mean) * (r - mean);
      var /= static_cast<double>(returns.size() - 1);
    }
    curve.mean_returns.push_back(mean);
    curve.std_returns.push_back(std::sqrt(var));
    curve.episode_returns.push_back(std::move(returns));
    curve.end_positions.push_back(std::move(ends));
    if (update < num_updates) params = reinforce_update(params, batch, cfg);
  }
  return curve;
}

PolicyParams reptile_train(std::span<const EntityType> population, const MetaConfig& cfg,
                           int inner_steps, double epsilon, Rng& rng, const EventSink& sink) {
  if (population.empty()) throw std::invalid_argument("reptile_train: empty population");
  if (inner_steps <= 1) throw std::invalid_argument("reptile_train: inner_steps must be > 1");
  if (cfg.total_iterations < 1)
    throw std::invalid_argument("reptile_train: total_iterations must be >= 1");

  PolicyParams theta = init_params(cfg.policy_init_seed, cfg.policy_layout);
  const int pop_size = static_cast<int>(population.size());
  for (int iter = 1; iter <= cfg.total_iterations; ++iter) {
    const EntityType& entity = population[rng.uniform_int(pop_size)];
    PolicyParams adapted = theta;
    double mean = 0.0;
    for (int s = 0; s < inner_steps; ++s) {
      const auto batch = collect_batch(adapted, entity, cfg.train.env, cfg.train.rollouts, rng);
      mean = batch_mean_return(batch);
      adapted = reinforce_update(adapted, batch, cfg.train);
    }
    for (std::size_t i = 0; i < theta.weights.size(); ++i)
      theta.weights[i] += epsilon * (adapted.weights[i] - theta.weights[i]);
    emit(sink, {iter, "iteration", mean, 0, entity.id});
  }
  return theta;
}

PolicyParams joint_pretrain(std::span<const EntityType> population, const MetaConfig& cfg,
                            Rng& rng, const EventSink& sink) {
  if (population.empty()) throw std::invalid_argument("joint_pretrain: empty population");
  PolicyParams theta = init_params(cfg.policy_init_seed, cfg.policy_layout);
  const int pop_size = static_cast<int>(population.size());
  for (int iter = 1; iter <= cfg.total_iterations; ++iter) {
    // Entity per episode, then index-keyed streams so episodes can run in parallel.
    std::vector<int> entity_idx(cfg.train.rollouts);
    for (int& idx : entity_idx) idx = rng.uniform_int(pop_size);
    const std::uint64_t base = rng.next_u64();
    std::vector<Trajectory> batch(cfg.train.rollouts);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < cfg.train.rollouts; ++r) {
      Rng stream(derive_seed(base, static_cast<std::uint64_t>(r)));
      batch[r] = collect_trajectory(theta, population[entity_idx[r]], cfg.train.env, stream);
    }
    emit(sink, {iter, "iteration", batch_mean_return(batch), 0, -1});
    theta = reinforce_update(theta, batch, cfg.train);
  }
  return theta;
}

PolicyParams pretrain_single(const EntityType& entity, const MetaConfig& cfg, Rng& rng,
                             const EventSink& sink) {
  PolicyParams theta = init_params(cfg.policy_init_seed, cfg.policy_layout);
  for (int iter = 1; iter <= cfg.total_iterations; ++iter) {
    const auto batch = collect_batch(theta, entity, cfg.train.env, cfg.train.rollouts, rng);
    emit(sink, {iter, "iteration", batch_mean_return(batch), 0, entity.id});
    theta = reinforce_update(theta, batch, cfg.train);
  }
  return theta;
}

}  // namespace caml
