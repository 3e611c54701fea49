#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "caml/env.hpp"
#include "caml/rng.hpp"
#include "caml/vec2.hpp"

namespace caml {

/// Feed-forward softmax policy over the four actions. The layout lists layer
/// widths from input (2, state coordinates) to output (4, logits); hidden
/// activations are tanh. Weights live in one flat buffer, per layer: the
/// row-major (out x in) matrix followed by the bias vector.
struct PolicyParams {
  std::vector<int> layout{2, 32, 32, 4};
  std::vector<double> weights;
};

std::size_t param_count(std::span<const int> layout);

/// Seeded scaled-uniform initialization (weights from U(-1/sqrt(fan_in),
/// +1/sqrt(fan_in)), biases zero).
PolicyParams init_params(std::uint64_t seed, std::vector<int> layout = {2, 32, 32, 4});

/// All-zero weights; forward then yields uniform action probabilities.
PolicyParams zero_params(std::vector<int> layout = {2, 32, 32, 4});

/// Action probabilities at a state. Softmax is max-subtracted, so arbitrarily
/// large logits still produce a valid distribution.
std::array<double, kNumActions> forward(const PolicyParams& params, Vec2 state);

/// One episode of (state, action, reward) records.
struct Trajectory {
  std::vector<Vec2> states;  // length = actions + 1
  std::vector<int> actions;
  std::vector<double> rewards;
  int entity_id = -1;
};

/// Undiscounted sum of rewards.
double episode_return(const Trajectory& traj);

Trajectory collect_trajectory(const PolicyParams& params, const EntityType& entity,
                              const EnvConfig& env, Rng& rng);

/// `count` episodes under one policy. Each episode runs on its own stream
/// derived from a single draw of `rng`, so the result does not depend on
/// thread count; the parallel and serial variants agree bit-for-bit.
std::vector<Trajectory> collect_batch(const PolicyParams& params, const EntityType& entity,
                                      const EnvConfig& env, int count, Rng& rng);
std::vector<Trajectory> collect_batch_serial(const PolicyParams& params, const EntityType& entity,
                                             const EnvConfig& env, int count, Rng& rng);

/// G_t = sum_{u>=t} gamma^(u-t) r_u.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct TrainConfig {
  double alpha = 0.01;  // inner learning rate
  double gamma = 0.99;  // discount
  int rollouts = 10;    // episodes per update (the shot count K)
  EnvConfig env;        // episode dynamics, including the horizon
};

/// REINFORCE estimator (1/K) sum_traj sum_t grad log pi(a_t|s_t) (G_t - b)
/// where b is the mean of every G_t in the batch. Per-trajectory terms are
/// computed independently and summed in index order, so the parallel and
/// serial variants agree bit-for-bit.
std::vector<double> reinforce_gradient(const PolicyParams& params,
                                       std::span<const Trajectory> batch, double gamma);
std::vector<double> reinforce_gradient_serial(const PolicyParams& params,
                                              std::span<const Trajectory> batch, double gamma);

/// Pure ascent step: params + alpha * gradient.
PolicyParams reinforce_update(const PolicyParams& params, std::span<const Trajectory> batch,
                              const TrainConfig& cfg);

/// Checkpoint round-trips are value-exact for every weight.
void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

}  // namespace caml
