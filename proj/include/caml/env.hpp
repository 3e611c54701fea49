#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "caml/rng.hpp"
#include "caml/vec2.hpp"

namespace caml {

inline constexpr int kNumActions = 4;

// Action indices, in address order: left, right, down, up.
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr int kDown = 2;
inline constexpr int kUp = 3;

/// The four unit displacement vectors, indexed left, right, down, up.
const std::array<Vec2, kNumActions>& canonical_actions();

/// One personalized transition dynamic: commanded actions are remapped onto
/// different cardinal directions, then a fixed per-action offset perturbs the
/// coordinate orthogonal to the remapped direction.
struct EntityType {
  int id = 0;
  int latent_group = 0;
  std::array<int, kNumActions> remap{0, 1, 2, 3};  // action a moves along canonical()[remap[a]]
  std::array<double, kNumActions> offsets{};       // replaces the zero coordinate of the remapped vector
};

/// Throws std::invalid_argument when remap is not a permutation, an offset
/// magnitude reaches 1, or any field is non-finite.
void validate_entity(const EntityType& entity);

/// Entity whose transitions equal the canonical action set.
EntityType identity_entity(int id = 0);

/// Actual displacement produced when `entity` receives action `a`. The
/// dominant (nonzero) coordinate of the remapped direction is preserved; the
/// other coordinate becomes offsets[a].
Vec2 apply_personalization(const EntityType& entity, int a);

/// Population of num_latent x variants_per_latent entity types. Each latent
/// group gets a distinct remap permutation (drawn without replacement under
/// `seed`); variant 0 of each group carries zero offsets, later variants draw
/// offsets once from Uniform(-variance_magnitude, +variance_magnitude).
std::vector<EntityType> make_population(int num_latent, int variants_per_latent,
                                        double variance_magnitude, std::uint64_t seed);

enum class QuerySplit {
  unseen_latent,   // query remaps are permutations no support group uses
  unseen_variant,  // query types are fresh variants of existing groups
};

/// Held-out query entity types relative to an existing support population.
/// Ids start at 1000; unseen-latent queries get latent groups past the
/// support's.
std::vector<EntityType> make_queries(std::span<const EntityType> support, int count,
                                     QuerySplit split, double variance_magnitude,
                                     std::uint64_t seed);

struct EnvConfig {
  double step_scale = 1.0;
  Vec2 goal{1.0, 1.0};
  int horizon = 100;
  double goal_radius = 0.01;
};

struct EnvState {
  Vec2 position{0.0, 0.0};
  int step = 0;
};

struct StepResult {
  EnvState next_state;
  double reward = 0.0;  // negative squared distance to the goal
  bool done = false;
};

/// Fresh episode state: the particle starts at the origin.
EnvState reset();

bool is_done(const EnvState& state, const EnvConfig& cfg);

/// Advances one timestep. Throws std::logic_error when the episode is
/// already finished.
StepResult step(const EnvState& state, int a, const EntityType& entity, const EnvConfig& cfg);

/// A generated population together with the inputs that produced it.
struct Population {
  std::uint64_t seed = 0;
  int num_latent = 0;
  int variants_per_latent = 0;
  double variance_magnitude = 0.0;
  std::vector<EntityType> entities;
};

Population generate_population(int num_latent, int variants_per_latent,
                               double variance_magnitude, std::uint64_t seed);

/// JSON round-trip; doubles survive bit-exactly and rewriting an unchanged
/// population yields byte-identical files.
void save_population(const std::filesystem::path& path, const Population& pop);
Population load_population(const std::filesystem::path& path);

}  // namespace caml
