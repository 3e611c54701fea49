#include "caml/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace caml {

const std::array<Vec2, kNumActions>& canonical_actions() {
  static const std::array<Vec2, kNumActions> actions{
      Vec2{-1.0, 0.0}, Vec2{1.0, 0.0}, Vec2{0.0, -1.0}, Vec2{0.0, 1.0}};
  return actions;
}

void validate_entity(const EntityType& entity) {
  std::array<bool, kNumActions> seen{};
  for (int a = 0; a < kNumActions; ++a) {
    const int r = entity.remap[a];
    if (r < 0 || r >= kNumActions) throw std::invalid_argument("entity remap index out of range");
    if (seen[r]) throw std::invalid_argument("entity remap is not a permutation");
    seen[r] = true;
    if (!std::isfinite(entity.offsets[a]) || std::abs(entity.offsets[a]) >= 1.0)
      throw std::invalid_argument("entity offset magnitude must be below 1");
  }
}

EntityType identity_entity(int id) {
  EntityType e;
  e.id = id;
  return e;
}

Vec2 apply_personalization(const EntityType& entity, int a) {
  if (a < 0 || a >= kNumActions) throw std::invalid_argument("action index out of range");
  const Vec2 base = canonical_actions()[entity.remap[a]];
  if (base.x == 0.0) return {entity.offsets[a], base.y};
  return {base.x, entity.offsets[a]};
}

namespace {

std::vector<std::array<int, kNumActions>> all_permutations() {
  std::array<int, kNumActions> p{0, 1, 2, 3};
  std::vector<std::array<int, kNumActions>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace

std::vector<EntityType> make_population(int num_latent, int variants_per_latent,
                                        double variance_magnitude, std::uint64_t seed) {
  auto perms = all_permutations();
  if (num_latent < 1 || num_latent > static_cast<int>(perms.size()))
    throw std::invalid_argument("make_population: num_latent must be in [1, 24]");
  if (variants_per_latent < 1)
    throw std::invalid_argument("make_population: variants_per_latent must be >= 1");
  if (variance_magnitude < 0.0 || variance_magnitude >= 1.0)
    throw std::invalid_argument("make_population: variance_magnitude must be in [0, 1)");

  Rng rng(seed);
  // Partial Fisher-Yates: the first num_latent entries are a without-replacement draw.
  for (int i = 0; i < num_latent; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(perms.size()) - i);
    std::swap(perms[i], perms[j]);
  }

  std::vector<EntityType> out;
  out.reserve(static_cast<std::size_t>(num_latent) * variants_per_latent);
  for (int g = 0; g < num_latent; ++g) {
    for (int v = 0; v < variants_per_latent; ++v) {
      EntityType e;
      e.id = g * variants_per_latent + v;
      e.latent_group = g;
      e.remap = perms[g];
      if (v > 0) {
        for (int a = 0; a < kNumActions; ++a)
          e.offsets[a] = rng.uniform(-variance_magnitude, variance_magnitude);
      }
      validate_entity(e);
      out.push_back(e);
    }
  }
  return out;
}

std::vector<EntityType> make_queries(std::span<const EntityType> support, int count,
                                     QuerySplit split, double variance_magnitude,
                                     std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_queries: count must be >= 1");
  if (variance_magnitude < 0.0 || variance_magnitude >= 1.0)
    throw std::invalid_argument("make_queries: variance_magnitude must be in [0, 1)");
  if (support.empty()) throw std::invalid_argument("make_queries: support population is empty");

  Rng rng(seed);
  int max_group = 0;
  for (const auto& e : support) max_group = std::max(max_group, e.latent_group);

  std::vector<EntityType> out;
  out.reserve(count);
  if (split == QuerySplit::unseen_latent) {
    auto perms = all_permutations();
    std::vector<std::array<int, kNumActions>> unused;
    for (const auto& p : perms) {
      bool used = false;
      for (const auto& e : support)
        if (e.remap == p) {
          used = true;
          break;
        }
      if (!used) unused.push_back(p);
    }
    if (static_cast<int>(unused.size()) < count)
      throw std::invalid_argument("make_queries: not enough unseen permutations left");
    for (int i = 0; i < count; ++i) {
      const int j = i + rng.uniform_int(static_cast<int>(unused.size()) - i);
      std::swap(unused[i], unused[j]);
    }
    for (int i = 0; i < count; ++i) {
      EntityType e;
      e.id = 1000 + i;
      e.latent_group = max_group + 1 + i;
      e.remap = unused[i];
      for (int a = 0; a < kNumActions; ++a)
        e.offsets[a] = rng.uniform(-variance_magnitude, variance_magnitude);
      validate_entity(e);
      out.push_back(e);
    }
  } else {
    // Fresh variants of existing groups, cycling through the support groups.
    std::vector<const EntityType*> group_rep(max_group + 1, nullptr);
    for (const auto& e : support)
      if (!group_rep[e.latent_group]) group_rep[e.latent_group] = &e;
    std::vector<const EntityType*> reps;
    for (auto* r : group_rep)
      if (r) reps.push_back(r);
    for (int i = 0; i < count; ++i) {
      const EntityType& rep = *reps[i % reps.size()];
      EntityType e;
      e.id = 1000 + i;
      e.latent_group = rep.latent_group;
      e.remap = rep.remap;
      for (int a = 0; a < kNumActions; ++a)
        e.offsets[a] = rng.uniform(-variance_magnitude, variance_magnitude);
      validate_entity(e);
      out.push_back(e);
    }
  }
  return out;
}

EnvState reset() { return EnvState{}; }

bool is_done(const EnvState& state, const EnvConfig& cfg) {
  if (state.step >= cfg.horizon) return true;
  return norm2(state.position - cfg.goal) < cfg.goal_radius * cfg.goal_radius;
}

StepResult step(const EnvState& state, int a, const EntityType& entity, const EnvConfig& cfg) {
  if (is_done(state, cfg)) throw std::logic_error("step: episode already finished");
  const Vec2 next_pos = state.position + cfg.step_scale * apply_personalization(entity, a);
  const EnvState next{next_pos, state.step + 1};
  const double d2 = norm2(next_pos - cfg.goal);
  const bool done = d2 < cfg.goal_radius * cfg.goal_radius || next.step >= cfg.horizon;
  return StepResult{next, -d2, done};
}

Population generate_population(int num_latent, int variants_per_latent,
                               double variance_magnitude, std::uint64_t seed) {
  Population pop;
  pop.seed = seed;
  pop.num_latent = num_latent;
  pop.variants_per_latent = variants_per_latent;
  pop.variance_magnitude = variance_magnitude;
  pop.entities = make_population(num_latent, variants_per_latent, variance_magnitude, seed);
  return pop;
}

void save_population(const std::filesystem::path& path, const Population& pop) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = pop.seed;
  j["num_latent"] = pop.num_latent;
  j["variants_per_latent"] = pop.variants_per_latent;
  j["variance_magnitude"] = pop.variance_magnitude;
  auto& entities = j["entities"] = nlohmann::json::array();
  for (const auto& e : pop.entities) {
    nlohmann::json je;
    je["id"] = e.id;
    je["latent_group"] = e.latent_group;
    je["remap"] = e.remap;
    je["offsets"] = e.offsets;
    entities.push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Population load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("population file not found: " + path.string());
  nlohmann::json j;
  in >> j;
  Population pop;
  pop.seed = j.at("seed").get<std::uint64_t>();
  pop.num_latent = j.at("num_latent").get<int>();
  pop.variants_per_latent = j.at("variants_per_latent").get<int>();
  pop.variance_magnitude = j.at("variance_magnitude").get<double>();
  for (const auto& je : j.at("entities")) {
    EntityType e;
    e.id = je.at("id").get<int>();
    e.latent_group = je.at("latent_group").get<int>();
    e.remap = je.at("remap").get<std::array<int, kNumActions>>();
    e.offsets = je.at("offsets").get<std::array<double, kNumActions>>();
    validate_entity(e);
    pop.entities.push_back(e);
  }
  return pop;
}

}  // namespace caml
