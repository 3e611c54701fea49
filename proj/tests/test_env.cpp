#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "caml/env.hpp"

using namespace caml;

namespace {

EntityType worked_example_entity() {
  // Commanded "right" moves along (0, -1) with an x offset of 0.42.
  EntityType e;
  e.id = 42;
  e.remap = {1, 2, 0, 3};  // right -> canonical index 2 = (0, -1)
  e.offsets = {0.0, 0.42, 0.0, 0.0};
  return e;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("canonical actions are left, right, down, up") {
  const auto& acts = canonical_actions();
  CHECK(acts[kLeft] == Vec2{-1.0, 0.0});
  CHECK(acts[kRight] == Vec2{1.0, 0.0});
  CHECK(acts[kDown] == Vec2{0.0, -1.0});
  CHECK(acts[3] == Vec2{0.0, 1.0});
  Vec2 sum{0.0, 0.0};
  for (const auto& a : acts) sum = sum + a;
  CHECK(sum == Vec2{0.0, 0.0});
}

TEST_CASE("apply_personalization perturbs only the orthogonal coordinate") {
  const EntityType e = worked_example_entity();
  const Vec2 moved = apply_personalization(e, kRight);
  CHECK(moved.x == doctest::Approx(0.42).epsilon(1e-15));
  CHECK(moved.y == doctest::Approx(-1.0).epsilon(1e-15));

  CHECK(apply_personalization(identity_entity(), kUp) == Vec2{0.0, 1.0});

  // The dominant coordinate always equals the remapped base direction's.
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto pop = make_population(4, 2, 0.5, rng.next_u64());
    for (const auto& entity : pop) {
      for (int a = 0; a < kNumActions; ++a) {
        const Vec2 base = canonical_actions()[entity.remap[a]];
        const Vec2 out = apply_personalization(entity, a);
        if (base.x == 0.0)
          CHECK(out.y == base.y);
        else
          CHECK(out.x == base.x);
      }
    }
  }
}

TEST_CASE("make_population sizes, group structure, and seeding") {
  const auto pop = make_population(6, 4, 0.5, 99);
  CHECK(pop.size() == 24);

  // One distinct permutation per latent group; variants share it exactly.
  std::set<std::array<int, 4>> perms;
  for (int g = 0; g < 6; ++g) {
    const auto& remap = pop[g * 4].remap;
    perms.insert(remap);
    for (int v = 0; v < 4; ++v) {
      CHECK(pop[g * 4 + v].latent_group == g);
      CHECK(pop[g * 4 + v].remap == remap);
    }
    // Variant 0 is the pure remap.
    for (int a = 0; a < kNumActions; ++a) CHECK(pop[g * 4].offsets[a] == 0.0);
    for (int v = 1; v < 4; ++v)
      for (int a = 0; a < kNumActions; ++a) CHECK(std::abs(pop[g * 4 + v].offsets[a]) < 0.5);
  }
  CHECK(perms.size() == 6);

  SUBCASE("same seed replays field-for-field") {
    const auto pop2 = make_population(2, 2, 0.5, 7);
    const auto pop3 = make_population(2, 2, 0.5, 7);
    REQUIRE(pop2.size() == pop3.size());
    for (std::size_t i = 0; i < pop2.size(); ++i) {
      CHECK(pop2[i].id == pop3[i].id);
      CHECK(pop2[i].latent_group == pop3[i].latent_group);
      CHECK(pop2[i].remap == pop3[i].remap);
      CHECK(pop2[i].offsets == pop3[i].offsets);
    }
  }
  SUBCASE("more latent groups than permutations is rejected") {
    CHECK_THROWS_AS(make_population(25, 1, 0.0, 1), std::invalid_argument);
  }
  SUBCASE("identity entity moves canonically") {
    const EntityType e = identity_entity();
    for (int a = 0; a < kNumActions; ++a)
      CHECK(apply_personalization(e, a) == canonical_actions()[a]);
  }
}

TEST_CASE("reset starts at the origin with a zero step counter") {
  const EnvState s = reset();
  CHECK(s.position == Vec2{0.0, 0.0});
  CHECK(s.step == 0);
  const EnvState s2 = reset();
  CHECK(s2.position == s.position);
  CHECK(s2.step == s.step);
}

TEST_CASE("step dynamics on the identity entity") {
  const EntityType e = identity_entity();
  const EnvConfig cfg;

  SUBCASE("right then up reaches the goal with final reward 0") {
    const StepResult r1 = step(reset(), kRight, e, cfg);
    CHECK(r1.next_state.position == Vec2{1.0, 0.0});
    CHECK(r1.reward == doctest::Approx(-1.0));
    CHECK_FALSE(r1.done);
    const StepResult r2 = step(r1.next_state, kUp, e, cfg);
    CHECK(r2.next_state.position == Vec2{1.0, 1.0});
    CHECK(r2.reward == 0.0);
    CHECK(r2.done);
  }
  SUBCASE("one step left scores the squared distance to (1,1)") {
    const StepResult r = step(reset(), kLeft, e, cfg);
    CHECK(r.next_state.position == Vec2{-1.0, 0.0});
    CHECK(r.reward == doctest::Approx(-5.0));
  }
  SUBCASE("horizon terminates a wandering episode") {
    EnvState s = reset();
    StepResult r{};
    for (int t = 0; t < 100; ++t) {
      r = step(s, kLeft, e, cfg);
      s = r.next_state;
    }
    CHECK(r.done);
    CHECK(r.next_state.step == 100);
    CHECK_THROWS_AS(step(r.next_state, kLeft, e, cfg), std::logic_error);
  }
  SUBCASE("rewards never exceed zero and agree bit-for-bit on replay") {
    EnvState s = reset();
    for (int t = 0; t < 50; ++t) {
      const int a = t % kNumActions;
      const StepResult r1 = step(s, a, e, cfg);
      const StepResult r2 = step(s, a, e, cfg);
      CHECK(r1.reward <= 0.0);
      CHECK(r1.reward == r2.reward);
      CHECK(r1.next_state.position == r2.next_state.position);
      s = r1.next_state;
    }
  }
}

TEST_CASE("population serialization round-trips bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "caml_env_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "population.json";

  const Population pop = generate_population(3, 2, 0.5, 12345);
  save_population(path, pop);
  const Population loaded = load_population(path);

  CHECK(loaded.seed == pop.seed);
  CHECK(loaded.num_latent == pop.num_latent);
  CHECK(loaded.variants_per_latent == pop.variants_per_latent);
  CHECK(loaded.variance_magnitude == pop.variance_magnitude);
  REQUIRE(loaded.entities.size() == pop.entities.size());
  for (std::size_t i = 0; i < pop.entities.size(); ++i) {
    CHECK(loaded.entities[i].id == pop.entities[i].id);
    CHECK(loaded.entities[i].latent_group == pop.entities[i].latent_group);
    CHECK(loaded.entities[i].remap == pop.entities[i].remap);
    for (int a = 0; a < kNumActions; ++a)
      CHECK(loaded.entities[i].offsets[a] == pop.entities[i].offsets[a]);
  }

  const std::string first = slurp(path);
  save_population(path, loaded);
  CHECK(slurp(path) == first);
  std::filesystem::remove_all(dir);
}
