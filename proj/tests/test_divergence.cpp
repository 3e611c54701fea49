#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "caml/divergence.hpp"

using namespace caml;

namespace {

// Linear softmax policy saturated toward one action.
PolicyParams prefer_action(int action, double strength = 8.0) {
  PolicyParams p = zero_params({2, 4});
  p.weights[8 + action] = strength;  // output bias
  return p;
}

Trajectory synthetic_trajectory(Rng& rng, int len, Vec2 center, double spread, int entity_id) {
  Trajectory t;
  t.entity_id = entity_id;
  t.states.push_back({center.x + rng.uniform(-spread, spread),
                      center.y + rng.uniform(-spread, spread)});
  for (int i = 0; i < len; ++i) {
    t.actions.push_back(rng.uniform_int(kNumActions));
    t.rewards.push_back(rng.uniform(-1.0, 0.0));
    t.states.push_back({center.x + rng.uniform(-spread, spread),
                        center.y + rng.uniform(-spread, spread)});
  }
  return t;
}

}  // namespace

TEST_CASE("js_divergence constants and symmetry") {
  const std::array<double, 4> p{0.1, 0.2, 0.3, 0.4};
  CHECK(js_divergence(p, p) == 0.0);

  const std::array<double, 4> a{1.0, 0.0, 0.0, 0.0};
  const std::array<double, 4> b{0.0, 1.0, 0.0, 0.0};
  CHECK(js_divergence(a, b) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  // Without normalization the magnitudes carry through the KL terms.
  const std::array<double, 4> a2{2.0, 0.0, 0.0, 0.0};
  const std::array<double, 4> b2{0.0, 2.0, 0.0, 0.0};
  CHECK(js_divergence(a2, b2, false) == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<double, 4> x{}, y{};
    for (int i = 0; i < 4; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    CHECK(js_divergence(x, y) == js_divergence(y, x));
    CHECK(js_divergence(x, y) >= 0.0);
    CHECK(js_divergence(x, y) <= 2.0 * std::log(2.0) + 1e-12);
  }

  const std::array<double, 4> bad{-0.1, 0.5, 0.3, 0.3};
  CHECK_THROWS_AS(js_divergence(bad, p), std::domain_error);
}

TEST_CASE("pairwise_divergence basic contracts") {
  Rng data_rng(10);
  std::vector<PolicyParams> policies{prefer_action(0), prefer_action(1), prefer_action(3)};
  std::vector<Trajectory> trajs{
      synthetic_trajectory(data_rng, 20, {-1.0, 0.0}, 0.4, 0),
      synthetic_trajectory(data_rng, 20, {1.0, 0.2}, 0.4, 1),
      synthetic_trajectory(data_rng, 20, {0.3, 1.0}, 0.4, 2)};
  DivergenceOptions opts;
  opts.m_samples = 60;

  SUBCASE("deterministic given the rng seed") {
    Rng r1(5), r2(5);
    const auto d1 = pairwise_divergence(policies, trajs, opts, r1);
    const auto d2 = pairwise_divergence(policies, trajs, opts, r2);
    CHECK(d1.values == d2.values);
  }
  SUBCASE("symmetric, zero-diagonal, nonnegative") {
    Rng rng(6);
    const auto d = pairwise_divergence(policies, trajs, opts, rng);
    validate_distance_matrix(d);  // throws on violation
    CHECK(d.n == 3);
    CHECK(d.at(0, 1) > 0.0);
  }
  SUBCASE("identical policy and trajectory copies sit at exactly zero") {
    std::vector<PolicyParams> dup{policies[0], policies[0], policies[2]};
    std::vector<Trajectory> dup_trajs{trajs[0], trajs[0], trajs[2]};
    Rng rng(7);
    const auto d = pairwise_divergence(dup, dup_trajs, opts, rng);
    CHECK(d.at(0, 1) == 0.0);
    CHECK(d.at(0, 2) > 0.0);
  }
  SUBCASE("permuting the policy list permutes rows and columns identically") {
    Rng r1(8), r2(8);
    const auto d = pairwise_divergence(policies, trajs, opts, r1);
    std::vector<PolicyParams> perm_p{policies[2], policies[0], policies[1]};
    std::vector<Trajectory> perm_t{trajs[2], trajs[0], trajs[1]};
    const auto dp = pairwise_divergence(perm_p, perm_t, opts, r2);
    const int perm[3] = {2, 0, 1};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(dp.at(i, j) == d.at(perm[i], perm[j]));
  }
  SUBCASE("mismatched list lengths are rejected") {
    std::vector<Trajectory> short_trajs{trajs[0], trajs[1]};
    Rng rng(9);
    CHECK_THROWS_AS(pairwise_divergence(policies, short_trajs, opts, rng), std::invalid_argument);
  }
}

TEST_CASE("parallel kernel matches the naive serial reference") {
  Rng data_rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<PolicyParams> policies;
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 3; ++i) {
      policies.push_back(prefer_action((i + trial) % 4, 2.0 + i));
      trajs.push_back(synthetic_trajectory(data_rng, 20, {0.5 * i, 0.3 * trial}, 0.5, i));
    }
    DivergenceOptions opts;
    opts.m_samples = 50;
    opts.weight_by_density = (trial != 1);  // exercise the unweighted mode too
    opts.normalize_occupancy = (trial != 2);

    const std::uint64_t seed = 1000 + trial;
    Rng r1(seed), r2(seed);
    const auto fast = pairwise_divergence(policies, trajs, opts, r1);
    const auto ref = pairwise_divergence_reference(policies, trajs, opts, r2);
    REQUIRE(fast.n == ref.n);
    for (int i = 0; i < fast.n; ++i)
      for (int j = 0; j < fast.n; ++j) {
        const double scale = std::max({std::abs(ref.at(i, j)), std::abs(fast.at(i, j)), 1.0});
        CHECK(std::abs(fast.at(i, j) - ref.at(i, j)) / scale < 1e-10);
      }
  }
}

TEST_CASE("monte-carlo estimate is stable under doubling m_samples") {
  Rng data_rng(4242);
  std::vector<PolicyParams> policies;
  std::vector<Trajectory> trajs;
  const Vec2 centers[6] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {0.7, 0.7}, {-0.7, 0.7}};
  for (int i = 0; i < 6; ++i) {
    policies.push_back(prefer_action(i % 4, 4.0 + 0.5 * i));
    trajs.push_back(synthetic_trajectory(data_rng, 30, centers[i], 0.3, i));
  }
  DivergenceOptions opts;
  opts.m_samples = 100;
  DivergenceOptions opts2 = opts;
  opts2.m_samples = 200;

  Rng r1(99), r2(99);
  const auto d1 = pairwise_divergence(policies, trajs, opts, r1);
  const auto d2 = pairwise_divergence(policies, trajs, opts2, r2);
  const double max1 = *std::max_element(d1.values.begin(), d1.values.end());
  const double max2 = *std::max_element(d2.values.begin(), d2.values.end());
  REQUIRE(max1 > 0.0);
  std::vector<double> changes;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      changes.push_back(std::abs(d1.at(i, j) / max1 - d2.at(i, j) / max2));
  std::sort(changes.begin(), changes.end());
  const double median = changes[changes.size() / 2];
  CHECK(median < 0.1);
}
