#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "caml/policy.hpp"

using namespace caml;

namespace {

// Near-deterministic two-step solution on the identity entity: pick `right`
// at the origin, `up` once x reaches 1.
PolicyParams right_then_up_policy() {
  PolicyParams p = zero_params({2, 4});
  const double c = 60.0;
  // Row-major (out x in) weights, then biases.
  p.weights = {0, 0, /*right*/ -c, 0, 0, 0, /*up*/ c, 0, /*biases*/ -c, c, -c, 0};
  return p;
}

// Synthetic trajectory; the gradient path never touches the environment.
Trajectory random_trajectory(Rng& rng, int max_len) {
  Trajectory t;
  const int len = 1 + rng.uniform_int(max_len);
  t.states.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  for (int i = 0; i < len; ++i) {
    t.actions.push_back(rng.uniform_int(kNumActions));
    t.rewards.push_back(rng.uniform(-2.0, 2.0));
    t.states.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  }
  return t;
}

// Surrogate objective whose exact gradient reinforce_gradient claims to
// compute: (1/K) sum_traj sum_t log pi(a_t|s_t) * A_t with the advantages
// held fixed. Evaluated from scratch for the finite-difference oracle.
double surrogate(const PolicyParams& params, const std::vector<Trajectory>& batch,
                 const std::vector<std::vector<double>>& advantages) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch[i].actions.size(); ++t) {
      const auto probs = forward(params, batch[i].states[t]);
      total += std::log(probs[batch[i].actions[t]]) * advantages[i][t];
    }
  }
  return total / static_cast<double>(batch.size());
}

std::vector<std::vector<double>> batch_advantages(const std::vector<Trajectory>& batch,
                                                  double gamma) {
  std::vector<std::vector<double>> adv;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : batch) {
    adv.push_back(discounted_returns(t.rewards, gamma));
    for (double g : adv.back()) sum += g;
    count += adv.back().size();
  }
  const double baseline = sum / static_cast<double>(count);
  for (auto& a : adv)
    for (double& g : a) g -= baseline;
  return adv;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("init_params is seeded and layouts are validated") {
  const auto a = init_params(5);
  const auto b = init_params(5);
  CHECK(a.weights == b.weights);
  const auto c = init_params(6);
  CHECK(a.weights != c.weights);
  CHECK(a.weights.size() == param_count(a.layout));

  const auto z = zero_params();
  const auto probs = forward(z, {0.7, -0.3});
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(init_params(1, {3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(init_params(1, {2, 8, 5}), std::invalid_argument);
}

TEST_CASE("forward yields a distribution for any finite input") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto params = init_params(rng.next_u64());
    if (trial % 3 == 0)  // exercise the max-subtracted softmax on huge logits
      for (double& w : params.weights) w *= 1e4;
    const Vec2 s{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)};
    const auto probs = forward(params, s);
    double sum = 0.0;
    for (double p : probs) {
      CHECK(std::isfinite(p));
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("shifting every logit leaves probabilities unchanged") {
  auto params = init_params(21, {2, 8, 4});
  auto shifted = params;
  // The last four weights are the output biases.
  for (std::size_t i = shifted.weights.size() - 4; i < shifted.weights.size(); ++i)
    shifted.weights[i] += 13.5;
  const Vec2 s{0.4, -1.2};
  const auto p0 = forward(params, s);
  const auto p1 = forward(shifted, s);
  for (int a = 0; a < kNumActions; ++a) CHECK(p0[a] == doctest::Approx(p1[a]).epsilon(1e-12));
}

TEST_CASE("collect_trajectory is seeded, bounded, and solves the constructed case") {
  const EntityType e = identity_entity();
  const EnvConfig env;

  SUBCASE("saturated right-then-up policy reaches (1,1) in two steps") {
    Rng rng(1);
    const Trajectory t = collect_trajectory(right_then_up_policy(), e, env, rng);
    REQUIRE(t.actions.size() == 2);
    CHECK(t.actions[0] == kRight);
    CHECK(t.actions[1] == kUp);
    CHECK(t.states.back() == Vec2{1.0, 1.0});
    CHECK(t.rewards.back() == 0.0);
    CHECK(t.entity_id == e.id);
  }
  SUBCASE("episodes never exceed the horizon and replay per seed") {
    const auto params = init_params(3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng r1(seed), r2(seed);
      const Trajectory a = collect_trajectory(params, e, env, r1);
      const Trajectory b = collect_trajectory(params, e, env, r2);
      CHECK(a.actions.size() <= 100);
      CHECK(a.states.size() == a.actions.size() + 1);
      CHECK(a.rewards.size() == a.actions.size());
      CHECK(a.actions == b.actions);
      CHECK(a.states == b.states);
    }
  }
  SUBCASE("parallel and serial batch collection agree bit-for-bit") {
    const auto params = init_params(9);
    Rng r1(77), r2(77);
    const auto par = collect_batch(params, e, env, 8, r1);
    const auto ser = collect_batch_serial(params, e, env, 8, r2);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].actions == ser[i].actions);
      CHECK(par[i].states == ser[i].states);
      CHECK(par[i].rewards == ser[i].rewards);
    }
  }
}

TEST_CASE("discounted_returns hand cases") {
  CHECK(discounted_returns(std::vector<double>{-1, -1}, 1.0) == std::vector<double>{-2, -1});
  CHECK(discounted_returns(std::vector<double>{3.5}, 0.3) == std::vector<double>{3.5});
  const auto g = discounted_returns(std::vector<double>{1, 0, 1}, 0.5);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reinforce_update leaves params unchanged on centered advantages") {
  // Single-step trajectories with equal rewards: every return equals the
  // baseline, so the estimator is exactly zero.
  std::vector<Trajectory> batch(3);
  for (auto& t : batch) {
    t.states = {{0.1, 0.2}, {0.3, 0.2}};
    t.actions = {2};
    t.rewards = {-2.0};
  }
  const auto params = init_params(4, {2, 4, 4});
  TrainConfig cfg;
  const auto updated = reinforce_update(params, batch, cfg);
  CHECK(updated.weights == params.weights);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(2024);
  const double gamma = 0.9;
  const double eps = 1e-6;
  for (int instance = 0; instance < 8; ++instance) {
    const auto params = init_params(rng.next_u64(), {2, 4, 4});
    std::vector<Trajectory> batch;
    const int k = 1 + rng.uniform_int(3);
    for (int i = 0; i < k; ++i) batch.push_back(random_trajectory(rng, 5));
    const auto adv = batch_advantages(batch, gamma);

    const auto grad = reinforce_gradient(params, batch, gamma);
    std::vector<double> fd(grad.size());
    for (std::size_t w = 0; w < grad.size(); ++w) {
      auto plus = params;
      auto minus = params;
      plus.weights[w] += eps;
      minus.weights[w] -= eps;
      fd[w] = (surrogate(plus, batch, adv) - surrogate(minus, batch, adv)) / (2 * eps);
    }
    CHECK(max_relative_error(grad, fd) < 1e-4);

    // The parallel kernel and the serial reference are the same sum.
    CHECK(reinforce_gradient_serial(params, batch, gamma) == grad);
  }
}

TEST_CASE("closed-form gradient of a linear softmax policy on one-step data") {
  const auto params = zero_params({2, 4});  // uniform probabilities everywhere
  std::vector<Trajectory> batch(2);
  batch[0].states = {{0.3, -0.2}, {0.0, 0.0}};
  batch[0].actions = {1};
  batch[0].rewards = {2.0};
  batch[1].states = {{-0.5, 0.4}, {0.0, 0.0}};
  batch[1].actions = {3};
  batch[1].rewards = {-1.0};

  // Baseline (2 - 1) / 2 = 0.5; advantages +1.5 / -1.5. With uniform probs,
  // grad log pi = (onehot(a) - 1/4) outer (s, 1).
  std::vector<double> expected(param_count(params.layout), 0.0);
  const double adv[2] = {1.5, -1.5};
  for (int i = 0; i < 2; ++i) {
    const Vec2 s = batch[i].states[0];
    const int a = batch[i].actions[0];
    for (int o = 0; o < 4; ++o) {
      const double d = ((o == a) ? 1.0 : 0.0) - 0.25;
      expected[o * 2 + 0] += 0.5 * adv[i] * d * s.x;
      expected[o * 2 + 1] += 0.5 * adv[i] * d * s.y;
      expected[8 + o] += 0.5 * adv[i] * d;
    }
  }
  const auto grad = reinforce_gradient(params, batch, 0.99);
  REQUIRE(grad.size() == expected.size());
  for (std::size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("reinforce_update is pure") {
  Rng rng(5);
  const EntityType e = identity_entity();
  TrainConfig cfg;
  const auto params = init_params(8);
  const auto before = params.weights;
  const auto batch = collect_batch(params, e, cfg.env, 4, rng);
  const auto u1 = reinforce_update(params, batch, cfg);
  const auto u2 = reinforce_update(params, batch, cfg);
  CHECK(params.weights == before);
  CHECK(u1.weights == u2.weights);
  CHECK(u1.layout == params.layout);
}

TEST_CASE("policy checkpoints round-trip exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "caml_policy_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "policy.json";
  const auto params = init_params(31337);
  save_policy(path, params);
  const auto loaded = load_policy(path);
  CHECK(loaded.layout == params.layout);
  CHECK(loaded.weights == params.weights);
  std::filesystem::remove_all(dir);
}
