#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "caml/clustering.hpp"
#include "caml/rng.hpp"

using namespace caml;

namespace {

DistanceMatrix random_symmetric(Rng& rng, int n) {
  DistanceMatrix d(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = rng.uniform(0.1, 10.0);
      d.at(i, j) = v;
      d.at(j, i) = v;
    }
  return d;
}

double brute_force_cost(const DistanceMatrix& d, int k) {
  std::vector<int> pick(k);
  double best = std::numeric_limits<double>::infinity();
  // Enumerate all C(n, k) medoid sets.
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == k) {
      double cost = 0.0;
      for (int i = 0; i < d.n; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (int m : pick) nearest = std::min(nearest, d.at(i, m));
        cost += nearest;
      }
      best = std::min(best, cost);
      return;
    }
    for (int i = start; i < d.n; ++i) {
      pick[depth] = i;
      recurse(i + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return best;
}

}  // namespace

TEST_CASE("k equal to n makes every point its own medoid at zero cost") {
  Rng rng(1);
  const auto d = random_symmetric(rng, 5);
  const auto a = k_medoids(d, 5, 0);
  CHECK(a.cost == 0.0);
  REQUIRE(a.medoid_indices.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(a.medoid_indices[i] == i);
    CHECK(a.labels[i] == i);
  }
}

TEST_CASE("two well-separated blobs split exactly") {
  DistanceMatrix d(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      const bool same_blob = (i < 3) == (j < 3);
      d.at(i, j) = same_blob ? 0.1 : 10.0;
    }
  const auto a = k_medoids(d, 2, 0);
  CHECK(a.labels[0] == a.labels[1]);
  CHECK(a.labels[1] == a.labels[2]);
  CHECK(a.labels[3] == a.labels[4]);
  CHECK(a.labels[4] == a.labels[5]);
  CHECK(a.labels[0] != a.labels[3]);
  CHECK(a.cost == doctest::Approx(brute_force_cost(d, 2)).epsilon(1e-12));
}

TEST_CASE("k=1 selects the row-sum minimizer") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = random_symmetric(rng, 7);
    const auto a = k_medoids(d, 1, 0);
    int best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d.n; ++i) {
      double sum = 0.0;
      for (int j = 0; j < d.n; ++j) sum += d.at(i, j);
      if (sum < best_sum) {
        best_sum = sum;
        best = i;
      }
    }
    REQUIRE(a.medoid_indices.size() == 1);
    CHECK(a.medoid_indices[0] == best);
    CHECK(a.cost == doctest::Approx(best_sum).epsilon(1e-12));
  }
}

TEST_CASE("PAM reaches the exhaustive optimum on desk-scale instances") {
  Rng rng(99);
  int exact = 0, total = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4 + rng.uniform_int(5);       // 4..8
    const int k = 1 + rng.uniform_int(std::min(3, n));  // 1..3
    const auto d = random_symmetric(rng, n);
    const auto a = k_medoids(d, k, 0);
    const double opt = brute_force_cost(d, k);
    ++total;
    if (a.cost <= opt + 1e-9) {
      ++exact;
    } else {
      MESSAGE("PAM missed the optimum: n=", n, " k=", k, " pam=", a.cost, " opt=", opt);
      CHECK(a.cost <= opt * 1.05);
    }
    CHECK(a.cost >= opt - 1e-9);  // can never beat the exhaustive search
  }
  CHECK(exact == total);  // expected to hold at these sizes; fallback logged above
}

TEST_CASE("labels are consistent with the returned medoids and runs are deterministic") {
  Rng rng(13);
  const auto d = random_symmetric(rng, 9);
  const auto a = k_medoids(d, 3, 42);
  const auto b = k_medoids(d, 3, 43);  // PAM path ignores the seed
  CHECK(a.medoid_indices == b.medoid_indices);
  CHECK(a.labels == b.labels);
  CHECK(a.cost == b.cost);

  for (int i = 0; i < d.n; ++i) {
    int nearest = 0;
    double nearest_dist = d.at(i, a.medoid_indices[0]);
    for (std::size_t c = 1; c < a.medoid_indices.size(); ++c) {
      if (d.at(i, a.medoid_indices[c]) < nearest_dist) {
        nearest_dist = d.at(i, a.medoid_indices[c]);
        nearest = static_cast<int>(c);
      }
    }
    CHECK(a.labels[i] == nearest);
  }
  for (std::size_t c = 0; c < a.medoid_indices.size(); ++c)
    CHECK(a.labels[a.medoid_indices[c]] == static_cast<int>(c));
}

TEST_CASE("invalid inputs are rejected") {
  Rng rng(1);
  const auto d = random_symmetric(rng, 4);
  CHECK_THROWS_AS(k_medoids(d, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(k_medoids(d, 0, 0), std::invalid_argument);

  DistanceMatrix bad(3);
  bad.at(0, 1) = 1.0;  // asymmetric
  CHECK_THROWS_AS(k_medoids(bad, 1, 0), std::invalid_argument);
}

TEST_CASE("adjusted rand index reference values") {
  const std::vector<int> a{0, 0, 0, 1, 1, 1};
  CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));

  const std::vector<int> relabeled{1, 1, 1, 0, 0, 0};
  CHECK(adjusted_rand_index(a, relabeled) == doctest::Approx(1.0));

  // Hand-computed contingency: sum C(n_ij,2) = 2, rows 6, cols 3, total 15.
  const std::vector<int> b{0, 0, 1, 1, 2, 2};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx((2.0 - 1.2) / (4.5 - 1.2)).epsilon(1e-12));

  // Independent labelings hover near zero.
  Rng rng(55);
  std::vector<int> x(2000), y(2000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform_int(4);
    y[i] = rng.uniform_int(4);
  }
  CHECK(std::abs(adjusted_rand_index(x, y)) < 0.1);

  const std::vector<int> short_labels{0, 1};
  CHECK_THROWS_AS(adjusted_rand_index(a, short_labels), std::invalid_argument);
}
