#include "caml/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace caml {

namespace {

// Nearest-medoid labels (ties to the lowest medoid index; medoids label
// themselves) and the induced cost.
void assign_labels(const DistanceMatrix& d, MedoidAssignment& a) {
  const int n = d.n;
  const int k = static_cast<int>(a.medoid_indices.size());
  a.labels.assign(n, 0);
  a.cost = 0.0;
  std::vector<int> cluster_of(n, -1);
  for (int c = 0; c < k; ++c) cluster_of[a.medoid_indices[c]] = c;
  for (int i = 0; i < n; ++i) {
    if (cluster_of[i] >= 0) {
      a.labels[i] = cluster_of[i];
      continue;
    }
    int best = 0;
    double best_dist = d.at(i, a.medoid_indices[0]);
    for (int c = 1; c < k; ++c) {
      const double dist = d.at(i, a.medoid_indices[c]);
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    a.labels[i] = best;
    a.cost += best_dist;
  }
}

double cost_of(const DistanceMatrix& d, const std::vector<int>& medoids) {
  double cost = 0.0;
  for (int i = 0; i < d.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int m : medoids) best = std::min(best, d.at(i, m));
    cost += best;
  }
  return cost;
}

std::vector<int> greedy_build(const DistanceMatrix& d, int k) {
  const int n = d.n;
  std::vector<int> medoids;
  std::vector<bool> is_medoid(n, false);

  int first = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += d.at(i, j);
    if (sum < best_sum) {
      best_sum = sum;
      first = i;
    }
  }
  medoids.push_back(first);
  is_medoid[first] = true;

  std::vector<double> nearest(n);
  for (int j = 0; j < n; ++j) nearest[j] = d.at(j, first);

  while (static_cast<int>(medoids.size()) < k) {
    int best = -1;
    double best_profit = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (is_medoid[i]) continue;
      double profit = 0.0;
      for (int j = 0; j < n; ++j) {
        if (is_medoid[j] || j == i) continue;
        const double gain = nearest[j] - d.at(i, j);
        if (gain > 0.0) profit += gain;
      }
      if (profit > best_profit) {
        best_profit = profit;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
    for (int j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], d.at(j, best));
  }
  return medoids;
}

void swap_until_stable(const DistanceMatrix& d, std::vector<int>& medoids) {
  const int n = d.n;
  const int k = static_cast<int>(medoids.size());
  double current = cost_of(d, medoids);
  for (;;) {
    double best_cost = current;
    int best_slot = -1;
    int best_candidate = -1;
    for (int slot = 0; slot < k; ++slot) {
      const int old = medoids[slot];
      for (int h = 0; h < n; ++h) {
        if (std::find(medoids.begin(), medoids.end(), h) != medoids.end()) continue;
        medoids[slot] = h;
        const double cost = cost_of(d, medoids);
        if (cost < best_cost - 1e-12) {
          best_cost = cost;
          best_slot = slot;
          best_candidate = h;
        }
      }
      medoids[slot] = old;
    }
    if (best_slot < 0) break;
    medoids[best_slot] = best_candidate;
    current = best_cost;
  }
}

}  // namespace

MedoidAssignment k_medoids(const DistanceMatrix& d, int k, std::uint64_t /*seed*/) {
  validate_distance_matrix(d);
  if (k < 1 || k > d.n) throw std::invalid_argument("k_medoids: k must be in [1, n]");

  MedoidAssignment a;
  if (k == d.n) {
    a.medoid_indices.resize(d.n);
    for (int i = 0; i < d.n; ++i) a.medoid_indices[i] = i;
  } else {
    auto medoids = greedy_build(d, k);
    swap_until_stable(d, medoids);
    std::sort(medoids.begin(), medoids.end());
    a.medoid_indices = std::move(medoids);
  }
  assign_labels(d, a);
  return a;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: length mismatch");
  const auto n = static_cast<double>(a.size());
  if (a.empty()) return 1.0;

  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, m] : cells) sum_cells += choose2(m);
  for (const auto& [key, m] : rows) sum_rows += choose2(m);
  for (const auto& [key, m] : cols) sum_cols += choose2(m);
  const double total = choose2(n);
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // degenerate partitions
  return (sum_cells - expected) / (max_index - expected);
}

void write_assignment_csv(const std::filesystem::path& path, const MedoidAssignment& assignment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "index,label,is_medoid\n";
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    const bool is_medoid =
        std::find(assignment.medoid_indices.begin(), assignment.medoid_indices.end(),
                  static_cast<int>(i)) != assignment.medoid_indices.end();
    out << i << ',' << assignment.labels[i] << ',' << (is_medoid ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace caml
