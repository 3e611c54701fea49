#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "caml/divergence.hpp"

namespace caml {

struct MedoidAssignment {
  std::vector<int> medoid_indices;  // ascending; position = cluster id
  std::vector<int> labels;          // cluster id in [0, k) per point
  double cost = 0.0;                // sum of distances to assigned medoids
};

/// PAM: greedy BUILD (first medoid minimizes its row sum, then best-profit
/// additions) followed by SWAP passes applying the best strictly-improving
/// single swap until none remains. Ties break on the lowest index throughout.
/// The procedure is deterministic; `seed` is accepted for interface stability
/// with randomized initializations and is currently unused.
/// Throws std::invalid_argument for k outside [1, n] or an invalid matrix.
MedoidAssignment k_medoids(const DistanceMatrix& d, int k, std::uint64_t seed = 0);

/// Agreement between two labelings, corrected for chance. 1 = identical
/// partitions (up to relabeling), ~0 = random agreement.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// CSV of (index, label, is_medoid).
void write_assignment_csv(const std::filesystem::path& path, const MedoidAssignment& assignment);

}  // namespace caml
