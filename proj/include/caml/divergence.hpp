#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "caml/kde.hpp"
#include "caml/policy.hpp"
#include "caml/rng.hpp"

namespace caml {

/// Symmetric pairwise divergence matrix.
struct DistanceMatrix {
  int n = 0;
  std::vector<double> values;  // row-major n x n

  DistanceMatrix() = default;
  explicit DistanceMatrix(int size) : n(size), values(static_cast<std::size_t>(size) * size, 0.0) {}

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

/// Throws std::invalid_argument unless the matrix is exactly symmetric with a
/// zero diagonal and nonnegative entries.
void validate_distance_matrix(const DistanceMatrix& d);

/// Symmetric KL sum against the midpoint: KL(p||m) + KL(q||m), m = (p+q)/2,
/// natural log, no 1/2 factors, with 0*log(0/x) := 0. When `normalize` is
/// set, p and q are first rescaled to sum to one, which bounds the result by
/// 2*ln 2. Negative entries raise std::domain_error.
double js_divergence(const std::array<double, kNumActions>& p,
                     const std::array<double, kNumActions>& q, bool normalize = true);

struct DivergenceOptions {
  int m_samples = 100;             // states drawn from the pooled KDE
  bool normalize_occupancy = true; // rescale occupancy vectors before the KL terms
  bool weight_by_density = true;   // weight each sampled state by the pooled density
                                   // (off: plain Monte-Carlo mean over samples)
  double density_floor = 1e-300;   // per-policy densities are floored before products
  BandwidthRule bandwidth = BandwidthRule::scott();
};

/// Pairwise policy divergences from one post-update trajectory per policy.
/// Fits a KDE per trajectory plus a pooled KDE over all states (pooled
/// support is sorted, so the sample draw does not depend on input order),
/// draws m_samples comparison states, forms occupancy vectors
/// pi_i(.|s) * q_i(s), and accumulates density-weighted JS terms.
/// Entries (i, j) are computed in parallel; the result is identical for any
/// thread count and matches pairwise_divergence_reference.
DistanceMatrix pairwise_divergence(std::span<const PolicyParams> policies,
                                   std::span<const Trajectory> post_update_trajectories,
                                   const DivergenceOptions& opts, Rng& rng);

/// Naive serial implementation: direct loops, no batching, no shared density
/// table. Kept as the oracle for the parallel kernel (same sample draw, all
/// downstream math recomputed independently).
DistanceMatrix pairwise_divergence_reference(std::span<const PolicyParams> policies,
                                             std::span<const Trajectory> post_update_trajectories,
                                             const DivergenceOptions& opts, Rng& rng);

/// CSV with a header row of ids; full round-trip precision.
void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& d,
                        std::span<const int> ids);

}  // namespace caml
