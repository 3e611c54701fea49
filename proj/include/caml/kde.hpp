#pragma once

#include <span>
#include <vector>

#include "caml/rng.hpp"
#include "caml/vec2.hpp"

namespace caml {

/// Isotropic Gaussian kernel density estimate over 2D states.
struct Kde {
  std::vector<Vec2> points;
  double bandwidth = 0.0;
};

struct BandwidthRule {
  enum class Kind { scott, fixed };
  Kind kind = Kind::scott;
  double value = 0.0;

  /// h = sigma_hat * n^(-1/6) with sigma_hat = sqrt((s_x^2 + s_y^2) / 2)
  /// (sample variances), clamped below at 1e-3.
  static BandwidthRule scott() { return {}; }
  static BandwidthRule fixed(double h) { return {Kind::fixed, h}; }
};

inline constexpr double kMinBandwidth = 1e-3;

/// Throws std::invalid_argument on an empty state list.
Kde fit_kde(std::span<const Vec2> states, BandwidthRule rule = BandwidthRule::scott());

/// (1/n) sum_p N(s; p, h^2 I). Strictly positive and finite.
double kde_density(const Kde& kde, Vec2 s);

/// Each sample is a uniformly chosen support point plus N(0, h^2 I) noise.
std::vector<Vec2> kde_sample(const Kde& kde, int count, Rng& rng);

}  // namespace caml
