#include "caml/kde.hpp"

#include <cmath>
#include <stdexcept>

namespace caml {

Kde fit_kde(std::span<const Vec2> states, BandwidthRule rule) {
  if (states.empty()) throw std::invalid_argument("fit_kde: empty state list");
  Kde kde;
  kde.points.assign(states.begin(), states.end());
  if (rule.kind == BandwidthRule::Kind::fixed) {
    if (!(rule.value > 0.0) || !std::isfinite(rule.value))
      throw std::invalid_argument("fit_kde: fixed bandwidth must be positive and finite");
    kde.bandwidth = rule.value;
    return kde;
  }
  const auto n = static_cast<double>(states.size());
  double sigma = 0.0;
  if (states.size() > 1) {
    double mx = 0.0, my = 0.0;
    for (const Vec2& p : states) {
      mx += p.x;
      my += p.y;
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0;
    for (const Vec2& p : states) {
      vx += (p.x - mx) * (p.x - mx);
      vy += (p.y - my) * (p.y - my);
    }
    vx /= n - 1.0;
    vy /= n - 1.0;
    sigma = std::sqrt(0.5 * (vx + vy));
  }
  kde.bandwidth = std::max(kMinBandwidth, sigma * std::pow(n, -1.0 / 6.0));
  return kde;
}

double kde_density(const Kde& kde, Vec2 s) {
  const double h2 = kde.bandwidth * kde.bandwidth;
  const double norm_const = 1.0 / (2.0 * 3.14159265358979323846 * h2);
  double sum = 0.0;
  for (const Vec2& p : kde.points) sum += std::exp(-0.5 * norm2(s - p) / h2);
  return norm_const * sum / static_cast<double>(kde.points.size());
}

std::vector<Vec2> kde_sample(const Kde& kde, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("kde_sample: count must be >= 1");
  std::vector<Vec2> out;
  out.reserve(count);
  const int n = static_cast<int>(kde.points.size());
  for (int i = 0; i < count; ++i) {
    const Vec2 p = kde.points[rng.uniform_int(n)];
    out.push_back({p.x + kde.bandwidth * rng.normal(), p.y + kde.bandwidth * rng.normal()});
  }
  return out;
}

}  // namespace caml
