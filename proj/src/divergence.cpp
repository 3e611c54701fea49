#include "caml/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "caml/fmt.hpp"

namespace caml {

void validate_distance_matrix(const DistanceMatrix& d) {
  if (d.n < 0 || d.values.size() != static_cast<std::size_t>(d.n) * d.n)
    throw std::invalid_argument("distance matrix: storage does not match n");
  for (int i = 0; i < d.n; ++i) {
    if (d.at(i, i) != 0.0) throw std::invalid_argument("distance matrix: nonzero diagonal");
    for (int j = 0; j < d.n; ++j) {
      if (!(d.at(i, j) >= 0.0)) throw std::invalid_argument("distance matrix: negative entry");
      if (d.at(i, j) != d.at(j, i)) throw std::invalid_argument("distance matrix: not symmetric");
    }
  }
}

namespace {

std::array<double, kNumActions> maybe_normalize(std::array<double, kNumActions> v,
                                                bool normalize) {
  if (!normalize) return v;
  double sum = 0.0;
  for (double e : v) sum += e;
  if (sum > 0.0)
    for (double& e : v) e /= sum;
  return v;
}

double kl_term(const std::array<double, kNumActions>& a,
               const std::array<double, kNumActions>& m) {
  double kl = 0.0;
  for (int i = 0; i < kNumActions; ++i)
    if (a[i] > 0.0) kl += a[i] * std::log(a[i] / m[i]);
  return kl;
}

}  // namespace

double js_divergence(const std::array<double, kNumActions>& p,
                     const std::array<double, kNumActions>& q, bool normalize) {
  for (int i = 0; i < kNumActions; ++i)
    if (p[i] < 0.0 || q[i] < 0.0) throw std::domain_error("js_divergence: negative entry");
  const auto pn = maybe_normalize(p, normalize);
  const auto qn = maybe_normalize(q, normalize);
  std::array<double, kNumActions> m{};
  for (int i = 0; i < kNumActions; ++i) m[i] = 0.5 * (pn[i] + qn[i]);
  double d = kl_term(pn, m) + kl_term(qn, m);
  if (d < 0.0 && d > -1e-12) d = 0.0;  // rounding guard near identical inputs
  return d;
}

namespace {

struct DivergenceInputs {
  std::vector<Kde> per_policy;
  Kde pooled;
  std::vector<Vec2> samples;
};

// Shared preamble for the parallel kernel and its serial oracle: both must
// consume the rng identically so they see the same comparison states. The
// pooled support is sorted, making the draw independent of the policy order.
DivergenceInputs prepare_inputs(std::span<const PolicyParams> policies,
                                std::span<const Trajectory> trajectories,
                                const DivergenceOptions& opts, Rng& rng) {
  if (policies.size() != trajectories.size())
    throw std::invalid_argument("pairwise_divergence: one trajectory per policy required");
  if (policies.empty()) throw std::invalid_argument("pairwise_divergence: no policies");
  if (opts.m_samples < 1) throw std::invalid_argument("pairwise_divergence: m_samples must be >= 1");

  DivergenceInputs in;
  std::vector<Vec2> pooled_points;
  for (const Trajectory& t : trajectories) {
    if (t.states.empty()) throw std::invalid_argument("pairwise_divergence: empty trajectory");
    in.per_policy.push_back(fit_kde(t.states, opts.bandwidth));
    pooled_points.insert(pooled_points.end(), t.states.begin(), t.states.end());
  }
  std::sort(pooled_points.begin(), pooled_points.end(), [](Vec2 a, Vec2 b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  in.pooled = fit_kde(pooled_points, opts.bandwidth);
  in.samples = kde_sample(in.pooled, opts.m_samples, rng);
  return in;
}

}  // namespace

DistanceMatrix pairwise_divergence(std::span<const PolicyParams> policies,
                                   std::span<const Trajectory> post_update_trajectories,
                                   const DivergenceOptions& opts, Rng& rng) {
  const auto in = prepare_inputs(policies, post_update_trajectories, opts, rng);
  const int n = static_cast<int>(policies.size());
  const int m = static_cast<int>(in.samples.size());

  // Occupancy vectors rho[s][i] and per-sample weights, each cell independent.
  std::vector<std::array<double, kNumActions>> rho(static_cast<std::size_t>(m) * n);
  std::vector<double> weight(m);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < m; ++s) {
    const Vec2 state = in.samples[s];
    weight[s] = opts.weight_by_density ? kde_density(in.pooled, state)
                                       : 1.0 / static_cast<double>(m);
    for (int i = 0; i < n; ++i) {
      const double density = std::max(kde_density(in.per_policy[i], state), opts.density_floor);
      auto probs = forward(policies[i], state);
      for (double& p : probs) p *= density;
      rho[static_cast<std::size_t>(s) * n + i] = probs;
    }
  }

  DistanceMatrix d(n);
  const int num_pairs = n * (n - 1) / 2;
#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < num_pairs; ++pair) {
    // Unrank the pair index into (i, j), i < j.
    int i = 0;
    int remaining = pair;
    while (remaining >= n - 1 - i) {
      remaining -= n - 1 - i;
      ++i;
    }
    const int j = i + 1 + remaining;
    double sum = 0.0;
    for (int s = 0; s < m; ++s) {
      const auto& a = rho[static_cast<std::size_t>(s) * n + i];
      const auto& b = rho[static_cast<std::size_t>(s) * n + j];
      sum += js_divergence(a, b, opts.normalize_occupancy) * weight[s];
    }
    d.at(i, j) = sum;
    d.at(j, i) = sum;
  }
  validate_distance_matrix(d);
  return d;
}

DistanceMatrix pairwise_divergence_reference(std::span<const PolicyParams> policies,
                                             std::span<const Trajectory> post_update_trajectories,
                                             const DivergenceOptions& opts, Rng& rng) {
  const auto in = prepare_inputs(policies, post_update_trajectories, opts, rng);
  const int n = static_cast<int>(policies.size());

  // Everything below is recomputed with direct loops: inline Scott bandwidth,
  // inline Gaussian sums, inline KL terms.
  const double two_pi = 2.0 * 3.14159265358979323846;
  auto scott = [](std::span<const Vec2> pts) {
    const double nn = static_cast<double>(pts.size());
    double sigma = 0.0;
    if (pts.size() > 1) {
      double mx = 0.0, my = 0.0;
      for (const Vec2& p : pts) {
        mx += p.x;
        my += p.y;
      }
      mx /= nn;
      my /= nn;
      double vx = 0.0, vy = 0.0;
      for (const Vec2& p : pts) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
      }
      sigma = std::sqrt(0.5 * (vx / (nn - 1.0) + vy / (nn - 1.0)));
    }
    return std::max(kMinBandwidth, sigma * std::pow(nn, -1.0 / 6.0));
  };
  auto density = [&](std::span<const Vec2> pts, double h, Vec2 s) {
    double sum = 0.0;
    for (const Vec2& p : pts) {
      const double dx = s.x - p.x;
      const double dy = s.y - p.y;
      sum += std::exp(-0.5 * (dx * dx + dy * dy) / (h * h));
    }
    return sum / (two_pi * h * h * static_cast<double>(pts.size()));
  };

  std::vector<double> per_h(n);
  for (int i = 0; i < n; ++i) per_h[i] = scott(post_update_trajectories[i].states);
  const double pooled_h = in.pooled.bandwidth;

  DistanceMatrix d(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (const Vec2& s : in.samples) {
        std::array<double, kNumActions> a = forward(policies[i], s);
        std::array<double, kNumActions> b = forward(policies[j], s);
        const double qa =
            std::max(density(post_update_trajectories[i].states, per_h[i], s), opts.density_floor);
        const double qb =
            std::max(density(post_update_trajectories[j].states, per_h[j], s), opts.density_floor);
        for (int c = 0; c < kNumActions; ++c) {
          a[c] *= qa;
          b[c] *= qb;
        }
        if (opts.normalize_occupancy) {
          double sa = a[0] + a[1] + a[2] + a[3];
          double sb = b[0] + b[1] + b[2] + b[3];
          if (sa > 0.0)
            for (double& v : a) v /= sa;
          if (sb > 0.0)
            for (double& v : b) v /= sb;
        }
        double js = 0.0;
        for (int c = 0; c < kNumActions; ++c) {
          const double mid = 0.5 * (a[c] + b[c]);
          if (a[c] > 0.0) js += a[c] * std::log(a[c] / mid);
          if (b[c] > 0.0) js += b[c] * std::log(b[c] / mid);
        }
        if (js < 0.0 && js > -1e-12) js = 0.0;
        const double w = opts.weight_by_density
                             ? density(in.pooled.points, pooled_h, s)
                             : 1.0 / static_cast<double>(in.samples.size());
        sum += js * w;
      }
      d.at(i, j) = sum;
      d.at(j, i) = sum;
    }
  }
  validate_distance_matrix(d);
  return d;
}

void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& d,
                        std::span<const int> ids) {
  if (static_cast<int>(ids.size()) != d.n)
    throw std::invalid_argument("write_distance_csv: id count does not match matrix");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "id";
  for (int id : ids) out << ',' << id;
  out << '\n';
  for (int i = 0; i < d.n; ++i) {
    out << ids[i];
    for (int j = 0; j < d.n; ++j) out << ',' << format_double(d.at(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace caml
