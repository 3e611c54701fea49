#include "caml/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace caml {

namespace {

struct LayerView {
  std::size_t w_off;
  std::size_t b_off;
  int in;
  int out;
};

std::vector<LayerView> layer_views(std::span<const int> layout) {
  if (layout.size() < 2) throw std::invalid_argument("policy layout needs at least two layers");
  if (layout.front() != 2 || layout.back() != kNumActions)
    throw std::invalid_argument("policy layout must start at 2 and end at 4");
  std::vector<LayerView> views;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    LayerView v;
    v.in = layout[l];
    v.out = layout[l + 1];
    v.w_off = off;
    v.b_off = off + static_cast<std::size_t>(v.in) * v.out;
    off = v.b_off + v.out;
    views.push_back(v);
  }
  return views;
}

void check_sized(const PolicyParams& p) {
  if (p.weights.size() != param_count(p.layout))
    throw std::invalid_argument("policy weight buffer does not match layout");
}

// Pre-activations and activations per layer, reused across backprop.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts.back() = logits
};

void forward_trace(const PolicyParams& p, const std::vector<LayerView>& views, Vec2 state,
                   ForwardTrace& trace) {
  trace.acts.assign(views.size() + 1, {});
  trace.acts[0] = {state.x, state.y};
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    const auto& in = trace.acts[l];
    auto& out = trace.acts[l + 1];
    out.assign(v.out, 0.0);
    for (int o = 0; o < v.out; ++o) {
      double z = p.weights[v.b_off + o];
      const double* w = &p.weights[v.w_off + static_cast<std::size_t>(o) * v.in];
      for (int i = 0; i < v.in; ++i) z += w[i] * in[i];
      out[o] = (l + 1 < views.size()) ? std::tanh(z) : z;
    }
  }
}

std::array<double, kNumActions> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::array<double, kNumActions> p{};
  double sum = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    p[a] = std::exp(logits[a] - mx);
    sum += p[a];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Accumulates coeff * grad log pi(action | state) into grad.
void accumulate_logp_gradient(const PolicyParams& p, const std::vector<LayerView>& views,
                              const ForwardTrace& trace, int action, double coeff,
                              std::vector<double>& grad) {
  const auto& logits = trace.acts.back();
  const auto probs = softmax(logits);
  std::vector<double> delta(logits.size());
  for (int a = 0; a < kNumActions; ++a) delta[a] = ((a == action) ? 1.0 : 0.0) - probs[a];

  for (std::size_t li = views.size(); li-- > 0;) {
    const LayerView& v = views[li];
    const auto& in = trace.acts[li];
    std::vector<double> prev(v.in, 0.0);
    for (int o = 0; o < v.out; ++o) {
      const double d = delta[o];
      grad[v.b_off + o] += coeff * d;
      double* gw = &grad[v.w_off + static_cast<std::size_t>(o) * v.in];
      const double* w = &p.weights[v.w_off + static_cast<std::size_t>(o) * v.in];
      for (int i = 0; i < v.in; ++i) {
        gw[i] += coeff * d * in[i];
        prev[i] += w[i] * d;
      }
    }
    if (li > 0) {
      // tanh backward: in[] holds the activated values of the previous layer.
      for (int i = 0; i < v.in; ++i) prev[i] *= 1.0 - in[i] * in[i];
      delta = std::move(prev);
    }
  }
}

void trajectory_gradient(const PolicyParams& p, const std::vector<LayerView>& views,
                         const Trajectory& traj, std::span<const double> advantages,
                         std::vector<double>& grad) {
  ForwardTrace trace;
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    forward_trace(p, views, traj.states[t], trace);
    accumulate_logp_gradient(p, views, trace, traj.actions[t], advantages[t], grad);
  }
}

std::vector<double> batch_gradient(const PolicyParams& params, std::span<const Trajectory> batch,
                                   double gamma, bool parallel) {
  if (batch.empty()) throw std::invalid_argument("reinforce_gradient: batch is empty");
  check_sized(params);
  const auto views = layer_views(params.layout);

  std::vector<std::vector<double>> returns(batch.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    returns[i] = discounted_returns(batch[i].rewards, gamma);
    for (double g : returns[i]) sum += g;
    count += returns[i].size();
  }
  const double baseline = count ? sum / static_cast<double>(count) : 0.0;
  for (auto& r : returns)
    for (double& g : r) g -= baseline;

  std::vector<std::vector<double>> per(batch.size());
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
      per[i].assign(params.weights.size(), 0.0);
      trajectory_gradient(params, views, batch[i], returns[i], per[i]);
    }
  } else {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      per[i].assign(params.weights.size(), 0.0);
      trajectory_gradient(params, views, batch[i], returns[i], per[i]);
    }
  }

  std::vector<double> grad(params.weights.size(), 0.0);
  for (const auto& g : per)
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= scale;
  return grad;
}

}  // namespace

std::size_t param_count(std::span<const int> layout) {
  const auto views = layer_views(layout);
  const LayerView& last = views.back();
  return last.b_off + last.out;
}

PolicyParams init_params(std::uint64_t seed, std::vector<int> layout) {
  PolicyParams p;
  p.layout = std::move(layout);
  p.weights.assign(param_count(p.layout), 0.0);
  const auto views = layer_views(p.layout);
  Rng rng(seed);
  for (const LayerView& v : views) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(v.in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(v.in) * v.out; ++i)
      p.weights[v.w_off + i] = rng.uniform(-scale, scale);
  }
  return p;
}

PolicyParams zero_params(std::vector<int> layout) {
  PolicyParams p;
  p.layout = std::move(layout);
  p.weights.assign(param_count(p.layout), 0.0);
  return p;
}

std::array<double, kNumActions> forward(const PolicyParams& params, Vec2 state) {
  check_sized(params);
  const auto views = layer_views(params.layout);
  ForwardTrace trace;
  forward_trace(params, views, state, trace);
  return softmax(trace.acts.back());
}

double episode_return(const Trajectory& traj) {
  return std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
}

Trajectory collect_trajectory(const PolicyParams& params, const EntityType& entity,
                              const EnvConfig& env, Rng& rng) {
  Trajectory traj;
  traj.entity_id = entity.id;
  EnvState state = reset();
  traj.states.push_back(state.position);
  while (!is_done(state, env)) {
    const auto probs = forward(params, state.position);
    const int a = rng.categorical(probs);
    const StepResult r = step(state, a, entity, env);
    traj.actions.push_back(a);
    traj.rewards.push_back(r.reward);
    traj.states.push_back(r.next_state.position);
    state = r.next_state;
  }
  return traj;
}

std::vector<Trajectory> collect_batch(const PolicyParams& params, const EntityType& entity,
                                      const EnvConfig& env, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("collect_batch: count must be >= 1");
  const std::uint64_t base = rng.next_u64();
  std::vector<Trajectory> out(count);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < count; ++r) {
    Rng stream(derive_seed(base, static_cast<std::uint64_t>(r)));
    out[r] = collect_trajectory(params, entity, env, stream);
  }
  return out;
}

std::vector<Trajectory> collect_batch_serial(const PolicyParams& params, const EntityType& entity,
                                             const EnvConfig& env, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("collect_batch_serial: count must be >= 1");
  const std::uint64_t base = rng.next_u64();
  std::vector<Trajectory> out(count);
  for (int r = 0; r < count; ++r) {
    Rng stream(derive_seed(base, static_cast<std::uint64_t>(r)));
    out[r] = collect_trajectory(params, entity, env, stream);
  }
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

std::vector<double> reinforce_gradient(const PolicyParams& params,
                                       std::span<const Trajectory> batch, double gamma) {
  return batch_gradient(params, batch, gamma, true);
}

std::vector<double> reinforce_gradient_serial(const PolicyParams& params,
                                              std::span<const Trajectory> batch, double gamma) {
  return batch_gradient(params, batch, gamma, false);
}

PolicyParams reinforce_update(const PolicyParams& params, std::span<const Trajectory> batch,
                              const TrainConfig& cfg) {
  if (cfg.alpha <= 0.0) throw std::invalid_argument("TrainConfig.alpha must be positive");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0)
    throw std::invalid_argument("TrainConfig.gamma must be in [0, 1]");
  const auto grad = reinforce_gradient(params, batch, cfg.gamma);
  PolicyParams out = params;
  for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += cfg.alpha * grad[i];
  return out;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  check_sized(params);
  nlohmann::json j;
  j["format_version"] = 1;
  j["layout"] = params.layout;
  j["weights"] = params.weights;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PolicyParams load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("policy checkpoint not found: " + path.string());
  nlohmann::json j;
  in >> j;
  PolicyParams p;
  p.layout = j.at("layout").get<std::vector<int>>();
  p.weights = j.at("weights").get<std::vector<double>>();
  check_sized(p);
  return p;
}

}  // namespace caml
