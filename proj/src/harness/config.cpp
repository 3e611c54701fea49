#include "caml/harness/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace caml::harness {

namespace {

using nlohmann::json;

// Applies `fn` per known key and rejects everything else.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object())
      throw std::invalid_argument("config: " + scope_ + " must be a JSON object");
  }

  template <typename T>
  void field(const char* key, T& target) {
    known_.insert(key);
    if (j_.contains(key)) {
      try {
        target = j_.at(key).get<T>();
      } catch (const json::exception&) {
        throw std::invalid_argument("config: bad value for " + scope_ + "." + key);
      }
    }
  }

  void vec2_field(const char* key, Vec2& target) {
    known_.insert(key);
    if (j_.contains(key)) {
      const auto& v = j_.at(key);
      if (!v.is_array() || v.size() != 2)
        throw std::invalid_argument("config: " + scope_ + "." + key + " must be [x, y]");
      target.x = v[0].get<double>();
      target.y = v[1].get<double>();
    }
  }

  const json* object(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.count(key))
        throw std::invalid_argument("config: unknown key " + scope_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> known_;
};

}  // namespace

std::filesystem::path ExperimentConfig::resolved_population_file() const {
  if (!population_file.empty()) return population_file;
  return std::filesystem::path(out_dir) / "population.json";
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  ObjectReader top(j, "config");
  top.field("master_seed", cfg.master_seed);
  top.field("out_dir", cfg.out_dir);
  top.field("population_file", cfg.population_file);
  if (const auto* sub = top.object("population")) {
    ObjectReader r(*sub, "population");
    r.field("num_latent", cfg.population.num_latent);
    r.field("variants_per_latent", cfg.population.variants_per_latent);
    r.field("variance_magnitude", cfg.population.variance_magnitude);
    r.field("seed", cfg.population.seed);
    r.finish();
  }
  if (const auto* sub = top.object("env")) {
    ObjectReader r(*sub, "env");
    r.field("step_scale", cfg.env.step_scale);
    r.vec2_field("goal", cfg.env.goal);
    r.field("horizon", cfg.env.horizon);
    r.field("goal_radius", cfg.env.goal_radius);
    r.finish();
  }
  if (const auto* sub = top.object("policy")) {
    ObjectReader r(*sub, "policy");
    r.field("layout", cfg.policy.layout);
    r.field("init_seed", cfg.policy.init_seed);
    r.finish();
  }
  if (const auto* sub = top.object("train")) {
    ObjectReader r(*sub, "train");
    r.field("alpha", cfg.train.alpha);
    r.field("gamma", cfg.train.gamma);
    r.field("rollouts", cfg.train.rollouts);
    r.finish();
  }
  if (const auto* sub = top.object("study")) {
    ObjectReader r(*sub, "study");
    r.field("updates", cfg.study.updates);
    r.field("checkpoint_every", cfg.study.checkpoint_every);
    r.field("k", cfg.study.k);
    r.field("m_samples", cfg.study.m_samples);
    r.finish();
  }
  if (const auto* sub = top.object("caml")) {
    ObjectReader r(*sub, "caml");
    r.field("n", cfg.caml.n);
    r.field("k", cfg.caml.k);
    r.field("total_iterations", cfg.caml.total_iterations);
    r.field("m_samples", cfg.caml.m_samples);
    r.finish();
  }
  if (const auto* sub = top.object("reptile")) {
    ObjectReader r(*sub, "reptile");
    r.field("inner_steps", cfg.reptile.inner_steps);
    r.field("epsilon", cfg.reptile.epsilon);
    r.field("total_iterations", cfg.reptile.total_iterations);
    r.finish();
  }
  if (const auto* sub = top.object("pretrain")) {
    ObjectReader r(*sub, "pretrain");
    r.field("total_iterations", cfg.pretrain.total_iterations);
    r.field("unmatched_support_index", cfg.pretrain.unmatched_support_index);
    r.finish();
  }
  if (const auto* sub = top.object("evaluate")) {
    ObjectReader r(*sub, "evaluate");
    r.field("num_updates", cfg.evaluate.num_updates);
    r.field("seeds", cfg.evaluate.seeds);
    r.field("query_split", cfg.evaluate.query_split);
    r.field("num_query_types", cfg.evaluate.num_query_types);
    r.field("query_seed", cfg.evaluate.query_seed);
    r.finish();
  }
  top.finish();
  validate_config(cfg);
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["master_seed"] = cfg.master_seed;
  j["out_dir"] = cfg.out_dir;
  j["population_file"] = cfg.population_file;
  j["population"] = {{"num_latent", cfg.population.num_latent},
                     {"variants_per_latent", cfg.population.variants_per_latent},
                     {"variance_magnitude", cfg.population.variance_magnitude},
                     {"seed", cfg.population.seed}};
  j["env"] = {{"step_scale", cfg.env.step_scale},
              {"goal", {cfg.env.goal.x, cfg.env.goal.y}},
              {"horizon", cfg.env.horizon},
              {"goal_radius", cfg.env.goal_radius}};
  j["policy"] = {{"layout", cfg.policy.layout}, {"init_seed", cfg.policy.init_seed}};
  j["train"] = {{"alpha", cfg.train.alpha},
                {"gamma", cfg.train.gamma},
                {"rollouts", cfg.train.rollouts}};
  j["study"] = {{"updates", cfg.study.updates},
                {"checkpoint_every", cfg.study.checkpoint_every},
                {"k", cfg.study.k},
                {"m_samples", cfg.study.m_samples}};
  j["caml"] = {{"n", cfg.caml.n},
               {"k", cfg.caml.k},
               {"total_iterations", cfg.caml.total_iterations},
               {"m_samples", cfg.caml.m_samples}};
  j["reptile"] = {{"inner_steps", cfg.reptile.inner_steps},
                  {"epsilon", cfg.reptile.epsilon},
                  {"total_iterations", cfg.reptile.total_iterations}};
  j["pretrain"] = {{"total_iterations", cfg.pretrain.total_iterations},
                   {"unmatched_support_index", cfg.pretrain.unmatched_support_index}};
  j["evaluate"] = {{"num_updates", cfg.evaluate.num_updates},
                   {"seeds", cfg.evaluate.seeds},
                   {"query_split", cfg.evaluate.query_split},
                   {"num_query_types", cfg.evaluate.num_query_types},
                   {"query_seed", cfg.evaluate.query_seed}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config file is not valid JSON: " + path.string() + ": " +
                                e.what());
  }
  return config_from_json(j);
}

void validate_config(const ExperimentConfig& cfg) {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (cfg.population.num_latent < 1 || cfg.population.num_latent > 24)
    fail("population.num_latent must be in [1, 24]");
  if (cfg.population.variants_per_latent < 1) fail("population.variants_per_latent must be >= 1");
  if (cfg.population.variance_magnitude < 0.0 || cfg.population.variance_magnitude >= 1.0)
    fail("population.variance_magnitude must be in [0, 1)");
  if (cfg.env.horizon < 1) fail("env.horizon must be >= 1");
  if (!(cfg.env.goal_radius > 0.0)) fail("env.goal_radius must be positive");
  if (!(cfg.train.alpha > 0.0)) fail("train.alpha must be positive");
  if (cfg.train.gamma < 0.0 || cfg.train.gamma > 1.0) fail("train.gamma must be in [0, 1]");
  if (cfg.train.rollouts < 1) fail("train.rollouts must be >= 1");
  if (cfg.study.updates < 1) fail("study.updates must be >= 1");
  if (cfg.study.checkpoint_every < 1 || cfg.study.updates % cfg.study.checkpoint_every != 0)
    fail("study.checkpoint_every must divide study.updates");
  if (cfg.study.k < 1) fail("study.k must be >= 1");
  if (cfg.study.m_samples < 1) fail("study.m_samples must be >= 1");
  if (cfg.caml.k < 1 || cfg.caml.n < cfg.caml.k) fail("caml: need n >= k >= 1");
  if (cfg.caml.total_iterations < cfg.caml.n) fail("caml: need total_iterations >= n");
  if (cfg.caml.m_samples < 1) fail("caml.m_samples must be >= 1");
  if (cfg.reptile.inner_steps <= 1) fail("reptile.inner_steps must be > 1");
  if (cfg.reptile.total_iterations < 1) fail("reptile.total_iterations must be >= 1");
  if (cfg.pretrain.total_iterations < 1) fail("pretrain.total_iterations must be >= 1");
  if (cfg.pretrain.unmatched_support_index < 0) fail("pretrain.unmatched_support_index must be >= 0");
  if (cfg.evaluate.num_updates < 0) fail("evaluate.num_updates must be >= 0");
  if (cfg.evaluate.seeds.empty()) fail("evaluate.seeds must not be empty");
  if (cfg.evaluate.num_query_types < 1) fail("evaluate.num_query_types must be >= 1");
  parse_query_split(cfg.evaluate.query_split);
}

QuerySplit parse_query_split(const std::string& name) {
  if (name == "unseen-latent") return QuerySplit::unseen_latent;
  if (name == "unseen-variant") return QuerySplit::unseen_variant;
  throw std::invalid_argument(
      "config: evaluate.query_split must be 'unseen-latent' or 'unseen-variant', got '" + name +
      "'");
}

}  // namespace caml::harness
