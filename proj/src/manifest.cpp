#include "sei/manifest.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

void require_exists(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::exists(p)) {
    throw IoError(std::string(what) + " '" + p.string() + "' does not exist");
  }
}

GatewayConfig parse_gateway(const json& obj) {
  GatewayConfig cfg;
  cfg.base_url = obj.value("base_url", cfg.base_url);
  cfg.max_concurrent = obj.value("max_concurrent", cfg.max_concurrent);
  cfg.max_retries = obj.value("max_retries", cfg.max_retries);
  cfg.backoff_base_ms = obj.value("backoff_base_ms", cfg.backoff_base_ms);
  cfg.request_timeout_ms = obj.value("request_timeout_ms", cfg.request_timeout_ms);
  cfg.validate();
  return cfg;
}

TrainConfig parse_train(const json& obj) {
  TrainConfig cfg;
  cfg.batch_size = obj.value("batch_size", cfg.batch_size);
  cfg.learning_rate = obj.value("learning_rate", cfg.learning_rate);
  cfg.warmup_steps = obj.value("warmup_steps", cfg.warmup_steps);
  cfg.weight_decay = obj.value("weight_decay", cfg.weight_decay);
  cfg.epochs = obj.value("epochs", cfg.epochs);
  cfg.temperature = obj.value("temperature", cfg.temperature);
  cfg.negatives_per_example = obj.value("negatives_per_example", cfg.negatives_per_example);
  cfg.in_batch_negatives = obj.value("in_batch_negatives", cfg.in_batch_negatives);
  if (obj.contains("optimizer")) {
    cfg.optimizer = optimizer_from_string(obj.at("optimizer").get<std::string>());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

EmbedderParams ExperimentManifest::make_base_params() const {
  EmbedderParams params = make_random_params(featurizer, embed_dim, seed, init_scale);
  params.instruction_mode = instruction_mode;
  return params;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }

  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");

  ExperimentManifest m;
  try {
    m.name = obj.value("name", std::string("experiment"));
    m.seed = obj.value("seed", 0ULL);
    m.output_dir = resolve(base, obj.value("output_dir", std::string("out")));

    if (obj.contains("gateway")) m.gateway = parse_gateway(obj.at("gateway"));
    m.api_key_env = obj.contains("gateway")
                        ? obj.at("gateway").value("api_key_env", m.api_key_env)
                        : m.api_key_env;
    if (const char* key = std::getenv(m.api_key_env.c_str()); key != nullptr) {
      m.gateway.api_key = key;
    }
    m.model = obj.value("model", m.model);

    if (obj.contains("template_dir")) {
      m.template_dir = resolve(base, obj.at("template_dir").get<std::string>());
    }
    m.generation_budget = obj.value("generation_budget", m.generation_budget);
    m.parse_retry_limit = obj.value("parse_retry_limit", m.parse_retry_limit);
    if (obj.contains("generation")) {
      for (const auto& g : obj.at("generation")) {
        GenerationSpec spec;
        spec.category = category_from_string(g.at("category").get<std::string>());
        spec.n_tasks = g.value("n_tasks", spec.n_tasks);
        spec.n_instances_per_task = g.value("n_instances_per_task", spec.n_instances_per_task);
        spec.prompt_template_id = g.value("prompt_template_id", spec.prompt_template_id);
        spec.temperature = g.value("temperature", spec.temperature);
        spec.seed_base = g.value("seed_base", static_cast<std::int64_t>(m.seed));
        spec.validate(m.generation_budget);
        if (g.value("negatives", std::string("generated")) == "mined") {
          m.mined_negatives.insert(spec.category);
        }
        m.generation.push_back(std::move(spec));
      }
    }

    if (obj.contains("embedder")) {
      const json& e = obj.at("embedder");
      m.featurizer.min_n = e.value("min_n", m.featurizer.min_n);
      m.featurizer.max_n = e.value("max_n", m.featurizer.max_n);
      m.featurizer.hash_buckets = e.value("hash_buckets", m.featurizer.hash_buckets);
      m.featurizer.lowercase = e.value("lowercase", m.featurizer.lowercase);
      m.featurizer.validate();
      m.embed_dim = e.value("dim", m.embed_dim);
      if (e.contains("instruction_mode")) {
        m.instruction_mode =
            instruction_mode_from_string(e.at("instruction_mode").get<std::string>());
      }
      m.init_scale = e.value("init_scale", m.init_scale);
      if (m.init_scale <= 0.0) throw ConfigError("init_scale must be positive");
    }

    if (obj.contains("train")) m.train = parse_train(obj.at("train"));

    if (obj.contains("eval_tasks")) {
      for (const auto& t : obj.at("eval_tasks")) {
        m.eval_tasks.push_back(resolve(base, t.get<std::string>()));
      }
    }
    if (obj.contains("influence_categories")) {
      for (const auto& c : obj.at("influence_categories")) {
        m.influence_categories.push_back(category_from_string(c.get<std::string>()));
      }
    }
    m.alpha = obj.value("alpha", m.alpha);
    if (obj.contains("base_dataset")) {
      m.base_dataset = resolve(base, obj.at("base_dataset").get<std::string>());
    }
    m.jobs = obj.value("jobs", m.jobs);
    if (m.jobs < 1) throw ConfigError("jobs must be >= 1");
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + path.string() + "': " + e.what());
  }

  if (m.alpha <= 0.0 || m.alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");

  for (const auto& t : m.eval_tasks) require_exists(t, "eval task file");
  if (m.base_dataset) require_exists(*m.base_dataset, "base dataset");
  if (!m.generation.empty()) require_exists(m.template_dir, "template directory");

  if (!m.generation.empty() && !m.influence_categories.empty()) {
    for (Category c : m.influence_categories) {
      bool covered = false;
      for (const auto& spec : m.generation) covered |= spec.category == c;
      if (!covered) {
        throw ConfigError("influence category '" + std::string(to_string(c)) +
                          "' has no generation spec");
      }
    }
  }
  return m;
}

}  // namespace sei
