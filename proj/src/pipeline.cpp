#include "sei/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

void GenerationSpec::validate(std::int64_t budget) const {
  if (n_tasks < 1) throw ConfigError("n_tasks must be positive");
  if (n_instances_per_task < 1) throw ConfigError("n_instances_per_task must be positive");
  if (prompt_template_id.empty()) throw ConfigError("prompt_template_id is empty");
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  const std::int64_t requested =
      static_cast<std::int64_t>(n_tasks) * static_cast<std::int64_t>(n_instances_per_task);
  if (requested > budget) {
    throw ConfigError("generation request of " + std::to_string(requested) +
                      " instances exceeds the budget of " + std::to_string(budget));
  }
}

std::string_view category_hint(Category c) {
  switch (c) {
    case Category::kShortShort:
      return "matching a short query (a few words or one sentence) against another short text";
    case Category::kShortLong:
      return "retrieving a long, multi-sentence document for a short query";
    case Category::kLongLong:
      return "matching a long, multi-sentence query against another long document";
    case Category::kLongShort:
      return "mapping a long, multi-sentence text to a short label or phrase, as in classification";
    case Category::kBitext:
      return "pairing an English sentence with its German translation";
    case Category::kSts:
      return "judging the graded semantic similarity of two short sentences";
  }
  return "";
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prompt template '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  const std::string needle = "{" + std::string(key) + "}";
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

// LLMs habitually wrap JSON in markdown fences; strip them before parsing.
std::string_view strip_code_fences(std::string_view s) {
  std::string_view t = trim(s);
  if (t.size() >= 3 && t.substr(0, 3) == "```") {
    const std::size_t nl = t.find('\n');
    if (nl != std::string_view::npos) t = t.substr(nl + 1);
    if (t.size() >= 3 && t.substr(t.size() - 3) == "```") t = t.substr(0, t.size() - 3);
    t = trim(t);
  }
  return t;
}

std::optional<json> try_parse_json(std::string_view content) {
  const std::string_view stripped = strip_code_fences(content);
  json parsed = json::parse(stripped, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded()) return parsed;

  // Fall back to the outermost bracketed span; models often add prose around it.
  for (const char open : {'{', '['}) {
    const char close = open == '{' ? '}' : ']';
    const std::size_t b = stripped.find(open);
    const std::size_t e = stripped.rfind(close);
    if (b == std::string_view::npos || e == std::string_view::npos || e <= b) continue;
    parsed = json::parse(stripped.substr(b, e - b + 1), nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) return parsed;
  }
  return std::nullopt;
}

int count_sentences(std::string_view text) {
  int sentences = 0;
  bool in_terminator = false;
  bool any_content = false;
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') {
      if (!in_terminator && any_content) ++sentences;
      in_terminator = true;
    } else {
      if (!std::isspace(static_cast<unsigned char>(c))) any_content = true;
      in_terminator = false;
    }
  }
  // trailing clause without a terminator still counts
  std::string_view t = trim(text);
  if (!t.empty() && t.back() != '.' && t.back() != '!' && t.back() != '?') ++sentences;
  return sentences;
}

bool is_short_text(std::string_view text) {
  return count_sentences(text) <= 2 || trim(text).size() <= 160;
}

bool is_long_text(std::string_view text) { return count_sentences(text) >= 3; }

// Query/document length conventions per category; violations are counted,
// never fatal.
void check_length_conventions(const SyntheticExample& ex, PipelineCounters& counters) {
  bool query_ok = true;
  bool positive_ok = true;
  switch (ex.category) {
    case Category::kShortShort:
    case Category::kBitext:
    case Category::kSts:
      query_ok = is_short_text(ex.query);
      positive_ok = is_short_text(ex.positive);
      break;
    case Category::kShortLong:
      query_ok = is_short_text(ex.query);
      positive_ok = is_long_text(ex.positive);
      break;
    case Category::kLongLong:
      query_ok = is_long_text(ex.query);
      positive_ok = is_long_text(ex.positive);
      break;
    case Category::kLongShort:
      query_ok = is_long_text(ex.query);
      positive_ok = is_short_text(ex.positive);
      break;
  }
  if (!query_ok) counters.length_violations.fetch_add(1);
  if (!positive_ok) counters.length_violations.fetch_add(1);
}

ChatRequest make_request(const std::string& model, const std::string& prompt, double temperature,
                         std::int64_t seed) {
  ChatRequest req;
  req.model = model;
  req.messages.push_back({Role::kUser, prompt});
  req.temperature = temperature;
  req.max_tokens = 2048;
  req.seed = seed;
  return req;
}

}  // namespace

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir, const std::string& template_id) {
  PromptLibrary lib;
  lib.id_ = template_id;
  const std::filesystem::path base = dir / template_id;
  for (Category c : kAllCategories) {
    const std::string name(to_string(c));
    lib.brainstorm_[c] = read_text_file(base / ("brainstorm-" + name + ".txt"));
    lib.instance_[c] = read_text_file(base / ("instance-" + name + ".txt"));
  }
  return lib;
}

std::string PromptLibrary::brainstorm_prompt(Category category) const {
  return substitute(brainstorm_.at(category), "category_hint", category_hint(category));
}

std::string PromptLibrary::instance_prompt(Category category, const std::string& task_text) const {
  std::string prompt = substitute(instance_.at(category), "category_hint", category_hint(category));
  return substitute(std::move(prompt), "task", task_text);
}

std::vector<TaskDescription> brainstorm_tasks(const GenerationSpec& spec, Gateway& gateway,
                                              const PromptLibrary& prompts,
                                              const PipelineOptions& options,
                                              PipelineCounters& counters,
                                              const std::string& model) {
  if (spec.n_tasks < 1) throw ConfigError("n_tasks must be positive");
  const std::string prompt = prompts.brainstorm_prompt(spec.category);

  std::vector<TaskDescription> tasks;
  int consecutive_failures = 0;
  std::int64_t request_index = 0;
  while (static_cast<int>(tasks.size()) < spec.n_tasks) {
    const ChatRequest req =
        make_request(model, prompt, spec.temperature, spec.seed_base + request_index);
    ++request_index;
    counters.requests_sent.fetch_add(1);
    const ChatResponse resp = gateway.chat_complete(req);

    const auto parsed = try_parse_json(resp.content);
    bool usable = false;
    if (parsed && parsed->is_array()) {
      for (const auto& item : *parsed) {
        if (!item.is_string()) continue;
        const std::string text(trim(item.get<std::string>()));
        if (text.empty()) continue;
        TaskDescription task;
        task.category = spec.category;
        task.text = text;
        char id[64];
        std::snprintf(id, sizeof(id), "%s-t%03zu", std::string(to_string(spec.category)).c_str(),
                      tasks.size());
        task.id = id;
        tasks.push_back(std::move(task));
        usable = true;
        if (static_cast<int>(tasks.size()) >= spec.n_tasks) break;
      }
    }

    if (usable) {
      consecutive_failures = 0;
    } else {
      counters.parse_retries.fetch_add(1);
      if (++consecutive_failures > options.parse_retry_limit) break;
    }
  }

  if (tasks.empty()) {
    counters.parse_failures.fetch_add(1);
    throw GatewayError("brainstorming produced zero tasks for category '" +
                           std::string(to_string(spec.category)) + "' after all retries",
                       0, static_cast<int>(request_index));
  }
  return tasks;
}

SyntheticExample generate_instance(const TaskDescription& task, const GenerationSpec& spec,
                                   Gateway& gateway, const PromptLibrary& prompts,
                                   const PipelineOptions& options, PipelineCounters& counters,
                                   const std::string& model, std::int64_t slot_seed) {
  if (task.category != spec.category) {
    throw ValidationError("task category does not match the generation spec");
  }
  const bool mined = options.mined_negatives.count(spec.category) > 0;
  const std::string prompt = prompts.instance_prompt(spec.category, task.text);

  std::optional<json> parsed;
  for (int attempt = 0; attempt <= options.parse_retry_limit; ++attempt) {
    const ChatRequest req = make_request(model, prompt, spec.temperature, slot_seed + attempt);
    counters.requests_sent.fetch_add(1);
    const ChatResponse resp = gateway.chat_complete(req);
    parsed = try_parse_json(resp.content);
    if (parsed && parsed->is_object()) break;
    parsed.reset();
    counters.parse_retries.fetch_add(1);
  }
  if (!parsed) {
    counters.parse_failures.fetch_add(1);
    throw GatewayError("no parseable instance after " +
                           std::to_string(options.parse_retry_limit + 1) + " attempts",
                       0, options.parse_retry_limit + 1);
  }

  auto require_key = [&](const char* key) -> std::string {
    auto it = parsed->find(key);
    if (it == parsed->end() || !it->is_string()) {
      counters.schema_mismatches.fetch_add(1);
      throw ValidationError("instance response is missing string key '" + std::string(key) + "'");
    }
    return it->get<std::string>();
  };

  SyntheticExample ex;
  ex.instruction = task.text;
  ex.query = require_key("query");
  ex.positive = require_key("positive");
  if (mined) {
    ex.negative_origin = NegativeOrigin::kAbsent;  // mined in a later pass
  } else {
    ex.negative = require_key("negative");
    ex.negative_origin = NegativeOrigin::kGenerated;
  }
  ex.category = spec.category;
  ex.task_id = task.id;
  ex.generator = options.generator_tag;

  try {
    ex.validate();
  } catch (const ValidationError&) {
    counters.invariant_rejects.fetch_add(1);
    throw;
  }
  check_length_conventions(ex, counters);
  return ex;
}

std::string mine_hard_negative(const SyntheticExample& example, const Dataset& pool,
                               const EmbedderParams& encoder) {
  if (example.negative_origin != NegativeOrigin::kAbsent) {
    throw ValidationError("mine_hard_negative: example already has a negative");
  }
  std::size_t same_category = 0;
  for (const auto& ex : pool) same_category += ex.category == example.category;
  if (same_category < 2) {
    throw ValidationError("mine_hard_negative: pool needs >= 2 examples of the category");
  }

  const EmbeddingVector query_embedding = embed(encoder, {}, example.query);
  bool found = false;
  double best = 0.0;
  std::string best_text;
  for (const auto& candidate : pool) {
    if (candidate.category != example.category) continue;
    if (candidate.positive == example.positive) continue;
    const double s = similarity(query_embedding, embed(encoder, {}, candidate.positive));
    if (!found || s > best) {
      found = true;
      best = s;
      best_text = candidate.positive;
    }
  }
  if (!found) {
    throw ValidationError("mine_hard_negative: empty candidate set after excluding own positive");
  }
  return best_text;
}

Dataset generate_category(const GenerationSpec& spec, Gateway& gateway,
                          const PromptLibrary& prompts, const PipelineOptions& options,
                          PipelineCounters& counters, const std::string& model) {
  const std::vector<TaskDescription> tasks =
      brainstorm_tasks(spec, gateway, prompts, options, counters, model);

  const std::size_t slots = tasks.size() * static_cast<std::size_t>(spec.n_instances_per_task);
  std::vector<std::optional<SyntheticExample>> results(slots);

  const int derived_jobs =
      options.jobs > 0 ? options.jobs : gateway.config().max_concurrent;
  const std::size_t workers = std::min<std::size_t>(
      slots, static_cast<std::size_t>(std::max(1, derived_jobs)));

  std::atomic<std::size_t> next{0};
  auto run_slots = [&]() {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= slots) return;
      const TaskDescription& task = tasks[slot / static_cast<std::size_t>(spec.n_instances_per_task)];
      const std::int64_t slot_seed =
          spec.seed_base + 10'000 +
          static_cast<std::int64_t>(slot) * (options.parse_retry_limit + 1);
      try {
        results[slot] =
            generate_instance(task, spec, gateway, prompts, options, counters, model, slot_seed);
      } catch (const Error&) {
        // already counted; the slot stays empty
      }
    }
  };

  if (workers <= 1) {
    run_slots();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_slots);
    for (auto& th : pool) th.join();
  }

  Dataset out;
  for (auto& r : results) {
    if (r) out.push_back(std::move(*r));
  }

  if (options.mined_negatives.count(spec.category) > 0 && !out.empty()) {
    const EmbedderParams encoder =
        options.mining_encoder ? *options.mining_encoder
                               : make_random_params(FeaturizerConfig{}, 32, /*seed=*/0x5e1);
    for (std::size_t i = 0; i < out.size(); ++i) {
      try {
        out[i].negative = mine_hard_negative(out[i], out, encoder);
        out[i].negative_origin = NegativeOrigin::kMined;
      } catch (const ValidationError&) {
        counters.mining_failures.fetch_add(1);
      }
    }
  }

  out.metadata()["category"] = std::string(to_string(spec.category));
  out.metadata()["prompt_template_id"] = spec.prompt_template_id;
  return out;
}

std::string dedup_key(const SyntheticExample& example) {
  auto normalize = [](std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (char raw : trim(s)) {
      const auto c = static_cast<unsigned char>(raw);
      if (std::isspace(c)) {
        in_space = true;
        continue;
      }
      if (in_space && !out.empty()) out.push_back(' ');
      in_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
  };
  return normalize(example.query) + '\x1f' + normalize(example.positive);
}

std::pair<Dataset, std::int64_t> deduplicate(const Dataset& dataset) {
  Dataset kept;
  kept.metadata() = dataset.metadata();
  std::set<std::string> seen;
  std::int64_t removed = 0;
  for (const auto& ex : dataset) {
    if (seen.insert(dedup_key(ex)).second) {
      kept.push_back(ex);
    } else {
      ++removed;
    }
  }
  return {std::move(kept), removed};
}

CompositionReport compose_report(const Dataset& dataset) {
  CompositionReport report;
  for (Category c : kAllCategories) report.counts[c] = 0;
  for (const auto& ex : dataset) ++report.counts[ex.category];
  report.total = static_cast<std::int64_t>(dataset.size());
  return report;
}

std::string format_composition_table(const CompositionReport& report) {
  std::ostringstream out;
  out << "category      count\n";
  for (Category c : kAllCategories) {
    char line[64];
    std::snprintf(line, sizeof(line), "%-12s %7lld\n", std::string(to_string(c)).c_str(),
                  static_cast<long long>(report.counts.at(c)));
    out << line;
  }
  out << "total        " << report.total << "\n";
  out << "rejected     " << report.rejected << "\n";
  out << "dedup        " << report.dedup_removed << "\n";
  return out.str();
}

}  // namespace sei
