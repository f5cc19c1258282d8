#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sei/core.hpp"
#include "sei/embedder.hpp"
#include "sei/gateway.hpp"

namespace sei {

struct GenerationSpec {
  Category category = Category::kShortShort;
  int n_tasks = 1;
  int n_instances_per_task = 1;
  std::string prompt_template_id = "e5-v1";
  double temperature = 0.7;
  std::int64_t seed_base = 0;

  // Throws when counts are non-positive or n_tasks * n_instances_per_task
  // exceeds the budget.
  void validate(std::int64_t budget) const;
};

struct CompositionReport {
  std::map<Category, std::int64_t> counts;  // zero-filled for all six categories
  std::int64_t total = 0;
  std::int64_t rejected = 0;
  std::int64_t dedup_removed = 0;
};

// Pipeline bookkeeping, updated concurrently by generation workers.
struct PipelineCounters {
  std::atomic<std::int64_t> requests_sent{0};
  std::atomic<std::int64_t> parse_retries{0};
  std::atomic<std::int64_t> parse_failures{0};  // slots abandoned after all retries
  std::atomic<std::int64_t> schema_mismatches{0};
  std::atomic<std::int64_t> invariant_rejects{0};
  std::atomic<std::int64_t> length_violations{0};
  std::atomic<std::int64_t> mining_failures{0};
};

struct PipelineOptions {
  int parse_retry_limit = 3;
  // Categories whose hard negative is mined from the generated pool instead
  // of taken from the model output.
  std::set<Category> mined_negatives;
  std::string generator_tag = "unknown";
  // Worker threads for instance generation; 0 derives the count from the
  // gateway's max_concurrent (1 keeps the response->slot mapping
  // deterministic against an ordered mock script).
  int jobs = 0;
  // Encoder used for hard-negative mining; defaults to a fixed-seed random
  // projection when unset.
  std::optional<EmbedderParams> mining_encoder;
};

// Brainstorm and instance templates for each category, loaded from
// <dir>/<template_id>/{brainstorm,instance}-<category>.txt. Placeholders:
// {task} (instance only) and {category_hint}.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir, const std::string& template_id);

  std::string brainstorm_prompt(Category category) const;
  std::string instance_prompt(Category category, const std::string& task_text) const;

  const std::string& id() const { return id_; }

 private:
  std::string id_;
  std::map<Category, std::string> brainstorm_;
  std::map<Category, std::string> instance_;
};

// One-phrase description of each category, substituted for {category_hint}.
std::string_view category_hint(Category c);

// Stage 1: asks for JSON lists of task descriptions until n_tasks are
// collected; unparseable responses are retried up to the parse-retry limit.
// Throws GatewayError when no tasks could be obtained at all.
std::vector<TaskDescription> brainstorm_tasks(const GenerationSpec& spec, Gateway& gateway,
                                              const PromptLibrary& prompts,
                                              const PipelineOptions& options,
                                              PipelineCounters& counters,
                                              const std::string& model);

// Stage 2: generates one validated example for a task. Throws ValidationError
// on schema-key mismatch or invariant violation and GatewayError when no
// parseable response arrived within the retry budget.
SyntheticExample generate_instance(const TaskDescription& task, const GenerationSpec& spec,
                                   Gateway& gateway, const PromptLibrary& prompts,
                                   const PipelineOptions& options, PipelineCounters& counters,
                                   const std::string& model, std::int64_t slot_seed);

// Full per-category pipeline: brainstorm, fan out instance generation over
// (task, instance) slots, then mine negatives when configured. Slot order is
// preserved in the output regardless of worker interleaving.
Dataset generate_category(const GenerationSpec& spec, Gateway& gateway,
                          const PromptLibrary& prompts, const PipelineOptions& options,
                          PipelineCounters& counters, const std::string& model);

// Most similar pool positive (by cosine over plain-text embeddings) that is
// not the example's own positive. Throws when the candidate set is empty.
std::string mine_hard_negative(const SyntheticExample& example, const Dataset& pool,
                               const EmbedderParams& encoder);

// Case-folded, whitespace-collapsed "query\x1fpositive" used by deduplicate.
std::string dedup_key(const SyntheticExample& example);

// Keeps the first occurrence of each dedup key, preserving order otherwise.
std::pair<Dataset, std::int64_t> deduplicate(const Dataset& dataset);

CompositionReport compose_report(const Dataset& dataset);

// Aligned per-category table for stdout.
std::string format_composition_table(const CompositionReport& report);

}  // namespace sei
