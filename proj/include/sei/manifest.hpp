#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sei/embedder.hpp"
#include "sei/gateway.hpp"
#include "sei/pipeline.hpp"
#include "sei/trainer.hpp"

namespace sei {

// One experiment, end to end. Loaded from a JSON file; relative paths are
// resolved against the manifest's directory. The gateway API key comes from
// the environment variable named by api_key_env, never from the file.
struct ExperimentManifest {
  std::string name;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  GatewayConfig gateway;
  std::string api_key_env = "SEI_API_KEY";
  std::string model = "llama-3.1-8b-instruct";

  std::filesystem::path template_dir;
  std::int64_t generation_budget = 100000;
  std::vector<GenerationSpec> generation;
  std::set<Category> mined_negatives;
  int parse_retry_limit = 3;

  FeaturizerConfig featurizer;
  int embed_dim = 32;
  InstructionMode instruction_mode = InstructionMode::kPrepend;
  double init_scale = 0.1;

  TrainConfig train;

  std::vector<std::filesystem::path> eval_tasks;
  std::vector<Category> influence_categories;
  double alpha = 0.05;
  std::optional<std::filesystem::path> base_dataset;
  int jobs = 1;

  EmbedderParams make_base_params() const;
};

// Parses and validates a manifest: referenced files must exist, alpha in
// (0, 1), influence categories covered by the generation specs when any are
// declared.
ExperimentManifest load_manifest(const std::filesystem::path& path);

}  // namespace sei
