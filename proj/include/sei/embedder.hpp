#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "sei/core.hpp"

namespace sei {

// Pinned seed for the feature hash. Changing it invalidates every checkpoint.
inline constexpr std::uint64_t kDefaultHashSeed = 0x5e1f00d5ULL;

// FNV-1a over the bytes of `s`, offset basis mixed with `seed`. Stable across
// platforms and runs by construction.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = kDefaultHashSeed);

struct FeaturizerConfig {
  int min_n = 3;
  int max_n = 5;
  std::uint32_t hash_buckets = 4096;  // power of two
  bool lowercase = true;
  std::uint64_t hash_seed = kDefaultHashSeed;

  void validate() const;
};

// Sparse count vector, entries sorted by bucket index.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  double l1_norm() const;
  bool empty() const { return entries.empty(); }
};

// Hashed character n-gram counts, L1-normalized so the values average to a
// per-slot weight (mean pooling at the feature level). Empty or
// whitespace-only text maps to the empty (zero) vector by convention.
SparseVector featurize(const FeaturizerConfig& config, std::string_view text);

enum class InstructionMode { kPrepend, kIgnore };

std::string_view to_string(InstructionMode m);
InstructionMode instruction_mode_from_string(std::string_view name);

// Linear encoder: embedding = projection^T * featurize(text). The projection
// is stored row-major, projection[bucket * dim + k].
struct EmbedderParams {
  FeaturizerConfig featurizer;
  int dim = 32;
  InstructionMode instruction_mode = InstructionMode::kPrepend;
  std::vector<double> projection;

  void validate() const;

  double at(std::uint32_t bucket, int k) const {
    return projection[static_cast<std::size_t>(bucket) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)];
  }
};

// Uniform init in [-scale, scale], deterministic for a given seed.
EmbedderParams make_random_params(const FeaturizerConfig& config, int dim, std::uint64_t seed,
                                  double scale = 0.1);

// Effective text is instruction + '\n' + text when instruction_mode ==
// prepend and the instruction is non-empty; otherwise just text. Document
// sides pass an empty instruction, so they are never affected by it.
std::vector<double> embed(const EmbedderParams& params, std::string_view instruction,
                          std::string_view text);

// Cosine similarity in [-1, 1]. Zero vectors compare as 0 by convention.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// JSON checkpoint with a format-version field; doubles round-trip exactly.
void save_params(const EmbedderParams& params, const std::filesystem::path& path);
EmbedderParams load_params(const std::filesystem::path& path);

// Order-sensitive digest of the projection and config, used to assert that
// evaluation never mutates a checkpoint.
std::uint64_t params_checksum(const EmbedderParams& params);

bool params_equal(const EmbedderParams& a, const EmbedderParams& b);

}  // namespace sei
