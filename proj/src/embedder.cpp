#include "sei/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sei/error.hpp"
#include "sei/rng.hpp"

namespace sei {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;

bool is_power_of_two(std::uint32_t x) { return x != 0 && (x & (x - 1)) == 0; }
}  // namespace

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void FeaturizerConfig::validate() const {
  if (min_n < 1 || max_n < min_n || max_n > 8) {
    throw ConfigError("n_gram_range must satisfy 1 <= min_n <= max_n <= 8");
  }
  if (hash_buckets < 2 || !is_power_of_two(hash_buckets)) {
    throw ConfigError("hash_buckets must be a power of two >= 2");
  }
}

double SparseVector::l1_norm() const {
  double s = 0.0;
  for (const auto& [idx, v] : entries) s += std::abs(v);
  return s;
}

SparseVector featurize(const FeaturizerConfig& config, std::string_view text) {
  config.validate();
  const std::string_view trimmed = trim(text);
  SparseVector out;
  if (trimmed.empty()) return out;

  std::string buf;
  std::string_view effective = trimmed;
  if (config.lowercase) {
    buf.reserve(trimmed.size());
    for (char c : trimmed) {
      buf.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    effective = buf;
  }

  const std::uint32_t mask = config.hash_buckets - 1;
  // std::map keeps the entries sorted by bucket; counts are exact integers.
  std::map<std::uint32_t, double> counts;
  double total = 0.0;
  for (int n = config.min_n; n <= config.max_n; ++n) {
    if (effective.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= effective.size(); ++i) {
      const std::uint32_t bucket =
          static_cast<std::uint32_t>(fnv1a64(effective.substr(i, static_cast<std::size_t>(n)),
                                             config.hash_seed)) & mask;
      counts[bucket] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) return out;

  out.entries.reserve(counts.size());
  for (const auto& [idx, c] : counts) out.entries.emplace_back(idx, c / total);
  return out;
}

std::string_view to_string(InstructionMode m) {
  return m == InstructionMode::kPrepend ? "prepend" : "ignore";
}

InstructionMode instruction_mode_from_string(std::string_view name) {
  if (name == "prepend") return InstructionMode::kPrepend;
  if (name == "ignore") return InstructionMode::kIgnore;
  throw ConfigError("unknown instruction_mode: '" + std::string(name) + "'");
}

void EmbedderParams::validate() const {
  featurizer.validate();
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  const std::size_t expect =
      static_cast<std::size_t>(featurizer.hash_buckets) * static_cast<std::size_t>(dim);
  if (projection.size() != expect) {
    throw ConfigError("projection has " + std::to_string(projection.size()) +
                      " entries, expected " + std::to_string(expect));
  }
  for (double v : projection) {
    if (!std::isfinite(v)) throw ValidationError("projection contains a non-finite entry");
  }
}

EmbedderParams make_random_params(const FeaturizerConfig& config, int dim, std::uint64_t seed,
                                  double scale) {
  config.validate();
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  EmbedderParams p;
  p.featurizer = config;
  p.dim = dim;
  p.projection.resize(static_cast<std::size_t>(config.hash_buckets) * static_cast<std::size_t>(dim));
  Rng rng(seed);
  for (double& v : p.projection) v = (rng.next_double() * 2.0 - 1.0) * scale;
  return p;
}

std::vector<double> embed(const EmbedderParams& params, std::string_view instruction,
                          std::string_view text) {
  SparseVector f;
  if (params.instruction_mode == InstructionMode::kPrepend && !trim(instruction).empty()) {
    std::string effective;
    effective.reserve(instruction.size() + 1 + text.size());
    effective.append(instruction);
    effective.push_back('\n');
    effective.append(text);
    f = featurize(params.featurizer, effective);
  } else {
    f = featurize(params.featurizer, text);
  }

  std::vector<double> e(static_cast<std::size_t>(params.dim), 0.0);
  const int d = params.dim;
  for (const auto& [bucket, w] : f.entries) {
    const double* row = params.projection.data() +
                        static_cast<std::size_t>(bucket) * static_cast<std::size_t>(d);
    for (int k = 0; k < d; ++k) e[static_cast<std::size_t>(k)] += w * row[k];
  }
  return e;
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw ValidationError("similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double s = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(s, -1.0, 1.0);
}

void save_params(const EmbedderParams& params, const std::filesystem::path& path) {
  params.validate();
  json obj;
  obj["format_version"] = kCheckpointVersion;
  obj["featurizer"] = {
      {"min_n", params.featurizer.min_n},
      {"max_n", params.featurizer.max_n},
      {"hash_buckets", params.featurizer.hash_buckets},
      {"lowercase", params.featurizer.lowercase},
      {"hash_seed", params.featurizer.hash_seed},
  };
  obj["dim"] = params.dim;
  obj["instruction_mode"] = std::string(to_string(params.instruction_mode));
  obj["projection"] = params.projection;

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint '" + path.string() + "' for writing");
  out << obj.dump() << '\n';
  out.flush();
  if (!out) throw IoError("I/O error while writing checkpoint '" + path.string() + "'");
}

EmbedderParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "' for reading");
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (obj.value("format_version", -1) != kCheckpointVersion) {
    throw ValidationError("checkpoint '" + path.string() + "' has unsupported format_version");
  }

  EmbedderParams p;
  const auto& f = obj.at("featurizer");
  p.featurizer.min_n = f.at("min_n").get<int>();
  p.featurizer.max_n = f.at("max_n").get<int>();
  p.featurizer.hash_buckets = f.at("hash_buckets").get<std::uint32_t>();
  p.featurizer.lowercase = f.at("lowercase").get<bool>();
  p.featurizer.hash_seed = f.at("hash_seed").get<std::uint64_t>();
  p.dim = obj.at("dim").get<int>();
  p.instruction_mode = instruction_mode_from_string(obj.at("instruction_mode").get<std::string>());
  p.projection = obj.at("projection").get<std::vector<double>>();
  p.validate();
  return p;
}

std::uint64_t params_checksum(const EmbedderParams& params) {
  std::uint64_t h = fnv1a64(to_string(params.instruction_mode), 0);
  h ^= fnv1a64("", params.featurizer.hash_seed) * 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(static_cast<std::uint64_t>(params.featurizer.min_n));
  mix(static_cast<std::uint64_t>(params.featurizer.max_n));
  mix(params.featurizer.hash_buckets);
  mix(static_cast<std::uint64_t>(params.featurizer.lowercase));
  mix(static_cast<std::uint64_t>(params.dim));
  for (double v : params.projection) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  return h;
}

bool params_equal(const EmbedderParams& a, const EmbedderParams& b) {
  return a.featurizer.min_n == b.featurizer.min_n && a.featurizer.max_n == b.featurizer.max_n &&
         a.featurizer.hash_buckets == b.featurizer.hash_buckets &&
         a.featurizer.lowercase == b.featurizer.lowercase &&
         a.featurizer.hash_seed == b.featurizer.hash_seed && a.dim == b.dim &&
         a.instruction_mode == b.instruction_mode && a.projection == b.projection;
}

}  // namespace sei
