#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sei {

// The six synthetic-data categories, named by query/document length regime.
enum class Category {
  kShortShort,
  kShortLong,
  kLongLong,
  kLongShort,
  kBitext,
  kSts,
};

inline constexpr std::array<Category, 6> kAllCategories = {
    Category::kShortShort, Category::kShortLong, Category::kLongLong,
    Category::kLongShort,  Category::kBitext,    Category::kSts,
};

// Kebab-case name used everywhere on disk ("short-short", ..., "sts").
std::string_view to_string(Category c);

// Inverse of to_string. Throws ValidationError on unknown names.
Category category_from_string(std::string_view name);

// Lenient variant for importing third-party dumps: case-insensitive,
// accepts '_' for '-'. Returns nullopt instead of throwing.
std::optional<Category> try_parse_category(std::string_view name);

enum class NegativeOrigin { kGenerated, kMined, kAbsent };

std::string_view to_string(NegativeOrigin o);
NegativeOrigin negative_origin_from_string(std::string_view name);

// One training instance. Invariants (checked by validate()):
//  - query and positive are non-empty after whitespace trimming,
//  - negative is set iff negative_origin != absent, and then non-empty,
//  - trimmed query != trimmed positive.
struct SyntheticExample {
  std::string instruction;
  std::string query;
  std::string positive;
  std::optional<std::string> negative;
  Category category = Category::kShortShort;
  std::string task_id;
  std::string generator;
  NegativeOrigin negative_origin = NegativeOrigin::kAbsent;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// One brainstormed embedding-task description (stage-1 output).
struct TaskDescription {
  std::string id;
  Category category = Category::kShortShort;
  std::string text;
};

// Ordered, insertion-order container of examples plus free-form provenance.
class Dataset {
 public:
  Dataset() = default;

  void push_back(SyntheticExample ex) { examples_.push_back(std::move(ex)); }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }

  const SyntheticExample& operator[](std::size_t i) const { return examples_[i]; }
  SyntheticExample& operator[](std::size_t i) { return examples_[i]; }

  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }
  auto begin() { return examples_.begin(); }
  auto end() { return examples_.end(); }

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // Appends a copy of every example in `other` (metadata is not merged).
  void append(const Dataset& other);

 private:
  std::vector<SyntheticExample> examples_;
  std::map<std::string, std::string> metadata_;
};

using EmbeddingVector = std::vector<double>;

struct JsonlReadOptions {
  // Reject lines with keys outside the canonical schema. The import path
  // for third-party dumps turns this off.
  bool strict_fields = true;
  // Accept category aliases ("STS", "short_long") instead of exact names.
  bool lenient_categories = false;
};

// Reads one SyntheticExample per line, preserving file order. Errors carry
// the 1-based line number and the violated field or invariant.
Dataset read_jsonl(const std::filesystem::path& path, const JsonlReadOptions& opts = {});

// One JSON object per line, UTF-8, keys in fixed (alphabetical) order; the
// "negative" key is omitted when unset. read_jsonl(write_jsonl(d)) == d.
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Strips leading/trailing ASCII whitespace.
std::string_view trim(std::string_view s);

bool datasets_equal(const Dataset& a, const Dataset& b);

}  // namespace sei
