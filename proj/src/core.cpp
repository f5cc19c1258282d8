#include "sei/core.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kShortShort: return "short-short";
    case Category::kShortLong: return "short-long";
    case Category::kLongLong: return "long-long";
    case Category::kLongShort: return "long-short";
    case Category::kBitext: return "bitext";
    case Category::kSts: return "sts";
  }
  return "unknown";
}

Category category_from_string(std::string_view name) {
  for (Category c : kAllCategories) {
    if (name == to_string(c)) return c;
  }
  throw ValidationError("unknown category: '" + std::string(name) + "'");
}

std::optional<Category> try_parse_category(std::string_view name) {
  std::string norm;
  norm.reserve(name.size());
  for (char ch : name) {
    if (ch == '_') ch = '-';
    norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (Category c : kAllCategories) {
    if (norm == to_string(c)) return c;
  }
  return std::nullopt;
}

std::string_view to_string(NegativeOrigin o) {
  switch (o) {
    case NegativeOrigin::kGenerated: return "generated";
    case NegativeOrigin::kMined: return "mined";
    case NegativeOrigin::kAbsent: return "absent";
  }
  return "unknown";
}

NegativeOrigin negative_origin_from_string(std::string_view name) {
  if (name == "generated") return NegativeOrigin::kGenerated;
  if (name == "mined") return NegativeOrigin::kMined;
  if (name == "absent") return NegativeOrigin::kAbsent;
  throw ValidationError("unknown negative_origin: '" + std::string(name) + "'");
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

void SyntheticExample::validate() const {
  if (trim(query).empty()) throw ValidationError("query is empty after trimming");
  if (trim(positive).empty()) throw ValidationError("positive is empty after trimming");
  if (negative_origin == NegativeOrigin::kAbsent) {
    if (negative.has_value()) {
      throw ValidationError("negative is set but negative_origin is 'absent'");
    }
  } else {
    if (!negative.has_value() || trim(*negative).empty()) {
      throw ValidationError("negative_origin is '" + std::string(to_string(negative_origin)) +
                            "' but negative is missing or empty");
    }
  }
  if (trim(query) == trim(positive)) {
    throw ValidationError("query equals positive after trimming");
  }
}

void Dataset::append(const Dataset& other) {
  for (const auto& ex : other) examples_.push_back(ex);
}

namespace {

constexpr std::array<std::string_view, 8> kSchemaFields = {
    "instruction", "query", "positive", "negative",
    "category",    "task_id", "generator", "negative_origin",
};

std::string require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

SyntheticExample example_from_json(const json& obj, const JsonlReadOptions& opts) {
  if (!obj.is_object()) throw ValidationError("line is not a JSON object");
  if (opts.strict_fields) {
    for (const auto& item : obj.items()) {
      bool known = false;
      for (auto f : kSchemaFields) {
        if (item.key() == f) { known = true; break; }
      }
      if (!known) throw ValidationError("unknown field '" + item.key() + "'");
    }
  }

  SyntheticExample ex;
  ex.instruction = obj.value("instruction", std::string());
  ex.query = require_string(obj, "query");
  ex.positive = require_string(obj, "positive");
  if (obj.contains("negative") && !obj.at("negative").is_null()) {
    if (!obj.at("negative").is_string()) throw ValidationError("field 'negative' is not a string");
    ex.negative = obj.at("negative").get<std::string>();
  }

  const std::string cat = require_string(obj, "category");
  if (opts.lenient_categories) {
    auto parsed = try_parse_category(cat);
    if (!parsed) throw ValidationError("unknown category: '" + cat + "'");
    ex.category = *parsed;
  } else {
    ex.category = category_from_string(cat);
  }

  ex.task_id = obj.value("task_id", std::string());
  ex.generator = obj.value("generator", std::string());
  if (obj.contains("negative_origin")) {
    ex.negative_origin = negative_origin_from_string(require_string(obj, "negative_origin"));
  } else {
    ex.negative_origin = ex.negative ? NegativeOrigin::kGenerated : NegativeOrigin::kAbsent;
  }

  ex.validate();
  return ex;
}

json example_to_json(const SyntheticExample& ex) {
  json obj;
  obj["instruction"] = ex.instruction;
  obj["query"] = ex.query;
  obj["positive"] = ex.positive;
  if (ex.negative) obj["negative"] = *ex.negative;
  obj["category"] = std::string(to_string(ex.category));
  obj["task_id"] = ex.task_id;
  obj["generator"] = ex.generator;
  obj["negative_origin"] = std::string(to_string(ex.negative_origin));
  return obj;
}

}  // namespace

Dataset read_jsonl(const std::filesystem::path& path, const JsonlReadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": blank line");
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    try {
      ds.push_back(example_from_json(obj, opts));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("I/O error while reading '" + path.string() + "'");
  return ds;
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& ex : dataset) {
    out << example_to_json(ex).dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("I/O error while writing '" + path.string() + "'");
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.instruction != y.instruction || x.query != y.query || x.positive != y.positive ||
        x.negative != y.negative || x.category != y.category || x.task_id != y.task_id ||
        x.generator != y.generator || x.negative_origin != y.negative_origin) {
      return false;
    }
  }
  return true;
}

}  // namespace sei
