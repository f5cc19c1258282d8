#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sei/eval.hpp"
#include "sei/influence.hpp"
#include "sei/pipeline.hpp"

namespace sei {

// Influence estimates laid out as a heatmap grid: training-data categories
// on rows, evaluation metrics on columns.
struct InfluenceMatrix {
  std::vector<Category> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<InfluenceEstimate>> cells;  // [row][col]
};

// Self-contained SVG. Significant cells are filled on a diverging ramp (red
// positive, blue negative) scaled by the matrix-normalized influence;
// non-significant cells stay neutral. Every cell prints its influence value.
std::string render_heatmap_svg(const InfluenceMatrix& matrix, double alpha);

// influence.csv / pvalues.csv / significant.csv share one grid layout:
// header "category,<metric...>", one row per training category.
void write_influence_csv(const InfluenceMatrix& matrix, const std::filesystem::path& influence_csv,
                         const std::filesystem::path& pvalues_csv,
                         const std::filesystem::path& significant_csv);

void write_score_table_json(const ScoreTable& table, const std::filesystem::path& path);
void write_score_table_csv(const ScoreTable& table,
                           const std::map<std::string, EvalCategory>& task_registry,
                           const std::filesystem::path& path);
ScoreTable read_score_table_json(const std::filesystem::path& path);

void write_composition_csv(const CompositionReport& report, const std::filesystem::path& path);

}  // namespace sei
