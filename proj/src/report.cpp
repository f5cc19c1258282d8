#include "sei/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Rgb {
  int r, g, b;
};

// White toward dark red for positive, dark blue for negative.
Rgb diverging_color(double normalized) {
  const Rgb white{247, 247, 247};
  const Rgb red{178, 24, 43};
  const Rgb blue{33, 102, 172};
  const Rgb& end = normalized >= 0.0 ? red : blue;
  const double t = std::min(1.0, std::abs(normalized));
  auto lerp = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return {lerp(white.r, end.r), lerp(white.g, end.g), lerp(white.b, end.b)};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("I/O error while writing '" + path.string() + "'");
}

}  // namespace

std::string render_heatmap_svg(const InfluenceMatrix& matrix, double alpha) {
  const int cell_w = 84;
  const int cell_h = 30;
  const int left = 120;
  const int top = 96;
  const int rows = static_cast<int>(matrix.rows.size());
  const int cols = static_cast<int>(matrix.cols.size());
  const int width = left + cols * cell_w + 16;
  const int height = top + rows * cell_h + 16;

  const NormalizedMatrix norm = normalize_matrix(matrix.cells);
  const auto mask = significance_mask(matrix.cells, alpha);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <style>text{font-family:monospace;font-size:11px;fill:#222;}</style>\n";
  svg << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";

  for (int c = 0; c < cols; ++c) {
    const int x = left + c * cell_w + cell_w / 2;
    svg << "  <text transform=\"translate(" << x << "," << top - 8 << ") rotate(-35)\""
        << " text-anchor=\"start\">" << xml_escape(matrix.cols[static_cast<std::size_t>(c)])
        << "</text>\n";
  }
  for (int r = 0; r < rows; ++r) {
    const int y = top + r * cell_h + cell_h / 2 + 4;
    svg << "  <text x=\"" << left - 6 << "\" y=\"" << y << "\" text-anchor=\"end\">"
        << xml_escape(to_string(matrix.rows[static_cast<std::size_t>(r)])) << "</text>\n";
  }

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto ru = static_cast<std::size_t>(r);
      const auto cu = static_cast<std::size_t>(c);
      const InfluenceEstimate& cell = matrix.cells[ru][cu];
      const bool significant = mask[ru][cu];
      const int x = left + c * cell_w;
      const int y = top + r * cell_h;

      std::string fill = "#f0f0f0";
      std::string text_color = "#222222";
      if (significant) {
        const Rgb rgb = diverging_color(norm.values[ru][cu]);
        char hex[8];
        std::snprintf(hex, sizeof(hex), "#%02x%02x%02x", rgb.r, rgb.g, rgb.b);
        fill = hex;
        if (std::abs(norm.values[ru][cu]) > 0.6) text_color = "#ffffff";
      }

      svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\""
          << cell_h << "\" fill=\"" << fill << "\" stroke=\"#999999\" stroke-width=\"0.5\">"
          << "<title>" << xml_escape(to_string(matrix.rows[ru])) << " -&gt; "
          << xml_escape(matrix.cols[cu]) << ": influence " << fmt(cell.influence, "%.6g")
          << ", p " << fmt(cell.p_value, "%.4g") << "</title></rect>\n";
      svg << "  <text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << text_color << "\">"
          << fmt(cell.influence, "%.3f") << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_influence_csv(const InfluenceMatrix& matrix, const std::filesystem::path& influence_csv,
                         const std::filesystem::path& pvalues_csv,
                         const std::filesystem::path& significant_csv) {
  auto grid = [&](auto cell_value) {
    std::ostringstream out;
    out << "category";
    for (const auto& col : matrix.cols) out << ',' << col;
    out << '\n';
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
      out << to_string(matrix.rows[r]);
      for (std::size_t c = 0; c < matrix.cols.size(); ++c) {
        out << ',' << cell_value(matrix.cells[r][c]);
      }
      out << '\n';
    }
    return out.str();
  };

  write_text_file(influence_csv,
                  grid([](const InfluenceEstimate& e) { return fmt(e.influence); }));
  write_text_file(pvalues_csv, grid([](const InfluenceEstimate& e) { return fmt(e.p_value); }));
  write_text_file(significant_csv,
                  grid([](const InfluenceEstimate& e) { return std::string(e.significant ? "1" : "0"); }));
}

void write_score_table_json(const ScoreTable& table, const std::filesystem::path& path) {
  json obj;
  obj["per_task"] = table.per_task;
  obj["per_category"] = table.per_category;
  obj["overall"] = table.overall;
  write_text_file(path, obj.dump(2) + "\n");
}

ScoreTable read_score_table_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score table '" + path.string() + "'");
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ValidationError("score table '" + path.string() + "' is not valid JSON: " + e.what());
  }
  ScoreTable table;
  table.per_task = obj.at("per_task").get<std::map<std::string, double>>();
  table.per_category = obj.at("per_category").get<std::map<std::string, double>>();
  table.overall = obj.at("overall").get<double>();
  return table;
}

void write_score_table_csv(const ScoreTable& table,
                           const std::map<std::string, EvalCategory>& task_registry,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "kind,name,category,score\n";
  for (const auto& [id, score] : table.per_task) {
    auto it = task_registry.find(id);
    const std::string cat =
        it == task_registry.end() ? "unknown" : std::string(to_string(it->second));
    out << "task," << id << ',' << cat << ',' << fmt(score) << '\n';
  }
  for (const auto& [cat, score] : table.per_category) {
    out << "category," << cat << ',' << cat << ',' << fmt(score) << '\n';
  }
  out << "overall,overall,," << fmt(table.overall) << '\n';
  write_text_file(path, out.str());
}

void write_composition_csv(const CompositionReport& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "category,count\n";
  for (Category c : kAllCategories) {
    out << to_string(c) << ',' << report.counts.at(c) << '\n';
  }
  out << "total," << report.total << '\n';
  out << "rejected," << report.rejected << '\n';
  out << "dedup_removed," << report.dedup_removed << '\n';
  write_text_file(path, out.str());
}

}  // namespace sei
