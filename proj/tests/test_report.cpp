#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sei/report.hpp"

using namespace sei;

namespace {

InfluenceEstimate cell(double influence, double p) {
  InfluenceEstimate e;
  e.influence = influence;
  e.p_value = p;
  e.significant = p < 0.05;
  return e;
}

InfluenceMatrix demo_matrix() {
  InfluenceMatrix m;
  m.rows = {Category::kShortShort, Category::kLongShort};
  m.cols = {"overall", "classification", "sts"};
  m.cells = {
      {cell(0.01, 0.6), cell(0.02, 0.7), cell(-0.005, 0.9)},
      {cell(0.12, 0.001), cell(0.2, 0.01), cell(-0.15, 0.02)},
  };
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "sei_test_report";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("csv grids share the layout of the matrix") {
  const InfluenceMatrix m = demo_matrix();
  const auto dir = temp_dir();
  write_influence_csv(m, dir / "influence.csv", dir / "pvalues.csv", dir / "significant.csv");

  const std::string inf = slurp(dir / "influence.csv");
  CHECK(inf.find("category,overall,classification,sts\n") == 0);
  CHECK(inf.find("\nshort-short,") != std::string::npos);
  CHECK(inf.find("\nlong-short,") != std::string::npos);
  CHECK(inf.find("0.12") != std::string::npos);

  const std::string sig = slurp(dir / "significant.csv");
  CHECK(sig.find("short-short,0,0,0") != std::string::npos);
  CHECK(sig.find("long-short,1,1,1") != std::string::npos);

  const std::string pv = slurp(dir / "pvalues.csv");
  CHECK(pv.find("0.001") != std::string::npos);
}

TEST_CASE("svg renders the same grid with significance-gated colors") {
  const InfluenceMatrix m = demo_matrix();
  const std::string svg = render_heatmap_svg(m, 0.05);

  CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") == 0);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
  // no external references
  CHECK(svg.find("href") == std::string::npos);
  CHECK(svg.find("url(") == std::string::npos);

  // one rect per cell plus the background
  std::size_t rects = 0;
  for (std::size_t pos = svg.find("<rect"); pos != std::string::npos;
       pos = svg.find("<rect", pos + 1)) {
    ++rects;
  }
  CHECK(rects == 2 * 3 + 1);

  // row and column labels
  CHECK(svg.find(">short-short<") != std::string::npos);
  CHECK(svg.find(">long-short<") != std::string::npos);
  CHECK(svg.find(">classification<") != std::string::npos);

  // non-significant cells stay neutral; every cell prints its value
  CHECK(svg.find("#f0f0f0") != std::string::npos);
  CHECK(svg.find("0.010") != std::string::npos);
  CHECK(svg.find("-0.150") != std::string::npos);
}

TEST_CASE("svg color sign: positive red ramp, negative blue ramp") {
  InfluenceMatrix m;
  m.rows = {Category::kShortShort};
  m.cols = {"m1", "m2"};
  m.cells = {{cell(1.0, 0.001), cell(-1.0, 0.001)}};
  const std::string svg = render_heatmap_svg(m, 0.05);
  // both cells saturate: exact endpoint colors of the two ramps
  CHECK(svg.find("#b2182b") != std::string::npos);  // positive endpoint (red)
  CHECK(svg.find("#2166ac") != std::string::npos);  // negative endpoint (blue)
}

TEST_CASE("svg output is byte-deterministic") {
  const InfluenceMatrix m = demo_matrix();
  CHECK(render_heatmap_svg(m, 0.05) == render_heatmap_svg(m, 0.05));
}

TEST_CASE("score table json round-trips") {
  ScoreTable t;
  t.per_task = {{"cls-demo", 0.75}, {"sts-demo", 0.5}};
  t.per_category = {{"classification", 0.75}, {"sts", 0.5}};
  t.overall = 0.625;
  const auto dir = temp_dir();
  write_score_table_json(t, dir / "scores.json");
  const ScoreTable back = read_score_table_json(dir / "scores.json");
  CHECK(back.per_task == t.per_task);
  CHECK(back.per_category == t.per_category);
  CHECK(back.overall == t.overall);

  std::map<std::string, EvalCategory> registry = {
      {"cls-demo", EvalCategory::kClassification},
      {"sts-demo", EvalCategory::kSts},
  };
  write_score_table_csv(t, registry, dir / "scores.csv");
  const std::string csv = slurp(dir / "scores.csv");
  CHECK(csv.find("task,cls-demo,classification,0.75") != std::string::npos);
  CHECK(csv.find("overall,overall,,0.625") != std::string::npos);
}

TEST_CASE("composition csv lists all six categories and the counters") {
  CompositionReport report;
  for (Category c : kAllCategories) report.counts[c] = 0;
  report.counts[Category::kShortShort] = 3;
  report.counts[Category::kSts] = 2;
  report.total = 5;
  report.rejected = 1;
  report.dedup_removed = 4;
  const auto dir = temp_dir();
  write_composition_csv(report, dir / "composition.csv");
  const std::string csv = slurp(dir / "composition.csv");
  CHECK(csv.find("category,count\n") == 0);
  CHECK(csv.find("short-short,3") != std::string::npos);
  CHECK(csv.find("bitext,0") != std::string::npos);
  CHECK(csv.find("total,5") != std::string::npos);
  CHECK(csv.find("rejected,1") != std::string::npos);
  CHECK(csv.find("dedup_removed,4") != std::string::npos);
}
