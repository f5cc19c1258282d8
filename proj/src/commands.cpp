#include "sei/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <json.hpp>

#include "sei/error.hpp"
#include "sei/report.hpp"

namespace sei {

namespace {

std::filesystem::path category_data_path(const ExperimentManifest& m, Category c) {
  return m.output_dir / "data" / (std::string(to_string(c)) + ".jsonl");
}

std::vector<EvalTask> load_eval_tasks(const ExperimentManifest& m) {
  if (m.eval_tasks.empty()) throw ConfigError("manifest declares no eval_tasks");
  std::vector<EvalTask> tasks;
  tasks.reserve(m.eval_tasks.size());
  for (const auto& path : m.eval_tasks) tasks.push_back(load_task(path));
  return tasks;
}

Dataset load_base_dataset(const ExperimentManifest& m) {
  Dataset base;
  if (m.base_dataset) base = read_jsonl(*m.base_dataset);
  return base;
}

// Analysis categories in canonical order, via the subset enumerator.
std::vector<Category> canonical_categories(const std::vector<SubsetId>& subsets) {
  return subsets.back().included;  // the full subset lists every category in order
}

InfluenceMatrix build_matrix(const std::vector<ExperimentRun>& runs,
                             const std::vector<Category>& categories,
                             const std::vector<EvalTask>& tasks, double alpha) {
  InfluenceMatrix matrix;
  matrix.rows = categories;

  std::set<EvalCategory> eval_cats;
  std::set<std::string> task_ids;
  for (const auto& t : tasks) {
    eval_cats.insert(t.category);
    task_ids.insert(t.id);
  }
  matrix.cols.push_back("overall");
  for (EvalCategory c : kAllEvalCategories) {
    if (eval_cats.count(c) != 0) matrix.cols.emplace_back(to_string(c));
  }
  for (const auto& id : task_ids) matrix.cols.push_back(id);

  for (Category row : matrix.rows) {
    std::vector<InfluenceEstimate> cells;
    cells.reserve(matrix.cols.size());
    for (const auto& metric : matrix.cols) {
      cells.push_back(influence(runs, row, metric, alpha));
    }
    matrix.cells.push_back(std::move(cells));
  }
  return matrix;
}

void write_influence_outputs(const ExperimentManifest& m, const InfluenceMatrix& matrix) {
  write_influence_csv(matrix, m.output_dir / "influence.csv", m.output_dir / "pvalues.csv",
                      m.output_dir / "significant.csv");
  const std::string svg = render_heatmap_svg(matrix, m.alpha);
  std::filesystem::create_directories(m.output_dir);
  std::ofstream out(m.output_dir / "heatmap.svg", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + (m.output_dir / "heatmap.svg").string() + "'");
  out << svg;

  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    for (std::size_t c = 0; c < matrix.cols.size(); ++c) {
      const auto& cell = matrix.cells[r][c];
      if (!cell.significant) continue;
      std::cout << to_string(matrix.rows[r]) << " -> " << matrix.cols[c] << ": "
                << cell.influence << " (p=" << cell.p_value << ")\n";
    }
  }
}

}  // namespace

void cmd_generate(const ExperimentManifest& manifest) {
  if (manifest.generation.empty()) throw ConfigError("manifest declares no generation specs");

  Gateway gateway(manifest.gateway);

  PipelineOptions options;
  options.parse_retry_limit = manifest.parse_retry_limit;
  options.mined_negatives = manifest.mined_negatives;
  options.generator_tag = manifest.model;
  options.jobs = manifest.gateway.max_concurrent;

  PipelineCounters counters;
  std::map<std::string, PromptLibrary> libraries;

  Dataset combined;
  std::int64_t rejected = 0;
  std::int64_t dedup_removed = 0;

  for (const auto& spec : manifest.generation) {
    spec.validate(manifest.generation_budget);
    auto lib = libraries.find(spec.prompt_template_id);
    if (lib == libraries.end()) {
      lib = libraries
                .emplace(spec.prompt_template_id,
                         PromptLibrary::load(manifest.template_dir, spec.prompt_template_id))
                .first;
    }

    Dataset generated =
        generate_category(spec, gateway, lib->second, options, counters, manifest.model);
    const std::int64_t requested =
        static_cast<std::int64_t>(spec.n_tasks) * spec.n_instances_per_task;
    rejected += std::max<std::int64_t>(0, requested - static_cast<std::int64_t>(generated.size()));

    auto [kept, removed] = deduplicate(generated);
    dedup_removed += removed;
    write_jsonl(kept, category_data_path(manifest, spec.category));
    combined.append(kept);
  }

  CompositionReport report = compose_report(combined);
  report.rejected = rejected;
  report.dedup_removed = dedup_removed;
  write_composition_csv(report, manifest.output_dir / "composition.csv");
  std::cout << format_composition_table(report);
  std::cerr << "requests=" << counters.requests_sent.load()
            << " parse_retries=" << counters.parse_retries.load()
            << " schema_mismatches=" << counters.schema_mismatches.load()
            << " invariant_rejects=" << counters.invariant_rejects.load()
            << " length_violations=" << counters.length_violations.load() << "\n";

  if (report.total == 0) {
    throw GatewayError("generation produced zero valid examples", 0, 0);
  }
}

void cmd_train(const ExperimentManifest& manifest) {
  Dataset data = load_base_dataset(manifest);
  for (Category c : kAllCategories) {
    const auto path = category_data_path(manifest, c);
    if (std::filesystem::exists(path)) data.append(read_jsonl(path));
  }
  if (data.empty()) {
    throw IoError("no training data: neither base_dataset nor generated files under '" +
                  (manifest.output_dir / "data").string() + "'");
  }

  TrainConfig cfg = manifest.train;
  cfg.seed = manifest.seed;
  const TrainReport report = train(data, manifest.make_base_params(), cfg);

  const auto ckpt = manifest.output_dir / "checkpoints" / "full.json";
  save_params(report.final_params, ckpt);

  nlohmann::json summary;
  summary["examples_seen"] = report.examples_seen;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [step, loss] : report.loss_curve) {
    curve.push_back({{"step", step}, {"loss", loss}});
  }
  summary["loss_curve"] = std::move(curve);
  std::filesystem::create_directories(manifest.output_dir);
  std::ofstream out(manifest.output_dir / "train_report.json", std::ios::binary | std::ios::trunc);
  out << summary.dump(2) << '\n';

  std::cerr << "trained " << report.examples_seen << " examples in " << report.wall_time_ms
            << " ms, final loss "
            << (report.loss_curve.empty() ? 0.0 : report.loss_curve.back().second) << "\n";
  std::cout << "checkpoint: " << ckpt.string() << "\n";
}

void cmd_eval(const ExperimentManifest& manifest, const std::string& checkpoint_override) {
  const std::filesystem::path ckpt =
      checkpoint_override.empty() ? manifest.output_dir / "checkpoints" / "full.json"
                                  : std::filesystem::path(checkpoint_override);
  if (!std::filesystem::exists(ckpt)) {
    throw IoError("checkpoint '" + ckpt.string() + "' does not exist");
  }
  const EmbedderParams params = load_params(ckpt);

  const std::vector<EvalTask> tasks = load_eval_tasks(manifest);
  const ScoreTable table = evaluate_all(params, tasks);

  std::map<std::string, EvalCategory> registry;
  for (const auto& t : tasks) registry[t.id] = t.category;
  write_score_table_json(table, manifest.output_dir / "scores.json");
  write_score_table_csv(table, registry, manifest.output_dir / "scores.csv");

  for (const auto& [id, score] : table.per_task) {
    std::cout << id << ": " << score << "\n";
  }
  std::cout << "overall: " << table.overall << "\n";
}

void cmd_influence(const ExperimentManifest& manifest) {
  if (manifest.influence_categories.empty()) {
    throw ConfigError("manifest declares no influence_categories");
  }
  const std::vector<SubsetId> subsets = enumerate_subsets(manifest.influence_categories);

  std::map<Category, Dataset> by_category;
  for (Category c : canonical_categories(subsets)) {
    const auto path = category_data_path(manifest, c);
    if (!std::filesystem::exists(path)) {
      throw IoError("data file '" + path.string() + "' is missing; run generate first");
    }
    by_category[c] = read_jsonl(path);
  }

  const Dataset base = load_base_dataset(manifest);
  const std::vector<EvalTask> tasks = load_eval_tasks(manifest);

  GridOptions options;
  options.train = manifest.train;
  options.base_params = manifest.make_base_params();
  options.seed = manifest.seed;
  options.jobs = manifest.jobs;
  options.alpha = manifest.alpha;

  RunRegistry registry(manifest.output_dir / "registry");
  registry.write_or_check_manifest(canonical_categories(subsets), manifest.seed, manifest.alpha);

  const std::vector<ExperimentRun> runs =
      run_grid(by_category, base, tasks, subsets, options, registry);

  const InfluenceMatrix matrix =
      build_matrix(runs, canonical_categories(subsets), tasks, manifest.alpha);
  write_influence_outputs(manifest, matrix);
}

void cmd_report(const ExperimentManifest& manifest) {
  if (manifest.influence_categories.empty()) {
    throw ConfigError("manifest declares no influence_categories");
  }
  const std::vector<SubsetId> subsets = enumerate_subsets(manifest.influence_categories);
  const RunRegistry registry(manifest.output_dir / "registry");
  const std::vector<ExperimentRun> runs = registry.load_all(subsets);
  if (runs.empty()) {
    throw IoError("registry '" + registry.dir().string() + "' has no completed runs");
  }

  const std::vector<EvalTask> tasks = load_eval_tasks(manifest);
  const InfluenceMatrix matrix =
      build_matrix(runs, canonical_categories(subsets), tasks, manifest.alpha);
  write_influence_outputs(manifest, matrix);
}

}  // namespace sei
