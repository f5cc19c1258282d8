#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sei/commands.hpp"
#include "sei/error.hpp"

namespace {

struct Overrides {
  std::string output_dir;
  std::string seed;
  std::string jobs;
  std::string alpha;
};

sei::ExperimentManifest load(const std::string& manifest_path, const Overrides& o) {
  sei::ExperimentManifest m = sei::load_manifest(manifest_path);
  if (!o.output_dir.empty()) m.output_dir = o.output_dir;
  if (!o.seed.empty()) m.seed = std::stoull(o.seed);
  if (!o.jobs.empty()) m.jobs = std::stoi(o.jobs);
  if (!o.alpha.empty()) m.alpha = std::stod(o.alpha);
  return m;
}

void add_common(CLI::App* cmd, std::string& manifest_path, Overrides& o) {
  cmd->add_option("manifest", manifest_path, "experiment manifest (JSON)")->required();
  cmd->add_option("--output-dir", o.output_dir, "override output_dir");
  cmd->add_option("--seed", o.seed, "override seed");
  cmd->add_option("--jobs", o.jobs, "override worker count");
  cmd->add_option("--alpha", o.alpha, "override significance level");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-data influence toolkit for text embedders"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string checkpoint;
  Overrides overrides;

  CLI::App* generate = app.add_subcommand("generate", "brainstorm and generate synthetic data");
  add_common(generate, manifest_path, overrides);

  CLI::App* train = app.add_subcommand("train", "train the encoder on all generated data");
  add_common(train, manifest_path, overrides);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the task suite");
  add_common(eval, manifest_path, overrides);
  eval->add_option("--checkpoint", checkpoint, "checkpoint path (default: output_dir/checkpoints/full.json)");

  CLI::App* influence = app.add_subcommand("influence", "run the 2^k subset grid and influence analysis");
  add_common(influence, manifest_path, overrides);

  CLI::App* report = app.add_subcommand("report", "re-render CSVs and heatmap from the registry");
  add_common(report, manifest_path, overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    const sei::ExperimentManifest manifest = load(manifest_path, overrides);
    if (generate->parsed()) {
      sei::cmd_generate(manifest);
    } else if (train->parsed()) {
      sei::cmd_train(manifest);
    } else if (eval->parsed()) {
      sei::cmd_eval(manifest, checkpoint);
    } else if (influence->parsed()) {
      sei::cmd_influence(manifest);
    } else if (report->parsed()) {
      sei::cmd_report(manifest);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sei::exit_code_for(e);
  }
  return 0;
}
