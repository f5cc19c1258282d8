#pragma once

#include <string>

#include "sei/manifest.hpp"

namespace sei {

// CLI subcommand bodies. Each throws a sei::Error subclass on failure; the
// binary maps exceptions to exit codes via exit_code_for.

// Generates one JSONL file per category under <output_dir>/data plus a
// composition CSV and stdout table. Throws when the total yield is zero.
void cmd_generate(const ExperimentManifest& manifest);

// Trains on the base dataset plus every generated category file and writes
// <output_dir>/checkpoints/full.json and train_report.json.
void cmd_train(const ExperimentManifest& manifest);

// Evaluates a checkpoint (default <output_dir>/checkpoints/full.json) on the
// manifest's tasks and writes scores.json / scores.csv.
void cmd_eval(const ExperimentManifest& manifest, const std::string& checkpoint_override = "");

// Runs the full 2^k grid over influence_categories, then writes the run
// registry, influence/pvalues/significant CSVs and heatmap.svg.
void cmd_influence(const ExperimentManifest& manifest);

// Re-renders CSVs and the heatmap from an existing registry without training.
void cmd_report(const ExperimentManifest& manifest);

}  // namespace sei
