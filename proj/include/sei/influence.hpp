#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sei/core.hpp"
#include "sei/eval.hpp"
#include "sei/trainer.hpp"

namespace sei {

// One subset of the analysis categories. `mask` bit j corresponds to the
// j-th category of the analysis list the subset was enumerated from.
struct SubsetId {
  std::vector<Category> included;  // in canonical category order
  unsigned mask = 0;

  // "none" for the empty subset, else names joined with '+'.
  std::string name() const;
};

// All 2^k subsets by binary counting over the canonically-ordered category
// list. Throws on duplicates or k outside [1, 6].
std::vector<SubsetId> enumerate_subsets(const std::vector<Category>& categories);

enum class RunStatus { kDone, kFailed };

struct ExperimentRun {
  SubsetId subset;
  std::uint64_t seed = 0;
  std::optional<ScoreTable> scores;  // present iff status == done
  std::string checkpoint_path;       // relative to the registry root
  RunStatus status = RunStatus::kDone;
  std::string error;  // failure message when status == failed
};

struct InfluenceEstimate {
  Category category = Category::kShortShort;
  std::string metric;
  double influence = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  bool significant = false;
  int n_plus = 0;
  int n_minus = 0;
};

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // both groups constant
};

// Two-sample Student t with pooled variance, df = n_a + n_b - 2, two-sided
// p-value. Degenerate conventions: both groups constant and equal -> t = 0,
// p = 1; both constant and unequal -> p = 0 (t infinite); flagged either way.
TTestResult t_test(std::span<const double> group_a, std::span<const double> group_b);

// Welch's unequal-variance variant (Welch-Satterthwaite df), kept behind its
// own entry point for unequal group sizes.
TTestResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b);

// Resolves "overall", an eval-category name, or a task id against a table.
double score_for(const ScoreTable& scores, const std::string& metric);

// Group-mean difference over successful runs: mean(metric | category in
// subset) - mean(metric | category not in subset), with significance from
// t_test at `alpha`. Accumulation follows run order, so results are
// bit-reproducible.
InfluenceEstimate influence(const std::vector<ExperimentRun>& runs, Category category,
                            const std::string& metric, double alpha = 0.05);

struct NormalizedMatrix {
  std::vector<std::vector<double>> values;
  bool all_zero = false;  // input had no non-zero influence; returned unchanged
};

// Divides every influence by the matrix-wide max |influence|; signs are
// preserved and the argmax maps to +/-1.
NormalizedMatrix normalize_matrix(const std::vector<std::vector<InfluenceEstimate>>& estimates);

std::vector<std::vector<bool>> significance_mask(
    const std::vector<std::vector<InfluenceEstimate>>& estimates, double alpha);

// Directory of per-run JSON records plus a manifest; one writer at a time
// (advisory flock on the lock file). Records carry no timestamps so repeated
// runs are byte-identical.
class RunRegistry {
 public:
  explicit RunRegistry(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<ExperimentRun> load_run(const SubsetId& subset) const;
  void save_run(const ExperimentRun& run) const;
  std::vector<ExperimentRun> load_all(const std::vector<SubsetId>& subsets) const;

  // Serializes grid metadata (categories, seed, alpha) once; errors if an
  // existing manifest disagrees.
  void write_or_check_manifest(const std::vector<Category>& categories, std::uint64_t seed,
                               double alpha) const;

 private:
  std::filesystem::path dir_;
};

struct GridOptions {
  TrainConfig train;
  EmbedderParams base_params;
  std::uint64_t seed = 0;
  int jobs = 1;
  double alpha = 0.05;
};

// Trains and evaluates one run per subset: base_dataset plus the included
// categories' data (in canonical order), starting every run from the same
// base_params. Completed runs found in the registry are reused; failures are
// recorded, not fatal. Throws only when every run failed.
std::vector<ExperimentRun> run_grid(const std::map<Category, Dataset>& dataset_by_category,
                                    const Dataset& base_dataset,
                                    const std::vector<EvalTask>& eval_tasks,
                                    const std::vector<SubsetId>& subsets,
                                    const GridOptions& options, const RunRegistry& registry);

}  // namespace sei
