#include "sei/influence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include <boost/math/distributions/students_t.hpp>

#include "sei/error.hpp"

namespace sei {

using nlohmann::json;

std::string SubsetId::name() const {
  if (included.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < included.size(); ++i) {
    if (i > 0) out.push_back('+');
    out += to_string(included[i]);
  }
  return out;
}

namespace {

int canonical_index(Category c) {
  for (std::size_t i = 0; i < kAllCategories.size(); ++i) {
    if (kAllCategories[i] == c) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

std::vector<SubsetId> enumerate_subsets(const std::vector<Category>& categories) {
  if (categories.empty() || categories.size() > 6) {
    throw ValidationError("enumerate_subsets: need between 1 and 6 categories");
  }
  std::vector<Category> sorted = categories;
  std::sort(sorted.begin(), sorted.end(),
            [](Category a, Category b) { return canonical_index(a) < canonical_index(b); });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) {
      throw ValidationError("enumerate_subsets: duplicate category '" +
                            std::string(to_string(sorted[i])) + "'");
    }
  }

  const unsigned total = 1u << sorted.size();
  std::vector<SubsetId> subsets;
  subsets.reserve(total);
  for (unsigned mask = 0; mask < total; ++mask) {
    SubsetId id;
    id.mask = mask;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (mask & (1u << j)) id.included.push_back(sorted[j]);
    }
    subsets.push_back(std::move(id));
  }
  return subsets;
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance (n - 1 denominator)
  std::size_t n = 0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  m.n = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(m.n);
  double ss = 0.0;
  for (double x : v) {
    const double d = x - m.mean;
    ss += d * d;
  }
  m.var = m.n > 1 ? ss / static_cast<double>(m.n - 1) : 0.0;
  return m;
}

double two_sided_p(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

TTestResult degenerate_result(double mean_a, double mean_b) {
  TTestResult r;
  r.degenerate = true;
  if (mean_a == mean_b) {
    r.t = 0.0;
    r.p = 1.0;
  } else {
    r.t = mean_a > mean_b ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
  }
  return r;
}

}  // namespace

TTestResult t_test(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.size() < 2 || group_b.size() < 2) {
    throw ValidationError("t_test: each group needs >= 2 values");
  }
  const Moments a = moments(group_a);
  const Moments b = moments(group_b);
  const double df = static_cast<double>(a.n + b.n - 2);
  const double pooled =
      ((static_cast<double>(a.n - 1)) * a.var + (static_cast<double>(b.n - 1)) * b.var) / df;
  if (pooled == 0.0) return degenerate_result(a.mean, b.mean);

  const double se =
      std::sqrt(pooled * (1.0 / static_cast<double>(a.n) + 1.0 / static_cast<double>(b.n)));
  TTestResult r;
  r.t = (a.mean - b.mean) / se;
  r.p = two_sided_p(r.t, df);
  return r;
}

TTestResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.size() < 2 || group_b.size() < 2) {
    throw ValidationError("welch_t_test: each group needs >= 2 values");
  }
  const Moments a = moments(group_a);
  const Moments b = moments(group_b);
  const double va = a.var / static_cast<double>(a.n);
  const double vb = b.var / static_cast<double>(b.n);
  if (va + vb == 0.0) return degenerate_result(a.mean, b.mean);

  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(a.n - 1) + vb * vb / static_cast<double>(b.n - 1));
  TTestResult r;
  r.t = (a.mean - b.mean) / std::sqrt(va + vb);
  r.p = two_sided_p(r.t, df);
  return r;
}

double score_for(const ScoreTable& scores, const std::string& metric) {
  if (metric == "overall") return scores.overall;
  if (auto it = scores.per_category.find(metric); it != scores.per_category.end()) {
    return it->second;
  }
  if (auto it = scores.per_task.find(metric); it != scores.per_task.end()) {
    return it->second;
  }
  throw ValidationError("unknown metric '" + metric + "'");
}

InfluenceEstimate influence(const std::vector<ExperimentRun>& runs, Category category,
                            const std::string& metric, double alpha) {
  std::vector<double> plus, minus;
  for (const auto& run : runs) {
    if (run.status != RunStatus::kDone || !run.scores.has_value()) continue;
    const bool has_category =
        std::find(run.subset.included.begin(), run.subset.included.end(), category) !=
        run.subset.included.end();
    (has_category ? plus : minus).push_back(score_for(*run.scores, metric));
  }
  if (plus.empty() || minus.empty()) {
    throw ValidationError("influence: empty group for category '" +
                          std::string(to_string(category)) + "' after excluding failures");
  }

  double sum_plus = 0.0, sum_minus = 0.0;
  for (double v : plus) sum_plus += v;
  for (double v : minus) sum_minus += v;

  InfluenceEstimate est;
  est.category = category;
  est.metric = metric;
  est.influence =
      sum_plus / static_cast<double>(plus.size()) - sum_minus / static_cast<double>(minus.size());
  est.n_plus = static_cast<int>(plus.size());
  est.n_minus = static_cast<int>(minus.size());
  if (plus.size() < 2 || minus.size() < 2) {
    // Failures can shrink a group below the two samples a t-test needs;
    // the mean difference stands but significance cannot be claimed.
    est.t_stat = 0.0;
    est.p_value = 1.0;
    est.significant = false;
    return est;
  }
  const TTestResult tt = t_test(plus, minus);
  est.t_stat = tt.t;
  est.p_value = tt.p;
  est.significant = tt.p < alpha;
  return est;
}

NormalizedMatrix normalize_matrix(const std::vector<std::vector<InfluenceEstimate>>& estimates) {
  NormalizedMatrix out;
  double max_abs = 0.0;
  for (const auto& row : estimates) {
    for (const auto& cell : row) max_abs = std::max(max_abs, std::abs(cell.influence));
  }
  out.all_zero = max_abs == 0.0;
  for (const auto& row : estimates) {
    std::vector<double> r;
    r.reserve(row.size());
    for (const auto& cell : row) {
      r.push_back(out.all_zero ? cell.influence : cell.influence / max_abs);
    }
    out.values.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<bool>> significance_mask(
    const std::vector<std::vector<InfluenceEstimate>>& estimates, double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");
  std::vector<std::vector<bool>> mask;
  for (const auto& row : estimates) {
    std::vector<bool> r;
    r.reserve(row.size());
    for (const auto& cell : row) r.push_back(cell.p_value < alpha);
    mask.push_back(std::move(r));
  }
  return mask;
}

// ---- registry ----------------------------------------------------------

namespace {

json score_table_to_json(const ScoreTable& t) {
  json obj;
  obj["per_task"] = t.per_task;
  obj["per_category"] = t.per_category;
  obj["overall"] = t.overall;
  return obj;
}

ScoreTable score_table_from_json(const json& obj) {
  ScoreTable t;
  t.per_task = obj.at("per_task").get<std::map<std::string, double>>();
  t.per_category = obj.at("per_category").get<std::map<std::string, double>>();
  t.overall = obj.at("overall").get<double>();
  return t;
}

}  // namespace

RunRegistry::RunRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create registry directory '" + dir_.string() + "'");
}

std::optional<ExperimentRun> RunRegistry::load_run(const SubsetId& subset) const {
  const auto path = dir_ / ("run-" + subset.name() + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  json obj;
  try {
    in >> obj;
  } catch (const json::exception&) {
    return std::nullopt;  // treat a torn record as absent; the run is redone
  }

  ExperimentRun run;
  run.subset = subset;
  run.seed = obj.value("seed", 0ULL);
  run.checkpoint_path = obj.value("checkpoint", std::string());
  const std::string status = obj.value("status", std::string("failed"));
  run.status = status == "done" ? RunStatus::kDone : RunStatus::kFailed;
  run.error = obj.value("error", std::string());
  if (obj.contains("scores")) run.scores = score_table_from_json(obj.at("scores"));
  if (run.status == RunStatus::kDone && !run.scores.has_value()) return std::nullopt;
  return run;
}

void RunRegistry::save_run(const ExperimentRun& run) const {
  json obj;
  obj["subset"] = json::array();
  for (Category c : run.subset.included) obj["subset"].push_back(std::string(to_string(c)));
  obj["name"] = run.subset.name();
  obj["seed"] = run.seed;
  obj["status"] = run.status == RunStatus::kDone ? "done" : "failed";
  if (!run.checkpoint_path.empty()) obj["checkpoint"] = run.checkpoint_path;
  if (!run.error.empty()) obj["error"] = run.error;
  if (run.scores) obj["scores"] = score_table_to_json(*run.scores);

  const auto path = dir_ / ("run-" + run.subset.name() + ".json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write run record '" + path.string() + "'");
  out << obj.dump(2) << '\n';
}

std::vector<ExperimentRun> RunRegistry::load_all(const std::vector<SubsetId>& subsets) const {
  std::vector<ExperimentRun> runs;
  for (const auto& subset : subsets) {
    auto run = load_run(subset);
    if (run) runs.push_back(std::move(*run));
  }
  return runs;
}

void RunRegistry::write_or_check_manifest(const std::vector<Category>& categories,
                                          std::uint64_t seed, double alpha) const {
  json expected;
  expected["analysis_categories"] = json::array();
  for (Category c : categories) expected["analysis_categories"].push_back(std::string(to_string(c)));
  expected["seed"] = seed;
  expected["alpha"] = alpha;
  expected["runs"] = 1u << categories.size();

  const auto path = dir_ / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (in) {
    json existing;
    try {
      in >> existing;
    } catch (const json::exception&) {
      throw IoError("registry manifest '" + path.string() + "' is corrupt");
    }
    if (existing != expected) {
      throw ConfigError("registry at '" + dir_.string() +
                        "' was created for a different grid; use a fresh output directory");
    }
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write registry manifest '" + path.string() + "'");
  out << expected.dump(2) << '\n';
}

// ---- grid runner ---------------------------------------------------------

namespace {

// RAII advisory lock; a second writer fails fast instead of corrupting runs.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file '" + path.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw IoError("registry '" + path.parent_path().string() +
                    "' is locked by another writer");
    }
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace

std::vector<ExperimentRun> run_grid(const std::map<Category, Dataset>& dataset_by_category,
                                    const Dataset& base_dataset,
                                    const std::vector<EvalTask>& eval_tasks,
                                    const std::vector<SubsetId>& subsets,
                                    const GridOptions& options, const RunRegistry& registry) {
  if (subsets.empty()) throw ValidationError("run_grid: no subsets");
  for (const auto& subset : subsets) {
    for (Category c : subset.included) {
      if (dataset_by_category.find(c) == dataset_by_category.end()) {
        throw ValidationError("run_grid: no dataset for category '" +
                              std::string(to_string(c)) + "'");
      }
    }
    if (subset.included.empty() && base_dataset.empty()) {
      throw ValidationError("run_grid: the empty subset requires a non-empty base dataset");
    }
  }

  FileLock lock(registry.dir() / ".lock");

  std::vector<ExperimentRun> runs(subsets.size());
  std::vector<bool> needed(subsets.size(), false);
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (auto existing = registry.load_run(subsets[i]);
        existing && existing->status == RunStatus::kDone) {
      runs[i] = std::move(*existing);
    } else {
      needed[i] = true;
    }
  }

  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, options.jobs);

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= subsets.size()) return;
      if (!needed[i]) continue;

      ExperimentRun run;
      run.subset = subsets[i];
      run.seed = options.seed;
      try {
        Dataset data;
        data.append(base_dataset);
        for (Category c : subsets[i].included) data.append(dataset_by_category.at(c));

        TrainConfig cfg = options.train;
        cfg.seed = options.seed;
        TrainReport report = train(data, options.base_params, cfg);

        const std::string ckpt_rel = "checkpoints/run-" + subsets[i].name() + ".json";
        save_params(report.final_params, registry.dir() / ckpt_rel);
        run.checkpoint_path = ckpt_rel;
        run.scores = evaluate_all(report.final_params, eval_tasks);
        run.status = RunStatus::kDone;
      } catch (const std::exception& e) {
        run.status = RunStatus::kFailed;
        run.error = e.what();
        run.scores.reset();
      }

      {
        std::lock_guard<std::mutex> guard(io_mutex);
        registry.save_run(run);
        runs[i] = std::move(run);
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  bool any_done = false;
  for (const auto& run : runs) any_done |= run.status == RunStatus::kDone;
  if (!any_done) {
    std::string first_error = runs.empty() ? "" : runs.front().error;
    throw ValidationError("run_grid: all runs failed (first error: " + first_error + ")");
  }
  return runs;
}

}  // namespace sei
