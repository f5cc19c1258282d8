#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sei/embedder.hpp"

namespace sei {

enum class EvalCategory { kClassification, kClustering, kRetrieval, kReranking, kSts };

inline constexpr std::array<EvalCategory, 5> kAllEvalCategories = {
    EvalCategory::kClassification, EvalCategory::kClustering, EvalCategory::kRetrieval,
    EvalCategory::kReranking, EvalCategory::kSts,
};

std::string_view to_string(EvalCategory c);
EvalCategory eval_category_from_string(std::string_view name);

struct LabeledText {
  std::string text;
  int label = 0;
};

struct RetrievalQuery {
  std::string query;
  std::vector<std::string> docs;
  std::vector<int> relevance;  // graded, parallel to docs
};

struct RerankInstance {
  std::string query;
  std::vector<std::string> candidates;
  std::vector<int> labels;  // 1 = positive, 0 = negative
};

struct StsPair {
  std::string text_a;
  std::string text_b;
  double gold = 0.0;
};

// One evaluation task. Only the payload matching `category` is populated.
struct EvalTask {
  std::string id;
  EvalCategory category = EvalCategory::kClassification;
  std::string instruction;  // prepended to queries for retrieval/reranking

  std::vector<LabeledText> train, test;   // classification
  std::vector<LabeledText> items;         // clustering, label = gold cluster
  std::vector<RetrievalQuery> queries;    // retrieval
  std::vector<RerankInstance> instances;  // reranking
  std::vector<StsPair> pairs;             // sts

  void validate() const;
};

EvalTask load_task(const std::filesystem::path& path);

// ---- metric primitives ------------------------------------------------

// nDCG@k over relevances in ranked order; gain 2^rel - 1, log2(rank+1)
// discount. Returns 0 when the ideal DCG is 0.
double ndcg_at_k(const std::vector<int>& ranked_rels, int k);

// Average precision over binary labels in ranked order. Returns 0 when the
// list has no positives.
double average_precision(const std::vector<int>& ranked_labels);

// Harmonic mean of homogeneity and completeness, natural-log entropies.
double v_measure(const std::vector<int>& gold, const std::vector<int>& pred);

// Spearman rank correlation with average-rank tie handling. Returns 0 when
// either side has zero rank variance.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct KMeansResult {
  std::vector<int> assignment;
  double inertia = 0.0;
};

// Full-batch Lloyd iterations with k-means++ seeding; `restarts` independent
// seedings, best inertia wins. Deterministic for a given seed.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts = 10);

// ---- per-task evaluation ----------------------------------------------

struct EvalFlags {
  bool degenerate_embeddings = false;  // clustering: all embeddings identical
};

double eval_classification(const EmbedderParams& params, const EvalTask& task);
double eval_clustering(const EmbedderParams& params, const EvalTask& task,
                       EvalFlags* flags = nullptr);
double eval_retrieval(const EmbedderParams& params, const EvalTask& task);
double eval_reranking(const EmbedderParams& params, const EvalTask& task);
double eval_sts(const EmbedderParams& params, const EvalTask& task);

// Dispatch on task.category.
double eval_task_score(const EmbedderParams& params, const EvalTask& task);

struct ScoreTable {
  std::map<std::string, double> per_task;
  std::map<std::string, double> per_category;  // keyed by eval-category name
  double overall = 0.0;
};

// Unweighted per-category means and unweighted overall mean over tasks.
// Every scored task must appear in the registry.
ScoreTable aggregate(const std::map<std::string, double>& per_task_scores,
                     const std::map<std::string, EvalCategory>& task_registry);

// Evaluates every task with frozen params and aggregates.
ScoreTable evaluate_all(const EmbedderParams& params, const std::vector<EvalTask>& tasks);

}  // namespace sei
