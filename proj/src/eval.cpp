#include "sei/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "sei/error.hpp"
#include "sei/rng.hpp"

namespace sei {

using nlohmann::json;

std::string_view to_string(EvalCategory c) {
  switch (c) {
    case EvalCategory::kClassification: return "classification";
    case EvalCategory::kClustering: return "clustering";
    case EvalCategory::kRetrieval: return "retrieval";
    case EvalCategory::kReranking: return "reranking";
    case EvalCategory::kSts: return "sts";
  }
  return "unknown";
}

EvalCategory eval_category_from_string(std::string_view name) {
  for (EvalCategory c : kAllEvalCategories) {
    if (name == to_string(c)) return c;
  }
  throw ValidationError("unknown eval category: '" + std::string(name) + "'");
}

namespace {

std::map<int, std::size_t> label_counts(const std::vector<LabeledText>& items) {
  std::map<int, std::size_t> counts;
  for (const auto& it : items) ++counts[it.label];
  return counts;
}

}  // namespace

void EvalTask::validate() const {
  if (id.empty()) throw ValidationError("task id is empty");
  switch (category) {
    case EvalCategory::kClassification: {
      if (test.empty()) throw ValidationError("task '" + id + "': empty test split");
      const auto counts = label_counts(train);
      if (counts.size() < 2) throw ValidationError("task '" + id + "': needs >= 2 classes");
      for (const auto& [label, n] : counts) {
        if (n < 4) {
          throw ValidationError("task '" + id + "': class " + std::to_string(label) +
                                " has fewer than 4 train examples");
        }
      }
      break;
    }
    case EvalCategory::kClustering: {
      const auto counts = label_counts(items);
      if (counts.size() < 2) throw ValidationError("task '" + id + "': needs >= 2 gold clusters");
      if (items.size() < 2 * counts.size()) {
        throw ValidationError("task '" + id + "': needs >= 2k points");
      }
      break;
    }
    case EvalCategory::kRetrieval: {
      if (queries.empty()) throw ValidationError("task '" + id + "': no queries");
      for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        if (q.docs.empty()) {
          throw ValidationError("task '" + id + "': query " + std::to_string(i) + " has no docs");
        }
        if (q.docs.size() > 250) {
          throw ValidationError("task '" + id + "': query " + std::to_string(i) +
                                " exceeds 250 candidate documents");
        }
        if (q.relevance.size() != q.docs.size()) {
          throw ValidationError("task '" + id + "': query " + std::to_string(i) +
                                " relevance length mismatch");
        }
        bool any_rel = false;
        for (int r : q.relevance) {
          if (r < 0) {
            throw ValidationError("task '" + id + "': negative relevance grade");
          }
          any_rel |= r > 0;
        }
        if (!any_rel) {
          throw ValidationError("task '" + id + "': query " + std::to_string(i) +
                                " has no relevant document");
        }
      }
      break;
    }
    case EvalCategory::kReranking: {
      if (instances.empty()) throw ValidationError("task '" + id + "': no instances");
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (inst.labels.size() != inst.candidates.size()) {
          throw ValidationError("task '" + id + "': instance " + std::to_string(i) +
                                " label length mismatch");
        }
        int pos = 0, neg = 0;
        for (int l : inst.labels) {
          if (l != 0 && l != 1) {
            throw ValidationError("task '" + id + "': reranking labels must be 0/1");
          }
          (l == 1 ? pos : neg)++;
        }
        if (pos < 1 || neg < 1) {
          throw ValidationError("task '" + id + "': instance " + std::to_string(i) +
                                " needs >= 1 positive and >= 1 negative");
        }
      }
      break;
    }
    case EvalCategory::kSts: {
      if (pairs.size() < 3) throw ValidationError("task '" + id + "': needs >= 3 pairs");
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (const auto& p : pairs) {
        if (!std::isfinite(p.gold)) throw ValidationError("task '" + id + "': non-finite gold score");
        lo = std::min(lo, p.gold);
        hi = std::max(hi, p.gold);
      }
      if (lo == hi) throw ValidationError("task '" + id + "': gold scores are all equal");
      break;
    }
  }
}

EvalTask load_task(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open task file '" + path.string() + "'");
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ValidationError("task file '" + path.string() + "' is not valid JSON: " + e.what());
  }

  EvalTask task;
  try {
    task.id = obj.at("id").get<std::string>();
    task.category = eval_category_from_string(obj.at("category").get<std::string>());
    task.instruction = obj.value("instruction", std::string());

    auto read_labeled = [](const json& arr) {
      std::vector<LabeledText> out;
      for (const auto& item : arr) {
        out.push_back({item.at("text").get<std::string>(), item.at("label").get<int>()});
      }
      return out;
    };

    switch (task.category) {
      case EvalCategory::kClassification:
        task.train = read_labeled(obj.at("train"));
        task.test = read_labeled(obj.at("test"));
        break;
      case EvalCategory::kClustering:
        task.items = read_labeled(obj.at("items"));
        break;
      case EvalCategory::kRetrieval:
        for (const auto& q : obj.at("queries")) {
          RetrievalQuery rq;
          rq.query = q.at("query").get<std::string>();
          rq.docs = q.at("docs").get<std::vector<std::string>>();
          rq.relevance = q.at("relevance").get<std::vector<int>>();
          task.queries.push_back(std::move(rq));
        }
        break;
      case EvalCategory::kReranking:
        for (const auto& inst : obj.at("instances")) {
          RerankInstance ri;
          ri.query = inst.at("query").get<std::string>();
          ri.candidates = inst.at("candidates").get<std::vector<std::string>>();
          ri.labels = inst.at("labels").get<std::vector<int>>();
          task.instances.push_back(std::move(ri));
        }
        break;
      case EvalCategory::kSts:
        for (const auto& p : obj.at("pairs")) {
          task.pairs.push_back({p.at("text_a").get<std::string>(),
                                p.at("text_b").get<std::string>(),
                                p.at("score").get<double>()});
        }
        break;
    }
  } catch (const json::exception& e) {
    throw ValidationError("task file '" + path.string() + "': " + e.what());
  }

  task.validate();
  return task;
}

// ---- metric primitives ------------------------------------------------

double ndcg_at_k(const std::vector<int>& ranked_rels, int k) {
  const std::size_t cutoff = std::min<std::size_t>(ranked_rels.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    const double gain = std::pow(2.0, ranked_rels[i]) - 1.0;
    dcg += gain / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal = ranked_rels;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    const double gain = std::pow(2.0, ideal[i]) - 1.0;
    idcg += gain / std::log2(static_cast<double>(i) + 2.0);
  }
  if (idcg == 0.0) return 0.0;
  return dcg / idcg;
}

double average_precision(const std::vector<int>& ranked_labels) {
  int total_pos = 0;
  for (int l : ranked_labels) total_pos += (l == 1);
  if (total_pos == 0) return 0.0;
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
    if (ranked_labels[i] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_pos);
}

namespace {

double entropy_from_counts(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double v_measure(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size() || gold.empty()) {
    throw ValidationError("v_measure: label vectors must be non-empty and equal length");
  }
  const double n = static_cast<double>(gold.size());

  std::map<int, std::size_t> gold_counts, pred_counts;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++gold_counts[gold[i]];
    ++pred_counts[pred[i]];
    ++joint[{gold[i], pred[i]}];
  }

  const double h_gold = entropy_from_counts(gold_counts, n);
  const double h_pred = entropy_from_counts(pred_counts, n);

  // H(C|K): entropy of gold classes within each predicted cluster.
  double h_gold_given_pred = 0.0;
  double h_pred_given_gold = 0.0;
  for (const auto& [gp, c] : joint) {
    const double p_joint = static_cast<double>(c) / n;
    const double p_pred = static_cast<double>(pred_counts[gp.second]) / n;
    const double p_gold = static_cast<double>(gold_counts[gp.first]) / n;
    h_gold_given_pred -= p_joint * std::log(p_joint / p_pred);
    h_pred_given_gold -= p_joint * std::log(p_joint / p_gold);
  }

  const double homogeneity = h_gold > 0.0 ? 1.0 - h_gold_given_pred / h_gold : 1.0;
  const double completeness = h_pred > 0.0 ? 1.0 - h_pred_given_gold / h_pred : 1.0;
  if (homogeneity + completeness == 0.0) return 0.0;
  return 2.0 * homogeneity * completeness / (homogeneity + completeness);
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw ValidationError("spearman: need two equal-length vectors with >= 2 entries");
  }
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };

  const std::vector<double> rx = ranks(xs);
  const std::vector<double> ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

KMeansResult kmeans_once(const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  const std::size_t dim = points[0].size();

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.below(n)]);
  std::vector<double> min_d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& ctr : centroids) best = std::min(best, sq_dist(points[i], ctr));
      min_d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.next_double() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
        pick = i;  // numerical tail: fall back to the last point
      }
    } else {
      pick = rng.below(n);
    }
    centroids.push_back(points[pick]);
  }

  std::vector<int> assignment(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points[i], centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }

    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (counts[cu] == 0) {
        // Re-seed an empty cluster with the point farthest from its centroid.
        std::size_t far_i = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centroids[cu] = points[far_i];
        assignment[far_i] = c;
        changed = true;
      } else {
        for (std::size_t d = 0; d < dim; ++d) {
          centroids[cu][d] = sums[cu][d] / static_cast<double>(counts[cu]);
        }
      }
    }
    if (!changed && iter > 0) break;
  }

  KMeansResult result;
  result.assignment = assignment;
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.inertia += sq_dist(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts) {
  if (points.empty()) throw ValidationError("kmeans: no points");
  if (k < 1 || static_cast<std::size_t>(k) > points.size()) {
    throw ValidationError("kmeans: k must be in [1, n]");
  }
  if (restarts < 1) throw ValidationError("kmeans: restarts must be positive");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed + static_cast<std::uint64_t>(r));
    KMeansResult candidate = kmeans_once(points, k, rng);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

// ---- per-task evaluation ----------------------------------------------

namespace {

std::vector<double> unit_embed(const EmbedderParams& params, std::string_view instruction,
                               std::string_view text) {
  std::vector<double> e = embed(params, instruction, text);
  double n2 = 0.0;
  for (double v : e) n2 += v * v;
  if (n2 > 0.0) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : e) v *= inv;
  }
  return e;
}

// Multinomial logistic regression, full-batch gradient descent with zero
// init, fixed iteration cap and L2 penalty 1.0 on the weights (not the
// biases). Deterministic by construction.
class LogisticClassifier {
 public:
  void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int num_classes) {
    const std::size_t n = x.size();
    const std::size_t d = x[0].size();
    const auto c = static_cast<std::size_t>(num_classes);
    weights_.assign(c, std::vector<double>(d, 0.0));
    biases_.assign(c, 0.0);

    constexpr int kIters = 500;
    constexpr double kLr = 1.0;
    constexpr double kL2 = 1.0;

    std::vector<double> logits(c), probs(c);
    std::vector<std::vector<double>> gw(c, std::vector<double>(d, 0.0));
    std::vector<double> gb(c, 0.0);

    for (int iter = 0; iter < kIters; ++iter) {
      for (auto& row : gw) std::fill(row.begin(), row.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);

      for (std::size_t i = 0; i < n; ++i) {
        predict_probs(x[i], logits, probs);
        for (std::size_t cls = 0; cls < c; ++cls) {
          const double err = probs[cls] - (static_cast<int>(cls) == y[i] ? 1.0 : 0.0);
          for (std::size_t j = 0; j < d; ++j) gw[cls][j] += err * x[i][j];
          gb[cls] += err;
        }
      }

      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t cls = 0; cls < c; ++cls) {
        for (std::size_t j = 0; j < d; ++j) {
          const double g = gw[cls][j] * inv_n + kL2 * inv_n * weights_[cls][j];
          weights_[cls][j] -= kLr * g;
        }
        biases_[cls] -= kLr * gb[cls] * inv_n;
      }
    }
  }

  int predict(const std::vector<double>& x) const {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t cls = 0; cls < weights_.size(); ++cls) {
      double s = biases_[cls];
      for (std::size_t j = 0; j < x.size(); ++j) s += weights_[cls][j] * x[j];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(cls);
      }
    }
    return best;
  }

 private:
  void predict_probs(const std::vector<double>& x, std::vector<double>& logits,
                     std::vector<double>& probs) const {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t cls = 0; cls < weights_.size(); ++cls) {
      double s = biases_[cls];
      for (std::size_t j = 0; j < x.size(); ++j) s += weights_[cls][j] * x[j];
      logits[cls] = s;
      max_logit = std::max(max_logit, s);
    }
    double denom = 0.0;
    for (std::size_t cls = 0; cls < logits.size(); ++cls) {
      probs[cls] = std::exp(logits[cls] - max_logit);
      denom += probs[cls];
    }
    for (double& p : probs) p /= denom;
  }

  std::vector<std::vector<double>> weights_;
  std::vector<double> biases_;
};

void check_finite(const std::vector<double>& e, const std::string& task_id) {
  for (double v : e) {
    if (!std::isfinite(v)) throw ValidationError("task '" + task_id + "': non-finite embedding");
  }
}

// Indices 0..n-1 ordered by score descending, original order on ties.
std::vector<std::size_t> rank_by_score(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double eval_classification(const EmbedderParams& params, const EvalTask& task) {
  task.validate();

  // Remap labels to a dense 0..C-1 range in sorted label order.
  std::set<int> label_set;
  for (const auto& it : task.train) label_set.insert(it.label);
  std::map<int, int> remap;
  int next = 0;
  for (int l : label_set) remap[l] = next++;

  std::vector<std::vector<double>> x_train;
  std::vector<int> y_train;
  for (const auto& it : task.train) {
    auto e = unit_embed(params, {}, it.text);
    check_finite(e, task.id);
    x_train.push_back(std::move(e));
    y_train.push_back(remap.at(it.label));
  }

  LogisticClassifier clf;
  clf.fit(x_train, y_train, next);

  std::size_t correct = 0;
  for (const auto& it : task.test) {
    auto e = unit_embed(params, {}, it.text);
    check_finite(e, task.id);
    auto mapped = remap.find(it.label);
    const int gold = mapped == remap.end() ? -1 : mapped->second;
    if (clf.predict(e) == gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(task.test.size());
}

double eval_clustering(const EmbedderParams& params, const EvalTask& task, EvalFlags* flags) {
  task.validate();

  std::vector<std::vector<double>> points;
  std::vector<int> gold;
  for (const auto& it : task.items) {
    auto e = unit_embed(params, {}, it.text);
    check_finite(e, task.id);
    points.push_back(std::move(e));
    gold.push_back(it.label);
  }

  bool degenerate = true;
  for (std::size_t i = 1; i < points.size() && degenerate; ++i) {
    degenerate = points[i] == points[0];
  }
  if (flags != nullptr) flags->degenerate_embeddings = degenerate;

  const int k = static_cast<int>(label_counts(task.items).size());
  const KMeansResult km = kmeans(points, k, /*seed=*/fnv1a64(task.id), /*restarts=*/10);
  return v_measure(gold, km.assignment);
}

double eval_retrieval(const EmbedderParams& params, const EvalTask& task) {
  task.validate();

  double sum = 0.0;
  for (const auto& q : task.queries) {
    const auto qe = unit_embed(params, task.instruction, q.query);
    check_finite(qe, task.id);
    std::vector<double> scores(q.docs.size());
    for (std::size_t i = 0; i < q.docs.size(); ++i) {
      scores[i] = similarity(qe, unit_embed(params, {}, q.docs[i]));
    }
    const auto order = rank_by_score(scores);
    std::vector<int> ranked_rels(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) ranked_rels[i] = q.relevance[order[i]];
    sum += ndcg_at_k(ranked_rels, 10);
  }
  return sum / static_cast<double>(task.queries.size());
}

double eval_reranking(const EmbedderParams& params, const EvalTask& task) {
  task.validate();

  double sum = 0.0;
  for (const auto& inst : task.instances) {
    const auto qe = unit_embed(params, task.instruction, inst.query);
    check_finite(qe, task.id);
    std::vector<double> scores(inst.candidates.size());
    for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
      scores[i] = similarity(qe, unit_embed(params, {}, inst.candidates[i]));
    }
    const auto order = rank_by_score(scores);
    std::vector<int> ranked_labels(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) ranked_labels[i] = inst.labels[order[i]];
    sum += average_precision(ranked_labels);
  }
  return sum / static_cast<double>(task.instances.size());
}

double eval_sts(const EmbedderParams& params, const EvalTask& task) {
  task.validate();

  std::vector<double> sims, gold;
  sims.reserve(task.pairs.size());
  gold.reserve(task.pairs.size());
  for (const auto& p : task.pairs) {
    const auto ea = unit_embed(params, {}, p.text_a);
    const auto eb = unit_embed(params, {}, p.text_b);
    check_finite(ea, task.id);
    check_finite(eb, task.id);
    sims.push_back(similarity(ea, eb));
    gold.push_back(p.gold);
  }
  return spearman(sims, gold);
}

double eval_task_score(const EmbedderParams& params, const EvalTask& task) {
  switch (task.category) {
    case EvalCategory::kClassification: return eval_classification(params, task);
    case EvalCategory::kClustering: return eval_clustering(params, task);
    case EvalCategory::kRetrieval: return eval_retrieval(params, task);
    case EvalCategory::kReranking: return eval_reranking(params, task);
    case EvalCategory::kSts: return eval_sts(params, task);
  }
  throw ValidationError("unknown eval category");
}

ScoreTable aggregate(const std::map<std::string, double>& per_task_scores,
                     const std::map<std::string, EvalCategory>& task_registry) {
  ScoreTable table;
  table.per_task = per_task_scores;

  std::map<std::string, std::pair<double, std::size_t>> by_category;
  double total = 0.0;
  for (const auto& [task_id, score] : per_task_scores) {
    auto it = task_registry.find(task_id);
    if (it == task_registry.end()) {
      throw ValidationError("aggregate: unknown task id '" + task_id + "'");
    }
    auto& [sum, count] = by_category[std::string(to_string(it->second))];
    sum += score;
    ++count;
    total += score;
  }
  for (const auto& [cat, agg] : by_category) {
    table.per_category[cat] = agg.first / static_cast<double>(agg.second);
  }
  table.overall =
      per_task_scores.empty() ? 0.0 : total / static_cast<double>(per_task_scores.size());
  return table;
}

ScoreTable evaluate_all(const EmbedderParams& params, const std::vector<EvalTask>& tasks) {
  std::map<std::string, double> per_task;
  std::map<std::string, EvalCategory> registry;
  for (const auto& task : tasks) {
    if (registry.count(task.id) != 0) {
      throw ValidationError("duplicate task id '" + task.id + "'");
    }
    registry[task.id] = task.category;
    per_task[task.id] = eval_task_score(params, task);
  }
  return aggregate(per_task, registry);
}

}  // namespace sei
