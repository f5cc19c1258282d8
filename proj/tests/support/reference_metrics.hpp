#pragma once

// Naive, textbook-style reference implementations of the evaluation metrics.
// Kept deliberately simple and independent of the library code paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

namespace sei::testing {

inline double naive_ndcg_at_k(const std::vector<int>& rels, int k) {
  auto dcg = [&](const std::vector<int>& order) {
    double total = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(order.size()); ++i) {
      total += (std::pow(2.0, order[static_cast<std::size_t>(i)]) - 1.0) /
               std::log2(static_cast<double>(i) + 2.0);
    }
    return total;
  };
  std::vector<int> ideal = rels;
  std::sort(ideal.rbegin(), ideal.rend());
  const double best = dcg(ideal);
  return best == 0.0 ? 0.0 : dcg(rels) / best;
}

inline double naive_average_precision(const std::vector<int>& labels) {
  int total = 0;
  for (int l : labels) total += l;
  if (total == 0) return 0.0;
  double sum = 0.0;
  int seen = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++seen;
      sum += static_cast<double>(seen) / static_cast<double>(i + 1);
    }
  }
  return sum / total;
}

inline double naive_v_measure(const std::vector<int>& gold, const std::vector<int>& pred) {
  const double n = static_cast<double>(gold.size());
  std::map<int, double> pc, pk;
  std::map<std::pair<int, int>, double> pj;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    pc[gold[i]] += 1.0 / n;
    pk[pred[i]] += 1.0 / n;
    pj[{gold[i], pred[i]}] += 1.0 / n;
  }
  auto entropy = [](const std::map<int, double>& dist) {
    double h = 0.0;
    for (const auto& [k, p] : dist) {
      if (p > 0.0) h -= p * std::log(p);
    }
    return h;
  };
  const double hc = entropy(pc);
  const double hk = entropy(pk);
  double hc_k = 0.0, hk_c = 0.0;
  for (const auto& [key, p] : pj) {
    hc_k -= p * std::log(p / pk[key.second]);
    hk_c -= p * std::log(p / pc[key.first]);
  }
  const double hom = hc > 0.0 ? 1.0 - hc_k / hc : 1.0;
  const double com = hk > 0.0 ? 1.0 - hk_c / hk : 1.0;
  return hom + com > 0.0 ? 2.0 * hom * com / (hom + com) : 0.0;
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) {
      r[idx[t]] = 1.0 + (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    }
    i = j + 1;
  }
  return r;
}

inline double naive_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace sei::testing
