#include "mcrood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "mcrood/error.hpp"

namespace mcrood::metrics {

namespace {

void check(const ScoreSet& s) {
  if (s.id_scores.empty() || s.ood_scores.empty()) {
    throw ArgumentError("metrics need non-empty ID and OOD score sets");
  }
  for (const auto* v : {&s.id_scores, &s.ood_scores}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw DataError("metrics: non-finite score");
    }
  }
}

// (score, is_ood) sorted by score.
std::vector<std::pair<double, bool>> pooled(const ScoreSet& s) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(s.id_scores.size() + s.ood_scores.size());
  for (double x : s.id_scores) all.emplace_back(x, false);
  for (double x : s.ood_scores) all.emplace_back(x, true);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return all;
}

}  // namespace

double auroc(const ScoreSet& s) {
  check(s);
  const auto all = pooled(s);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    while (j < all.size() && all[j].first == all[i].first) pos += all[j++].second ? 1 : 0;
    // ranks i+1 .. j share their mean
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += mid * static_cast<double>(pos);
    i = j;
  }
  const auto n_pos = static_cast<double>(s.ood_scores.size());
  const auto n_neg = static_cast<double>(s.id_scores.size());
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double aupr(const ScoreSet& s) {
  check(s);
  auto all = pooled(s);
  std::reverse(all.begin(), all.end());
  const auto n_pos = static_cast<double>(s.ood_scores.size());
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(const ScoreSet& s, double level) {
  check(s);
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("fpr_at_tpr: level must be in (0, 1)");
  std::vector<double> ood = s.ood_scores;
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const auto n_pos = static_cast<double>(ood.size());
  std::size_t k = 1;
  while (static_cast<double>(k) / n_pos < level) ++k;
  const double t = ood[k - 1];
  const auto fp = std::count_if(s.id_scores.begin(), s.id_scores.end(),
                                [t](double x) { return x >= t; });
  return static_cast<double>(fp) / static_cast<double>(s.id_scores.size());
}

MetricSummary summarize(const ScoreSet& s) {
  return {auroc(s), aupr(s), fpr_at_tpr(s, 0.95), fpr_at_tpr(s, 0.80)};
}

}  // namespace mcrood::metrics
