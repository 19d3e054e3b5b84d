#pragma once

#include <span>
#include <vector>

namespace mcrood::metrics {

/// Scores for negatives (ID) and positives (OOD); larger means more OOD.
struct ScoreSet {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

/// P(ood > id) + P(ood == id) / 2, via mid-ranks.
double auroc(const ScoreSet& s);

/// Average precision with OOD as the positive class: sum over distinct
/// thresholds t (descending) of (R(t) - R(prev)) * P(t), where a sample is
/// flagged when its score is >= t.
double aupr(const ScoreSet& s);

/// FPR at the highest threshold whose TPR reaches `level`, flagging scores >= t.
double fpr_at_tpr(const ScoreSet& s, double level);

struct MetricSummary {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double fpr80 = 0.0;
};

MetricSummary summarize(const ScoreSet& s);

}  // namespace mcrood::metrics
