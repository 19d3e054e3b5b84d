#include "mcrood/detector.hpp"

#include <algorithm>
#include <cmath>

#include "mcrood/error.hpp"

namespace mcrood {

std::string_view to_string(Verdict v) noexcept { return v == Verdict::ood ? "OOD" : "ID"; }

void Thresholds::validate() const {
  if (values.empty() || values.size() != classes.size()) {
    throw ConfigError("thresholds: need one value per class");
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("thresholds: values must be finite and >= 0");
  }
}

static void check_errors(std::span<const double> errors, std::size_t n) {
  if (errors.size() != n) {
    throw ArgumentError("expected " + std::to_string(n) + " class errors, got " +
                        std::to_string(errors.size()));
  }
}

Verdict classify(std::span<const double> errors, const Thresholds& t) {
  check_errors(errors, t.values.size());
  for (std::size_t c = 0; c < errors.size(); ++c) {
    if (!(errors[c] > t.values[c])) return Verdict::id;
  }
  return Verdict::ood;
}

double ood_score(std::span<const double> errors) {
  if (errors.empty()) throw ArgumentError("ood_score: no class errors");
  return *std::min_element(errors.begin(), errors.end());
}

std::optional<std::size_t> predicted_class(std::span<const double> errors, const Thresholds& t) {
  check_errors(errors, t.values.size());
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < errors.size(); ++c) {
    if (errors[c] <= t.values[c] && (!best || errors[c] < errors[*best])) best = c;
  }
  return best;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw ArgumentError("quantile level must be in (0, 1]");
  const auto n = static_cast<double>(values.size());
  // The epsilon keeps q*n that is integral up to rounding (0.8*10) on its rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

Thresholds calibrate_from_errors(const std::vector<std::string>& classes,
                                 const std::vector<std::vector<double>>& errors,
                                 double target_tpr) {
  if (!(target_tpr > 0.0 && target_tpr < 1.0)) {
    throw ArgumentError("calibrate: target TPR must be in (0, 1)");
  }
  if (errors.size() != classes.size()) throw ArgumentError("calibrate: one error set per class");
  Thresholds t;
  t.classes = classes;
  t.target_tpr = target_tpr;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (errors[c].empty()) {
      throw ArgumentError("calibrate: empty calibration set for class '" + classes[c] + "'");
    }
    t.values.push_back(nearest_rank_quantile(errors[c], target_tpr));
    t.calibration_sizes.push_back(errors[c].size());
  }
  return t;
}

template <typename T>
Thresholds calibrate(const MultiDecoderModel<T>& model, std::span<const nn::Tensor<T>> held_out,
                     double target_tpr, std::size_t batch) {
  if (held_out.size() != model.num_classes()) {
    throw ArgumentError("calibrate: expected one held-out set per class");
  }
  batch = std::max<std::size_t>(batch, 1);
  std::vector<std::vector<double>> errors(model.num_classes());
  for (std::size_t c = 0; c < held_out.size(); ++c) {
    const nn::Tensor<T>& x = held_out[c];
    const std::size_t n = x.rank() == 0 ? 0 : x.dim(0);
    for (std::size_t i = 0; i < n; i += batch) {
      const std::size_t m = std::min(batch, n - i);
      std::vector<std::size_t> idx(m);
      for (std::size_t k = 0; k < m; ++k) idx[k] = i + k;
      nn::Shape shape = x.shape();
      shape[0] = m;
      const std::size_t row = x.size() / n;
      nn::Tensor<T> chunk(shape, std::vector<T>(x.ptr() + i * row, x.ptr() + (i + m) * row));
      for (const auto& e : model.reconstruction_errors_batch(chunk)) errors[c].push_back(e[c]);
    }
  }
  return calibrate_from_errors(model.classes(), errors, target_tpr);
}

DetectionReport detect(const std::vector<std::vector<double>>& errors, const Thresholds& t) {
  DetectionReport report;
  report.samples.reserve(errors.size());
  for (const auto& e : errors) {
    SampleDetection s;
    s.errors = e;
    s.verdict = classify(e, t);
    if (s.verdict == Verdict::id) {
      s.predicted = predicted_class(e, t);
      ++report.n_id;
    } else {
      ++report.n_ood;
    }
    report.samples.push_back(std::move(s));
  }
  return report;
}

template Thresholds calibrate(const MultiDecoderModel<float>&, std::span<const nn::Tensor<float>>,
                              double, std::size_t);
template Thresholds calibrate(const MultiDecoderModel<double>&,
                              std::span<const nn::Tensor<double>>, double, std::size_t);

}  // namespace mcrood
