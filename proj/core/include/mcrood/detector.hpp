#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcrood/model.hpp"

namespace mcrood {

enum class Verdict { id, ood };

std::string_view to_string(Verdict v) noexcept;

/// Per-class reconstruction-error thresholds, in the model's class order.
struct Thresholds {
  std::vector<std::string> classes;
  std::vector<double> values;
  double target_tpr = 0.95;
  std::vector<std::size_t> calibration_sizes;

  void validate() const;
};

/// OOD only if every class error strictly exceeds its threshold.
Verdict classify(std::span<const double> errors, const Thresholds& t);

/// Lowest per-class error; larger means more anomalous.
double ood_score(std::span<const double> errors);

/// Class with the smallest error among those within threshold, if any.
std::optional<std::size_t> predicted_class(std::span<const double> errors, const Thresholds& t);

/// Nearest-rank quantile: the ceil(q*n)-th smallest value (1-based), q in (0,1].
double nearest_rank_quantile(std::vector<double> values, double q);

/// Thresholds from per-class calibration errors, where errors[c] are class c's
/// own-decoder errors on held-out class c samples.
Thresholds calibrate_from_errors(const std::vector<std::string>& classes,
                                 const std::vector<std::vector<double>>& errors, double target_tpr);

/// Scores held-out images of each class ([N,1,S,S] tensors, model class order)
/// and calibrates from their own-class errors.
template <typename T>
Thresholds calibrate(const MultiDecoderModel<T>& model, std::span<const nn::Tensor<T>> held_out,
                     double target_tpr = 0.95, std::size_t batch = 64);

struct SampleDetection {
  std::vector<double> errors;
  Verdict verdict = Verdict::id;
  std::optional<std::size_t> predicted;
};

struct DetectionReport {
  std::vector<SampleDetection> samples;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

DetectionReport detect(const std::vector<std::vector<double>>& errors, const Thresholds& t);

}  // namespace mcrood
