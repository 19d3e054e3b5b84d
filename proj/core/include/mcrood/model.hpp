#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mcrood/nn/layers.hpp"
#include "mcrood/nn/tensor.hpp"

namespace mcrood {

/// Architecture hyper-parameters. The encoder halves the image once per entry
/// in `filters`; decoders mirror it with the filter list reversed.
struct ModelConfig {
  std::size_t input_size = 64;
  std::vector<std::size_t> filters = {16, 32, 64};
  std::size_t latent_dim = 64;
  std::size_t kernel = 3;
  std::vector<std::string> classes = {"sit", "stand", "walk"};

  /// Rejects configs whose downsampling ladder does not close exactly.
  void validate() const;

  std::size_t bottleneck_size() const noexcept { return input_size >> filters.size(); }
  std::size_t flat_features() const noexcept {
    return filters.empty() ? 0 : filters.back() * bottleneck_size() * bottleneck_size();
  }
};

struct TrainingLog {
  std::size_t epochs_completed = 0;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> epoch_loss;
};

/// One shared encoder and one decoder per in-distribution class.
template <typename T>
class MultiDecoderModel {
 public:
  MultiDecoderModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& classes() const noexcept { return config_.classes; }
  std::size_t num_classes() const noexcept { return config_.classes.size(); }
  /// Throws ArgumentError for a class outside the model's class set.
  std::size_t class_index(std::string_view name) const;

  nn::Sequential<T>& encoder() noexcept { return encoder_; }
  const nn::Sequential<T>& encoder() const noexcept { return encoder_; }
  nn::Sequential<T>& decoder(std::size_t c) { return decoders_.at(c); }
  const nn::Sequential<T>& decoder(std::size_t c) const { return decoders_.at(c); }

  /// Eval-mode encoder pass, [N,1,S,S] -> [N,latent_dim].
  nn::Tensor<T> encode(const nn::Tensor<T>& x) const;
  /// Eval-mode decoder pass, [N,latent_dim] -> [N,1,S,S] in (0,1).
  nn::Tensor<T> decode(std::string_view cls, const nn::Tensor<T>& z) const;
  nn::Tensor<T> decode(std::size_t c, const nn::Tensor<T>& z) const;

  /// Per-class reconstruction MSE of one image ([S,S] or [1,1,S,S]), in class order.
  std::vector<double> reconstruction_errors(const nn::Tensor<T>& x) const;
  /// Row i holds the per-class errors of sample i of an [N,1,S,S] batch.
  std::vector<std::vector<double>> reconstruction_errors_batch(const nn::Tensor<T>& x) const;

  /// Trainable parameters, named "encoder.<layer>.<param>" and
  /// "decoder.<class>.<layer>.<param>", in a fixed order.
  std::vector<nn::ParamRef<T>> params();
  std::vector<nn::BufferRef<T>> buffers();
  void zero_grad();

  TrainingLog& log() noexcept { return log_; }
  const TrainingLog& log() const noexcept { return log_; }

  /// Checks an input batch is [N,1,S,S] with values in [0,1].
  void check_input(const nn::Tensor<T>& x) const;

 private:
  ModelConfig config_;
  nn::Sequential<T> encoder_;
  std::vector<nn::Sequential<T>> decoders_;
  TrainingLog log_;
};

/// Mean of (a - b)^2 over every element.
template <typename T>
double mse(const nn::Tensor<T>& a, const nn::Tensor<T>& b);

extern template class MultiDecoderModel<float>;
extern template class MultiDecoderModel<double>;

}  // namespace mcrood
