#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcrood/model.hpp"

namespace mcrood {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

/// Training images of one class, [N,1,S,S] with values in [0,1].
template <typename T>
struct ClassDataset {
  std::string name;
  nn::Tensor<T> images;

  std::size_t size() const noexcept { return images.rank() == 0 ? 0 : images.dim(0); }
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_class;
};

/// MSE of class `c`'s decoder on `batch`, run in training mode. Gradients of
/// that term are *added* to the encoder and to decoder `c` only.
template <typename T>
double class_loss(MultiDecoderModel<T>& model, std::size_t c, const nn::Tensor<T>& batch);

/// Sum over classes of each decoder's batch MSE, one batch per class (in the
/// model's class order, all of equal size). Zeroes and then fills every
/// parameter gradient.
template <typename T>
LossBreakdown multi_class_loss(MultiDecoderModel<T>& model, std::span<const nn::Tensor<T>> batches);

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(const std::vector<nn::ParamRef<T>>& params);
  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Rows `indices` of an [N,...] tensor, in order.
template <typename T>
nn::Tensor<T> gather_rows(const nn::Tensor<T>& x, std::span<const std::size_t> indices);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains encoder and decoders jointly. Datasets are matched to the model's
/// classes by name. Each epoch shuffles every class independently and takes
/// min(class size) / batch_size aligned steps; longer classes are resampled
/// each epoch. Appends to and returns model.log().
template <typename T>
const TrainingLog& train(MultiDecoderModel<T>& model, std::span<const ClassDataset<T>> data,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace mcrood
