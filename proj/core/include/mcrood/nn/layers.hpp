#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mcrood/nn/ops.hpp"
#include "mcrood/nn/tensor.hpp"

namespace mcrood::nn {

enum class Mode { train, eval };

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

/// Whatever a layer needs from its forward pass to run backward. Owned by the
/// caller, so one layer can be applied several times before backpropagating.
template <typename T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> output;
  Shape input_shape;
  BatchNormStats<T> bn;
  std::vector<std::uint32_t> index;
  Mode mode = Mode::eval;
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const noexcept { return name_; }

  /// Pure forward; `cache` may be null when no backward pass follows.
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) = 0;
  /// Folds training-mode side effects (batch-norm running stats) into the layer.
  virtual void commit(const LayerCache<T>& /*cache*/) {}

  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual std::vector<BufferRef<T>> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

 private:
  std::string name_;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t filters, std::size_t kernel = 3);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::vector<ParamRef<T>> params() override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  Tensor<T> weight, bias, grad_weight, grad_bias;  // weight [F,C,k,k]
};

template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(std::string name, std::size_t in_channels, std::size_t filters,
                  std::size_t kernel = 3);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::vector<ParamRef<T>> params() override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<ConvTranspose2d>(*this);
  }

  Tensor<T> weight, bias, grad_weight, grad_bias;  // weight [C,F,k,k]
};

/// Batch normalisation for [N,C] (1-D) and [N,C,H,W] (2-D) inputs.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  void commit(const LayerCache<T>& cache) override;
  std::vector<ParamRef<T>> params() override;
  std::vector<BufferRef<T>> buffers() override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }

  Tensor<T> gamma, beta, grad_gamma, grad_beta;
  Tensor<T> running_mean, running_var;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t out_features);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::vector<ParamRef<T>> params() override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

  Tensor<T> weight, bias, grad_weight, grad_bias;  // weight [out,in]
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sigmoid>(*this); }
};

template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2>(*this); }
};

template <typename T>
class Upsample2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2>(*this); }
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
};

/// [N, C*H*W] -> [N, C, H, W]
template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(std::string name, std::size_t channels, std::size_t height, std::size_t width);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const override;
  Tensor<T> backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  std::size_t c_, h_, w_;
};

template <typename T>
using Tape = std::vector<LayerCache<T>>;

/// Ordered stack of named layers.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  /// Train mode updates batch-norm running statistics. When `tape` is given
  /// it receives one cache per layer for backward().
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape = nullptr);
  /// Eval-mode forward; touches no state.
  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape);

  std::vector<ParamRef<T>> params(const std::string& prefix);
  std::vector<BufferRef<T>> buffers(const std::string& prefix);
  void zero_grad();

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

void init_he_uniform(Tensor<float>& w, std::size_t fan_in, std::mt19937_64& rng);
void init_he_uniform(Tensor<double>& w, std::size_t fan_in, std::mt19937_64& rng);
void init_glorot_uniform(Tensor<float>& w, std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng);
void init_glorot_uniform(Tensor<double>& w, std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng);

}  // namespace mcrood::nn
