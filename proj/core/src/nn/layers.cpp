#include "mcrood/nn/layers.hpp"

#include <cmath>

namespace mcrood::nn {
namespace {

template <typename T>
void uniform_fill(Tensor<T>& w, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.data()) v = static_cast<T>(dist(rng));
}

}  // namespace

void init_he_uniform(Tensor<float>& w, std::size_t fan_in, std::mt19937_64& rng) {
  uniform_fill(w, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}
void init_he_uniform(Tensor<double>& w, std::size_t fan_in, std::mt19937_64& rng) {
  uniform_fill(w, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}
void init_glorot_uniform(Tensor<float>& w, std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng) {
  uniform_fill(w, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}
void init_glorot_uniform(Tensor<double>& w, std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng) {
  uniform_fill(w, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

// ---- Conv2d ---------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t filters,
                  std::size_t kernel)
    : Layer<T>(std::move(name)),
      weight({filters, in_channels, kernel, kernel}),
      bias({filters}),
      grad_weight(weight.shape()),
      grad_bias(bias.shape()) {}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (cache) {
    cache->input = x;
    cache->mode = mode;
  }
  return conv2d(x, weight, bias);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return conv2d_backward(cache.input, weight, grad_out, grad_weight, grad_bias);
}

template <typename T>
std::vector<ParamRef<T>> Conv2d<T>::params() {
  return {{"weight", &weight, &grad_weight}, {"bias", &bias, &grad_bias}};
}

// ---- ConvTranspose2d ------------------------------------------------------

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, std::size_t in_channels,
                                    std::size_t filters, std::size_t kernel)
    : Layer<T>(std::move(name)),
      weight({in_channels, filters, kernel, kernel}),
      bias({filters}),
      grad_weight(weight.shape()),
      grad_bias(bias.shape()) {}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, Mode mode,
                                      LayerCache<T>* cache) const {
  if (cache) {
    cache->input = x;
    cache->mode = mode;
  }
  return conv2d_transpose(x, weight, bias);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return conv2d_transpose_backward(cache.input, weight, grad_out, grad_weight, grad_bias);
}

template <typename T>
std::vector<ParamRef<T>> ConvTranspose2d<T>::params() {
  return {{"weight", &weight, &grad_weight}, {"bias", &bias, &grad_bias}};
}

// ---- BatchNorm ------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels)
    : Layer<T>(std::move(name)),
      gamma({channels}, T{1}),
      beta({channels}),
      grad_gamma({channels}),
      grad_beta({channels}),
      running_mean({channels}),
      running_var({channels}, T{1}) {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (mode == Mode::train) {
    BatchNormStats<T> local;
    BatchNormStats<T>& stats = cache ? cache->bn : local;
    Tensor<T> y = batchnorm_train(x, gamma, beta, stats);
    if (cache) cache->mode = mode;
    return y;
  }
  if (cache) {
    cache->input = x;
    cache->mode = mode;
  }
  return batchnorm_eval(x, gamma, beta, running_mean, running_var);
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  if (cache.mode == Mode::train) {
    return batchnorm_train_backward(grad_out, gamma, cache.bn, grad_gamma, grad_beta);
  }
  return batchnorm_eval_backward(cache.input, grad_out, gamma, running_mean, running_var,
                                 grad_gamma, grad_beta);
}

template <typename T>
void BatchNorm<T>::commit(const LayerCache<T>& cache) {
  if (cache.mode != Mode::train || cache.bn.mean.empty()) return;
  const auto& xh = cache.bn.x_hat;
  const std::size_t s = xh.rank() == 4 ? xh.dim(2) * xh.dim(3) : 1;
  const double m = static_cast<double>(xh.dim(0) * s);
  const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
  const double mom = kBatchNormMomentum;
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = static_cast<T>((1.0 - mom) * static_cast<double>(running_mean[c]) +
                                     mom * static_cast<double>(cache.bn.mean[c]));
    running_var[c] = static_cast<T>((1.0 - mom) * static_cast<double>(running_var[c]) +
                                    mom * static_cast<double>(cache.bn.var[c]) * unbias);
  }
}

template <typename T>
std::vector<ParamRef<T>> BatchNorm<T>::params() {
  return {{"gamma", &gamma, &grad_gamma}, {"beta", &beta, &grad_beta}};
}

template <typename T>
std::vector<BufferRef<T>> BatchNorm<T>::buffers() {
  return {{"running_mean", &running_mean}, {"running_var", &running_var}};
}

// ---- Dense ----------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in_features, std::size_t out_features)
    : Layer<T>(std::move(name)),
      weight({out_features, in_features}),
      bias({out_features}),
      grad_weight(weight.shape()),
      grad_bias(bias.shape()) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (cache) {
    cache->input = x;
    cache->mode = mode;
  }
  return dense(x, weight, bias);
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return dense_backward(cache.input, weight, grad_out, grad_weight, grad_bias);
}

template <typename T>
std::vector<ParamRef<T>> Dense<T>::params() {
  return {{"weight", &weight, &grad_weight}, {"bias", &bias, &grad_bias}};
}

// ---- stateless layers -----------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (cache) {
    cache->input = x;
    cache->mode = mode;
  }
  return relu(x);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return relu_backward(cache.input, grad_out);
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  Tensor<T> y = sigmoid(x);
  if (cache) {
    cache->output = y;
    cache->mode = mode;
  }
  return y;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return sigmoid_backward(cache.output, grad_out);
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (!cache) return maxpool2(x);
  cache->input_shape = x.shape();
  cache->mode = mode;
  return maxpool2(x, &cache->index);
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return maxpool2_backward(cache.input_shape, grad_out, cache.index);
}

template <typename T>
Tensor<T> Upsample2<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (cache) cache->mode = mode;
  return upsample2(x);
}

template <typename T>
Tensor<T> Upsample2<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>&) {
  return upsample2_backward(grad_out);
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (cache) {
    cache->input_shape = x.shape();
    cache->mode = mode;
  }
  return flatten(x);
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>& cache) {
  return grad_out.reshaped(cache.input_shape);
}

template <typename T>
Reshape<T>::Reshape(std::string name, std::size_t channels, std::size_t height,
                    std::size_t width)
    : Layer<T>(std::move(name)), c_(channels), h_(height), w_(width) {}

template <typename T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) const {
  if (x.rank() != 2 || x.dim(1) != c_ * h_ * w_) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as [N," +
                     std::to_string(c_) + "," + std::to_string(h_) + "," + std::to_string(w_) +
                     "]");
  }
  if (cache) cache->mode = mode;
  return x.reshaped({x.dim(0), c_, h_, w_});
}

template <typename T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& grad_out, const LayerCache<T>&) {
  return grad_out.reshaped({grad_out.dim(0), c_ * h_ * w_});
}

// ---- Sequential -----------------------------------------------------------

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) {
  if (tape) {
    tape->clear();
    tape->resize(layers_.size());
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerCache<T> local;
    LayerCache<T>* cache = tape ? &(*tape)[i] : (mode == Mode::train ? &local : nullptr);
    h = layers_[i]->forward(h, mode, cache);
    require_finite(h, layers_[i]->name());
    if (mode == Mode::train) layers_[i]->commit(*cache);
  }
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& l : layers_) {
    h = l->forward(h, Mode::eval, nullptr);
    require_finite(h, l->name());
  }
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out, const Tape<T>& tape) {
  if (tape.size() != layers_.size()) {
    throw ArgumentError("Sequential::backward: tape does not match the layer stack");
  }
  Tensor<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, tape[i]);
    if (!g.all_finite()) throw NumericError("non-finite gradient from " + layers_[i]->name());
  }
  return g;
}

template <typename T>
std::vector<ParamRef<T>> Sequential<T>::params(const std::string& prefix) {
  std::vector<ParamRef<T>> out;
  for (auto& l : layers_) {
    for (auto p : l->params()) {
      p.name = prefix + "." + l->name() + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename T>
std::vector<BufferRef<T>> Sequential<T>::buffers(const std::string& prefix) {
  std::vector<BufferRef<T>> out;
  for (auto& l : layers_) {
    for (auto b : l->buffers()) {
      b.name = prefix + "." + l->name() + "." + b.name;
      out.push_back(std::move(b));
    }
  }
  return out;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto& l : layers_) {
    for (auto& p : l->params()) p.grad->fill(T{0});
  }
}

#define MCROOD_INSTANTIATE_LAYERS(T) \
  template class Conv2d<T>;          \
  template class ConvTranspose2d<T>; \
  template class BatchNorm<T>;       \
  template class Dense<T>;           \
  template class ReLU<T>;            \
  template class Sigmoid<T>;         \
  template class MaxPool2<T>;        \
  template class Upsample2<T>;       \
  template class Flatten<T>;         \
  template class Reshape<T>;         \
  template class Sequential<T>;

MCROOD_INSTANTIATE_LAYERS(float)
MCROOD_INSTANTIATE_LAYERS(double)

#undef MCROOD_INSTANTIATE_LAYERS

}  // namespace mcrood::nn
