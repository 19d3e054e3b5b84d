#include "mcrood/model.hpp"

#include <random>
#include <set>

#include "mcrood/error.hpp"

namespace mcrood {

using nn::Mode;
using nn::Tensor;

void ModelConfig::validate() const {
  if (filters.empty()) throw ConfigError("model: at least one encoder block is required");
  if (latent_dim == 0) throw ConfigError("model: latent_dim must be >= 1");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("model: kernel size must be odd");
  for (std::size_t f : filters) {
    if (f == 0) throw ConfigError("model: filter counts must be >= 1");
  }
  const std::size_t factor = std::size_t{1} << filters.size();
  if (input_size == 0 || input_size % factor != 0) {
    throw ConfigError("model: input size " + std::to_string(input_size) +
                      " does not halve cleanly through " + std::to_string(filters.size()) +
                      " pooling stages");
  }
  if (classes.empty()) throw ConfigError("model: class list is empty");
  std::set<std::string> unique(classes.begin(), classes.end());
  if (unique.size() != classes.size()) throw ConfigError("model: duplicate class name");
  for (const auto& c : classes) {
    if (c.empty()) throw ConfigError("model: empty class name");
  }
}

template <typename T>
MultiDecoderModel<T>::MultiDecoderModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t k = config_.kernel;
  const std::size_t s = config_.bottleneck_size();

  std::size_t in_ch = 1;
  for (std::size_t b = 0; b < config_.filters.size(); ++b) {
    const std::string id = std::to_string(b + 1);
    auto& conv = encoder_.template emplace<nn::Conv2d<T>>("conv" + id, in_ch, config_.filters[b], k);
    nn::init_he_uniform(conv.weight, in_ch * k * k, rng);
    encoder_.template emplace<nn::BatchNorm<T>>("bn" + id, config_.filters[b]);
    encoder_.template emplace<nn::ReLU<T>>("relu" + id);
    encoder_.template emplace<nn::MaxPool2<T>>("pool" + id);
    in_ch = config_.filters[b];
  }
  encoder_.template emplace<nn::Flatten<T>>("flatten");
  auto& enc_dense =
      encoder_.template emplace<nn::Dense<T>>("dense", config_.flat_features(), config_.latent_dim);
  nn::init_he_uniform(enc_dense.weight, config_.flat_features(), rng);
  encoder_.template emplace<nn::BatchNorm<T>>("bn_latent", config_.latent_dim);

  for (std::size_t c = 0; c < config_.classes.size(); ++c) {
    nn::Sequential<T> dec;
    auto& dense =
        dec.template emplace<nn::Dense<T>>("dense", config_.latent_dim, config_.flat_features());
    nn::init_he_uniform(dense.weight, config_.latent_dim, rng);
    dec.template emplace<nn::BatchNorm<T>>("bn", config_.flat_features());
    dec.template emplace<nn::Reshape<T>>("reshape", config_.filters.back(), s, s);
    std::size_t ch = config_.filters.back();
    for (std::size_t b = 0; b < config_.filters.size(); ++b) {
      const std::string id = std::to_string(b + 1);
      const std::size_t f = config_.filters[config_.filters.size() - 1 - b];
      auto& convt = dec.template emplace<nn::ConvTranspose2d<T>>("convt" + id, ch, f, k);
      nn::init_he_uniform(convt.weight, ch * k * k, rng);
      dec.template emplace<nn::BatchNorm<T>>("bn" + id, f);
      dec.template emplace<nn::ReLU<T>>("relu" + id);
      dec.template emplace<nn::Upsample2<T>>("up" + id);
      ch = f;
    }
    auto& out = dec.template emplace<nn::ConvTranspose2d<T>>("convt_out", ch, 1, k);
    nn::init_glorot_uniform(out.weight, ch * k * k, k * k, rng);
    dec.template emplace<nn::Sigmoid<T>>("sigmoid");
    decoders_.push_back(std::move(dec));
  }
}

template <typename T>
std::size_t MultiDecoderModel<T>::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < config_.classes.size(); ++i) {
    if (config_.classes[i] == name) return i;
  }
  throw ArgumentError("unknown class '" + std::string(name) + "'");
}

template <typename T>
void MultiDecoderModel<T>::check_input(const Tensor<T>& x) const {
  const std::size_t s = config_.input_size;
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != s || x.dim(3) != s) {
    throw ShapeError("model input must be [N,1," + std::to_string(s) + "," + std::to_string(s) +
                     "], got " + nn::shape_string(x.shape()));
  }
  for (const T& v : x.data()) {
    if (!(v >= T{0} && v <= T{1})) throw DataError("model input outside [0,1]");
  }
}

template <typename T>
Tensor<T> MultiDecoderModel<T>::encode(const Tensor<T>& x) const {
  check_input(x);
  return encoder_.infer(x);
}

template <typename T>
Tensor<T> MultiDecoderModel<T>::decode(std::string_view cls, const Tensor<T>& z) const {
  return decode(class_index(cls), z);
}

template <typename T>
Tensor<T> MultiDecoderModel<T>::decode(std::size_t c, const Tensor<T>& z) const {
  if (c >= decoders_.size()) throw ArgumentError("decoder index out of range");
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim) {
    throw ShapeError("latent batch must be [N," + std::to_string(config_.latent_dim) + "], got " +
                     nn::shape_string(z.shape()));
  }
  return decoders_[c].infer(z);
}

template <typename T>
std::vector<std::vector<double>> MultiDecoderModel<T>::reconstruction_errors_batch(
    const Tensor<T>& x) const {
  const Tensor<T> z = encode(x);
  const std::size_t n = x.dim(0);
  const std::size_t pixels = x.size() / (n == 0 ? 1 : n);
  std::vector<std::vector<double>> errors(n, std::vector<double>(decoders_.size(), 0.0));
  for (std::size_t c = 0; c < decoders_.size(); ++c) {
    const Tensor<T> rec = decoders_[c].infer(z);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const T* a = x.ptr() + i * pixels;
      const T* b = rec.ptr() + i * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        const double d = static_cast<double>(a[p]) - static_cast<double>(b[p]);
        acc += d * d;
      }
      errors[i][c] = acc / static_cast<double>(pixels);
    }
  }
  return errors;
}

template <typename T>
std::vector<double> MultiDecoderModel<T>::reconstruction_errors(const Tensor<T>& x) const {
  const std::size_t s = config_.input_size;
  if (x.rank() == 2) return reconstruction_errors_batch(x.reshaped({1, 1, s, s})).front();
  if (x.rank() == 4 && x.dim(0) == 1) return reconstruction_errors_batch(x).front();
  throw ShapeError("reconstruction_errors expects one image, got " + nn::shape_string(x.shape()));
}

template <typename T>
std::vector<nn::ParamRef<T>> MultiDecoderModel<T>::params() {
  auto out = encoder_.params("encoder");
  for (std::size_t c = 0; c < decoders_.size(); ++c) {
    auto p = decoders_[c].params("decoder." + config_.classes[c]);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
std::vector<nn::BufferRef<T>> MultiDecoderModel<T>::buffers() {
  auto out = encoder_.buffers("encoder");
  for (std::size_t c = 0; c < decoders_.size(); ++c) {
    auto b = decoders_[c].buffers("decoder." + config_.classes[c]);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

template <typename T>
void MultiDecoderModel<T>::zero_grad() {
  encoder_.zero_grad();
  for (auto& d : decoders_) d.zero_grad();
}

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shapes differ " + nn::shape_string(a.shape()) + " vs " +
                     nn::shape_string(b.shape()));
  }
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

template class MultiDecoderModel<float>;
template class MultiDecoderModel<double>;
template double mse(const Tensor<float>&, const Tensor<float>&);
template double mse(const Tensor<double>&, const Tensor<double>&);

}  // namespace mcrood
