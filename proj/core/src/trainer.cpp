#include "mcrood/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mcrood/error.hpp"

namespace mcrood {

using nn::Mode;
using nn::Tensor;

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2 for batch norm");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
    throw ConfigError("train: invalid Adam hyper-parameters");
  }
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices) {
  if (x.rank() < 1) throw ShapeError("gather_rows: scalar tensor");
  nn::Shape shape = x.shape();
  const std::size_t row = x.size() / std::max<std::size_t>(shape[0], 1);
  shape[0] = indices.size();
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.dim(0)) throw ArgumentError("gather_rows: index out of range");
    std::copy_n(x.ptr() + indices[i] * row, row, out.ptr() + i * row);
  }
  return out;
}

template <typename T>
double class_loss(MultiDecoderModel<T>& model, std::size_t c, const Tensor<T>& batch) {
  model.check_input(batch);
  nn::Tape<T> enc_tape, dec_tape;
  const Tensor<T> z = model.encoder().forward(batch, Mode::train, &enc_tape);
  const Tensor<T> rec = model.decoder(c).forward(z, Mode::train, &dec_tape);

  const double loss = mse(batch, rec);
  // d/drec of mean((x - rec)^2)
  Tensor<T> grad(rec.shape());
  const T scale = static_cast<T>(2.0 / static_cast<double>(rec.size()));
  for (std::size_t i = 0; i < rec.size(); ++i) grad[i] = scale * (rec[i] - batch[i]);

  const Tensor<T> grad_z = model.decoder(c).backward(grad, dec_tape);
  model.encoder().backward(grad_z, enc_tape);
  return loss;
}

template <typename T>
LossBreakdown multi_class_loss(MultiDecoderModel<T>& model, std::span<const Tensor<T>> batches) {
  if (batches.size() != model.num_classes()) {
    throw ArgumentError("multi_class_loss: expected one batch per class (" +
                        std::to_string(model.num_classes()) + "), got " +
                        std::to_string(batches.size()));
  }
  for (const auto& b : batches) {
    if (b.rank() == 0 || b.dim(0) != batches.front().dim(0)) {
      throw ArgumentError("multi_class_loss: class batches must have equal size");
    }
  }
  model.zero_grad();
  LossBreakdown out;
  out.per_class.reserve(batches.size());
  for (std::size_t c = 0; c < batches.size(); ++c) {
    out.per_class.push_back(class_loss(model, c, batches[c]));
    out.total += out.per_class.back();
  }
  return out;
}

template <typename T>
void Optimizer<T>::step(const std::vector<nn::ParamRef<T>>& params) {
  ++t_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == OptimizerKind::sgd) {
    for (const auto& p : params) {
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        (*p.value)[i] -= static_cast<T>(lr * static_cast<double>((*p.grad)[i]));
      }
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ArgumentError("optimizer: parameter set changed");
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    Tensor<T>& value = *params[k].value;
    const Tensor<T>& grad = *params[k].grad;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_epsilon);
      value[i] = static_cast<T>(static_cast<double>(value[i]) - update);
    }
  }
}

template <typename T>
const TrainingLog& train(MultiDecoderModel<T>& model, std::span<const ClassDataset<T>> data,
                         const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t n_classes = model.num_classes();
  std::vector<const ClassDataset<T>*> ordered(n_classes, nullptr);
  for (const auto& d : data) ordered[model.class_index(d.name)] = &d;
  std::size_t min_size = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!ordered[c]) throw ArgumentError("train: no data for class '" + model.classes()[c] + "'");
    if (ordered[c]->size() < cfg.batch_size) {
      throw ArgumentError("train: class '" + model.classes()[c] + "' has " +
                          std::to_string(ordered[c]->size()) + " samples, fewer than batch size " +
                          std::to_string(cfg.batch_size));
    }
    min_size = std::min(min_size, ordered[c]->size());
  }

  const std::size_t steps = min_size / cfg.batch_size;
  std::mt19937_64 rng(cfg.seed);
  Optimizer<T> opt(cfg);
  const auto params = model.params();
  TrainingLog& log = model.log();

  std::vector<std::vector<std::size_t>> order(n_classes);
  std::vector<Tensor<T>> batches(n_classes);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      order[c].resize(ordered[c]->size());
      std::iota(order[c].begin(), order[c].end(), std::size_t{0});
      if (cfg.shuffle) std::shuffle(order[c].begin(), order[c].end(), rng);
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t c = 0; c < n_classes; ++c) {
        std::span<const std::size_t> idx(order[c].data() + s * cfg.batch_size, cfg.batch_size);
        batches[c] = gather_rows(ordered[c]->images, idx);
      }
      const LossBreakdown loss = multi_class_loss(model, std::span<const Tensor<T>>(batches));
      if (std::isnan(log.initial_loss)) log.initial_loss = loss.total;
      sum += loss.total;
      opt.step(params);
    }
    const double mean = sum / static_cast<double>(steps);
    log.epoch_loss.push_back(mean);
    ++log.epochs_completed;
    if (on_epoch) on_epoch(log.epochs_completed, mean);
  }
  return log;
}

#define MCROOD_INSTANTIATE_TRAINER(T)                                                          \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);             \
  template double class_loss(MultiDecoderModel<T>&, std::size_t, const Tensor<T>&);            \
  template LossBreakdown multi_class_loss(MultiDecoderModel<T>&, std::span<const Tensor<T>>);  \
  template class Optimizer<T>;                                                                 \
  template const TrainingLog& train(MultiDecoderModel<T>&, std::span<const ClassDataset<T>>,   \
                                    const TrainConfig&, const EpochCallback&);

MCROOD_INSTANTIATE_TRAINER(float)
MCROOD_INSTANTIATE_TRAINER(double)

#undef MCROOD_INSTANTIATE_TRAINER

}  // namespace mcrood
