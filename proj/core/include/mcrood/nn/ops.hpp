#pragma once

// Functional forward/backward kernels for the layer set. Backward functions
// accumulate parameter gradients (+=) and return the input gradient.
// Instantiated for float (training) and double (gradient checking).

#include <cstdint>
#include <vector>

#include "mcrood/nn/tensor.hpp"

namespace mcrood::nn {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Convolution, "same" zero padding, stride 1, square odd kernel.
// x [N,C,H,W], w [F,C,k,k], b [F] -> [N,F,H,W]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                          Tensor<T>& grad_w, Tensor<T>& grad_b);

/// Rearranges a transpose-convolution kernel [C_in,F_out,k,k] into the
/// equivalent forward kernel [F_out,C_in,k,k] (channel swap + 180° flip).
template <typename T>
Tensor<T> transpose_kernel(const Tensor<T>& w);

// Stride-1 transpose convolution: the adjoint of conv2d with the same kernel.
// x [N,C,H,W], w [C,F,k,k], b [F] -> [N,F,H,W]
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> conv2d_transpose_backward(const Tensor<T>& x, const Tensor<T>& w,
                                    const Tensor<T>& grad_out, Tensor<T>& grad_w,
                                    Tensor<T>& grad_b);

/// Batch statistics captured by a training-mode batch-norm pass.
template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;      // biased
  std::vector<T> inv_std;  // 1 / sqrt(var + eps)
  Tensor<T> x_hat;
};

// Batch norm over [N,C] or [N,C,H,W]; statistics per channel C.
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          BatchNormStats<T>& stats);

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var);

template <typename T>
Tensor<T> batchnorm_train_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                   const BatchNormStats<T>& stats, Tensor<T>& grad_gamma,
                                   Tensor<T>& grad_beta);

template <typename T>
Tensor<T> batchnorm_eval_backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                                  const Tensor<T>& gamma, const Tensor<T>& running_mean,
                                  const Tensor<T>& running_var, Tensor<T>& grad_gamma,
                                  Tensor<T>& grad_beta);

/// 2x2 max pooling, stride 2. `argmax` receives the flat input index per output.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint32_t>* argmax = nullptr);

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const Tensor<T>& grad_out,
                            const std::vector<std::uint32_t>& argmax);

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Takes the forward *output* y = sigmoid(x).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

// x [N,in], w [out,in], b [out] -> [N,out]
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                         Tensor<T>& grad_w, Tensor<T>& grad_b);

/// [N, ...] -> [N, prod(...)]
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

}  // namespace mcrood::nn
