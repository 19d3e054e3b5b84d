#include "mcrood/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcrood::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, k, pad;
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           const char* op) {
  require_rank(x.shape(), 4, op);
  require_rank(w.shape(), 4, op);
  const std::size_t k = w.dim(2);
  if (w.dim(3) != k || k % 2 == 0) {
    throw ShapeError(std::string(op) + ": kernel must be square and odd, got " +
                     shape_string(w.shape()));
  }
  if (w.dim(1) != x.dim(1)) {
    throw ShapeError(std::string(op) + ": channel mismatch, input " + shape_string(x.shape()) +
                     " vs kernel " + shape_string(w.shape()));
  }
  if (b.size() != w.dim(0)) {
    throw ShapeError(std::string(op) + ": bias length does not match filter count");
  }
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), k, k / 2};
}

// col[(c*k + ky)*k + kx][y*W + x] = img[c][y + ky - pad][x + kx - pad] (zero outside).
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t hw = g.h * g.w;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * hw;
        const long dy = static_cast<long>(ky) - static_cast<long>(g.pad);
        const long dx = static_cast<long>(kx) - static_cast<long>(g.pad);
        // valid output columns: 0 <= x + dx < W
        const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
        const std::size_t x1 = static_cast<std::size_t>(std::min<long>(static_cast<long>(g.w), static_cast<long>(g.w) - dx));
        for (std::size_t y = 0; y < g.h; ++y) {
          const long sy = static_cast<long>(y) + dy;
          T* dst = row + y * g.w;
          if (sy < 0 || sy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.w, T{0});
            continue;
          }
          const T* src = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          std::fill(dst, dst + x0, T{0});
          std::copy(src + (static_cast<long>(x0) + dx), src + (static_cast<long>(x1) + dx), dst + x0);
          std::fill(dst + x1, dst + g.w, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t hw = g.h * g.w;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * hw;
        const long dy = static_cast<long>(ky) - static_cast<long>(g.pad);
        const long dx = static_cast<long>(kx) - static_cast<long>(g.pad);
        const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
        const std::size_t x1 = static_cast<std::size_t>(std::min<long>(static_cast<long>(g.w), static_cast<long>(g.w) - dx));
        for (std::size_t y = 0; y < g.h; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          T* dst = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          const T* src = row + y * g.w;
          for (std::size_t x = x0; x < x1; ++x) dst[static_cast<long>(x) + dx] += src[x];
        }
      }
    }
  }
}

// Shift-and-add correlation for layers with very few filters or channels,
// where an im2col buffer costs more than the arithmetic.
template <typename T>
bool use_direct(const ConvGeometry& g) {
  return g.f <= 2 || g.c <= 2;
}

// Dot product with eight fixed partial sums: vectorisable without
// reassociation, and the summation order never depends on alignment.
template <typename T>
double lane_dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  }
  double acc = 0.0;
  for (; i < n; ++i) acc += static_cast<double>(a[i] * b[i]);
  for (T v : lanes) acc += static_cast<double>(v);
  return acc;
}

// out[f] += sum_c w[f][c] (*) img[c] for one image, zero padded.
template <typename T>
void direct_correlate_add(const T* img, const T* w, const ConvGeometry& g, T* out) {
  for (std::size_t f = 0; f < g.f; ++f) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const T wv = w[((f * g.c + c) * g.k + ky) * g.k + kx];
          const long dy = static_cast<long>(ky) - static_cast<long>(g.pad);
          const long dx = static_cast<long>(kx) - static_cast<long>(g.pad);
          const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
          const std::size_t x1 = static_cast<std::size_t>(std::min<long>(static_cast<long>(g.w), static_cast<long>(g.w) - dx));
          for (std::size_t y = 0; y < g.h; ++y) {
            const long sy = static_cast<long>(y) + dy;
            if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
            T* __restrict dst = out + (f * g.h + y) * g.w + x0;
            const T* __restrict src = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w +
                                      (static_cast<long>(x0) + dx);
            for (std::size_t x = 0; x < x1 - x0; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
}

// grad_w[f][c][ky][kx] += sum_{y,x} grad_out[f][y][x] * img[c][y+ky-pad][x+kx-pad] for one image.
template <typename T>
void direct_weight_grad_add(const T* img, const T* grad_out, const ConvGeometry& g, T* grad_w) {
  for (std::size_t f = 0; f < g.f; ++f) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const long dy = static_cast<long>(ky) - static_cast<long>(g.pad);
          const long dx = static_cast<long>(kx) - static_cast<long>(g.pad);
          const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
          const std::size_t x1 = static_cast<std::size_t>(std::min<long>(static_cast<long>(g.w), static_cast<long>(g.w) - dx));
          double acc = 0.0;
          for (std::size_t y = 0; y < g.h; ++y) {
            const long sy = static_cast<long>(y) + dy;
            if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
            const T* go = grad_out + (f * g.h + y) * g.w + x0;
            const T* src = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w +
                           (static_cast<long>(x0) + dx);
            acc += lane_dot(go, src, x1 - x0);
          }
          grad_w[((f * g.c + c) * g.k + ky) * g.k + kx] += static_cast<T>(acc);
        }
      }
    }
  }
}

// Sums of (p[i] - shift) and (p[i] - shift)^2 in double, eight fixed lanes.
template <typename T>
double lane_sum(const T* __restrict p, std::size_t n, double shift) {
  double lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lanes[l] += static_cast<double>(p[i + l]) - shift;
  }
  double acc = 0.0;
  for (; i < n; ++i) acc += static_cast<double>(p[i]) - shift;
  for (double v : lanes) acc += v;
  return acc;
}

template <typename T>
double lane_dot_double(const T* __restrict a, const T* __restrict b, std::size_t n) {
  double lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      lanes[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
    }
  }
  double acc = 0.0;
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  for (double v : lanes) acc += v;
  return acc;
}

template <typename T>
double lane_sq_sum(const T* __restrict p, std::size_t n, double shift) {
  double lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      const double d = static_cast<double>(p[i + l]) - shift;
      lanes[l] += d * d;
    }
  }
  double acc = 0.0;
  for (; i < n; ++i) {
    const double d = static_cast<double>(p[i]) - shift;
    acc += d * d;
  }
  for (double v : lanes) acc += v;
  return acc;
}

struct BnGeometry {
  std::size_t n, c, s;
};

template <typename T>
BnGeometry bn_geometry(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError("batchnorm: expected [N,C] or [N,C,H,W], got " + shape_string(x.shape()));
  }
  BnGeometry g{x.dim(0), x.dim(1), x.rank() == 4 ? x.dim(2) * x.dim(3) : 1};
  if (gamma.size() != g.c || beta.size() != g.c) {
    throw ShapeError("batchnorm: scale/shift length does not match channel count");
  }
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const ConvGeometry g = conv_geometry(x, w, b, "conv2d");
  const std::size_t hw = g.h * g.w;
  const std::size_t ckk = g.c * g.k * g.k;
  Tensor<T> out({g.n, g.f, g.h, g.w});
  if (use_direct<T>(g)) {
    for (std::size_t n = 0; n < g.n; ++n) {
      T* o = out.ptr() + n * g.f * hw;
      for (std::size_t f = 0; f < g.f; ++f) std::fill(o + f * hw, o + (f + 1) * hw, b[f]);
      direct_correlate_add(x.ptr() + n * g.c * hw, w.ptr(), g, o);
    }
    return out;
  }
  std::vector<T> col(ckk * hw);
  ConstMapMat<T> wm(w.ptr(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(ckk));
  ConstMapMat<T> colm(col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(x.ptr() + n * g.c * hw, g, col.data());
    MapMat<T> om(out.ptr() + n * g.f * hw, static_cast<Eigen::Index>(g.f),
                 static_cast<Eigen::Index>(hw));
    om.noalias() = wm * colm;
    for (std::size_t f = 0; f < g.f; ++f) om.row(static_cast<Eigen::Index>(f)).array() += b[f];
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                          Tensor<T>& grad_w, Tensor<T>& grad_b) {
  const Tensor<T> no_bias({w.dim(0)});
  const ConvGeometry g = conv_geometry(x, w, no_bias, "conv2d_backward");
  if (grad_out.shape() != Shape{g.n, g.f, g.h, g.w}) {
    throw ShapeError("conv2d_backward: gradient shape " + shape_string(grad_out.shape()));
  }
  const std::size_t hw = g.h * g.w;
  const std::size_t ckk = g.c * g.k * g.k;
  // Fewer filters than channels: the input gradient is cheaper as a forward
  // correlation of grad_out with the flipped, transposed kernel.
  const bool direct_dx = g.f < g.c;
  Tensor<T> grad_x = direct_dx ? conv2d(grad_out, transpose_kernel(w), Tensor<T>({g.c}))
                               : Tensor<T>(x.shape());
  const bool direct_w = g.f <= 2;
  std::vector<T> col(direct_w ? 0 : ckk * hw);
  std::vector<T> dcol(direct_dx ? 0 : ckk * hw);
  ConstMapMat<T> wm(w.ptr(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(ckk));
  MapMat<T> gw(grad_w.ptr(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(ckk));
  MapMat<T> colm(col.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
  MapMat<T> dcolm(dcol.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
  for (std::size_t n = 0; n < g.n; ++n) {
    ConstMapMat<T> go(grad_out.ptr() + n * g.f * hw, static_cast<Eigen::Index>(g.f),
                      static_cast<Eigen::Index>(hw));
    if (direct_w) {
      direct_weight_grad_add(x.ptr() + n * g.c * hw, grad_out.ptr() + n * g.f * hw, g, grad_w.ptr());
    } else {
      im2col(x.ptr() + n * g.c * hw, g, col.data());
      gw.noalias() += go * colm.transpose();
    }
    // Plain loop: Eigen's vectorised row sum changes with buffer alignment.
    for (std::size_t f = 0; f < g.f; ++f) {
      const T* row = grad_out.ptr() + (n * g.f + f) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(row[i]);
      grad_b[f] += static_cast<T>(acc);
    }
    if (direct_dx) continue;
    dcolm.noalias() = wm.transpose() * go;
    col2im_add(dcol.data(), g, grad_x.ptr() + n * g.c * hw);
  }
  return grad_x;
}

template <typename T>
Tensor<T> transpose_kernel(const Tensor<T>& w) {
  require_rank(w.shape(), 4, "transpose_kernel");
  const std::size_t cin = w.dim(0), fout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor<T> out({fout, cin, kh, kw});
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t f = 0; f < fout; ++f) {
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t bb = 0; bb < kw; ++bb) {
          out[((f * cin + c) * kh + a) * kw + bb] =
              w[((c * fout + f) * kh + (kh - 1 - a)) * kw + (kw - 1 - bb)];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(w.shape(), 4, "conv2d_transpose");
  if (x.rank() == 4 && w.dim(0) != x.dim(1)) {
    throw ShapeError("conv2d_transpose: channel mismatch, input " + shape_string(x.shape()) +
                     " vs kernel " + shape_string(w.shape()));
  }
  return conv2d(x, transpose_kernel(w), b);
}

template <typename T>
Tensor<T> conv2d_transpose_backward(const Tensor<T>& x, const Tensor<T>& w,
                                    const Tensor<T>& grad_out, Tensor<T>& grad_w,
                                    Tensor<T>& grad_b) {
  const Tensor<T> wt = transpose_kernel(w);
  Tensor<T> grad_wt(wt.shape());
  Tensor<T> grad_x = conv2d_backward(x, wt, grad_out, grad_wt, grad_b);
  // transpose_kernel is an involution on index pairs, so it also maps the
  // gradient back to the [C_in,F_out,k,k] layout.
  const Tensor<T> back = transpose_kernel(grad_wt);
  for (std::size_t i = 0; i < grad_w.size(); ++i) grad_w[i] += back[i];
  return grad_x;
}

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          BatchNormStats<T>& stats) {
  const BnGeometry g = bn_geometry(x, gamma, beta);
  if (g.n < 2) throw ArgumentError("batchnorm: training mode needs a batch of at least 2");
  const double m = static_cast<double>(g.n * g.s);
  stats.mean.assign(g.c, T{0});
  stats.var.assign(g.c, T{0});
  stats.inv_std.assign(g.c, T{0});
  stats.x_hat = Tensor<T>(x.shape());
  Tensor<T> y(x.shape());
  for (std::size_t c = 0; c < g.c; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) sum += lane_sum(x.ptr() + (n * g.c + c) * g.s, g.s, 0.0);
    const double mean = sum / m;
    double sq = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) sq += lane_sq_sum(x.ptr() + (n * g.c + c) * g.s, g.s, mean);
    const double var = sq / m;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    stats.mean[c] = static_cast<T>(mean);
    stats.var[c] = static_cast<T>(var);
    stats.inv_std[c] = static_cast<T>(inv_std);
    const T tmean = static_cast<T>(mean), tinv = static_cast<T>(inv_std);
    const T gc = gamma[c], bc = beta[c];
    for (std::size_t n = 0; n < g.n; ++n) {
      const std::size_t off = (n * g.c + c) * g.s;
      const T* __restrict xp = x.ptr() + off;
      T* __restrict xh = stats.x_hat.ptr() + off;
      T* __restrict yp = y.ptr() + off;
      for (std::size_t i = 0; i < g.s; ++i) {
        xh[i] = (xp[i] - tmean) * tinv;
        yp[i] = gc * xh[i] + bc;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  const BnGeometry g = bn_geometry(x, gamma, beta);
  Tensor<T> y(x.shape());
  for (std::size_t c = 0; c < g.c; ++c) {
    const T scale = static_cast<T>(static_cast<double>(gamma[c]) /
                                   std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps));
    const T shift = beta[c] - scale * running_mean[c];
    for (std::size_t n = 0; n < g.n; ++n) {
      const std::size_t off = (n * g.c + c) * g.s;
      for (std::size_t i = 0; i < g.s; ++i) y[off + i] = scale * x[off + i] + shift;
    }
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_train_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                   const BatchNormStats<T>& stats, Tensor<T>& grad_gamma,
                                   Tensor<T>& grad_beta) {
  const Tensor<T>& xh = stats.x_hat;
  if (grad_out.shape() != xh.shape()) {
    throw ShapeError("batchnorm backward: gradient shape " + shape_string(grad_out.shape()));
  }
  const std::size_t nb = xh.dim(0), nc = xh.dim(1);
  const std::size_t s = xh.rank() == 4 ? xh.dim(2) * xh.dim(3) : 1;
  const double m = static_cast<double>(nb * s);
  Tensor<T> grad_x(xh.shape());
  for (std::size_t c = 0; c < nc; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t n = 0; n < nb; ++n) {
      const std::size_t off = (n * nc + c) * s;
      sum_dy += lane_sum(grad_out.ptr() + off, s, 0.0);
      sum_dy_xh += lane_dot_double(grad_out.ptr() + off, xh.ptr() + off, s);
    }
    grad_gamma[c] += static_cast<T>(sum_dy_xh);
    grad_beta[c] += static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * static_cast<double>(stats.inv_std[c]) / m;
    for (std::size_t n = 0; n < nb; ++n) {
      const std::size_t off = (n * nc + c) * s;
      const T* __restrict gp = grad_out.ptr() + off;
      const T* __restrict hp = xh.ptr() + off;
      T* __restrict out = grad_x.ptr() + off;
      for (std::size_t i = 0; i < s; ++i) {
        out[i] = static_cast<T>(k * (m * static_cast<double>(gp[i]) - sum_dy -
                                     static_cast<double>(hp[i]) * sum_dy_xh));
      }
    }
  }
  return grad_x;
}

template <typename T>
Tensor<T> batchnorm_eval_backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                                  const Tensor<T>& gamma, const Tensor<T>& running_mean,
                                  const Tensor<T>& running_var, Tensor<T>& grad_gamma,
                                  Tensor<T>& grad_beta) {
  const BnGeometry g = bn_geometry(x, gamma, gamma);
  Tensor<T> grad_x(x.shape());
  for (std::size_t c = 0; c < g.c; ++c) {
    const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps);
    double gg = 0.0, gb = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) {
      const std::size_t off = (n * g.c + c) * g.s;
      for (std::size_t i = 0; i < g.s; ++i) {
        const double dy = static_cast<double>(grad_out[off + i]);
        gg += dy * (static_cast<double>(x[off + i]) - static_cast<double>(running_mean[c])) *
              inv_std;
        gb += dy;
        grad_x[off + i] = static_cast<T>(dy * static_cast<double>(gamma[c]) * inv_std);
      }
    }
    grad_gamma[c] += static_cast<T>(gg);
    grad_beta[c] += static_cast<T>(gb);
  }
  return grad_x;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
  require_rank(x.shape(), 4, "maxpool2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + shape_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> y({n, c, oh, ow});
  if (argmax) argmax->resize(y.size());
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t ibase = p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = ibase + (2 * oy) * w + 2 * ox;
        T bv = x[best];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ibase + (2 * oy + dy) * w + 2 * ox + dx;
            const T v = x[idx];
            const bool gt = v > bv;
            best = gt ? idx : best;
            bv = gt ? v : bv;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        y[o] = bv;
        if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const Tensor<T>& grad_out,
                            const std::vector<std::uint32_t>& argmax) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool2_backward: argmax does not match gradient size");
  }
  Tensor<T> grad_x(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_x[argmax[o]] += grad_out[o];
  return grad_x;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "upsample2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  const std::size_t ow = 2 * w;
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t iy = 0; iy < h; ++iy) {
      const T* src = x.ptr() + (p * h + iy) * w;
      T* r0 = y.ptr() + (p * 2 * h + 2 * iy) * ow;
      for (std::size_t ix = 0; ix < w; ++ix) r0[2 * ix] = r0[2 * ix + 1] = src[ix];
      std::copy(r0, r0 + ow, r0 + ow);
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& grad_out) {
  require_rank(grad_out.shape(), 4, "upsample2_backward");
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
  if (oh % 2 != 0 || ow % 2 != 0) throw ShapeError("upsample2_backward: odd gradient dims");
  const std::size_t h = oh / 2, w = ow / 2;
  Tensor<T> gx({n, c, h, w});
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const T* src = grad_out.ptr() + (p * oh + oy) * ow;
      T* dst = gx.ptr() + (p * h + oy / 2) * w;
      for (std::size_t ox = 0; ox < ow; ++ox) dst[ox / 2] += src[ox];
    }
  }
  return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  Tensor<T> g(x.shape());
  const T* xp = x.ptr();
  const T* gp = grad_out.ptr();
  T* out = g.ptr();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T go = gp[i];
    out[i] = xp[i] > T{0} ? go : T{0};
  }
  return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    // Split on sign so exp never overflows.
    if (v >= T{0}) {
      y[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T{1} + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
  Tensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * y[i] * (T{1} - y[i]);
  return g;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x.shape(), 2, "dense");
  require_rank(w.shape(), 2, "dense");
  if (w.dim(1) != x.dim(1) || b.size() != w.dim(0)) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " incompatible with weight " +
                     shape_string(w.shape()));
  }
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto out_dim = static_cast<Eigen::Index>(w.dim(0));
  Tensor<T> y({x.dim(0), w.dim(0)});
  ConstMapMat<T> xm(x.ptr(), n, in);
  ConstMapMat<T> wm(w.ptr(), out_dim, in);
  MapMat<T> ym(y.ptr(), n, out_dim);
  ym.noalias() = xm * wm.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(b.ptr(), out_dim);
  ym.rowwise() += bv;
  return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                         Tensor<T>& grad_w, Tensor<T>& grad_b) {
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(x.dim(1));
  const auto out_dim = static_cast<Eigen::Index>(w.dim(0));
  if (grad_out.shape() != Shape{x.dim(0), w.dim(0)}) {
    throw ShapeError("dense_backward: gradient shape " + shape_string(grad_out.shape()));
  }
  ConstMapMat<T> xm(x.ptr(), n, in);
  ConstMapMat<T> wm(w.ptr(), out_dim, in);
  ConstMapMat<T> gm(grad_out.ptr(), n, out_dim);
  MapMat<T> gw(grad_w.ptr(), out_dim, in);
  gw.noalias() += gm.transpose() * xm;
  for (Eigen::Index o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(gm(i, o));
    grad_b[static_cast<std::size_t>(o)] += static_cast<T>(acc);
  }
  Tensor<T> grad_x(x.shape());
  MapMat<T> gx(grad_x.ptr(), n, in);
  gx.noalias() = gm * wm;
  return grad_x;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("flatten: scalar input");
  const std::size_t n = x.dim(0);
  return x.reshaped({n, n == 0 ? 0 : x.size() / n});
}

#define MCROOD_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                     Tensor<T>&, Tensor<T>&);                                   \
  template Tensor<T> transpose_kernel(const Tensor<T>&);                                        \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> conv2d_transpose_backward(const Tensor<T>&, const Tensor<T>&,              \
                                               const Tensor<T>&, Tensor<T>&, Tensor<T>&);       \
  template Tensor<T> batchnorm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                     BatchNormStats<T>&);                                       \
  template Tensor<T> batchnorm_eval(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                    const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> batchnorm_train_backward(const Tensor<T>&, const Tensor<T>&,               \
                                              const BatchNormStats<T>&, Tensor<T>&, Tensor<T>&); \
  template Tensor<T> batchnorm_eval_backward(const Tensor<T>&, const Tensor<T>&,                \
                                             const Tensor<T>&, const Tensor<T>&,                \
                                             const Tensor<T>&, Tensor<T>&, Tensor<T>&);         \
  template Tensor<T> maxpool2(const Tensor<T>&, std::vector<std::uint32_t>*);                   \
  template Tensor<T> maxpool2_backward(const Shape&, const Tensor<T>&,                          \
                                       const std::vector<std::uint32_t>&);                      \
  template Tensor<T> upsample2(const Tensor<T>&);                                               \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                                      \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                    Tensor<T>&, Tensor<T>&);                                    \
  template Tensor<T> flatten(const Tensor<T>&);

MCROOD_INSTANTIATE_OPS(float)
MCROOD_INSTANTIATE_OPS(double)

#undef MCROOD_INSTANTIATE_OPS

}  // namespace mcrood::nn
