#include <doctest.h>

#include <cmath>
#include <random>

#include "layer_check.hpp"
#include "mcrood/error.hpp"
#include "mcrood/nn/grad_check.hpp"
#include "mcrood/nn/layers.hpp"
#include "mcrood/nn/ops.hpp"

using namespace mcrood;
using namespace mcrood::nn;
using testing_support::check_network;
using testing_support::random_tensor;

namespace {

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct "same"-padded correlation, one output pixel at a time.
double conv_at(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
               std::size_t n, std::size_t f, std::size_t i, std::size_t j) {
  const std::size_t c_in = x.dim(1), h = x.dim(2), wd = x.dim(3), k = w.dim(2);
  const long half = static_cast<long>(k / 2);
  double acc = b[f];
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t v = 0; v < k; ++v) {
        const long y = static_cast<long>(i) + static_cast<long>(u) - half;
        const long z = static_cast<long>(j) + static_cast<long>(v) - half;
        if (y < 0 || z < 0 || y >= static_cast<long>(h) || z >= static_cast<long>(wd)) continue;
        acc += w[((f * c_in + c) * k + u) * k + v] *
               x[((n * c_in + c) * h + static_cast<std::size_t>(y)) * wd + static_cast<std::size_t>(z)];
      }
  return acc;
}

GradCheckOptions opts() {
  GradCheckOptions o;
  o.epsilon = 1e-6;
  o.tolerance = 1e-5;
  o.abs_floor = 1e-3;
  return o;
}

}  // namespace

TEST_CASE("conv2d forward") {
  SUBCASE("identity kernel") {
    std::mt19937_64 rng(1);
    const auto x = random_tensor({2, 1, 5, 6}, rng);
    Tensor<double> w({1, 1, 3, 3});
    w[4] = 1.0;
    const auto y = conv2d(x, w, Tensor<double>({1}));
    CHECK(y == x);
  }
  SUBCASE("all-ones kernel on all-ones 4x4 counts neighbours") {
    const Tensor<double> x({1, 1, 4, 4}, 1.0);
    const Tensor<double> w({1, 1, 3, 3}, 1.0);
    const auto y = conv2d(x, w, Tensor<double>({1}, 0.5));
    CHECK(y[0] == 4.5);                 // corner
    CHECK(y[1] == 6.5);                 // edge
    CHECK(y[1 * 4 + 1] == 9.5);         // interior
    CHECK(y[3 * 4 + 3] == 4.5);
  }
  SUBCASE("matches direct correlation with several channels") {
    std::mt19937_64 rng(2);
    // (channels, filters, kernel): covers both the im2col and the shift-add paths
    const std::size_t cases[][3] = {{3, 4, 3}, {1, 5, 3}, {6, 1, 3}, {5, 2, 5}, {4, 3, 1}};
    for (const auto& cs : cases) {
      const std::size_t c = cs[0], nf = cs[1], k = cs[2];
      const auto x = random_tensor({2, c, 6, 5}, rng);
      const auto w = random_tensor({nf, c, k, k}, rng);
      const auto b = random_tensor({nf}, rng);
      const auto y = conv2d(x, w, b);
      REQUIRE(y.shape() == Shape{2, nf, 6, 5});
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t f = 0; f < nf; ++f)
          for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
              CHECK(y[((n * nf + f) * 6 + i) * 5 + j] == doctest::Approx(conv_at(x, w, b, n, f, i, j)));
            }
    }
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(conv2d(Tensor<double>({1, 2, 4, 4}), Tensor<double>({1, 3, 3, 3}),
                           Tensor<double>({1})),
                    ShapeError);
  }
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  std::mt19937_64 rng(3);
  const auto x = random_tensor({2, 3, 6, 6}, rng);
  const auto w = random_tensor({3, 4, 3, 3}, rng);  // transpose layout [C_in=3, F=4]
  const auto y = random_tensor({2, 4, 6, 6}, rng);
  // <convT(x), y> == <x, conv(y)> where conv uses the same kernel as [F=3, C=4]
  const auto tx = conv2d_transpose(x, w, Tensor<double>({4}));
  const auto cy = conv2d(y, w, Tensor<double>({3}));
  CHECK(dot(tx, y) == doctest::Approx(dot(x, cy)).epsilon(1e-12));

  const auto fw = transpose_kernel(w);
  CHECK(fw.shape() == Shape{4, 3, 3, 3});
  const auto b = random_tensor({4}, rng);
  const auto a1 = conv2d_transpose(x, w, b);
  const auto a2 = conv2d(x, fw, b);
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i] == doctest::Approx(a2[i]));
}

TEST_CASE("batch norm") {
  std::mt19937_64 rng(4);
  SUBCASE("training output is standardised per channel") {
    const auto x = random_tensor({6, 2, 3, 3}, rng, -2.0, 5.0);
    BatchNormStats<double> st;
    const auto y = batchnorm_train(x, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.0), st);
    for (std::size_t c = 0; c < 2; ++c) {
      double m = 0.0, v = 0.0;
      std::size_t n = 0;
      for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t p = 0; p < 9; ++p) {
          m += y[(s * 2 + c) * 9 + p];
          ++n;
        }
      m /= static_cast<double>(n);
      for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t p = 0; p < 9; ++p) v += std::pow(y[(s * 2 + c) * 9 + p] - m, 2);
      v /= static_cast<double>(n);
      CHECK(std::abs(m) <= 1e-12);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
  SUBCASE("eval uses running statistics") {
    BatchNorm<double> bn("bn", 1);
    bn.gamma.fill(2.0);
    bn.beta.fill(3.0);
    bn.running_mean.fill(0.0);
    bn.running_var.fill(1.0 - kBatchNormEps);
    const auto x = random_tensor({3, 1}, rng);
    const auto y = bn.forward(x, Mode::eval, nullptr);
    for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(2.0 * x[i] + 3.0));
  }
  SUBCASE("running statistics update with momentum") {
    BatchNorm<double> bn("bn", 1);
    Tensor<double> x({4, 1}, std::vector<double>{1, 2, 3, 6});
    LayerCache<double> cache;
    bn.forward(x, Mode::train, &cache);
    bn.commit(cache);
    // mean 3, unbiased var 14/3
    CHECK(bn.running_mean[0] == doctest::Approx(0.1 * 3.0));
    CHECK(bn.running_var[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0));
  }
  SUBCASE("batch of one is rejected in training") {
    BatchNorm<double> bn("bn", 2);
    CHECK_THROWS_AS(bn.forward(Tensor<double>({1, 2}), Mode::train, nullptr), ArgumentError);
    CHECK_NOTHROW(bn.forward(Tensor<double>({1, 2}), Mode::eval, nullptr));
  }
}

TEST_CASE("pooling and upsampling") {
  Tensor<double> x({1, 1, 4, 4}, std::vector<double>{1, 2, 5, 0,  //
                                                     3, 4, 1, 1,  //
                                                     0, 0, 9, 8,  //
                                                     7, 0, 8, 9});
  std::vector<std::uint32_t> idx;
  const auto p = maxpool2(x, &idx);
  CHECK(p.storage() == std::vector<double>{4, 5, 7, 9});
  const auto g = maxpool2_backward(x.shape(), Tensor<double>({1, 1, 2, 2}, 1.0), idx);
  CHECK(g.storage() == std::vector<double>{0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0});
  CHECK_THROWS_AS(maxpool2(Tensor<double>({1, 1, 3, 4})), ShapeError);

  const auto u = upsample2(p);
  CHECK(u.shape() == Shape{1, 1, 4, 4});
  CHECK(u[0] == 4);
  CHECK(u[1] == 4);
  CHECK(u[4] == 4);
  CHECK(u[15] == 9);
  CHECK(upsample2_backward(Tensor<double>({1, 1, 4, 4}, 1.0)).storage() ==
        std::vector<double>(4, 4.0));
}

TEST_CASE("pointwise activations") {
  const Tensor<double> x({4}, std::vector<double>{-1, 0, 0.5, 2});
  CHECK(relu(x).storage() == std::vector<double>{0, 0, 0.5, 2});
  const auto s = sigmoid(x);
  CHECK(s[1] == 0.5);
  CHECK(s[3] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  const auto g = sigmoid_backward(s, Tensor<double>({4}, 1.0));
  CHECK(g[1] == doctest::Approx(0.25));
}

TEST_CASE("layer gradients") {
  std::mt19937_64 rng(5);
  auto init = [&](Tensor<double>& t) {
    for (auto& v : t.data()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  };

  SUBCASE("conv") {
    Sequential<double> net;
    auto& c = net.emplace<Conv2d<double>>("c", 2, 3);
    init(c.weight);
    init(c.bias);
    auto x = random_tensor({2, 2, 5, 4}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
  SUBCASE("conv, im2col path") {
    Sequential<double> net;
    auto& c = net.emplace<Conv2d<double>>("c", 4, 5);
    init(c.weight);
    init(c.bias);
    auto x = random_tensor({2, 4, 4, 5}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
  SUBCASE("conv, fewer filters than channels") {
    Sequential<double> net;
    auto& c = net.emplace<Conv2d<double>>("c", 5, 3);
    init(c.weight);
    init(c.bias);
    auto x = random_tensor({2, 5, 4, 4}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
  SUBCASE("transpose conv") {
    Sequential<double> net;
    auto& c = net.emplace<ConvTranspose2d<double>>("t", 3, 2);
    init(c.weight);
    init(c.bias);
    auto x = random_tensor({2, 3, 4, 4}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
  SUBCASE("batch norm, both modes") {
    for (Mode m : {Mode::train, Mode::eval}) {
      Sequential<double> net;
      auto& bn = net.emplace<BatchNorm<double>>("bn", 2);
      init(bn.gamma);
      init(bn.beta);
      bn.running_var.fill(0.7);
      auto x = random_tensor({4, 2, 3, 3}, rng);
      CHECK(check_network(net, x, m, opts()).passed);
      auto x1 = random_tensor({5, 2}, rng);
      CHECK(check_network(net, x1, m, opts()).passed);
    }
  }
  SUBCASE("dense, flatten, reshape") {
    Sequential<double> net;
    net.emplace<Flatten<double>>("f");
    auto& d = net.emplace<Dense<double>>("d", 12, 8);
    init(d.weight);
    init(d.bias);
    net.emplace<Reshape<double>>("r", 2, 2, 2);
    auto x = random_tensor({3, 3, 2, 2}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
  SUBCASE("relu, sigmoid, pool, upsample") {
    Sequential<double> net;
    auto& c = net.emplace<Conv2d<double>>("c", 1, 2);
    init(c.weight);
    net.emplace<ReLU<double>>("relu");
    net.emplace<MaxPool2<double>>("pool");
    net.emplace<Upsample2<double>>("up");
    net.emplace<Sigmoid<double>>("sig");
    auto x = random_tensor({2, 1, 6, 6}, rng);
    CHECK(check_network(net, x, Mode::train, opts()).passed);
  }
}

TEST_CASE("grad_check itself") {
  std::vector<double> theta{0.5, -1.0, 2.0};
  const std::vector<double> a{3.0, 1.0, -2.0};
  auto f = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += a[i] * theta[i];
    return s;
  };
  const auto before = theta;
  auto r = grad_check(f, theta, a);
  CHECK(r.passed);
  CHECK(r.checked == 3);
  CHECK(r.max_rel_error <= 1e-8);
  CHECK(theta == before);

  std::vector<double> wrong = a;
  wrong[1] *= 1.01;
  r = grad_check(f, theta, wrong);
  CHECK_FALSE(r.passed);
  CHECK(r.worst_index == 1);

  GradCheckOptions sub;
  sub.max_coords = 2;
  CHECK(grad_check(f, theta, a, sub).checked == 2);
}
