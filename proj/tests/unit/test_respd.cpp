#include <doctest.h>

#include <random>

#include "mcrood/error.hpp"
#include "mcrood/respd.hpp"
#include "oracles.hpp"

using namespace mcrood;
using namespace mcrood::respd;

namespace {

std::vector<RangeDopplerImage> random_sequence(std::size_t n, std::size_t d, std::size_t r,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<RangeDopplerImage> seq;
  for (std::size_t i = 0; i < n; ++i) {
    auto img = RangeDopplerImage::zeros(d, r, 100 + i);
    for (double& v : img.data) v = u(rng);
    seq.push_back(std::move(img));
  }
  return seq;
}

std::vector<std::vector<double>> flat(const std::vector<RangeDopplerImage>& seq) {
  std::vector<std::vector<double>> out;
  for (const auto& s : seq) out.push_back(s.data);
  return out;
}

}  // namespace

TEST_CASE("respd_transform on constant frames") {
  std::vector<RangeDopplerImage> seq;
  for (std::size_t i = 0; i < 60; ++i) {
    auto img = RangeDopplerImage::zeros(8, 8, i);
    for (double& v : img.data) v = 0.3;
    seq.push_back(img);
  }
  const auto out = respd_transform(seq, {50, 1});
  REQUIRE(out.size() == 11);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].frame_index == i);
    for (double v : out[i].data) CHECK(v == doctest::Approx(15.0));
  }
}

TEST_CASE("respd_transform matches the naive window sum") {
  const auto seq = random_sequence(37, 6, 5, 1);
  for (std::size_t w : {1u, 2u, 10u, 37u}) {
    const auto ref = oracle::windowed_sum(flat(seq), w);
    for (std::size_t stride : {1u, 3u}) {
      const auto out = respd_transform(seq, {w, stride});
      REQUIRE(out.size() == (37 - w) / stride + 1);
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].frame_index == seq[i * stride].frame_index);
        for (std::size_t p = 0; p < ref[0].size(); ++p) {
          CHECK(out[i].data[p] == doctest::Approx(ref[i * stride][p]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("respd_transform edge cases") {
  const auto seq = random_sequence(50, 4, 4, 2);
  SUBCASE("window equal to sequence length yields one image") {
    const auto out = respd_transform(seq, {50, 1});
    CHECK(out.size() == 1);
  }
  SUBCASE("short sequence") {
    CHECK_THROWS_AS(respd_transform(std::span(seq).first(49), {50, 1}), ArgumentError);
  }
  SUBCASE("invalid config") {
    CHECK_THROWS_AS(respd_transform(seq, {0, 1}), ConfigError);
    CHECK_THROWS_AS(respd_transform(seq, {10, 0}), ConfigError);
  }
  SUBCASE("mixed shapes") {
    auto bad = seq;
    bad[7] = RangeDopplerImage::zeros(4, 5);
    CHECK_THROWS(respd_transform(bad, {10, 1}));
  }
}

TEST_CASE("normalize_unit") {
  auto img = RangeDopplerImage::zeros(2, 2);
  img.data = {1.0, 4.0, 2.0, 0.0};
  const auto n = normalize_unit(img);
  CHECK(n.data == std::vector<double>{0.25, 1.0, 0.5, 0.0});
  const auto z = normalize_unit(RangeDopplerImage::zeros(3, 3));
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("RespdStream agrees with the batch transform") {
  const auto seq = random_sequence(400, 8, 8, 3);
  const auto ref = respd_transform(seq, {50, 1});
  RespdStream stream(50);
  std::size_t k = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    auto out = stream.push(seq[i]);
    if (i + 1 < 50) {
      CHECK_FALSE(out.has_value());
      continue;
    }
    REQUIRE(out.has_value());
    CHECK(out->frame_index == ref[k].frame_index);
    for (std::size_t p = 0; p < out->data.size(); ++p) {
      CHECK(out->data[p] == doctest::Approx(ref[k].data[p]).epsilon(1e-12));
    }
    ++k;
  }
  CHECK(k == ref.size());
  stream.reset();
  CHECK_FALSE(stream.push(seq[0]).has_value());
}
