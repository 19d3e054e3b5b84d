#include <doctest.h>

#include <random>

#include "mcrood/detector.hpp"
#include "mcrood/error.hpp"
#include "oracles.hpp"

using namespace mcrood;

namespace {

Thresholds thresholds(std::vector<double> v) {
  Thresholds t;
  for (std::size_t i = 0; i < v.size(); ++i) t.classes.push_back("c" + std::to_string(i));
  t.values = std::move(v);
  return t;
}

}  // namespace

TEST_CASE("classify examples") {
  const auto t = thresholds({0.1, 0.2, 0.3});
  CHECK(classify(std::vector<double>{0.05, 0.5, 0.5}, t) == Verdict::id);
  CHECK(classify(std::vector<double>{0.5, 0.5, 0.5}, t) == Verdict::ood);
  CHECK(classify(std::vector<double>{0.1, 0.5, 0.5}, t) == Verdict::id);  // equal is within
  CHECK(classify(std::vector<double>{0.11, 0.21, 0.31}, t) == Verdict::ood);
  CHECK_THROWS_AS(classify(std::vector<double>{0.1, 0.2}, t), ArgumentError);
  CHECK(to_string(Verdict::ood) == "OOD");
  CHECK(to_string(Verdict::id) == "ID");
}

TEST_CASE("classify is OOD exactly when every class exceeds its threshold") {
  const auto t = thresholds({1.0, 1.0, 1.0});
  for (unsigned bits = 0; bits < 8; ++bits) {
    std::vector<double> e(3);
    for (std::size_t c = 0; c < 3; ++c) e[c] = (bits >> c) & 1u ? 2.0 : 0.5;
    CHECK((classify(e, t) == Verdict::ood) == (bits == 7u));
  }
}

TEST_CASE("classify agrees with the min-score rule for shared thresholds") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double th = u(rng);
    const auto t = thresholds({th, th, th});
    const std::vector<double> e{u(rng), u(rng), u(rng)};
    CHECK((classify(e, t) == Verdict::ood) == (ood_score(e) > th));
  }
}

TEST_CASE("raising errors never turns OOD into ID") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto t = thresholds({0.3, 0.5, 0.4});
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> e{u(rng), u(rng), u(rng)};
    const Verdict before = classify(e, t);
    e[trial % 3] += u(rng);
    if (before == Verdict::ood) CHECK(classify(e, t) == Verdict::ood);
  }
}

TEST_CASE("predicted class") {
  const auto t = thresholds({0.1, 0.2, 0.3});
  CHECK(predicted_class(std::vector<double>{0.05, 0.15, 0.02}, t) == 2u);
  CHECK(predicted_class(std::vector<double>{0.05, 0.25, 0.9}, t) == 0u);
  CHECK_FALSE(predicted_class(std::vector<double>{0.5, 0.5, 0.5}, t).has_value());
  CHECK(ood_score(std::vector<double>{0.3, 0.1, 0.2}) == 0.1);
  CHECK_THROWS_AS(ood_score(std::vector<double>{}), ArgumentError);
}

TEST_CASE("nearest-rank quantile") {
  const std::vector<double> ten{10, 1, 9, 2, 8, 3, 7, 4, 6, 5};
  CHECK(nearest_rank_quantile(ten, 0.95) == 10);
  CHECK(nearest_rank_quantile(ten, 0.8) == 8);
  CHECK(nearest_rank_quantile(ten, 0.5) == 5);
  CHECK(nearest_rank_quantile(ten, 0.01) == 1);
  CHECK(nearest_rank_quantile(ten, 1.0) == 10);
  CHECK(nearest_rank_quantile({4.0}, 0.3) == 4.0);
  CHECK_THROWS_AS(nearest_rank_quantile({}, 0.5), ArgumentError);
  CHECK_THROWS_AS(nearest_rank_quantile(ten, 0.0), ArgumentError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 37);
    for (double& x : v) x = u(rng);
    const double q = 0.05 + 0.9 * u(rng);
    CHECK(nearest_rank_quantile(v, q) == oracle::nearest_rank(v, q));
  }
}

TEST_CASE("calibration reaches the target TPR on its own data") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> ex(10.0);
  std::vector<std::vector<double>> errors(3);
  for (std::size_t c = 0; c < 3; ++c) {
    errors[c].resize(40 + 13 * c);
    for (double& x : errors[c]) x = ex(rng) * static_cast<double>(c + 1);
  }
  const std::vector<std::string> names{"sit", "stand", "walk"};
  const auto t = calibrate_from_errors(names, errors, 0.95);
  CHECK(t.classes == names);
  CHECK(t.calibration_sizes == std::vector<std::size_t>{40, 53, 66});
  for (std::size_t c = 0; c < 3; ++c) {
    const auto within = std::count_if(errors[c].begin(), errors[c].end(),
                                      [&](double e) { return e <= t.values[c]; });
    CHECK(static_cast<double>(within) / static_cast<double>(errors[c].size()) >= 0.95);
    CHECK(t.values[c] == oracle::nearest_rank(errors[c], 0.95));
  }
  CHECK_NOTHROW(t.validate());

  CHECK_THROWS_AS(calibrate_from_errors(names, {{1.0}, {}, {1.0}}, 0.95), ArgumentError);
  CHECK_THROWS_AS(calibrate_from_errors(names, errors, 1.0), ArgumentError);
  CHECK_THROWS_AS(calibrate_from_errors(names, {{1.0}}, 0.9), ArgumentError);
}

TEST_CASE("detect tallies verdicts") {
  const auto t = thresholds({0.1, 0.2});
  const auto r = detect({{0.05, 0.5}, {0.5, 0.5}, {0.3, 0.15}}, t);
  CHECK(r.n_id == 2);
  CHECK(r.n_ood == 1);
  CHECK(r.samples[0].predicted == 0u);
  CHECK(r.samples[1].verdict == Verdict::ood);
  CHECK_FALSE(r.samples[1].predicted.has_value());
  CHECK(r.samples[2].predicted == 1u);
}

TEST_CASE("threshold validation") {
  auto t = thresholds({0.1, -0.2});
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = thresholds({0.1});
  t.classes.push_back("extra");
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
