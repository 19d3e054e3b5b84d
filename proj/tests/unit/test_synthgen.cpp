#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "mcrood/error.hpp"
#include "mcrood/io/dataset.hpp"
#include "mcrood/radar_dsp.hpp"
#include "mcrood/respd.hpp"
#include "mcrood/synthgen.hpp"
#include "temp_dir.hpp"

using namespace mcrood;
using namespace mcrood::synth;
namespace fs = std::filesystem;
using testing_support::TempDir;

namespace {

// Frequency (Hz) of the largest non-DC DFT line of a series sampled at `rate`.
double dominant_frequency(std::vector<double> x, double rate) {
  double mean = 0.0;
  for (double v : x) mean += v / static_cast<double>(x.size());
  const std::size_t n = x.size();
  double best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += (x[t] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                                                 static_cast<double>(n));
    }
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * rate / static_cast<double>(n);
}

std::vector<dsp::RangeDopplerImage> rdis(const SceneSpec& spec, const dsp::RadarConfig& cfg) {
  SceneSimulator sim(spec, cfg);
  dsp::MtiState st;
  std::vector<dsp::RangeDopplerImage> out;
  for (std::size_t f = 0; f < spec.n_frames; ++f) out.push_back(dsp::make_rdi(sim.next(), st, cfg));
  return out;
}

std::size_t brightest_cell(const std::vector<dsp::RangeDopplerImage>& seq) {
  std::vector<double> mean(seq[0].size(), 0.0);
  for (const auto& img : seq)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += img.data[i];
  return static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
}

}  // namespace

TEST_CASE("scenario names round-trip") {
  for (Scenario s : {Scenario::sit, Scenario::stand, Scenario::walk, Scenario::fan,
                     Scenario::curtain, Scenario::toy_car, Scenario::none}) {
    CHECK(scenario_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(scenario_from_string("plant"), ConfigError);
  CHECK(is_in_distribution(Scenario::walk));
  CHECK_FALSE(is_in_distribution(Scenario::fan));
}

TEST_CASE("empty scene without noise is all zeros") {
  SceneSpec spec;
  spec.scenario = Scenario::none;
  spec.noise_snr = INFINITY;
  spec.n_frames = 3;
  const auto frames = simulate(spec, dsp::RadarConfig{});
  REQUIRE(frames.size() == 3);
  for (const auto& f : frames) {
    CHECK(f.n_rx == 3);
    CHECK(f.n_chirps == 64);
    CHECK(f.n_samples == 128);
    for (double v : f.data) CHECK(v == 0.0);
  }
}

TEST_CASE("static target lands on its beat bin and MTI removes it") {
  dsp::RadarConfig cfg;
  SceneSpec spec;
  spec.scenario = Scenario::sit;
  spec.breathing_amplitude = 0.0;
  spec.base_range = 3.0;
  spec.noise_snr = INFINITY;
  spec.n_frames = 1;
  const auto frame = simulate(spec, cfg).front();
  auto profile = dsp::range_fft(frame, cfg);
  // k = 2 B R / c
  const auto k = static_cast<std::size_t>(std::lround(2.0 * cfg.bandwidth * 3.0 / dsp::kSpeedOfLight));
  CHECK(k == 20);
  double peak = 0.0;
  for (std::size_t r = 0; r < cfg.n_rx; ++r) {
    std::size_t best = 0;
    for (std::size_t b = 0; b < profile.n_range_bins; ++b) {
      if (std::abs(profile.at(r, 5, b)) > std::abs(profile.at(r, 5, best))) best = b;
    }
    CHECK(best == k);
    peak = std::max(peak, std::abs(profile.at(r, 5, best)));
  }
  dsp::mti_filter_inplace(profile);
  for (const auto& z : profile.data) CHECK(std::abs(z) <= 1e-6 * peak);
}

TEST_CASE("simulation is seeded") {
  dsp::RadarConfig cfg;
  SceneSpec spec;
  spec.scenario = Scenario::curtain;
  spec.osc_frequency = 0.8;
  spec.n_frames = 2;
  spec.seed = 5;
  const auto a = simulate(spec, cfg), b = simulate(spec, cfg);
  CHECK(a[1].data == b[1].data);
  spec.seed = 6;
  CHECK(simulate(spec, cfg)[1].data != a[1].data);
}

TEST_CASE("breathing shows up at the expected rates") {
  dsp::RadarConfig cfg;
  SceneSpec sit;
  sit.scenario = Scenario::sit;
  sit.noise_snr = INFINITY;
  sit.n_frames = 400;
  sit.base_range = 2.5;

  for (double bpm : {12.0, 15.0, 18.0}) {
    sit.breathing_rate = bpm;
    sit.seed = static_cast<std::uint64_t>(bpm);
    const double fb = bpm / 60.0;

    // kinematics: the torso range oscillates inside the breathing band
    const SceneModel model(sit, cfg);
    std::vector<double> range;
    for (std::size_t f = 0; f < sit.n_frames; ++f) {
      range.push_back(model.scatterers_at(static_cast<double>(f) * cfg.frame_period)[0].range);
    }
    const double f_range = dominant_frequency(range, 1.0 / cfg.frame_period);
    CHECK(f_range >= 0.2);
    CHECK(f_range <= 0.34);

    // RDI magnitude follows |velocity|, so the cell's line sits at twice the rate
    const auto seq = rdis(sit, cfg);
    const std::size_t cell = brightest_cell(seq);
    std::vector<double> series;
    for (const auto& img : seq) series.push_back(img.data[cell]);
    CHECK(dominant_frequency(series, 1.0 / cfg.frame_period) == doctest::Approx(2.0 * fb).epsilon(0.06));
  }

  SceneSpec curtain = sit;
  curtain.scenario = Scenario::curtain;
  curtain.osc_amplitude = 0.08;
  for (double f : {0.5, 0.8, 1.2}) {
    curtain.osc_frequency = f;
    const auto seq = rdis(curtain, cfg);
    const std::size_t cell = brightest_cell(seq);
    std::vector<double> series;
    for (const auto& img : seq) series.push_back(img.data[cell]);
    const double peak = dominant_frequency(series, 1.0 / cfg.frame_period);
    CHECK((peak < 0.2 || peak > 0.34));
  }
}

TEST_CASE("RESPD amplifies the sitting target") {
  dsp::RadarConfig cfg;
  SceneSpec sit;
  sit.scenario = Scenario::sit;
  sit.n_frames = 120;
  sit.seed = 3;
  const auto seq = rdis(sit, cfg);
  const std::size_t cell = brightest_cell(seq);
  const auto summed = respd::respd_transform(seq, {50, 1});
  double single = 0.0, windowed = 0.0;
  for (const auto& img : seq) single += img.data[cell] / static_cast<double>(seq.size());
  for (const auto& img : summed) windowed += img.data[cell] / static_cast<double>(summed.size());
  CHECK(windowed > 10.0 * single);
}

TEST_CASE("scene validation") {
  dsp::RadarConfig cfg;
  SceneSpec spec;
  spec.base_range = 9.7;
  CHECK_THROWS_AS(spec.validate(cfg), ArgumentError);
  CHECK_THROWS_AS(simulate(spec, cfg), ArgumentError);
  spec.base_range = 0.001;
  CHECK_THROWS_AS(spec.validate(cfg), ArgumentError);
  spec.base_range = 3.0;
  CHECK_NOTHROW(spec.validate(cfg));
  spec.n_frames = 0;
  CHECK_THROWS_AS(spec.validate(cfg), ArgumentError);
}

TEST_CASE("toy car and walker stay inside the room") {
  dsp::RadarConfig cfg;
  for (Scenario sc : {Scenario::walk, Scenario::toy_car}) {
    SceneSpec spec;
    spec.scenario = sc;
    spec.walk_speed = 2.5;
    spec.seed = 9;
    const SceneModel model(spec, cfg);
    int reversals = 0;
    double prev_v = model.scatterers_at(0.0)[0].velocity;
    for (double t = 0.0; t < 20.0; t += 0.01) {
      const auto s = model.scatterers_at(t);
      for (const auto& x : s) {
        CHECK(x.range > 0.5);
        CHECK(x.range < 5.5);
      }
      if (sc == Scenario::toy_car) {
        if (s[0].velocity * prev_v < 0) ++reversals;
        prev_v = s[0].velocity;
        CHECK(std::abs(s[0].velocity) == doctest::Approx(2.5));
      }
    }
    if (sc == Scenario::toy_car) CHECK(reversals > 5);
  }
}

TEST_CASE("recipe and splits") {
  Recipe recipe;
  const auto specs = recipe_specs(recipe);
  std::map<Scenario, std::size_t> count;
  for (const auto& s : specs) {
    ++count[s.scenario];
    CHECK(s.n_frames == 400);
    CHECK(s.base_range >= 1.0);
    CHECK(s.base_range <= 5.0);
    if (is_in_distribution(s.scenario)) {
      CHECK(s.breathing_rate >= 12.0);
      CHECK(s.breathing_rate <= 20.0);
    }
    CHECK_NOTHROW(s.validate(dsp::RadarConfig{}));
  }
  for (Scenario s : {Scenario::sit, Scenario::stand, Scenario::walk}) CHECK(count[s] == 30);
  for (Scenario s : {Scenario::fan, Scenario::curtain, Scenario::toy_car}) CHECK(count[s] == 10);
  CHECK(specs.size() == 120);

  const auto recs = assign_splits(specs, recipe.split);
  std::map<Split, std::size_t> frames;
  std::map<std::pair<Scenario, Split>, std::size_t> scenes;
  for (const auto& r : recs) {
    if (!is_in_distribution(r.spec.scenario)) CHECK(r.split == Split::test);
    CHECK(r.first_frame == frames[r.split]);  // contiguous, non-overlapping per split
    frames[r.split] += r.spec.n_frames;
    ++scenes[{r.spec.scenario, r.split}];
  }
  CHECK(scenes[{Scenario::sit, Split::train}] == 21);
  CHECK(scenes[{Scenario::sit, Split::val}] == 3);
  CHECK(scenes[{Scenario::sit, Split::test}] == 6);
  CHECK(frames[Split::train] == 63 * 400);
  CHECK(frames[Split::test] == (18 + 30) * 400);

  const auto all_train = assign_splits(specs, {1.0, 0.0, 0.0});
  for (const auto& r : all_train) {
    if (is_in_distribution(r.spec.scenario)) CHECK(r.split == Split::train);
  }

  CHECK_THROWS_AS((SplitFractions{0.5, 0.5, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((SplitFractions{1.2, -0.2, 0.0}.validate()), ConfigError);
  for (Split s : {Split::train, Split::val, Split::test}) CHECK(split_from_string(to_string(s)) == s);
}

TEST_CASE("build_dataset writes frames and a manifest") {
  TempDir dir("synth");
  Recipe recipe;
  recipe.scenes_per_id_class = 2;
  recipe.scenes_per_ood_type = 1;
  recipe.frames_per_scene = 3;
  const auto specs = recipe_specs(recipe);
  const dsp::RadarConfig cfg;
  const auto m = build_dataset(specs, cfg, {0.5, 0.0, 0.5}, dir.path);
  CHECK(m.frames_in(Split::train) == 9);
  CHECK(m.frames_in(Split::val) == 0);
  CHECK(m.frames_in(Split::test) == 18);
  CHECK_FALSE(fs::exists(dir.path / raw_file_name(Split::val)));

  const io::DatasetReader train(dir.path / raw_file_name(Split::train));
  CHECK(train.rows() == 9);
  CHECK(train.dims() == io::Dims{9, 3, 64, 128});

  const auto back = read_manifest(dir.path / std::string(kRawManifestName));
  REQUIRE(back.scenes.size() == m.scenes.size());
  for (std::size_t i = 0; i < back.scenes.size(); ++i) {
    CHECK(back.scenes[i].split == m.scenes[i].split);
    CHECK(back.scenes[i].first_frame == m.scenes[i].first_frame);
    CHECK(back.scenes[i].spec.base_range == m.scenes[i].spec.base_range);
    CHECK(back.scenes[i].spec.seed == m.scenes[i].spec.seed);
  }

  // the stored frames are the simulator's frames, rounded to float
  const auto& first = m.scenes.front();
  const auto sim = simulate(first.spec, cfg);
  const auto row = train.row(first.first_frame + 1);
  for (std::size_t i = 0; i < row.size(); i += 97) {
    CHECK(row[i] == static_cast<float>(sim[1].data[i]));
  }
}
