#include "mcrood/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mcrood/error.hpp"
#include "mcrood/io/container.hpp"
#include "mcrood/io/dataset.hpp"
#include "json_convert.hpp"

namespace mcrood::synth {

namespace fs = std::filesystem;
using json = nlohmann::json;
using detail::radar_from_json;
using detail::radar_to_json;
using std::numbers::pi;

namespace {

constexpr double kRoomNear = 1.0;  // m, walkers and cars bounce inside [near, far]
constexpr double kRoomFar = 5.0;
constexpr double kLimbSwing = 0.15;  // m
constexpr double kTorsoBounce = 0.01;  // m
constexpr double kGolden = 1.6180339887498949;
constexpr std::size_t kCurtainScatterers = 3;
constexpr std::size_t kFanBlades = 3;

constexpr std::array<std::pair<Scenario, std::string_view>, 7> kScenarioNames = {{
    {Scenario::sit, "sit"},
    {Scenario::stand, "stand"},
    {Scenario::walk, "walk"},
    {Scenario::fan, "fan"},
    {Scenario::curtain, "curtain"},
    {Scenario::toy_car, "toy_car"},
    {Scenario::none, "none"},
}};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

std::string_view to_string(Scenario s) noexcept {
  for (const auto& [k, v] : kScenarioNames) {
    if (k == s) return v;
  }
  return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
  for (const auto& [k, v] : kScenarioNames) {
    if (v == name) return k;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

bool is_in_distribution(Scenario s) noexcept {
  return s == Scenario::sit || s == Scenario::stand || s == Scenario::walk;
}

void SceneSpec::validate(const dsp::RadarConfig& cfg) const {
  if (n_frames == 0) throw ArgumentError("scene: n_frames must be >= 1");
  if (!(reflectivity >= 0.0) || !std::isfinite(reflectivity)) {
    throw ArgumentError("scene: reflectivity must be finite and >= 0");
  }
  if (std::isnan(noise_snr) || noise_snr == -std::numeric_limits<double>::infinity()) {
    throw ArgumentError("scene: noise_snr must be a number or +inf");
  }
  if (scenario == Scenario::none) return;
  double lo = base_range, hi = base_range;
  switch (scenario) {
    case Scenario::sit:
      lo -= breathing_amplitude;
      hi += breathing_amplitude;
      break;
    case Scenario::stand:
      lo -= breathing_amplitude + sway_amplitude;
      hi += breathing_amplitude + sway_amplitude;
      break;
    case Scenario::walk:
    case Scenario::toy_car:
      lo = std::min(lo, kRoomNear) - kLimbSwing - kTorsoBounce;
      hi = std::max(hi, kRoomFar) + kLimbSwing + kTorsoBounce;
      break;
    case Scenario::fan:
      lo -= osc_amplitude;
      hi += osc_amplitude;
      break;
    case Scenario::curtain:
      lo -= 0.1 + 1.5 * osc_amplitude;
      hi += 0.1 + 1.5 * osc_amplitude;
      break;
    case Scenario::none:
      break;
  }
  if (!(lo > 0.0) || !(hi < cfg.max_range())) {
    throw ArgumentError("scene: ranges [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] m leave the unambiguous window (0, " + std::to_string(cfg.max_range()) +
                        ") m");
  }
}

BouncingPath::BouncingPath(double start, double velocity, double lo, double hi) : lo_(lo), hi_(hi) {
  segments_.push_back({0.0, std::clamp(start, lo, hi), velocity});
}

const BouncingPath::Segment& BouncingPath::segment(double t) const {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double x, const Segment& s) { return x < s.t0; });
  return it == segments_.begin() ? segments_.front() : *std::prev(it);
}

// Unfolds the reflecting walk onto a line of period 2 * width.
double BouncingPath::range(double t) const {
  const Segment& s = segment(t);
  const double width = hi_ - lo_;
  if (width <= 0.0) return lo_;
  double u = std::fmod(s.r0 - lo_ + s.v * (t - s.t0), 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  return lo_ + (u <= width ? u : 2.0 * width - u);
}

double BouncingPath::velocity(double t) const {
  const Segment& s = segment(t);
  const double width = hi_ - lo_;
  if (width <= 0.0) return 0.0;
  double u = std::fmod(s.r0 - lo_ + s.v * (t - s.t0), 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  return u <= width ? s.v : -s.v;
}

void BouncingPath::reverse_at(double t) {
  if (t <= segments_.back().t0) throw ArgumentError("path reversals must be increasing in time");
  const double r = range(t);
  const double v = velocity(t);
  segments_.push_back({t, r, -v});
}

SceneModel::SceneModel(const SceneSpec& spec, const dsp::RadarConfig& cfg) : spec_(spec) {
  spec_.validate(cfg);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  auto phase = [&] { return uniform(rng, 0.0, 2.0 * pi); };
  switch (spec.scenario) {
    case Scenario::sit:
    case Scenario::stand:
      phase_ = {phase(), phase()};
      break;
    case Scenario::walk: {
      const double dir = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      path_ = BouncingPath(spec.base_range, dir * spec.walk_speed, kRoomNear, kRoomFar);
      phase_ = {phase(), phase()};
      break;
    }
    case Scenario::toy_car: {
      const double dir = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      path_ = BouncingPath(spec.base_range, dir * spec.walk_speed, kRoomNear, kRoomFar);
      const double duration = static_cast<double>(spec.n_frames) * cfg.frame_period;
      std::exponential_distribution<double> gap(1.0 / 1.5);
      for (double t = gap(rng); t < duration; t += std::max(gap(rng), 0.2)) path_.reverse_at(t);
      break;
    }
    case Scenario::fan:
      phase_ = {phase()};
      break;
    case Scenario::curtain:
      for (std::size_t k = 0; k < kCurtainScatterers; ++k) {
        phase_.push_back(phase());
        phase_.push_back(phase());
        offset_.push_back(uniform(rng, -0.1, 0.1));
        freq_.push_back(spec.osc_frequency * uniform(rng, 0.85, 1.15));
      }
      break;
    case Scenario::none:
      break;
  }
}

std::vector<Scatterer> SceneModel::scatterers_at(double t) const {
  const SceneSpec& s = spec_;
  std::vector<Scatterer> out;
  // a * sin(2 pi f t + p) and its time derivative
  auto osc = [t](double a, double f, double p) { return a * std::sin(2.0 * pi * f * t + p); };
  auto dosc = [t](double a, double f, double p) {
    return a * 2.0 * pi * f * std::cos(2.0 * pi * f * t + p);
  };
  switch (s.scenario) {
    case Scenario::sit:
    case Scenario::stand: {
      const double fb = s.breathing_rate / 60.0;
      double r = s.base_range + osc(s.breathing_amplitude, fb, phase_[0]);
      double v = dosc(s.breathing_amplitude, fb, phase_[0]);
      if (s.scenario == Scenario::stand) {
        r += osc(s.sway_amplitude, s.sway_frequency, phase_[1]);
        v += dosc(s.sway_amplitude, s.sway_frequency, phase_[1]);
      }
      out.push_back({r, v, s.reflectivity});
      break;
    }
    case Scenario::walk: {
      const double r = path_.range(t);
      const double v = path_.velocity(t);
      out.push_back({r + osc(kTorsoBounce, s.gait_frequency, phase_[0]),
                     v + dosc(kTorsoBounce, s.gait_frequency, phase_[0]), s.reflectivity});
      // Legs swing in antiphase at half the step rate.
      for (int k = 0; k < 2; ++k) {
        const double p = phase_[1] + pi * k;
        out.push_back({r + osc(kLimbSwing, 0.5 * s.gait_frequency, p),
                       v + dosc(kLimbSwing, 0.5 * s.gait_frequency, p),
                       s.reflectivity * s.limb_reflectivity});
      }
      break;
    }
    case Scenario::toy_car:
      out.push_back({path_.range(t), path_.velocity(t), s.reflectivity});
      break;
    case Scenario::fan:
      for (std::size_t k = 0; k < kFanBlades; ++k) {
        const double p = phase_[0] + 2.0 * pi * static_cast<double>(k) / kFanBlades;
        out.push_back({s.base_range + osc(s.osc_amplitude, s.osc_frequency, p),
                       dosc(s.osc_amplitude, s.osc_frequency, p), s.reflectivity});
      }
      break;
    case Scenario::curtain:
      // Two incommensurate tones per scatterer keep the swing aperiodic.
      for (std::size_t k = 0; k < kCurtainScatterers; ++k) {
        const double f = freq_[k];
        const double a = s.osc_amplitude;
        out.push_back({s.base_range + offset_[k] + osc(a, f, phase_[2 * k]) +
                           osc(0.5 * a, kGolden * f, phase_[2 * k + 1]),
                       dosc(a, f, phase_[2 * k]) + dosc(0.5 * a, kGolden * f, phase_[2 * k + 1]),
                       s.reflectivity});
      }
      break;
    case Scenario::none:
      break;
  }
  return out;
}

SceneSimulator::SceneSimulator(const SceneSpec& spec, const dsp::RadarConfig& cfg)
    : cfg_(cfg), model_((cfg.validate(), spec), cfg), rng_(spec.seed) {
  for (std::size_t r = 0; r < cfg_.n_rx; ++r) rx_phase_.push_back(uniform(rng_, 0.0, 2.0 * pi));
  if (!std::isinf(spec.noise_snr)) {
    noise_sigma_ = std::sqrt(0.5) / std::pow(10.0, spec.noise_snr / 20.0);
  }
}

dsp::RawFrameCube SceneSimulator::next() {
  dsp::RawFrameCube cube = dsp::RawFrameCube::zeros(cfg_, frame_);
  const double lambda = cfg_.wavelength();
  const double bins_per_metre = 2.0 * cfg_.bandwidth / dsp::kSpeedOfLight;
  const double t_frame = static_cast<double>(frame_) * cfg_.frame_period;
  const auto ns = static_cast<double>(cfg_.n_samples);

  for (std::size_t c = 0; c < cfg_.n_chirps; ++c) {
    const double t = t_frame + static_cast<double>(c) * cfg_.chirp_time;
    for (const Scatterer& sc : model_.scatterers_at(t)) {
      const double omega = 2.0 * pi * bins_per_metre * sc.range / ns;
      const std::complex<double> step = std::polar(1.0, omega);
      for (std::size_t r = 0; r < cfg_.n_rx; ++r) {
        const double phi = 4.0 * pi * sc.range / lambda + rx_phase_[r];
        std::complex<double> z = std::polar(sc.reflectivity, phi);
        double* row = &cube.at(r, c, 0);
        for (std::size_t s = 0; s < cfg_.n_samples; ++s) {
          row[s] += z.real();
          z *= step;
        }
      }
    }
  }
  if (noise_sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma_);
    for (double& x : cube.data) x += noise(rng_);
  }
  ++frame_;
  return cube;
}

std::vector<dsp::RawFrameCube> simulate(const SceneSpec& spec, const dsp::RadarConfig& cfg) {
  SceneSimulator sim(spec, cfg);
  std::vector<dsp::RawFrameCube> frames;
  frames.reserve(spec.n_frames);
  for (std::size_t f = 0; f < spec.n_frames; ++f) frames.push_back(sim.next());
  return frames;
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "unknown";
}

Split split_from_string(std::string_view name) {
  for (Split s : {Split::train, Split::val, Split::test}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

void SplitFractions::validate() const {
  for (double f : {train, val, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::vector<SceneSpec> recipe_specs(const Recipe& recipe) {
  std::mt19937_64 rng(recipe.seed);
  std::vector<SceneSpec> specs;
  auto add = [&](Scenario sc, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      SceneSpec s;
      s.scenario = sc;
      s.n_frames = recipe.frames_per_scene;
      s.noise_snr = recipe.noise_snr;
      s.base_range = uniform(rng, 1.2, 4.8);
      s.breathing_rate = uniform(rng, 12.0, 20.0);
      s.reflectivity = uniform(rng, 0.8, 1.2);
      switch (sc) {
        case Scenario::walk:
          s.walk_speed = uniform(rng, 0.6, 1.4);
          break;
        case Scenario::fan:
          s.osc_frequency = uniform(rng, 16.0, 24.0);
          s.osc_amplitude = uniform(rng, 0.015, 0.025);
          s.reflectivity = 0.3;
          break;
        case Scenario::curtain:
          s.osc_frequency = uniform(rng, 0.5, 1.2);
          s.osc_amplitude = uniform(rng, 0.05, 0.15);
          s.reflectivity = 0.3;
          break;
        case Scenario::toy_car:
          s.walk_speed = uniform(rng, 1.5, 2.8);
          s.reflectivity = 0.5;
          break;
        default:
          break;
      }
      s.seed = rng();
      specs.push_back(s);
    }
  };
  for (Scenario sc : recipe.id_classes) add(sc, recipe.scenes_per_id_class);
  for (Scenario sc : recipe.ood_types) add(sc, recipe.scenes_per_ood_type);
  return specs;
}

std::vector<SceneRecord> assign_splits(const std::vector<SceneSpec>& specs,
                                       const SplitFractions& fractions) {
  fractions.validate();
  std::map<Scenario, std::vector<std::size_t>> by_scenario;
  for (std::size_t i = 0; i < specs.size(); ++i) by_scenario[specs[i].scenario].push_back(i);

  std::vector<Split> split(specs.size(), Split::test);
  for (const auto& [sc, idx] : by_scenario) {
    if (!is_in_distribution(sc)) continue;
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n));
    const auto n_train_val =
        static_cast<std::size_t>(std::llround((fractions.train + fractions.val) * n));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      split[idx[k]] = k < n_train ? Split::train : k < n_train_val ? Split::val : Split::test;
    }
  }

  std::map<Split, std::size_t> next_frame;
  std::vector<SceneRecord> records;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    records.push_back({i, specs[i], split[i], next_frame[split[i]]});
    next_frame[split[i]] += specs[i].n_frames;
  }
  return records;
}

std::size_t DatasetManifest::frames_in(Split s) const {
  std::size_t n = 0;
  for (const auto& r : scenes) {
    if (r.split == s) n += r.spec.n_frames;
  }
  return n;
}

std::string raw_file_name(Split s) { return "raw_" + std::string(to_string(s)) + ".mcrd"; }

namespace {

// JSON has no infinity; a noiseless scene is written as null.
json snr_to_json(double snr) { return std::isinf(snr) ? json(nullptr) : json(snr); }

}  // namespace

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  json scenes = json::array();
  for (const auto& r : m.scenes) {
    const SceneSpec& s = r.spec;
    scenes.push_back({{"id", r.id},
                      {"scenario", to_string(s.scenario)},
                      {"split", to_string(r.split)},
                      {"first_frame", r.first_frame},
                      {"n_frames", s.n_frames},
                      {"seed", s.seed},
                      {"base_range", s.base_range},
                      {"breathing_rate", s.breathing_rate},
                      {"breathing_amplitude", s.breathing_amplitude},
                      {"sway_amplitude", s.sway_amplitude},
                      {"sway_frequency", s.sway_frequency},
                      {"walk_speed", s.walk_speed},
                      {"gait_frequency", s.gait_frequency},
                      {"limb_reflectivity", s.limb_reflectivity},
                      {"osc_amplitude", s.osc_amplitude},
                      {"osc_frequency", s.osc_frequency},
                      {"reflectivity", s.reflectivity},
                      {"noise_snr", snr_to_json(s.noise_snr)}});
  }
  json files = json::object();
  for (Split s : {Split::train, Split::val, Split::test}) {
    if (m.frames_in(s) > 0) {
      files[std::string(to_string(s))] = {{"file", raw_file_name(s)}, {"frames", m.frames_in(s)}};
    }
  }
  const json j{{"format", "mcrood-raw"},
               {"version", 1},
               {"radar", radar_to_json(m.radar)},
               {"splits", files},
               {"scenes", scenes}};
  io::write_text_atomic(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& path) {
  try {
    const json j = json::parse(io::read_text(path));
    if (j.at("format") != "mcrood-raw") throw IoError(path.string(), "not a raw dataset manifest");
    DatasetManifest m;
    m.radar = radar_from_json(j.at("radar"));
    for (const auto& e : j.at("scenes")) {
      SceneRecord r;
      r.id = e.at("id").get<std::size_t>();
      r.split = split_from_string(e.at("split").get<std::string>());
      r.first_frame = e.at("first_frame").get<std::size_t>();
      SceneSpec& s = r.spec;
      s.scenario = scenario_from_string(e.at("scenario").get<std::string>());
      s.n_frames = e.at("n_frames").get<std::size_t>();
      s.seed = e.at("seed").get<std::uint64_t>();
      s.base_range = e.at("base_range").get<double>();
      s.breathing_rate = e.at("breathing_rate").get<double>();
      s.breathing_amplitude = e.at("breathing_amplitude").get<double>();
      s.sway_amplitude = e.at("sway_amplitude").get<double>();
      s.sway_frequency = e.at("sway_frequency").get<double>();
      s.walk_speed = e.at("walk_speed").get<double>();
      s.gait_frequency = e.at("gait_frequency").get<double>();
      s.limb_reflectivity = e.at("limb_reflectivity").get<double>();
      s.osc_amplitude = e.at("osc_amplitude").get<double>();
      s.osc_frequency = e.at("osc_frequency").get<double>();
      s.reflectivity = e.at("reflectivity").get<double>();
      s.noise_snr = e.at("noise_snr").is_null() ? std::numeric_limits<double>::infinity()
                                                : e.at("noise_snr").get<double>();
      m.scenes.push_back(r);
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(path.string(), std::string("malformed manifest: ") + e.what());
  }
}

DatasetManifest build_dataset(const std::vector<SceneSpec>& specs, const dsp::RadarConfig& cfg,
                              const SplitFractions& fractions, const fs::path& dir) {
  cfg.validate();
  for (const auto& s : specs) s.validate(cfg);
  DatasetManifest manifest{cfg, assign_splits(specs, fractions)};

  std::map<Split, std::unique_ptr<io::DatasetWriter>> writers;
  for (Split s : {Split::train, Split::val, Split::test}) {
    const std::size_t n = manifest.frames_in(s);
    if (n == 0) continue;
    writers[s] = std::make_unique<io::DatasetWriter>(
        dir / raw_file_name(s), io::Dims{n, cfg.n_rx, cfg.n_chirps, cfg.n_samples});
  }
  for (const auto& rec : manifest.scenes) {
    SceneSimulator sim(rec.spec, cfg);
    auto& w = *writers.at(rec.split);
    for (std::size_t f = 0; f < rec.spec.n_frames; ++f) {
      const dsp::RawFrameCube cube = sim.next();
      w.append(std::span<const double>(cube.data));
    }
  }
  for (auto& [s, w] : writers) w->finish();
  write_manifest(manifest, dir / kRawManifestName);
  return manifest;
}

}  // namespace mcrood::synth
