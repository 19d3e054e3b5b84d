#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mcrood/radar_dsp.hpp"

namespace mcrood::synth {

enum class Scenario { sit, stand, walk, fan, curtain, toy_car, none };

std::string_view to_string(Scenario s) noexcept;
/// Throws ConfigError for unknown names.
Scenario scenario_from_string(std::string_view name);
bool is_in_distribution(Scenario s) noexcept;

struct SceneSpec {
  Scenario scenario = Scenario::sit;
  double base_range = 3.0;             // m
  double breathing_rate = 15.0;        // breaths / min
  double breathing_amplitude = 0.004;  // m
  double sway_amplitude = 0.01;        // m, stand only
  double sway_frequency = 0.1;         // Hz
  double walk_speed = 1.0;             // m/s, walk and toy_car
  double gait_frequency = 2.0;         // Hz
  double limb_reflectivity = 0.25;
  double osc_amplitude = 0.02;         // m, fan / curtain
  double osc_frequency = 20.0;         // Hz, fan / curtain
  double reflectivity = 1.0;
  /// Per-ADC-sample SNR of a unit scatterer (signal power 1/2), dB. +inf is noiseless.
  double noise_snr = 20.0;
  std::size_t n_frames = 400;
  std::uint64_t seed = 0;

  /// Throws ArgumentError when the scene does not fit the radar's range window.
  void validate(const dsp::RadarConfig& cfg) const;
};

struct Scatterer {
  double range = 0.0;     // m
  double velocity = 0.0;  // m/s, positive receding
  double reflectivity = 0.0;
};

/// Piecewise-constant-velocity motion reflected at [lo, hi].
class BouncingPath {
 public:
  BouncingPath() = default;
  BouncingPath(double start, double velocity, double lo, double hi);

  /// Adds a velocity reversal at time t (must be later than the last one).
  void reverse_at(double t);

  double range(double t) const;
  double velocity(double t) const;

 private:
  struct Segment {
    double t0;
    double r0;
    double v;
  };
  const Segment& segment(double t) const;

  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<Segment> segments_;
};

/// Deterministic kinematics of one scene: scatterer ranges as a function of time.
class SceneModel {
 public:
  SceneModel(const SceneSpec& spec, const dsp::RadarConfig& cfg);

  std::vector<Scatterer> scatterers_at(double t) const;
  const SceneSpec& spec() const noexcept { return spec_; }

 private:
  SceneSpec spec_;
  std::vector<double> phase_;  // per-scatterer phase offsets for periodic motion
  std::vector<double> offset_;
  std::vector<double> freq_;
  BouncingPath path_;
};

/// Streams frames of one scene. Each receiver gets a fixed random carrier phase.
class SceneSimulator {
 public:
  SceneSimulator(const SceneSpec& spec, const dsp::RadarConfig& cfg);

  dsp::RawFrameCube next();
  std::size_t frames_emitted() const noexcept { return frame_; }
  const SceneModel& model() const noexcept { return model_; }

 private:
  dsp::RadarConfig cfg_;
  SceneModel model_;
  std::mt19937_64 rng_;
  std::vector<double> rx_phase_;
  double noise_sigma_ = 0.0;
  std::uint64_t frame_ = 0;
};

std::vector<dsp::RawFrameCube> simulate(const SceneSpec& spec, const dsp::RadarConfig& cfg);

enum class Split { train, val, test };
std::string_view to_string(Split s) noexcept;
Split split_from_string(std::string_view name);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

struct Recipe {
  std::vector<Scenario> id_classes = {Scenario::sit, Scenario::stand, Scenario::walk};
  std::vector<Scenario> ood_types = {Scenario::fan, Scenario::curtain, Scenario::toy_car};
  std::size_t scenes_per_id_class = 30;
  std::size_t scenes_per_ood_type = 10;
  std::size_t frames_per_scene = 400;
  double noise_snr = 20.0;
  SplitFractions split;
  std::uint64_t seed = 1;
};

/// Draws per-scene parameters (range, breathing rate, speeds, oscillations).
std::vector<SceneSpec> recipe_specs(const Recipe& recipe);

struct SceneRecord {
  std::size_t id = 0;
  SceneSpec spec;
  Split split = Split::train;
  std::size_t first_frame = 0;  // within the split's file
};

/// Assigns whole scenes to splits. Scenes of each ID scenario are cut in order
/// by the fractions; OOD scenes always go to test.
std::vector<SceneRecord> assign_splits(const std::vector<SceneSpec>& specs,
                                       const SplitFractions& fractions);

struct DatasetManifest {
  dsp::RadarConfig radar;
  std::vector<SceneRecord> scenes;

  std::size_t frames_in(Split s) const;
};

inline constexpr std::string_view kRawManifestName = "manifest.json";
std::string raw_file_name(Split s);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Simulates every scene and writes raw_<split>.mcrd files plus manifest.json
/// into `dir`. Empty splits get no file.
DatasetManifest build_dataset(const std::vector<SceneSpec>& specs, const dsp::RadarConfig& cfg,
                              const SplitFractions& fractions, const std::filesystem::path& dir);

}  // namespace mcrood::synth
