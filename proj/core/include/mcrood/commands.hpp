#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcrood/detector.hpp"
#include "mcrood/metrics.hpp"
#include "mcrood/model.hpp"
#include "mcrood/radar_dsp.hpp"
#include "mcrood/synthgen.hpp"
#include "mcrood/trainer.hpp"

namespace mcrood::pipeline {

namespace fs = std::filesystem;

struct PreprocessConfig {
  bool respd = true;
  std::size_t window = 50;
  /// Keep every k-th training sample; val and test are never thinned.
  std::size_t train_stride = 4;
};

/// Everything a pipeline run depends on. The seed drives scene sampling,
/// weight init and batch shuffling.
struct PipelineConfig {
  std::uint64_t seed = 1;
  dsp::RadarConfig radar;
  synth::Recipe recipe;
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  double tpr = 0.95;

  void validate() const;
};

/// Reads a JSON config; omitted keys keep their defaults, unknown keys are errors.
PipelineConfig load_config(const fs::path& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& cfg);
/// FNV-1a of the canonical JSON form.
std::uint64_t config_hash(const PipelineConfig& cfg);

inline constexpr const char* kRdiManifestName = "rdi_manifest.json";
std::string rdi_file_name(synth::Split s);

struct RdiBlock {
  std::size_t scene = 0;
  synth::Scenario scenario = synth::Scenario::none;
  synth::Split split = synth::Split::train;
  std::size_t first_sample = 0;
  std::size_t n_samples = 0;
};

struct RdiManifest {
  PreprocessConfig preprocess;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<RdiBlock> blocks;

  std::size_t samples_in(synth::Split s) const;
};

void write_rdi_manifest(const RdiManifest& m, const fs::path& path);
RdiManifest read_rdi_manifest(const fs::path& path);

/// Per-scene RDI sequence: RESPD window sums (or single frames) max-normalised,
/// with every `stride`-th sample kept.
std::vector<dsp::RangeDopplerImage> scene_images(std::span<const dsp::RangeDopplerImage> rdis,
                                                 const PreprocessConfig& pp, std::size_t stride);

synth::DatasetManifest cmd_gen(const PipelineConfig& cfg, const fs::path& out_dir);

RdiManifest cmd_preprocess(const PipelineConfig& cfg, const fs::path& raw_dir,
                           const fs::path& out_dir);

TrainingLog cmd_train(const PipelineConfig& cfg, const fs::path& rdi_dir,
                      const fs::path& checkpoint, const EpochCallback& on_epoch = {});

Thresholds cmd_calibrate(double tpr, const fs::path& checkpoint, const fs::path& rdi_dir,
                         const fs::path& out_checkpoint);

struct ClassReport {
  std::string name;
  metrics::MetricSummary metrics;
  std::size_t n_id = 0;
  double median_id_error = 0.0;
  double median_ood_error = 0.0;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  bool respd = true;
  std::optional<double> verdict_accuracy;
  double frames_per_second = 0.0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Per-class metrics from per-sample class errors. For class c the ID scores
/// are class-c samples' errors under decoder c and the OOD scores are every
/// OOD sample's error under decoder c. Labels outside `classes` are OOD.
EvalReport evaluate_errors(const std::vector<std::vector<double>>& errors,
                           const std::vector<std::string>& labels,
                           const std::vector<std::string>& classes,
                           const std::optional<Thresholds>& thresholds);

std::string report_to_json(const EvalReport& r);

EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& rdi_dir,
                    const std::optional<fs::path>& report_path);

struct DetectSummary {
  std::size_t frames = 0;
  std::size_t decided = 0;
  std::size_t ood = 0;
  std::vector<double> latency_ms;  // every frame, warm-up included
  double median_latency_ms = 0.0;  // decided frames only
  double p95_latency_ms = 0.0;
};

/// Runs raw frames from a dataset file through the full per-frame path and
/// writes one JSON line per frame to `out` (if non-null).
DetectSummary cmd_detect(const fs::path& checkpoint, const fs::path& raw_file, std::ostream* out,
                         std::size_t max_frames = 0);

}  // namespace mcrood::pipeline
