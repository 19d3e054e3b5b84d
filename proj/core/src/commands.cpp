#include "mcrood/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "json_convert.hpp"
#include "mcrood/error.hpp"
#include "mcrood/io/checkpoint.hpp"
#include "mcrood/io/container.hpp"
#include "mcrood/io/dataset.hpp"
#include "mcrood/respd.hpp"

namespace mcrood::pipeline {

using json = nlohmann::json;
using synth::Split;
using Clock = std::chrono::steady_clock;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

json preprocess_to_json(const PreprocessConfig& p) {
  return {{"respd", p.respd}, {"window", p.window}, {"train_stride", p.train_stride}};
}

PreprocessConfig preprocess_from_json(const json& j) {
  PreprocessConfig p;
  check_keys(j, {"respd", "window", "train_stride"}, "preprocess");
  read(j, "respd", p.respd);
  read(j, "window", p.window);
  read(j, "train_stride", p.train_stride);
  return p;
}

json to_json(const PipelineConfig& c) {
  json id = json::array(), ood = json::array();
  for (auto s : c.recipe.id_classes) id.push_back(synth::to_string(s));
  for (auto s : c.recipe.ood_types) ood.push_back(synth::to_string(s));
  return {
      {"seed", c.seed},
      {"radar", detail::radar_to_json(c.radar)},
      {"recipe",
       {{"id_classes", id},
        {"ood_types", ood},
        {"scenes_per_id_class", c.recipe.scenes_per_id_class},
        {"scenes_per_ood_type", c.recipe.scenes_per_ood_type},
        {"frames_per_scene", c.recipe.frames_per_scene},
        {"noise_snr", c.recipe.noise_snr},
        {"split",
         {{"train", c.recipe.split.train}, {"val", c.recipe.split.val}, {"test", c.recipe.split.test}}}}},
      {"preprocess", preprocess_to_json(c.preprocess)},
      {"model",
       {{"input_size", c.model.input_size},
        {"filters", c.model.filters},
        {"latent_dim", c.model.latent_dim},
        {"kernel", c.model.kernel}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"learning_rate", c.train.learning_rate},
        {"optimizer", c.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"adam_epsilon", c.train.adam_epsilon},
        {"shuffle", c.train.shuffle}}},
      {"calibrate", {{"tpr", c.tpr}}},
  };
}

// Keeps the model class list and derived seeds in step with the rest.
void sync_derived(PipelineConfig& c) {
  c.model.classes.clear();
  for (auto s : c.recipe.id_classes) c.model.classes.emplace_back(synth::to_string(s));
  c.recipe.seed = c.seed;
  c.train.seed = c.seed + 2;
}

json checkpoint_metadata(const PipelineConfig& cfg, const RdiManifest& rdi) {
  return {{"preprocess", preprocess_to_json(rdi.preprocess)},
          {"radar", detail::radar_to_json(cfg.radar)},
          {"config_hash", hex64(config_hash(cfg))},
          {"seed", cfg.seed}};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

nn::Tensor<float> to_batch(std::span<const float> rows, std::size_t n, std::size_t side) {
  return nn::Tensor<float>({n, 1, side, side}, std::vector<float>(rows.begin(), rows.end()));
}

// Per-sample class errors for a whole split file, batched.
std::vector<std::vector<double>> score_file(const MultiDecoderModel<float>& model,
                                            const io::DatasetReader& reader) {
  constexpr std::size_t kBatch = 64;
  const std::size_t side = model.config().input_size;
  if (reader.row_size() != side * side) {
    throw ShapeError("RDI rows hold " + std::to_string(reader.row_size()) + " values, model expects " +
                     std::to_string(side * side));
  }
  std::vector<std::vector<double>> errors;
  errors.reserve(reader.rows());
  for (std::size_t i = 0; i < reader.rows(); i += kBatch) {
    const std::size_t n = std::min(kBatch, reader.rows() - i);
    auto e = model.reconstruction_errors_batch(to_batch(reader.rows(i, n), n, side));
    for (auto& row : e) errors.push_back(std::move(row));
  }
  return errors;
}

// Stacks every sample of the given class from one split into a tensor.
nn::Tensor<float> class_images(const RdiManifest& m, const io::DatasetReader& reader, Split split,
                               synth::Scenario cls, std::size_t side) {
  std::vector<float> data;
  std::size_t n = 0;
  for (const auto& b : m.blocks) {
    if (b.split != split || b.scenario != cls) continue;
    const auto rows = reader.rows(b.first_sample, b.n_samples);
    data.insert(data.end(), rows.begin(), rows.end());
    n += b.n_samples;
  }
  return nn::Tensor<float>({n, 1, side, side}, std::move(data));
}

}  // namespace

void PipelineConfig::validate() const {
  radar.validate();
  recipe.split.validate();
  if (recipe.frames_per_scene == 0) throw ConfigError("recipe: frames_per_scene must be >= 1");
  for (auto s : recipe.id_classes) {
    if (!synth::is_in_distribution(s)) {
      throw ConfigError("recipe: '" + std::string(synth::to_string(s)) + "' is not an ID scenario");
    }
  }
  for (auto s : recipe.ood_types) {
    if (synth::is_in_distribution(s)) {
      throw ConfigError("recipe: '" + std::string(synth::to_string(s)) + "' is not an OOD scenario");
    }
  }
  respd::FrameWindowConfig{preprocess.window, 1}.validate();
  if (preprocess.train_stride == 0) throw ConfigError("preprocess: train_stride must be >= 1");
  if (preprocess.respd && recipe.frames_per_scene < preprocess.window) {
    throw ConfigError("recipe: scenes of " + std::to_string(recipe.frames_per_scene) +
                      " frames are shorter than the RESPD window (" +
                      std::to_string(preprocess.window) + ")");
  }
  if (model.input_size != radar.n_range_bins() || model.input_size != radar.n_doppler_bins()) {
    throw ConfigError("model: input_size must equal the RDI size (" +
                      std::to_string(radar.n_doppler_bins()) + "x" +
                      std::to_string(radar.n_range_bins()) + ")");
  }
  model.validate();
  train.validate();
  if (!(tpr > 0.0 && tpr < 1.0)) throw ConfigError("calibrate: tpr must be in (0, 1)");
}

PipelineConfig config_from_json_text(const std::string& text) {
  PipelineConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, {"seed", "radar", "recipe", "preprocess", "model", "train", "calibrate"}, "config");
    read(j, "seed", c.seed);
    if (j.contains("radar")) {
      check_keys(j["radar"],
                 {"n_tx", "n_rx", "n_chirps", "n_samples", "frame_period", "chirp_time",
                  "bandwidth", "carrier_freq", "window"},
                 "radar");
      c.radar = detail::radar_from_json(j["radar"]);
    }
    if (j.contains("recipe")) {
      const json& r = j["recipe"];
      check_keys(r,
                 {"id_classes", "ood_types", "scenes_per_id_class", "scenes_per_ood_type",
                  "frames_per_scene", "noise_snr", "split"},
                 "recipe");
      auto scenarios = [&](const char* key, std::vector<synth::Scenario>& out) {
        if (!r.contains(key)) return;
        out.clear();
        for (const auto& n : r[key]) out.push_back(synth::scenario_from_string(n.get<std::string>()));
      };
      scenarios("id_classes", c.recipe.id_classes);
      scenarios("ood_types", c.recipe.ood_types);
      read(r, "scenes_per_id_class", c.recipe.scenes_per_id_class);
      read(r, "scenes_per_ood_type", c.recipe.scenes_per_ood_type);
      read(r, "frames_per_scene", c.recipe.frames_per_scene);
      read(r, "noise_snr", c.recipe.noise_snr);
      if (r.contains("split")) {
        check_keys(r["split"], {"train", "val", "test"}, "recipe.split");
        read(r["split"], "train", c.recipe.split.train);
        read(r["split"], "val", c.recipe.split.val);
        read(r["split"], "test", c.recipe.split.test);
      }
    }
    if (j.contains("preprocess")) c.preprocess = preprocess_from_json(j["preprocess"]);
    if (j.contains("model")) {
      const json& m = j["model"];
      check_keys(m, {"input_size", "filters", "latent_dim", "kernel"}, "model");
      read(m, "input_size", c.model.input_size);
      read(m, "filters", c.model.filters);
      read(m, "latent_dim", c.model.latent_dim);
      read(m, "kernel", c.model.kernel);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t,
                 {"batch_size", "epochs", "learning_rate", "optimizer", "beta1", "beta2",
                  "adam_epsilon", "shuffle"},
                 "train");
      read(t, "batch_size", c.train.batch_size);
      read(t, "epochs", c.train.epochs);
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "adam_epsilon", c.train.adam_epsilon);
      read(t, "shuffle", c.train.shuffle);
      if (t.contains("optimizer")) {
        const auto name = t["optimizer"].get<std::string>();
        if (name != "adam" && name != "sgd") throw ConfigError("train: unknown optimizer '" + name + "'");
        c.train.optimizer = name == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
      }
    }
    if (j.contains("calibrate")) {
      check_keys(j["calibrate"], {"tpr"}, "calibrate");
      read(j["calibrate"], "tpr", c.tpr);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  sync_derived(c);
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  try {
    return config_from_json_text(io::read_text(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_json_text(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::uint64_t config_hash(const PipelineConfig& cfg) { return io::fnv1a(to_json(cfg).dump()); }

std::string rdi_file_name(Split s) { return "rdi_" + std::string(synth::to_string(s)) + ".mcrd"; }

std::size_t RdiManifest::samples_in(Split s) const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (b.split == s) n += b.n_samples;
  }
  return n;
}

void write_rdi_manifest(const RdiManifest& m, const fs::path& path) {
  json blocks = json::array();
  for (const auto& b : m.blocks) {
    blocks.push_back({{"scene", b.scene},
                      {"scenario", synth::to_string(b.scenario)},
                      {"split", synth::to_string(b.split)},
                      {"first_sample", b.first_sample},
                      {"n_samples", b.n_samples}});
  }
  const json j{{"format", "mcrood-rdi"},
               {"version", 1},
               {"preprocess", preprocess_to_json(m.preprocess)},
               {"config_hash", hex64(m.config_hash)},
               {"seed", m.seed},
               {"blocks", blocks}};
  io::write_text_atomic(path, j.dump(2) + "\n");
}

RdiManifest read_rdi_manifest(const fs::path& path) {
  try {
    const json j = json::parse(io::read_text(path));
    if (j.at("format") != "mcrood-rdi") throw IoError(path.string(), "not an RDI manifest");
    RdiManifest m;
    m.preprocess = preprocess_from_json(j.at("preprocess"));
    m.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& b : j.at("blocks")) {
      m.blocks.push_back({b.at("scene").get<std::size_t>(),
                          synth::scenario_from_string(b.at("scenario").get<std::string>()),
                          synth::split_from_string(b.at("split").get<std::string>()),
                          b.at("first_sample").get<std::size_t>(),
                          b.at("n_samples").get<std::size_t>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(path.string(), std::string("malformed RDI manifest: ") + e.what());
  }
}

std::vector<dsp::RangeDopplerImage> scene_images(std::span<const dsp::RangeDopplerImage> rdis,
                                                 const PreprocessConfig& pp, std::size_t stride) {
  std::vector<dsp::RangeDopplerImage> out;
  if (pp.respd) {
    out = respd::respd_transform(rdis, {pp.window, stride});
  } else {
    for (std::size_t i = 0; i < rdis.size(); i += stride) out.push_back(rdis[i]);
  }
  for (auto& img : out) img = respd::normalize_unit(std::move(img));
  return out;
}

synth::DatasetManifest cmd_gen(const PipelineConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  return synth::build_dataset(synth::recipe_specs(cfg.recipe), cfg.radar, cfg.recipe.split, out_dir);
}

RdiManifest cmd_preprocess(const PipelineConfig& cfg, const fs::path& raw_dir,
                           const fs::path& out_dir) {
  cfg.validate();
  const synth::DatasetManifest raw = synth::read_manifest(raw_dir / synth::kRawManifestName);
  const dsp::RadarConfig& radar = raw.radar;

  RdiManifest out;
  out.preprocess = cfg.preprocess;
  out.config_hash = config_hash(cfg);
  out.seed = cfg.seed;
  for (Split split : {Split::train, Split::val, Split::test}) {
    if (raw.frames_in(split) == 0) continue;
    const io::DatasetReader reader(raw_dir / synth::raw_file_name(split));
    const std::size_t stride = split == Split::train ? cfg.preprocess.train_stride : 1;

    // Sample counts are known before any work, so the writer can be sized.
    std::size_t total = 0;
    for (const auto& rec : raw.scenes) {
      if (rec.split != split) continue;
      const std::size_t n = rec.spec.n_frames;
      if (cfg.preprocess.respd && n < cfg.preprocess.window) {
        throw DataError("scene " + std::to_string(rec.id) + " has " + std::to_string(n) +
                        " frames, RESPD needs at least " + std::to_string(cfg.preprocess.window));
      }
      const std::size_t produced = cfg.preprocess.respd ? n - cfg.preprocess.window + 1 : n;
      total += (produced + stride - 1) / stride;
    }
    io::DatasetWriter writer(out_dir / rdi_file_name(split),
                             {total, radar.n_doppler_bins(), radar.n_range_bins()});
    std::size_t next = 0;
    for (const auto& rec : raw.scenes) {
      if (rec.split != split) continue;
      std::vector<dsp::RangeDopplerImage> rdis;
      rdis.reserve(rec.spec.n_frames);
      dsp::MtiState state;
      for (std::size_t f = 0; f < rec.spec.n_frames; ++f) {
        const auto row = reader.row(rec.first_frame + f);
        dsp::RawFrameCube cube{radar.n_rx, radar.n_chirps, radar.n_samples,
                               std::vector<double>(row.begin(), row.end()), f};
        rdis.push_back(dsp::make_rdi(cube, state, radar));
      }
      const auto images = scene_images(rdis, cfg.preprocess, stride);
      for (const auto& img : images) writer.append(std::span<const double>(img.data));
      out.blocks.push_back({rec.id, rec.spec.scenario, split, next, images.size()});
      next += images.size();
    }
    writer.finish();
  }
  write_rdi_manifest(out, out_dir / kRdiManifestName);
  return out;
}

TrainingLog cmd_train(const PipelineConfig& cfg, const fs::path& rdi_dir, const fs::path& checkpoint,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  const RdiManifest m = read_rdi_manifest(rdi_dir / kRdiManifestName);
  const io::DatasetReader reader(rdi_dir / rdi_file_name(Split::train));

  std::vector<ClassDataset<float>> data;
  for (auto cls : cfg.recipe.id_classes) {
    data.push_back({std::string(synth::to_string(cls)),
                    class_images(m, reader, Split::train, cls, cfg.model.input_size)});
  }
  io::Checkpoint ckpt{MultiDecoderModel<float>(cfg.model, cfg.seed + 1), std::nullopt, "{}"};
  train(ckpt.model, std::span<const ClassDataset<float>>(data), cfg.train, on_epoch);
  ckpt.metadata = checkpoint_metadata(cfg, m).dump();
  io::save_checkpoint(checkpoint, ckpt);
  return ckpt.model.log();
}

Thresholds cmd_calibrate(double tpr, const fs::path& checkpoint, const fs::path& rdi_dir,
                         const fs::path& out_checkpoint) {
  io::Checkpoint ckpt = io::load_checkpoint(checkpoint);
  const RdiManifest m = read_rdi_manifest(rdi_dir / kRdiManifestName);
  if (m.samples_in(Split::val) == 0) throw DataError(rdi_dir.string() + ": no validation samples");
  const io::DatasetReader reader(rdi_dir / rdi_file_name(Split::val));
  std::vector<nn::Tensor<float>> held_out;
  for (const auto& name : ckpt.model.classes()) {
    held_out.push_back(class_images(m, reader, Split::val, synth::scenario_from_string(name),
                                    ckpt.model.config().input_size));
  }
  ckpt.thresholds = calibrate(ckpt.model, std::span<const nn::Tensor<float>>(held_out), tpr);
  io::save_checkpoint(out_checkpoint, ckpt);
  return *ckpt.thresholds;
}

EvalReport evaluate_errors(const std::vector<std::vector<double>>& errors,
                           const std::vector<std::string>& labels,
                           const std::vector<std::string>& classes,
                           const std::optional<Thresholds>& thresholds) {
  if (errors.size() != labels.size()) throw ArgumentError("evaluate: one label per sample");
  EvalReport r;
  std::vector<int> cls_of(labels.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (errors[i].size() != classes.size()) throw ArgumentError("evaluate: one error per class");
    const auto it = std::find(classes.begin(), classes.end(), labels[i]);
    if (it != classes.end()) cls_of[i] = static_cast<int>(it - classes.begin());
    (cls_of[i] < 0 ? r.n_ood : r.n_id)++;
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    metrics::ScoreSet s;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (cls_of[i] == static_cast<int>(c)) s.id_scores.push_back(errors[i][c]);
      if (cls_of[i] < 0) s.ood_scores.push_back(errors[i][c]);
    }
    ClassReport cr;
    cr.name = classes[c];
    cr.n_id = s.id_scores.size();
    cr.metrics = metrics::summarize(s);
    cr.median_id_error = median(s.id_scores);
    cr.median_ood_error = median(s.ood_scores);
    r.classes.push_back(cr);
  }
  if (thresholds) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const Verdict truth = cls_of[i] < 0 ? Verdict::ood : Verdict::id;
      correct += classify(errors[i], *thresholds) == truth ? 1 : 0;
    }
    r.verdict_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  }
  return r;
}

std::string report_to_json(const EvalReport& r) {
  json classes = json::object();
  for (const auto& c : r.classes) {
    classes[c.name] = {{"auroc", 100.0 * c.metrics.auroc},
                       {"aupr", 100.0 * c.metrics.aupr},
                       {"fpr95", 100.0 * c.metrics.fpr95},
                       {"fpr80", 100.0 * c.metrics.fpr80},
                       {"n_id", c.n_id},
                       {"median_id_error", c.median_id_error},
                       {"median_ood_error", c.median_ood_error}};
  }
  json j{{"schema_version", 1},
         {"positive_class", "ood"},
         {"units", "percent"},
         {"respd", r.respd},
         {"counts", {{"id", r.n_id}, {"ood", r.n_ood}}},
         {"classes", classes},
         {"verdict_accuracy",
          r.verdict_accuracy ? json(100.0 * *r.verdict_accuracy) : json(nullptr)},
         {"runtime", {{"frames_per_second", r.frames_per_second}}},
         {"config_hash", hex64(r.config_hash)},
         {"seed", r.seed}};
  return j.dump(2) + "\n";
}

EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& rdi_dir,
                    const std::optional<fs::path>& report_path) {
  const io::Checkpoint ckpt = io::load_checkpoint(checkpoint);
  const RdiManifest m = read_rdi_manifest(rdi_dir / kRdiManifestName);
  if (m.samples_in(Split::test) == 0) throw DataError(rdi_dir.string() + ": no test samples");
  const io::DatasetReader reader(rdi_dir / rdi_file_name(Split::test));

  const auto t0 = Clock::now();
  const auto errors = score_file(ckpt.model, reader);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  std::vector<std::string> labels(reader.rows());
  for (const auto& b : m.blocks) {
    if (b.split != Split::test) continue;
    for (std::size_t i = 0; i < b.n_samples; ++i) {
      labels.at(b.first_sample + i) = std::string(synth::to_string(b.scenario));
    }
  }
  EvalReport r = evaluate_errors(errors, labels, ckpt.model.classes(), ckpt.thresholds);
  r.respd = m.preprocess.respd;
  r.frames_per_second = seconds > 0.0 ? static_cast<double>(errors.size()) / seconds : 0.0;
  const json meta = json::parse(ckpt.metadata);
  if (meta.contains("config_hash")) r.config_hash = parse_hex64(meta["config_hash"].get<std::string>());
  if (meta.contains("seed")) r.seed = meta["seed"].get<std::uint64_t>();
  if (report_path) io::write_text_atomic(*report_path, report_to_json(r));
  return r;
}

DetectSummary cmd_detect(const fs::path& checkpoint, const fs::path& raw_file, std::ostream* out,
                         std::size_t max_frames) {
  const io::Checkpoint ckpt = io::load_checkpoint(checkpoint);
  if (!ckpt.thresholds) throw ArgumentError(checkpoint.string() + ": checkpoint is not calibrated");
  const json meta = json::parse(ckpt.metadata);
  const dsp::RadarConfig radar =
      meta.contains("radar") ? detail::radar_from_json(meta["radar"]) : dsp::RadarConfig{};
  const PreprocessConfig pp =
      meta.contains("preprocess") ? preprocess_from_json(meta["preprocess"]) : PreprocessConfig{};

  const io::DatasetReader reader(raw_file);
  const io::Dims expect{reader.rows(), radar.n_rx, radar.n_chirps, radar.n_samples};
  if (reader.dims() != expect) throw ShapeError(raw_file.string() + ": frame shape does not match the radar config");
  const std::size_t n = max_frames > 0 ? std::min(max_frames, reader.rows()) : reader.rows();
  const auto& classes = ckpt.model.classes();
  const std::size_t side = ckpt.model.config().input_size;

  DetectSummary summary;
  std::vector<double> decided_latency;
  respd::RespdStream stream(pp.respd ? pp.window : 1);
  dsp::MtiState state;
  for (std::size_t f = 0; f < n; ++f) {
    const auto t0 = Clock::now();
    const auto row = reader.row(f);
    dsp::RawFrameCube cube{radar.n_rx, radar.n_chirps, radar.n_samples,
                           std::vector<double>(row.begin(), row.end()), f};
    auto window = stream.push(dsp::make_rdi(cube, state, radar));
    std::optional<std::vector<double>> errors;
    if (window) {
      const auto img = respd::normalize_unit(std::move(*window));
      errors = ckpt.model.reconstruction_errors(
          nn::Tensor<float>({side, side}, std::vector<float>(img.data.begin(), img.data.end())));
    }
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    summary.latency_ms.push_back(ms);
    ++summary.frames;

    json line{{"frame", f}, {"latency_ms", ms}};
    if (errors) {
      const Verdict v = classify(*errors, *ckpt.thresholds);
      ++summary.decided;
      summary.ood += v == Verdict::ood ? 1 : 0;
      decided_latency.push_back(ms);
      json e = json::object();
      for (std::size_t c = 0; c < classes.size(); ++c) e[classes[c]] = (*errors)[c];
      line["verdict"] = to_string(v);
      line["score"] = ood_score(*errors);
      line["errors"] = e;
      if (const auto p = predicted_class(*errors, *ckpt.thresholds)) line["class"] = classes[*p];
    } else {
      line["verdict"] = "warmup";
    }
    if (out) *out << line.dump() << '\n';
  }
  if (!decided_latency.empty()) {
    summary.median_latency_ms = median(decided_latency);
    std::sort(decided_latency.begin(), decided_latency.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(decided_latency.size())));
    summary.p95_latency_ms = decided_latency[std::max<std::size_t>(k, 1) - 1];
  }
  return summary;
}

}  // namespace mcrood::pipeline
