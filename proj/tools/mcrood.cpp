#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcrood/commands.hpp"
#include "mcrood/error.hpp"

namespace fs = std::filesystem;
using namespace mcrood;

namespace {

int fail(std::string_view kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

void log_json(const nlohmann::json& j) { std::cerr << j.dump() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcrood: radar OOD detection with a multi-decoder autoencoder"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");

  auto* print = app.add_subcommand("config", "Print the effective configuration");

  std::string out_dir;
  auto* gen = app.add_subcommand("gen", "Simulate the synthetic raw dataset");
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string data_dir, respd_flag;
  std::optional<std::size_t> window, train_stride;
  auto* pre = app.add_subcommand("preprocess", "Raw frames to (RESPD) range-doppler images");
  pre->add_option("--data", data_dir, "Raw dataset directory")->required();
  pre->add_option("--out", out_dir, "Output directory")->required();
  pre->add_option("--respd", respd_flag, "on | off")->check(CLI::IsMember({"on", "off"}));
  pre->add_option("--window", window, "RESPD window in frames");
  pre->add_option("--train-stride", train_stride, "Keep every k-th training sample");

  std::string checkpoint;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
  auto* trn = app.add_subcommand("train", "Train encoder and decoders");
  trn->add_option("--data", data_dir, "RDI dataset directory")->required();
  trn->add_option("--checkpoint", checkpoint, "Checkpoint to write")->required();
  trn->add_option("--epochs", epochs);
  trn->add_option("--batch-size", batch);
  trn->add_option("--lr", lr);

  std::optional<double> tpr;
  std::optional<std::string> out_path;
  auto* cal = app.add_subcommand("calibrate", "Fit per-class thresholds on the validation split");
  cal->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  cal->add_option("--data", data_dir, "RDI dataset directory")->required();
  cal->add_option("--tpr", tpr, "Target ID true-positive rate");
  cal->add_option("--out", out_path, "Output checkpoint (default: overwrite)");

  auto* evl = app.add_subcommand("eval", "Per-class AUROC/AUPR/FPR95/FPR80 on the test split");
  evl->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evl->add_option("--data", data_dir, "RDI dataset directory")->required();
  evl->add_option("--report", out_path, "Also write the report here");

  std::string input;
  std::size_t max_frames = 0;
  auto* det = app.add_subcommand("detect", "Per-frame verdicts for a raw frame file");
  det->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  det->add_option("--input", input, "Raw frame dataset file")->required()->check(CLI::ExistingFile);
  det->add_option("--out", out_path, "JSONL output (default: stdout)");
  det->add_option("--max-frames", max_frames);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), e.get_exit_code() == 0 ? 2 : e.get_exit_code());
  }

  try {
    pipeline::PipelineConfig cfg;
    if (config_path) cfg = pipeline::load_config(*config_path);
    // Overrides go through the JSON form so derived fields stay consistent.
    auto j = nlohmann::json::parse(pipeline::config_to_json_text(cfg));
    if (seed) j["seed"] = *seed;
    if (!respd_flag.empty()) j["preprocess"]["respd"] = respd_flag == "on";
    if (window) j["preprocess"]["window"] = *window;
    if (train_stride) j["preprocess"]["train_stride"] = *train_stride;
    if (epochs) j["train"]["epochs"] = *epochs;
    if (batch) j["train"]["batch_size"] = *batch;
    if (lr) j["train"]["learning_rate"] = *lr;
    if (tpr) j["calibrate"]["tpr"] = *tpr;
    cfg = pipeline::config_from_json_text(j.dump());

    if (*print) {
      std::cout << pipeline::config_to_json_text(cfg);
    } else if (*gen) {
      const auto m = pipeline::cmd_gen(cfg, out_dir);
      log_json({{"event", "gen"},
                {"scenes", m.scenes.size()},
                {"frames",
                 {{"train", m.frames_in(synth::Split::train)},
                  {"val", m.frames_in(synth::Split::val)},
                  {"test", m.frames_in(synth::Split::test)}}}});
    } else if (*pre) {
      const auto m = pipeline::cmd_preprocess(cfg, data_dir, out_dir);
      log_json({{"event", "preprocess"},
                {"respd", cfg.preprocess.respd},
                {"samples",
                 {{"train", m.samples_in(synth::Split::train)},
                  {"val", m.samples_in(synth::Split::val)},
                  {"test", m.samples_in(synth::Split::test)}}}});
    } else if (*trn) {
      pipeline::cmd_train(cfg, data_dir, checkpoint, [](std::size_t epoch, double loss) {
        log_json({{"event", "epoch"}, {"epoch", epoch}, {"loss", loss}});
      });
    } else if (*cal) {
      const auto t = pipeline::cmd_calibrate(cfg.tpr, checkpoint, data_dir,
                                             out_path ? fs::path(*out_path) : fs::path(checkpoint));
      nlohmann::json values = nlohmann::json::object();
      for (std::size_t c = 0; c < t.classes.size(); ++c) values[t.classes[c]] = t.values[c];
      log_json({{"event", "calibrate"}, {"tpr", t.target_tpr}, {"thresholds", values}});
    } else if (*evl) {
      const auto r = pipeline::cmd_eval(checkpoint, data_dir,
                                        out_path ? std::optional<fs::path>(*out_path) : std::nullopt);
      std::cout << pipeline::report_to_json(r);
    } else if (*det) {
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (out_path) {
        file.open(*out_path);
        if (!file) throw IoError(*out_path, "cannot open for writing");
        out = &file;
      }
      const auto s = pipeline::cmd_detect(checkpoint, input, out, max_frames);
      log_json({{"event", "detect"},
                {"frames", s.frames},
                {"decided", s.decided},
                {"ood", s.ood},
                {"median_latency_ms", s.median_latency_ms},
                {"p95_latency_ms", s.p95_latency_ms}});
    }
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
