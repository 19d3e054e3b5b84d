#include "mcrood/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "mcrood/error.hpp"
#include "mcrood/io/container.hpp"

namespace mcrood::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'C', 'R', 'K'};
constexpr std::uint32_t kJsonRecord = 1;
constexpr std::uint32_t kTensorRecord = 2;

struct Record {
  std::uint32_t kind = 0;
  std::string text;
  nn::Tensor<float> tensor;
};

void put_name(std::ostream& out, std::string_view name, std::uint32_t kind) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  put_bytes(out, name);
  put_u32(out, kind);
}

void put_json(std::ostream& out, std::string_view name, const json& j) {
  put_name(out, name, kJsonRecord);
  const std::string text = j.dump();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_bytes(out, text);
}

void put_tensor(std::ostream& out, std::string_view name, const nn::Tensor<float>& t) {
  put_name(out, name, kTensorRecord);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.ptr()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

json config_to_json(const ModelConfig& c) {
  return {{"input_size", c.input_size}, {"filters", c.filters}, {"latent_dim", c.latent_dim},
          {"kernel", c.kernel},         {"classes", c.classes}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_size = j.at("input_size").get<std::size_t>();
  c.filters = j.at("filters").get<std::vector<std::size_t>>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.classes = j.at("classes").get<std::vector<std::string>>();
  return c;
}

json thresholds_to_json(const Thresholds& t) {
  return {{"classes", t.classes},
          {"values", t.values},
          {"target_tpr", t.target_tpr},
          {"calibration_sizes", t.calibration_sizes}};
}

Thresholds thresholds_from_json(const json& j) {
  Thresholds t;
  t.classes = j.at("classes").get<std::vector<std::string>>();
  t.values = j.at("values").get<std::vector<double>>();
  t.target_tpr = j.at("target_tpr").get<double>();
  t.calibration_sizes = j.at("calibration_sizes").get<std::vector<std::size_t>>();
  t.validate();
  return t;
}

json log_to_json(const TrainingLog& log) {
  json j{{"epochs_completed", log.epochs_completed}, {"epoch_loss", log.epoch_loss}};
  j["initial_loss"] = std::isnan(log.initial_loss) ? json(nullptr) : json(log.initial_loss);
  return j;
}

TrainingLog log_from_json(const json& j) {
  TrainingLog log;
  log.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  log.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  if (!j.at("initial_loss").is_null()) log.initial_loss = j.at("initial_loss").get<double>();
  return log;
}

void restore(const std::map<std::string, Record>& records, const std::string& key,
             nn::Tensor<float>& target, const fs::path& path) {
  const auto it = records.find(key);
  if (it == records.end() || it->second.kind != kTensorRecord) {
    throw IoError(path.string(), "missing tensor record '" + key + "'");
  }
  if (it->second.tensor.shape() != target.shape()) {
    throw IoError(path.string(), "record '" + key + "' has shape " +
                                     nn::shape_string(it->second.tensor.shape()) + ", expected " +
                                     nn::shape_string(target.shape()));
  }
  target = it->second.tensor;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  MultiDecoderModel<float> model = ckpt.model;
  const auto params = model.params();
  const auto buffers = model.buffers();

  AtomicFile file(path);
  auto& out = file.stream();
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::size_t n = 3 + (ckpt.thresholds ? 1 : 0) + params.size() + buffers.size();
  put_u32(out, static_cast<std::uint32_t>(n));
  put_json(out, "config", config_to_json(model.config()));
  put_json(out, "metadata", json::parse(ckpt.metadata));
  put_json(out, "training_log", log_to_json(model.log()));
  if (ckpt.thresholds) put_json(out, "thresholds", thresholds_to_json(*ckpt.thresholds));
  for (const auto& p : params) put_tensor(out, "param:" + p.name, *p.value);
  for (const auto& b : buffers) put_tensor(out, "buffer:" + b.name, *b.value);
  file.commit();
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  const std::string magic = get_bytes(in, 4, path);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw IoError(path.string(), "bad magic, not a checkpoint");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion) {
    throw IoError(path.string(), "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in, path);
  std::map<std::string, Record> records;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string name = get_bytes(in, get_u32(in, path), path);
    Record rec;
    rec.kind = get_u32(in, path);
    if (rec.kind == kJsonRecord) {
      rec.text = get_bytes(in, get_u32(in, path), path);
    } else if (rec.kind == kTensorRecord) {
      const std::uint32_t rank = get_u32(in, path);
      if (rank > 8) throw IoError(path.string(), "record '" + name + "' has invalid rank");
      nn::Shape shape;
      for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get_u32(in, path));
      rec.tensor = nn::Tensor<float>(shape);
      in.read(reinterpret_cast<char*>(rec.tensor.ptr()),
              static_cast<std::streamsize>(rec.tensor.size() * sizeof(float)));
      if (static_cast<std::size_t>(in.gcount()) != rec.tensor.size() * sizeof(float)) {
        throw IoError(path.string(), "truncated record '" + name + "'");
      }
    } else {
      throw IoError(path.string(), "record '" + name + "' has unknown kind");
    }
    records.emplace(name, std::move(rec));
  }

  auto text_of = [&](const std::string& key) -> const std::string* {
    const auto it = records.find(key);
    return it == records.end() || it->second.kind != kJsonRecord ? nullptr : &it->second.text;
  };
  try {
    const std::string* cfg = text_of("config");
    if (!cfg) throw IoError(path.string(), "missing config record");
    Checkpoint ckpt{MultiDecoderModel<float>(config_from_json(json::parse(*cfg)), 0), std::nullopt,
                    "{}"};
    if (const auto* meta = text_of("metadata")) ckpt.metadata = *meta;
    if (const auto* log = text_of("training_log")) ckpt.model.log() = log_from_json(json::parse(*log));
    if (const auto* t = text_of("thresholds")) ckpt.thresholds = thresholds_from_json(json::parse(*t));
    for (const auto& p : ckpt.model.params()) restore(records, "param:" + p.name, *p.value, path);
    for (const auto& b : ckpt.model.buffers()) restore(records, "buffer:" + b.name, *b.value, path);
    return ckpt;
  } catch (const json::exception& e) {
    throw IoError(path.string(), std::string("malformed JSON record: ") + e.what());
  }
}

}  // namespace mcrood::io
