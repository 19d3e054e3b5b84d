#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mcrood/detector.hpp"
#include "mcrood/model.hpp"

namespace mcrood::io {

// Layout: "MCRK", u32 version, u32 record count, then records of
// u32 name length, name, u32 kind, body. Kind 1 is UTF-8 JSON text
// (u32 length + bytes); kind 2 is a float32 tensor (u32 rank, dims, payload).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MultiDecoderModel<float> model;
  std::optional<Thresholds> thresholds;
  /// Free-form JSON object describing how the training data was prepared.
  std::string metadata = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mcrood::io
