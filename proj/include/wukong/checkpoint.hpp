#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "WUKONGCK"
//   offset 8   u32       format version (1)
//   offset 12  u64       manifest length M in bytes
//   offset 20  M bytes   UTF-8 JSON manifest
//   offset 20+M          tensor payloads, back to back
//
// The manifest holds {"version", "dtype", "digest", "config", "tensors"}.
// Each tensor entry is {"name", "shape", "sparse", "offset", "nbytes"} with
// offset relative to the first payload byte. Payloads are row-major IEEE-754
// values of the manifest dtype ("f32" or "f64"), little-endian. Optimizer
// state is not stored.

#include <cstdint>
#include <filesystem>
#include <string>

#include "wukong/model.hpp"

namespace wukong {

inline constexpr char kCheckpointMagic[9] = "WUKONGCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const ModelParams<T>& model, const std::filesystem::path& path);

// Values are converted when the stored dtype differs from T. Throws
// DataError on a corrupt file and ConfigError if the tensors do not match
// the stored config.
template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path);

struct CheckpointInfo {
  std::string dtype;
  std::string digest;
  WukongConfig config;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace wukong
