#include "wukong/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace wukong {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::string& out, U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  out.append(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(const char* p) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  U v;
  std::memcpy(&v, b, sizeof(U));
  return v;
}

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

struct RawCheckpoint {
  json manifest;
  std::string payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto bad = [&](const std::string& why) { return DataError("checkpoint '" + path.string() + "': " + why); };
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw bad("bad magic");
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) throw bad("unsupported version " + std::to_string(version));
  const auto mlen = get_le<std::uint64_t>(bytes.data() + 12);
  if (mlen > bytes.size() - 20) throw bad("manifest length exceeds file size");
  RawCheckpoint raw;
  try {
    raw.manifest = json::parse(bytes.substr(20, mlen));
  } catch (const json::exception& e) {
    throw bad(std::string("manifest is not valid JSON: ") + e.what());
  }
  raw.payload = bytes.substr(20 + mlen);
  return raw;
}

}  // namespace

template <typename T>
void save_checkpoint(const ModelParams<T>& model, const std::filesystem::path& path) {
  json tensors = json::array();
  std::string payload;
  for (const auto& e : model.store.entries()) {
    const std::size_t offset = payload.size();
    for (T v : e.value.values()) put_le(payload, v);
    tensors.push_back(json{{"name", e.name},
                           {"shape", e.value.shape()},
                           {"sparse", e.sparse},
                           {"offset", offset},
                           {"nbytes", payload.size() - offset}});
  }
  const json manifest{{"version", kCheckpointVersion},
                      {"dtype", dtype_name<T>()},
                      {"digest", config_digest(model.config)},
                      {"config", config_to_json(model.config)},
                      {"tensors", tensors}};
  const std::string m = manifest.dump();
  std::string out(kCheckpointMagic, 8);
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint64_t>(m.size()));
  out += m;
  out += payload;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ConfigError("write failed for checkpoint '" + path.string() + "'");
}

namespace {

CheckpointInfo info_from_raw(const RawCheckpoint& raw, const std::filesystem::path& path) {
  CheckpointInfo info;
  try {
    info.dtype = raw.manifest.at("dtype").get<std::string>();
    info.digest = raw.manifest.at("digest").get<std::string>();
    info.config = config_from_json(raw.manifest.at("config"));
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "': " + e.what());
  }
  if (config_digest(info.config) != info.digest) {
    throw DataError("checkpoint '" + path.string() + "': config digest mismatch");
  }
  return info;
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) { return info_from_raw(read_raw(path), path); }

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  const RawCheckpoint raw = read_raw(path);
  const CheckpointInfo info = info_from_raw(raw, path);
  if (info.dtype != "f32" && info.dtype != "f64") {
    throw DataError("checkpoint '" + path.string() + "': unknown dtype '" + info.dtype + "'");
  }
  const std::size_t width = info.dtype == "f32" ? 4 : 8;
  ModelParams<T> m;
  m.config = info.config;
  try {
    for (const json& t : raw.manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto nbytes = t.at("nbytes").get<std::uint64_t>();
      const std::size_t n = shape_numel(shape);
      if (nbytes != n * width || offset > raw.payload.size() || nbytes > raw.payload.size() - offset) {
        throw DataError("checkpoint '" + path.string() + "': tensor '" + name + "' overruns the payload");
      }
      std::vector<T> values(n);
      const char* p = raw.payload.data() + offset;
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = width == 4 ? static_cast<T>(get_le<float>(p + 4 * i)) : static_cast<T>(get_le<double>(p + 8 * i));
      }
      m.store.add(name, Tensor<T>(shape, std::move(values)), t.at("sparse").get<bool>());
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "': " + e.what());
  }
  check_layout(m);
  return m;
}

template void save_checkpoint<float>(const ModelParams<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const ModelParams<double>&, const std::filesystem::path&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace wukong
