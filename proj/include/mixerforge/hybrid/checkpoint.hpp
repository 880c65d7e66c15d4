#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixerforge/hybrid/model.hpp"

// File layout:
//   line 1       JSON header (single line), includes "dtype" and "tensors"
//   per tensor   "<name> <dtype> <rank> <dim>...\n" then numel raw
//                little-endian elements

namespace mixerforge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr const char* kCheckpointFormat = "mixerforge-checkpoint";
inline constexpr int kCheckpointVersion = 1;

template <std::floating_point T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <std::floating_point T>
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  NamedTensors<Tensor<T>> tensors;
};

template <std::floating_point T>
void write_checkpoint(std::ostream& out, const Checkpoint<T>& ckpt) {
  nlohmann::json header = ckpt.header;
  header["format"] = kCheckpointFormat;
  header["version"] = kCheckpointVersion;
  header["dtype"] = dtype_name<T>();
  header["tensors"] = ckpt.tensors.size();
  out << header.dump() << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.find_first_of(" \n") != std::string::npos) throw ConfigError("tensor name '" + name + "' has whitespace");
    out << name << ' ' << dtype_name<T>() << ' ' << t.rank();
    for (auto dim : t.shape()) out << ' ' << dim;
    out << '\n';
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
  }
  if (!out) throw Error("checkpoint write failed");
}

/// Writes to a sibling temporary file and renames it into place.
template <std::floating_point T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

template <std::floating_point T>
Checkpoint<T> read_checkpoint(std::istream& in) {
  Checkpoint<T> ckpt;
  std::string line;
  if (!std::getline(in, line)) throw InputError("checkpoint: missing header");
  try {
    ckpt.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (ckpt.header.value("format", "") != kCheckpointFormat) throw InputError("checkpoint: not a mixerforge checkpoint");
  if (ckpt.header.value("version", 0) != kCheckpointVersion) throw InputError("checkpoint: unsupported version");
  if (ckpt.header.value("dtype", "") != dtype_name<T>())
    throw InputError("checkpoint: stored dtype " + ckpt.header.value("dtype", std::string("?")) + ", expected " +
                     dtype_name<T>());
  const auto count = ckpt.header.at("tensors").template get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw InputError("checkpoint: truncated at tensor " + std::to_string(i));
    std::istringstream rec(line);
    std::string name, dtype;
    std::size_t rank = 0;
    rec >> name >> dtype >> rank;
    if (!rec || dtype != dtype_name<T>() || rank < 1 || rank > 2) throw InputError("checkpoint: bad record '" + line + "'");
    Shape shape(rank);
    for (auto& dim : shape) rec >> dim;
    if (!rec) throw InputError("checkpoint: bad shape in '" + line + "'");
    Tensor<T> t{Shape(shape)};
    in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
    if (!in) throw InputError("checkpoint: truncated data for '" + name + "'");
    if (!t.all_finite()) throw NumericError("checkpoint: non-finite values in '" + name + "'");
    if (!ckpt.tensors.emplace(name, std::move(t)).second) throw InputError("checkpoint: duplicate tensor '" + name + "'");
  }
  return ckpt;
}

template <std::floating_point T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  return read_checkpoint<T>(in);
}

/// Model-only checkpoint: config in the header, parameters as tensors.
template <std::floating_point T>
Checkpoint<T> model_checkpoint(const HybridModel<T>& model) {
  Checkpoint<T> ckpt;
  ckpt.header["model"] = model.config();
  ckpt.header["schedule"] = schedule_string(model.schedule());
  ckpt.tensors = model.params();
  return ckpt;
}

/// Rebuilds a model from a checkpoint, ignoring tensors outside the model
/// (optimizer moments, for instance).
template <std::floating_point T>
HybridModel<T> model_from_checkpoint(const Checkpoint<T>& ckpt) {
  if (!ckpt.header.contains("model")) throw InputError("checkpoint has no model config");
  HybridConfig config;
  from_json(ckpt.header.at("model"), config);
  typename HybridModel<T>::Params params;
  for (const auto& spec : model_param_specs(config)) {
    auto it = ckpt.tensors.find(spec.name);
    if (it == ckpt.tensors.end()) throw InputError("checkpoint is missing '" + spec.name + "'");
    params.emplace(spec.name, it->second);
  }
  return HybridModel<T>(config, std::move(params));
}

}  // namespace mixerforge
