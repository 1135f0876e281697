#pragma once

// Parameter checkpoints as JSON:
//   {"format": "fleetgnn-checkpoint", "version": 1,
//    "config": {"kind", "layers", "hidden_dim", "heads", "input_dim", "leaky_slope"},
//    "meta": {...free-form, e.g. epochs_completed, policy...},
//    "tensors": [{"name", "shape": [r, c], "values": [...]}]}
// Tensors appear in ParamStore order; loading checks them against the layout
// implied by the config.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "fleetgnn/gnn.hpp"

namespace fleetgnn {

inline constexpr const char* kCheckpointFormat = "fleetgnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore params;
  nlohmann::json meta = nlohmann::json::object();
};

inline nlohmann::json config_to_json(const GnnConfig& c) {
  return {{"kind", to_string(c.kind)},   {"layers", c.layers},       {"hidden_dim", c.hidden_dim},
          {"heads", c.heads},            {"input_dim", c.input_dim}, {"leaky_slope", c.leaky_slope}};
}

inline GnnConfig config_from_json(const nlohmann::json& j) {
  GnnConfig c;
  c.kind = parse_gnn_kind(j.at("kind").get<std::string>());
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.check();
  return c;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    const Tensor& t = ck.params.tensors[i];
    tensors.push_back({{"name", ck.params.names[i]}, {"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", config_to_json(ck.params.config)},
          {"meta", ck.meta},
          {"tensors", tensors}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw std::runtime_error("not a fleetgnn checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  }
  Checkpoint ck;
  ck.params = zero_params(config_from_json(j.at("config")));
  ck.meta = j.value("meta", nlohmann::json::object());
  const auto& tensors = j.at("tensors");
  if (tensors.size() != ck.params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(tensors.size()) + " tensors, config needs " +
                             std::to_string(ck.params.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    Tensor& dst = ck.params.tensors[i];
    if (t.at("name").get<std::string>() != ck.params.names[i] ||
        t.at("shape").get<std::vector<std::size_t>>() != dst.shape()) {
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " does not match " + ck.params.names[i] +
                               " " + ad::shape_string(dst));
    }
    const auto values = t.at("values").get<std::vector<double>>();
    if (values.size() != dst.size()) throw std::runtime_error("checkpoint tensor " + ck.params.names[i] + " is truncated");
    dst.storage() = values;
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace fleetgnn
