#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "calving/nn/train.hpp"

namespace calving::nn {

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json layer_to_json(const Layer& ly) {
  nlohmann::json j;
  if (const auto* d = std::get_if<Dense>(&ly)) {
    j["type"] = "dense";
    j["in"] = d->in;
    j["out"] = d->out;
  } else if (const auto* c = std::get_if<Conv1d>(&ly)) {
    j["type"] = "conv1d";
    j["in_channels"] = c->in_channels;
    j["out_channels"] = c->out_channels;
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
  } else if (std::holds_alternative<GlobalAvgPool>(ly)) {
    j["type"] = "gap";
  } else if (std::holds_alternative<Relu>(ly)) {
    j["type"] = "relu";
  } else {
    j["type"] = "softmax";
  }
  return j;
}

inline Layer layer_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "dense") return Dense{j.at("in").get<int>(), j.at("out").get<int>()};
  if (type == "conv1d")
    return Conv1d{j.at("in_channels").get<int>(), j.at("out_channels").get<int>(),
                  j.at("kernel").get<int>(), j.at("stride").get<int>()};
  if (type == "gap") return GlobalAvgPool{};
  if (type == "relu") return Relu{};
  if (type == "softmax") return Softmax{};
  throw IoError("unknown layer type '" + type + "'");
}

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["input"] = {{"channels", net.spec.input.channels}, {"length", net.spec.input.length}};
  j["hlo_tap"] = net.spec.hlo_tap;
  nlohmann::json layers = nlohmann::json::array();
  nlohmann::json params = nlohmann::json::array();
  for (size_t i = 0; i < net.spec.layers.size(); ++i) {
    layers.push_back(layer_to_json(net.spec.layers[i]));
    params.push_back({{"w", net.params[i].w}, {"b", net.params[i].b}});
  }
  j["layers"] = std::move(layers);
  j["params"] = std::move(params);
  j["fingerprint"] = net.fingerprint();
  return j;
}

inline Network network_from_json(const nlohmann::json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kModelSchemaVersion)
    throw IoError("model schema version " + std::to_string(version) + " not supported (expected " +
                  std::to_string(kModelSchemaVersion) + ")");
  NetworkSpec spec;
  spec.input = {j.at("input").at("channels").get<int>(), j.at("input").at("length").get<int>()};
  spec.hlo_tap = j.at("hlo_tap").get<int>();
  for (const auto& lj : j.at("layers")) spec.layers.push_back(layer_from_json(lj));
  Network net = Network::zeros(std::move(spec));
  const auto& params = j.at("params");
  if (params.size() != net.params.size()) throw IoError("model parameter block count mismatch");
  for (size_t i = 0; i < net.params.size(); ++i) {
    auto w = params[i].at("w").get<std::vector<double>>();
    auto b = params[i].at("b").get<std::vector<double>>();
    if (w.size() != net.params[i].w.size() || b.size() != net.params[i].b.size())
      throw IoError("model parameter shape mismatch at layer " + std::to_string(i));
    net.params[i].w = std::move(w);
    net.params[i].b = std::move(b);
  }
  for (const auto& p : net.params)
    for (double v : p.w)
      if (!std::isfinite(v)) throw IoError("model contains non-finite parameters");
  return net;
}

// extra: caller-defined metadata stored alongside the network (e.g. the
// training fingerprint used by resume logic). Keys must not collide with the
// network fields.
inline void save_network(const Network& net, const std::string& path,
                         const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j = network_to_json(net);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Network load_network(const std::string& path, nlohmann::json* full = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model file '" + path + "': " + e.what());
  }
  if (full) *full = j;
  return network_from_json(j);
}

inline nlohmann::json history_to_json(const TrainHistory& h) {
  nlohmann::json j;
  j["stop_reason"] = h.stop_reason;
  j["best_epoch"] = h.best_epoch;
  j["best_val_loss"] = h.best_val_loss;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"lr", e.lr},
                      {"lr_decayed", e.lr_decayed}});
  j["epochs"] = std::move(epochs);
  return j;
}

}  // namespace calving::nn
