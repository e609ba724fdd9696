#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "diprl/nn/mlp.hpp"

namespace diprl::nn {

inline constexpr int kCheckpointVersion = 1;

// {"format":"diprl-mlp","version":1,"activations":[...],
//  "layers":[{"in":I,"out":O,"weight":[row-major O*I],"bias":[O]}]}
// Doubles are written in shortest round-trip form, so load(save(p)) == p bitwise.
inline nlohmann::json to_json(const MlpParams& p) {
  nlohmann::json j;
  j["format"] = "diprl-mlp";
  j["version"] = kCheckpointVersion;
  auto acts = nlohmann::json::array();
  for (auto a : p.activations) acts.push_back(to_string(a));
  j["activations"] = acts;
  auto layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"weight", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  j["layers"] = layers;
  return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "diprl-mlp") throw ConfigError("checkpoint: not an mlp record");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("checkpoint: unsupported version " + j.at("version").dump());
    MlpParams p;
    for (const auto& a : j.at("activations")) p.activations.push_back(activation_from_string(a.get<std::string>()));
    for (const auto& lj : j.at("layers")) {
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto w = lj.at("weight").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
        throw ShapeError("checkpoint: layer value count does not match its shape");
      DenseLayer l{Matrix(out, in), Vector(out)};
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
      for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
      p.layers.push_back(std::move(l));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void save_mlp(const std::string& path, const MlpParams& p) { write_json_file(path, to_json(p)); }
inline MlpParams load_mlp(const std::string& path) { return mlp_from_json(read_json_file(path)); }

/// Bitwise equality of two parameter sets (NaN payloads included).
inline bool bit_identical(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size() || a.activations != b.activations) return false;
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (!same(a.layers[i].weight, b.layers[i].weight) || !same(a.layers[i].bias, b.layers[i].bias))
      return false;
  return true;
}

}  // namespace diprl::nn
