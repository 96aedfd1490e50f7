#include "symcanon/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "symcanon/error.hpp"

namespace symcanon {

namespace {

Json float_array(const std::vector<double>& v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(static_cast<double>(static_cast<float>(x)));
  return arr;
}

const Json& field(const Json& j, const char* key, const std::string& path) {
  require(j.is_object(), "checkpoint: " + path + " must be an object");
  auto it = j.find(key);
  require(it != j.end(), "checkpoint: missing field " + path + "." + key);
  return *it;
}

std::size_t read_size(const Json& j, const char* key, const std::string& path) {
  const Json& v = field(j, key, path);
  require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
          "checkpoint: " + path + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> read_floats(const Json& j, const char* key, const std::string& path) {
  const Json& v = field(j, key, path);
  require(v.is_array(), "checkpoint: " + path + "." + key + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i].is_number(), "checkpoint: " + path + "." + key + "[" + std::to_string(i) +
                                  "] is not a number");
    double x = v[i].get<double>();
    require(std::isfinite(x), "checkpoint: " + path + "." + key + "[" + std::to_string(i) +
                                  "] is not finite");
    out.push_back(static_cast<double>(static_cast<float>(x)));
  }
  return out;
}

}  // namespace

Json activation_to_json(const Activation& act) {
  Json a = {{"kind", act.name()}};
  if (act.kind == ActKind::Sine) a["omega"] = act.omega;
  return a;
}

Activation activation_from_json(const Json& j, const std::string& path) {
  const Json& kind = field(j, "kind", path);
  require(kind.is_string(), "checkpoint: " + path + ".kind must be a string");
  double omega = 30.0;
  if (kind.get<std::string>() == "sine") {
    const Json& o = field(j, "omega", path);
    require(o.is_number(), "checkpoint: " + path + ".omega must be a number");
    omega = o.get<double>();
    require(omega > 0.0, "checkpoint: " + path + ".omega must be > 0");
  }
  try {
    return parse_activation(kind.get<std::string>(), omega);
  } catch (const Error& e) {
    throw Error("checkpoint: " + path + ".kind: " + e.what());
  }
}

Json network_to_json(const Network& net, const Json& meta) {
  validate(net);
  Json layers = Json::array();
  for (const auto& L : net.layers) {
    layers.push_back({{"in", L.in}, {"out", L.out}, {"w", float_array(L.weight)},
                      {"b", float_array(L.bias)}});
  }
  Json j = {{"version", kCheckpointVersion},
            {"activation", activation_to_json(net.hidden)},
            {"layers", std::move(layers)}};
  if (!meta.empty()) j["meta"] = meta;
  return j;
}

Network network_from_json(const Json& j) {
  const Json& version = field(j, "version", "$");
  require(version.is_number_integer() && version.get<int>() == kCheckpointVersion,
          "checkpoint: $.version must be " + std::to_string(kCheckpointVersion) + ", got " +
              version.dump());
  Network net;
  net.hidden = activation_from_json(field(j, "activation", "$"), "$.activation");
  const Json& layers = field(j, "layers", "$");
  require(layers.is_array() && !layers.empty(), "checkpoint: $.layers must be a non-empty array");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string path = "$.layers[" + std::to_string(l) + "]";
    DenseLayer L;
    L.in = read_size(layers[l], "in", path);
    L.out = read_size(layers[l], "out", path);
    L.weight = read_floats(layers[l], "w", path);
    L.bias = read_floats(layers[l], "b", path);
    require(L.weight.size() == L.in * L.out,
            "checkpoint: " + path + ".w has " + std::to_string(L.weight.size()) +
                " values, expected in*out = " + std::to_string(L.in * L.out));
    require(L.bias.size() == L.out, "checkpoint: " + path + ".b has " +
                                        std::to_string(L.bias.size()) + " values, expected out = " +
                                        std::to_string(L.out));
    if (l > 0)
      require(L.in == net.layers.back().out,
              "checkpoint: " + path + ".in does not match previous layer's out");
    net.layers.push_back(std::move(L));
  }
  return net;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("malformed JSON in " + path + ": " + e.what());
  }
}

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path);
  out << text;
  require(out.good(), "write failed for " + path);
}

void write_json_file(const Json& j, const std::string& path) {
  write_text_file(j.dump(1) + "\n", path);
}

void save_checkpoint(const Network& net, const std::string& path, const Json& meta) {
  write_json_file(network_to_json(net, meta), path);
}

Network load_checkpoint(const std::string& path) {
  return network_from_json(read_json_file(path));
}

}  // namespace symcanon
