#pragma once

#include <string>

#include <json.hpp>

#include "symcanon/network.hpp"

namespace symcanon {

using Json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

// {"version":1,"activation":{"kind":"sine","omega":30.0},
//  "layers":[{"in":2,"out":32,"w":[...],"b":[...]}], "meta":{...}}
// Parameters are stored as 32-bit floats. "meta" is optional and ignored on load.
Json network_to_json(const Network& net, const Json& meta = Json::object());
Network network_from_json(const Json& j);

Json activation_to_json(const Activation& act);
Activation activation_from_json(const Json& j, const std::string& path);

void save_checkpoint(const Network& net, const std::string& path, const Json& meta = Json::object());
Network load_checkpoint(const std::string& path);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);
void write_text_file(const std::string& text, const std::string& path);

}  // namespace symcanon
