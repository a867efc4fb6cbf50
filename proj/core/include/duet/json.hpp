#pragma once

// Single include point for nlohmann::json (vendored). nlohmann's default
// json type keeps object keys in sorted order, which is exactly the
// canonical form required for byte-reproducible state serialization.
#include <json.hpp>

#include <string>

#include "duet/errors.hpp"

namespace duet {

using json = nlohmann::json;

// Canonical serialization: sorted keys (nlohmann default map), no
// whitespace. Two semantically equal states always produce equal bytes.
inline std::string canonical(const json& j) { return j.dump(); }

// Fetch a required field, with error messages that name the offender.
template <typename E = BadTask>
const json& require_field(const json& j, const std::string& key,
                          const std::string& where) {
  auto it = j.find(key);
  if (!j.is_object() || it == j.end()) {
    throw E(where + ": missing required field '" + key + "'");
  }
  return *it;
}

template <typename E = BadTask>
std::string require_string(const json& j, const std::string& key,
                           const std::string& where) {
  const json& v = require_field<E>(j, key, where);
  if (!v.is_string()) throw E(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace duet
