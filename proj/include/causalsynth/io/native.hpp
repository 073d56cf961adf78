// Copyright 2026 The CausalSynth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Native network format: one JSON object
//
//   {"format": "causalsynth-network/1",
//    "variables": [{"name": ..., "states": [...], "parents": [...],
//                   "cpt": [[...], ...]}, ...]}
//
// with CPT rows ordered over parent configurations, last parent fastest.
// print_native output is canonical: sorted keys, two-space indent, one line
// per CPT row and the shortest decimal that reads back to the same double.

#ifndef CAUSALSYNTH_IO_NATIVE_HPP_
#define CAUSALSYNTH_IO_NATIVE_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causalsynth/error.hpp"
#include "causalsynth/scm.hpp"

namespace causalsynth::io {

inline constexpr std::string_view kNativeFormat = "causalsynth-network/1";

namespace native_detail {

using nlohmann::json;

inline const json& field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw JsonSchemaError(path, std::string("missing field '") + key + "'");
  return *it;
}

inline std::vector<std::string> strings(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw JsonSchemaError(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw JsonSchemaError(path + "[" + std::to_string(i) + "]", "expected a string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

// Two-space indented JSON with arrays of scalars kept on one line.
inline void pretty(const json& j, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  auto scalar_array = [](const json& a) {
    for (const auto& x : a) {
      if (x.is_structured()) return false;
    }
    return true;
  };
  if (j.is_object() && !j.empty()) {
    out += "{\n";
    std::size_t i = 0;
    for (const auto& [key, value] : j.items()) {
      out += pad + json(key).dump() + ": ";
      pretty(value, depth + 1, out);
      out += ++i < j.size() ? ",\n" : "\n";
    }
    out += close + "}";
  } else if (j.is_array() && !j.empty() && !scalar_array(j)) {
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      out += pad;
      pretty(j[i], depth + 1, out);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += close + "]";
  } else if (j.is_array()) {
    out += "[";
    for (std::size_t i = 0; i < j.size(); ++i) out += (i ? ", " : "") + j[i].dump();
    out += "]";
  } else {
    out += j.dump();
  }
}

}  // namespace native_detail

inline Scm parse_native(std::string_view text) {
  using native_detail::field;
  using native_detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw JsonSchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw JsonSchemaError("$", "expected an object");
  if (auto f = doc.find("format"); f != doc.end() && *f != kNativeFormat) {
    throw JsonSchemaError("$.format", "unsupported format " + f->dump());
  }
  const json& vars = field(doc, "variables", "$");
  if (!vars.is_array()) throw JsonSchemaError("$.variables", "expected an array");

  std::vector<Variable> out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string path = "$.variables[" + std::to_string(i) + "]";
    const json& v = vars[i];
    if (!v.is_object()) throw JsonSchemaError(path, "expected an object");
    Variable var;
    const json& name = field(v, "name", path);
    if (!name.is_string()) throw JsonSchemaError(path + ".name", "expected a string");
    var.name = name.get<std::string>();
    var.states = native_detail::strings(field(v, "states", path), path + ".states");
    var.parents = v.contains("parents")
                      ? native_detail::strings(v["parents"], path + ".parents")
                      : std::vector<std::string>{};
    const json& cpt = field(v, "cpt", path);
    if (!cpt.is_array()) throw JsonSchemaError(path + ".cpt", "expected an array of rows");
    for (std::size_t r = 0; r < cpt.size(); ++r) {
      const std::string rpath = path + ".cpt[" + std::to_string(r) + "]";
      if (!cpt[r].is_array()) throw JsonSchemaError(rpath, "expected an array of numbers");
      if (cpt[r].size() != var.states.size()) {
        throw JsonSchemaError(rpath, "variable '" + var.name + "' has " +
                                         std::to_string(var.states.size()) + " states but row has " +
                                         std::to_string(cpt[r].size()) + " entries");
      }
      std::vector<double> row;
      for (std::size_t s = 0; s < cpt[r].size(); ++s) {
        if (!cpt[r][s].is_number()) {
          throw JsonSchemaError(rpath + "[" + std::to_string(s) + "]", "expected a number");
        }
        row.push_back(cpt[r][s].get<double>());
      }
      var.cpt.push_back(std::move(row));
    }
    out.push_back(std::move(var));
  }
  // Row counts depend on parent cardinalities; check once all are known.
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t configs = 1;
    for (const auto& p : out[i].parents) {
      const Variable* parent = nullptr;
      for (const auto& cand : out) {
        if (cand.name == p) parent = &cand;
      }
      if (parent == nullptr) {
        throw JsonSchemaError("$.variables[" + std::to_string(i) + "].parents",
                              "variable '" + out[i].name + "' has undeclared parent '" + p + "'");
      }
      configs *= parent->states.size();
    }
    if (out[i].cpt.size() != configs) {
      throw JsonSchemaError("$.variables[" + std::to_string(i) + "].cpt",
                            "variable '" + out[i].name + "' needs " + std::to_string(configs) +
                                " rows, has " + std::to_string(out[i].cpt.size()));
    }
  }
  return Scm(std::move(out));
}

inline std::string print_native(const Scm& scm) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : scm.variables()) {
    vars.push_back({{"name", v.name}, {"states", v.states}, {"parents", v.parents}, {"cpt", v.cpt}});
  }
  const nlohmann::json doc{{"format", kNativeFormat}, {"variables", vars}};
  std::string out;
  native_detail::pretty(doc, 0, out);
  return out + "\n";
}

}  // namespace causalsynth::io

#endif  // CAUSALSYNTH_IO_NATIVE_HPP_
