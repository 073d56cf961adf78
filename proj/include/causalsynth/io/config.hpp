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

// Run configuration: a JSON object such as
//
//   {"network": "../networks/asia.bif", "m": 10000, "k_max": 10, "seed": 7,
//    "realizer": {"type": "backdoor", "prior": "marginal_mode",
//                 "base_compliance": 0.6, "feedback_gain": 0.2,
//                 "compliance_cap": 0.99},
//    "output": {"dataset": "out/records.jsonl"}}
//
// Relative paths resolve against the config file's directory. Unknown keys
// are errors. Secrets never live here: the HTTP realizer reads its key from
// CAUSALSYNTH_API_KEY.

#ifndef CAUSALSYNTH_IO_CONFIG_HPP_
#define CAUSALSYNTH_IO_CONFIG_HPP_

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "causalsynth/channel.hpp"
#include "causalsynth/error.hpp"
#include "causalsynth/http_realizer.hpp"
#include "causalsynth/io/bif.hpp"
#include "causalsynth/io/native.hpp"
#include "causalsynth/scm.hpp"
#include "causalsynth/stats.hpp"

namespace causalsynth::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Loads a network by extension: .bif, or .json for the native format.
inline Scm load_network(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto ext = path.extension().string();
  if (ext == ".bif") return parse_bif(text);
  if (ext == ".json") return parse_native(text);
  throw ConfigError("unknown network format '" + ext + "' (expected .bif or .json)");
}

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

enum class RealizerKind { kTemplate, kBackdoor, kHttp };

struct RealizerConfig {
  RealizerKind kind = RealizerKind::kTemplate;
  BackdoorChannelConfig backdoor;
  // Use each variable's most probable marginal state as the prior.
  bool prior_from_mode = false;
  // When set, base_compliance is calibrated so the pooled first-attempt
  // acceptance rate equals this value.
  std::optional<double> target_phi1;
};

struct OutputPaths {
  std::filesystem::path dataset;   // accepted records
  std::filesystem::path coverage;  // skeletons that exhausted the budget
  std::filesystem::path attempts;  // full attempt log
};

struct RunConfig {
  std::filesystem::path network;
  RealizerConfig realizer;
  // Realizer used for the atypical stratum instead of `realizer`.
  std::optional<RealizerConfig> atypical_realizer;
  std::size_t m = 1000;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::size_t max_cond_size = 2;
  double typicality_quantile = kDefaultTypicalityQuantile;
  std::size_t threads = 1;
  double extractor_noise = 0.0;
  std::filesystem::path prompts;  // empty: built-in templates
  OutputPaths output;
  std::optional<HttpEndpointConfig> endpoint;

  void validate() const {
    if (network.empty()) throw ConfigError("$.network: required");
    if (k_max < 1) throw ConfigError("$.k_max: must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("$.alpha: must lie in (0, 1)");
    if (!(typicality_quantile > 0.0 && typicality_quantile < 1.0)) {
      throw ConfigError("$.typicality_quantile: must lie in (0, 1)");
    }
    if (threads < 1) throw ConfigError("$.threads: must be at least 1");
    if (!(extractor_noise >= 0.0 && extractor_noise <= 1.0)) {
      throw ConfigError("$.extractor_noise: must lie in [0, 1]");
    }
    auto check = [&](const RealizerConfig& r, const std::string& path) {
      if (r.kind == RealizerKind::kBackdoor) {
        try {
          r.backdoor.validate();
        } catch (const ConfigError& e) {
          throw ConfigError(path + ": " + e.what());
        }
        if (r.target_phi1 && !(*r.target_phi1 > 0.0 && *r.target_phi1 <= 1.0)) {
          throw ConfigError(path + ".target_phi1: must lie in (0, 1]");
        }
      }
      if (r.kind == RealizerKind::kHttp && !endpoint) {
        throw ConfigError(path + ": the http realizer needs an 'endpoint' section");
      }
    };
    check(realizer, "$.realizer");
    if (atypical_realizer) check(*atypical_realizer, "$.strata.atypical");
    if (endpoint) {
      try {
        endpoint->validate();
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("$.endpoint: ") + e.what());
      }
    }
  }
};

namespace config_detail {

using nlohmann::json;

inline void only_keys(const json& obj, const std::string& path,
                      std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok |= key == a;
    if (!ok) throw ConfigError(path + "." + key + ": unknown key");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("");
    }
    return it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline RealizerConfig parse_realizer(const json& j, const std::string& path) {
  only_keys(j, path, {"type", "prior", "base_compliance", "feedback_gain", "compliance_cap",
                      "target_phi1"});
  RealizerConfig r;
  const std::string type = get<std::string>(j, "type", path, "template");
  if (type == "template") {
    r.kind = RealizerKind::kTemplate;
  } else if (type == "backdoor") {
    r.kind = RealizerKind::kBackdoor;
  } else if (type == "http") {
    r.kind = RealizerKind::kHttp;
  } else {
    throw ConfigError(path + ".type: unknown realizer '" + type + "'");
  }
  auto& b = r.backdoor;
  b.base_compliance = get<double>(j, "base_compliance", path, b.base_compliance);
  b.feedback_gain = get<double>(j, "feedback_gain", path, b.feedback_gain);
  b.compliance_cap = get<double>(j, "compliance_cap", path, b.compliance_cap);
  if (j.contains("target_phi1")) r.target_phi1 = get<double>(j, "target_phi1", path, 0.0);
  if (auto p = j.find("prior"); p != j.end()) {
    if (p->is_string() && *p == "marginal_mode") {
      r.prior_from_mode = true;
    } else if (p->is_object()) {
      for (const auto& [name, state] : p->items()) {
        if (!state.is_string()) throw ConfigError(path + ".prior." + name + ": expected a string");
        b.prior.emplace(name, state.get<std::string>());
      }
    } else {
      throw ConfigError(path + ".prior: expected an object or \"marginal_mode\"");
    }
  } else if (r.kind == RealizerKind::kBackdoor) {
    r.prior_from_mode = true;
  }
  return r;
}

inline json realizer_json(const RealizerConfig& r) {
  switch (r.kind) {
    case RealizerKind::kTemplate: return {{"type", "template"}};
    case RealizerKind::kHttp: return {{"type", "http"}};
    case RealizerKind::kBackdoor: break;
  }
  json j{{"type", "backdoor"},
         {"base_compliance", r.backdoor.base_compliance},
         {"feedback_gain", r.backdoor.feedback_gain},
         {"compliance_cap", r.backdoor.compliance_cap}};
  if (r.prior_from_mode) {
    j["prior"] = "marginal_mode";
  } else {
    j["prior"] = json(r.backdoor.prior);
  }
  if (r.target_phi1) j["target_phi1"] = *r.target_phi1;
  return j;
}

inline HttpEndpointConfig parse_endpoint(const json& j, const std::string& path) {
  only_keys(j, path, {"url", "model", "temperature", "top_p", "max_tokens", "max_retries",
                      "initial_backoff_ms", "requests_per_second", "max_in_flight",
                      "timeout_s"});
  HttpEndpointConfig e;
  e.url = get<std::string>(j, "url", path, "");
  e.model = get<std::string>(j, "model", path, "");
  e.temperature = get<double>(j, "temperature", path, e.temperature);
  e.top_p = get<double>(j, "top_p", path, e.top_p);
  e.max_tokens = static_cast<int>(get<std::size_t>(j, "max_tokens", path, 1024));
  e.max_retries = get<std::size_t>(j, "max_retries", path, e.max_retries);
  e.initial_backoff = std::chrono::milliseconds(
      get<std::size_t>(j, "initial_backoff_ms", path, e.initial_backoff.count()));
  e.requests_per_second = get<double>(j, "requests_per_second", path, 0.0);
  e.max_in_flight = get<std::size_t>(j, "max_in_flight", path, e.max_in_flight);
  e.timeout = std::chrono::seconds(get<std::size_t>(j, "timeout_s", path, e.timeout.count()));
  return e;
}

inline json endpoint_json(const HttpEndpointConfig& e) {
  return {{"url", e.url},
          {"model", e.model},
          {"temperature", e.temperature},
          {"top_p", e.top_p},
          {"max_tokens", e.max_tokens},
          {"max_retries", e.max_retries},
          {"initial_backoff_ms", e.initial_backoff.count()},
          {"requests_per_second", e.requests_per_second},
          {"max_in_flight", e.max_in_flight},
          {"timeout_s", e.timeout.count()}};
}

}  // namespace config_detail

// Parses a config object; relative paths are taken against `base`.
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base) {
  using namespace config_detail;
  only_keys(j, "$", {"network", "realizer", "strata", "m", "k_max", "seed", "alpha",
                     "max_cond_size", "typicality_quantile", "threads", "extractor_noise",
                     "prompts", "output", "endpoint"});
  RunConfig c;
  c.network = resolve(base, get<std::string>(j, "network", "$", ""));
  if (j.contains("realizer")) c.realizer = parse_realizer(j["realizer"], "$.realizer");
  if (auto s = j.find("strata"); s != j.end()) {
    only_keys(*s, "$.strata", {"atypical"});
    if (s->contains("atypical")) {
      c.atypical_realizer = parse_realizer((*s)["atypical"], "$.strata.atypical");
    }
  }
  c.m = get<std::size_t>(j, "m", "$", c.m);
  c.k_max = get<std::size_t>(j, "k_max", "$", c.k_max);
  c.seed = get<std::uint64_t>(j, "seed", "$", c.seed);
  c.alpha = get<double>(j, "alpha", "$", c.alpha);
  c.max_cond_size = get<std::size_t>(j, "max_cond_size", "$", c.max_cond_size);
  c.typicality_quantile = get<double>(j, "typicality_quantile", "$", c.typicality_quantile);
  c.threads = get<std::size_t>(j, "threads", "$", c.threads);
  c.extractor_noise = get<double>(j, "extractor_noise", "$", c.extractor_noise);
  c.prompts = resolve(base, get<std::string>(j, "prompts", "$", ""));
  if (auto o = j.find("output"); o != j.end()) {
    only_keys(*o, "$.output", {"dataset", "coverage", "attempts"});
    c.output.dataset = resolve(base, get<std::string>(*o, "dataset", "$.output", ""));
    c.output.coverage = resolve(base, get<std::string>(*o, "coverage", "$.output", ""));
    c.output.attempts = resolve(base, get<std::string>(*o, "attempts", "$.output", ""));
  }
  if (j.contains("endpoint")) c.endpoint = parse_endpoint(j["endpoint"], "$.endpoint");
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": invalid JSON");
  return parse_config(j, path.parent_path());
}

// Effective settings that determine a run's output. Output paths are left
// out and the network is identified by a hash of its file contents, so moving
// files around keeps the hash.
inline nlohmann::json canonical_config(const RunConfig& c) {
  using namespace config_detail;
  json j{{"network", "fnv1a:" + fnv1a_hex(read_file(c.network))},
         {"realizer", realizer_json(c.realizer)},
         {"m", c.m},
         {"k_max", c.k_max},
         {"seed", c.seed},
         {"alpha", c.alpha},
         {"max_cond_size", c.max_cond_size},
         {"typicality_quantile", c.typicality_quantile},
         {"extractor_noise", c.extractor_noise}};
  if (c.atypical_realizer) j["strata"] = {{"atypical", realizer_json(*c.atypical_realizer)}};
  if (!c.prompts.empty()) {
    std::string texts;
    for (const char* f : {"system.txt", "cot.txt", "feedback_header.txt", "feedback_line.txt"}) {
      texts += read_file(c.prompts / f);
    }
    j["prompts"] = "fnv1a:" + fnv1a_hex(texts);
  }
  if (c.endpoint) j["endpoint"] = endpoint_json(*c.endpoint);
  return j;
}

inline std::string config_hash(const RunConfig& c) { return fnv1a_hex(canonical_config(c).dump()); }

// Resolves a "marginal_mode" prior and a target_phi1 calibration against the
// network, returning a ready channel configuration.
inline BackdoorChannelConfig resolve_backdoor(const RealizerConfig& r, const Scm& scm) {
  BackdoorChannelConfig cfg = r.backdoor;
  std::optional<DiscreteDist> joint;
  if (r.prior_from_mode) {
    joint = exact_joint(scm);
    cfg.prior.clear();
    for (std::size_t i = 0; i < scm.size(); ++i) {
      const auto m = marginal(scm, *joint, i);
      const auto best = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
      cfg.prior.emplace(scm.variable(i).name, scm.variable(i).states[best]);
    }
  }
  for (const auto& var : scm.variables()) {
    auto it = cfg.prior.find(var.name);
    if (it == cfg.prior.end()) throw PriorMissingVariable(var.name);
    if (!var.state_index(it->second)) throw UnknownState(var.name, it->second);
  }
  if (r.target_phi1) {
    if (!joint) joint = exact_joint(scm);
    cfg.base_compliance = calibrate_base_compliance(scm, *joint, cfg, *r.target_phi1);
    cfg.compliance_cap = std::max(cfg.compliance_cap, cfg.base_compliance);
  }
  cfg.validate();
  return cfg;
}

}  // namespace causalsynth::io

#endif  // CAUSALSYNTH_IO_CONFIG_HPP_
