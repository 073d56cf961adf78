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

// JSON-Lines files written by the pipeline. The first line is a header
//
//   {"config_hash": ..., "format": "causalsynth-dataset", "kind": ..., "version": 1}
//
// and every further line is one object of the given kind:
//
//   records      {"id", "v", "u", "document", "attempts_used", "realizer_id"}
//   coverage     {"id", "v", "u", "realizer_id", "accepted_at", "attempt_history"}
//   attempts     same shape as coverage, for every skeleton
//   skeletons    {"id", "v", "u"}
//
// "v" maps variable names to state labels and "u" maps them to the retained
// noise, printed with 17 significant digits so it reads back bit for bit.

#ifndef CAUSALSYNTH_IO_DATASET_HPP_
#define CAUSALSYNTH_IO_DATASET_HPP_

#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalsynth/error.hpp"
#include "causalsynth/pipeline.hpp"
#include "causalsynth/scm.hpp"

namespace causalsynth::io {

inline constexpr std::string_view kDatasetFormat = "causalsynth-dataset";
inline constexpr int kDatasetVersion = 1;

struct DatasetHeader {
  std::string kind;
  std::string config_hash;
  // Further header fields, e.g. the intervention of a counterfactual file.
  nlohmann::json extra = nlohmann::json::object();
};

struct DatasetRecord {
  std::size_t id = 0;
  Skeleton skeleton;
  std::string document;
  std::size_t attempts_used = 0;
  std::string realizer_id;
};

struct SkeletonRow {
  std::size_t id = 0;
  Skeleton skeleton;
};

inline std::string format_noise(double u) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", u);
  return buf;
}

namespace dataset_detail {

using nlohmann::json;

inline std::string json_string(std::string_view s) { return json(std::string(s)).dump(); }

// `"id":..,"v":{..},"u":{..}` in declaration order.
inline std::string skeleton_fields(const Scm& scm, std::size_t id, const Skeleton& s) {
  if (s.v.size() != scm.size() || s.u.size() != scm.size()) {
    throw SchemaMismatch("skeleton " + std::to_string(id) + " does not match the network");
  }
  std::string v = "{", u = "{";
  for (std::size_t i = 0; i < scm.size(); ++i) {
    const auto& var = scm.variable(i);
    const std::string sep = i ? "," : "";
    v += sep + json_string(var.name) + ":" + json_string(var.states.at(s.v[i]));
    u += sep + json_string(var.name) + ":" + format_noise(s.u[i]);
  }
  return "\"id\":" + std::to_string(id) + ",\"v\":" + v + "},\"u\":" + u + "}";
}

inline json history_json(const SkeletonLog& log) {
  json hist = json::array();
  for (const auto& a : log.attempts) {
    json mm = json::array();
    for (const auto& m : a.mismatches) {
      mm.push_back({{"variable", m.variable},
                    {"expected", m.expected},
                    {"extracted", m.extracted ? json(*m.extracted) : json(nullptr)}});
    }
    json entry{{"k", a.k}, {"outcome", std::string(outcome_name(a.outcome))}, {"mismatches", mm}};
    if (!a.error.empty()) entry["error"] = a.error;
    hist.push_back(std::move(entry));
  }
  return hist;
}

struct Line {
  std::size_t number;
  json value;
};

inline const json& need(const Line& line, const char* key) {
  auto it = line.value.find(key);
  if (it == line.value.end()) {
    throw FormatError(line.number, std::string("missing field '") + key + "'");
  }
  return *it;
}

inline std::size_t need_index(const Line& line, const char* key) {
  const json& j = need(line, key);
  if (!j.is_number_unsigned()) {
    throw FormatError(line.number, std::string("field '") + key + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

inline std::string need_string(const Line& line, const char* key) {
  const json& j = need(line, key);
  if (!j.is_string()) throw FormatError(line.number, std::string("field '") + key + "' must be a string");
  return j.get<std::string>();
}

inline Skeleton read_skeleton(const Line& line, const Scm& scm) {
  const json& v = need(line, "v");
  const json& u = need(line, "u");
  if (!v.is_object() || !u.is_object()) {
    throw FormatError(line.number, "'v' and 'u' must be objects");
  }
  Skeleton s;
  for (const auto& var : scm.variables()) {
    auto vi = v.find(var.name);
    auto ui = u.find(var.name);
    if (vi == v.end() || !vi->is_string()) {
      throw FormatError(line.number, "missing state for '" + var.name + "'");
    }
    auto state = var.state_index(vi->get<std::string>());
    if (!state) {
      throw FormatError(line.number, "unknown state '" + vi->get<std::string>() + "' of '" +
                                         var.name + "'");
    }
    if (ui == u.end() || !ui->is_number()) {
      throw FormatError(line.number, "missing noise for '" + var.name + "'");
    }
    const double x = ui->get<double>();
    if (!(x >= 0.0 && x < 1.0)) throw FormatError(line.number, "noise outside [0, 1)");
    s.v.push_back(*state);
    s.u.push_back(x);
  }
  if (v.size() != scm.size() || u.size() != scm.size()) {
    throw FormatError(line.number, "'v' or 'u' names variables outside the network");
  }
  return s;
}

inline std::optional<std::string> optional_string(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

inline AttemptOutcome parse_outcome(const Line& line, const std::string& s) {
  for (auto o : {AttemptOutcome::kAccepted, AttemptOutcome::kMismatch, AttemptOutcome::kError}) {
    if (outcome_name(o) == s) return o;
  }
  throw FormatError(line.number, "unknown attempt outcome '" + s + "'");
}

inline std::vector<AttemptRecord> read_history(const Line& line) {
  const json& hist = need(line, "attempt_history");
  if (!hist.is_array()) throw FormatError(line.number, "'attempt_history' must be an array");
  std::vector<AttemptRecord> out;
  try {
    for (const auto& a : hist) {
      AttemptRecord r;
      r.k = a.at("k").get<std::size_t>();
      r.outcome = a.contains("outcome") ? parse_outcome(line, a["outcome"].get<std::string>())
                                        : AttemptOutcome::kMismatch;
      for (const auto& m : a.at("mismatches")) {
        r.mismatches.push_back({m.at("variable").get<std::string>(),
                                m.at("expected").get<std::string>(),
                                optional_string(m.value("extracted", json(nullptr)))});
      }
      r.error = a.value("error", "");
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(line.number, std::string("bad attempt history: ") + e.what());
  }
  return out;
}

}  // namespace dataset_detail

inline std::string header_line(const DatasetHeader& h) {
  nlohmann::json j = h.extra.is_object() ? h.extra : nlohmann::json::object();
  j["format"] = kDatasetFormat;
  j["version"] = kDatasetVersion;
  j["kind"] = h.kind;
  j["config_hash"] = h.config_hash;
  return j.dump();
}

inline std::string skeleton_line(const Scm& scm, std::size_t id, const Skeleton& s) {
  return "{" + dataset_detail::skeleton_fields(scm, id, s) + "}";
}

inline std::string record_line(const Scm& scm, const DatasetRecord& r) {
  using dataset_detail::json_string;
  return "{" + dataset_detail::skeleton_fields(scm, r.id, r.skeleton) +
         ",\"document\":" + json_string(r.document) +
         ",\"attempts_used\":" + std::to_string(r.attempts_used) +
         ",\"realizer_id\":" + json_string(r.realizer_id) + "}";
}

inline std::string history_line(const Scm& scm, const SkeletonLog& log) {
  using dataset_detail::json_string;
  return "{" + dataset_detail::skeleton_fields(scm, log.id, log.skeleton) +
         ",\"realizer_id\":" + json_string(log.realizer_id) + ",\"accepted_at\":" +
         (log.accepted_at ? std::to_string(*log.accepted_at) : "null") +
         ",\"attempt_history\":" + dataset_detail::history_json(log).dump() + "}";
}

inline void write_skeletons(std::ostream& out, const Scm& scm, const DatasetHeader& h,
                            std::span<const SkeletonRow> rows) {
  out << header_line(h) << '\n';
  for (const auto& r : rows) out << skeleton_line(scm, r.id, r.skeleton) << '\n';
}

// Accepted skeletons of a run, in id order.
inline void write_records(std::ostream& out, const Scm& scm, const DatasetHeader& h,
                          std::span<const SkeletonLog> logs) {
  out << header_line(h) << '\n';
  for (const auto& log : logs) {
    if (!log.accepted()) continue;
    out << record_line(scm, {log.id, log.skeleton, log.document, *log.accepted_at,
                             log.realizer_id})
        << '\n';
  }
}

// Skeletons that exhausted their budget; with all = true, every skeleton.
inline void write_history(std::ostream& out, const Scm& scm, const DatasetHeader& h,
                          std::span<const SkeletonLog> logs, bool all) {
  out << header_line(h) << '\n';
  for (const auto& log : logs) {
    if (all || !log.accepted()) out << history_line(scm, log) << '\n';
  }
}

struct JsonlFile {
  DatasetHeader header;
  std::vector<dataset_detail::Line> lines;
};

// Reads a header and its lines. `kinds` lists the acceptable header kinds.
inline JsonlFile read_jsonl(std::istream& in, std::initializer_list<std::string_view> kinds) {
  JsonlFile file;
  std::string text;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++number;
    if (trim(text).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FormatError(number, "not a JSON object (truncated line?)");
    }
    if (!have_header) {
      if (j.value("format", "") != kDatasetFormat) {
        throw FormatError(number, "missing causalsynth-dataset header");
      }
      if (j.value("version", 0) != kDatasetVersion) {
        throw FormatError(number, "unsupported dataset version");
      }
      file.header.kind = j.value("kind", "");
      file.header.config_hash = j.value("config_hash", "");
      bool ok = false;
      for (auto k : kinds) ok |= file.header.kind == k;
      if (!ok) throw FormatError(number, "unexpected file kind '" + file.header.kind + "'");
      for (const char* key : {"format", "version", "kind", "config_hash"}) j.erase(key);
      file.header.extra = std::move(j);
      have_header = true;
      continue;
    }
    file.lines.push_back({number, std::move(j)});
  }
  if (!have_header) throw FormatError(0, "empty file: no dataset header");
  return file;
}

inline std::pair<DatasetHeader, std::vector<SkeletonRow>> read_skeletons(
    std::istream& in, const Scm& scm,
    std::initializer_list<std::string_view> kinds = {"skeletons", "counterfactual", "records"}) {
  auto file = read_jsonl(in, kinds);
  std::vector<SkeletonRow> rows;
  for (const auto& line : file.lines) {
    rows.push_back({dataset_detail::need_index(line, "id"), dataset_detail::read_skeleton(line, scm)});
  }
  return {std::move(file.header), std::move(rows)};
}

inline std::pair<DatasetHeader, std::vector<DatasetRecord>> read_records(std::istream& in,
                                                                         const Scm& scm) {
  auto file = read_jsonl(in, {"records"});
  std::vector<DatasetRecord> rows;
  for (const auto& line : file.lines) {
    DatasetRecord r;
    r.id = dataset_detail::need_index(line, "id");
    r.skeleton = dataset_detail::read_skeleton(line, scm);
    r.document = dataset_detail::need_string(line, "document");
    r.attempts_used = dataset_detail::need_index(line, "attempts_used");
    r.realizer_id = dataset_detail::need_string(line, "realizer_id");
    rows.push_back(std::move(r));
  }
  return {std::move(file.header), std::move(rows)};
}

inline std::pair<DatasetHeader, std::vector<SkeletonLog>> read_history(std::istream& in,
                                                                       const Scm& scm) {
  auto file = read_jsonl(in, {"coverage", "attempts"});
  std::vector<SkeletonLog> logs;
  for (const auto& line : file.lines) {
    SkeletonLog log;
    log.id = dataset_detail::need_index(line, "id");
    log.skeleton = dataset_detail::read_skeleton(line, scm);
    log.realizer_id = line.value.value("realizer_id", "");
    if (auto at = line.value.find("accepted_at"); at != line.value.end() && !at->is_null()) {
      log.accepted_at = dataset_detail::need_index(line, "accepted_at");
    }
    log.attempts = dataset_detail::read_history(line);
    logs.push_back(std::move(log));
  }
  return {std::move(file.header), std::move(logs)};
}

}  // namespace causalsynth::io

#endif  // CAUSALSYNTH_IO_DATASET_HPP_
