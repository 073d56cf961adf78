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

// Command implementations behind the `causalsynth` executable. run() parses
// arguments and maps failures to exit codes: 0 success, 1 runtime error,
// 2 invalid input.

#ifndef CAUSALSYNTH_CLI_HPP_
#define CAUSALSYNTH_CLI_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causalsynth/channel.hpp"
#include "causalsynth/error.hpp"
#include "causalsynth/graph.hpp"
#include "causalsynth/http_realizer.hpp"
#include "causalsynth/io/config.hpp"
#include "causalsynth/io/dataset.hpp"
#include "causalsynth/pipeline.hpp"
#include "causalsynth/scm.hpp"
#include "causalsynth/stats.hpp"

#ifndef CAUSALSYNTH_VERSION
#define CAUSALSYNTH_VERSION "0.0.0"
#endif

namespace causalsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

namespace detail {

inline std::string fixed(double x, int digits = 4) {
  if (std::isnan(x)) return "n/a";
  if (std::isinf(x)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline json number_or_null(std::optional<double> x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

inline fs::path with_suffix(const fs::path& p, const std::string& tag) {
  return p.parent_path() / (p.stem().string() + "." + tag + p.extension().string());
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return in;
}

inline Scm load_valid_network(const fs::path& p) {
  Scm scm = io::load_network(p);
  scm.require_valid();
  return scm;
}

inline PromptTemplates templates_for(const io::RunConfig& c) {
  return c.prompts.empty() ? PromptTemplates::Default() : PromptTemplates::Load(c.prompts);
}

inline std::unique_ptr<Realizer> make_realizer(const io::RealizerConfig& r, const Scm& scm,
                                               const io::RunConfig& c) {
  switch (r.kind) {
    case io::RealizerKind::kTemplate: return std::make_unique<TemplateRealizer>();
    case io::RealizerKind::kBackdoor:
      return std::make_unique<BackdoorRealizer>(io::resolve_backdoor(r, scm));
    case io::RealizerKind::kHttp: return std::make_unique<HttpRealizer>(*c.endpoint);
  }
  throw ConfigError("unknown realizer");
}

inline std::string phi_line(const std::vector<double>& phi) {
  std::string s;
  for (std::size_t k = 0; k < phi.size(); ++k) s += (k ? " " : "") + fixed(phi[k], 3);
  return s;
}

}  // namespace detail


inline int cmd_validate(const fs::path& network, std::ostream& out) {
  const Scm scm = io::load_network(network);
  const auto violations = validate(scm);
  if (violations.empty()) {
    out << "ok: " << scm.size() << " variables, " << scm.dag().edge_count() << " edges\n";
    return kExitOk;
  }
  for (const auto& v : violations) out << v.to_string() << "\n";
  return kExitInvalid;
}


struct SampleArgs {
  fs::path network;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  fs::path out;
};

inline int cmd_sample(const SampleArgs& a, std::ostream& log) {
  const Scm scm = detail::load_valid_network(a.network);
  const json canon{{"command", "sample"},
                   {"network", "fnv1a:" + io::fnv1a_hex(io::read_file(a.network))},
                   {"m", a.m},
                   {"seed", a.seed}};
  io::DatasetHeader h{"skeletons", io::fnv1a_hex(canon.dump()), {{"m", a.m}, {"seed", a.seed}}};
  auto out = detail::open_out(a.out);
  out << io::header_line(h) << '\n';
  for (std::size_t j = 0; j < a.m; ++j) {
    out << io::skeleton_line(scm, j, sample_skeleton_at(scm, a.seed, j)) << '\n';
  }
  log << "wrote " << a.m << " skeletons to " << a.out.string() << "\n";
  return kExitOk;
}


struct GenerateArgs {
  fs::path config;  // optional; flags below override its fields
  json overrides = json::object();
};

inline io::RunConfig resolve_run_config(const GenerateArgs& a) {
  json j = json::object();
  fs::path base = fs::current_path();
  if (!a.config.empty()) {
    j = json::parse(io::read_file(a.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ConfigError(a.config.string() + ": not a JSON object");
    }
    base = a.config.parent_path();
  }
  for (const auto& [key, value] : a.overrides.items()) {
    if (key == "network" || key == "prompts") {
      // Paths given on the command line are relative to the working directory.
      j[key] = fs::absolute(value.get<std::string>()).string();
    } else if (key == "output") {
      // A new dataset path moves the side logs next to it as well.
      j["output"] = json::object();
      for (const auto& [k, v] : value.items()) {
        j["output"][k] = fs::absolute(v.get<std::string>()).string();
      }
    } else if (key == "realizer") {
      if (!j.contains("realizer") || j["realizer"].value("type", "") != value.get<std::string>()) {
        j["realizer"] = {{"type", value}};
      }
    } else {
      j[key] = value;
    }
  }
  return io::parse_config(j, base);
}

inline int cmd_generate(const GenerateArgs& a, std::ostream& log) {
  const io::RunConfig c = resolve_run_config(a);
  if (c.output.dataset.empty()) throw ConfigError("$.output.dataset: required");
  const Scm scm = detail::load_valid_network(c.network);
  const auto realizer = detail::make_realizer(c.realizer, scm, c);

  PipelineOptions opt;
  opt.m = c.m;
  opt.k_max = c.k_max;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.extractor_noise = c.extractor_noise;
  opt.templates = detail::templates_for(c);

  std::unique_ptr<Realizer> atypical_realizer;
  std::vector<bool> atypical;
  if (c.atypical_realizer && c.m > 0) {
    atypical_realizer = detail::make_realizer(*c.atypical_realizer, scm, c);
    std::vector<Skeleton> skeletons;
    for (std::size_t j = 0; j < c.m; ++j) skeletons.push_back(sample_skeleton_at(scm, c.seed, j));
    const auto split = typicality_split(skeletons, scm, c.typicality_quantile);
    atypical.assign(c.m, false);
    for (auto j : split.atypical) atypical[j] = true;
    opt.skeletons = std::move(skeletons);
    opt.selector = [&](std::size_t j, const Skeleton&) -> const Realizer& {
      return atypical[j] ? *atypical_realizer : *realizer;
    };
  }

  const PipelineResult res = run_pipeline(scm, *realizer, opt);
  const std::string hash = io::config_hash(c);
  const json extra{{"m", c.m}, {"k_max", c.k_max}, {"seed", c.seed}, {"realizer", realizer->id()}};
  const fs::path coverage =
      c.output.coverage.empty() ? detail::with_suffix(c.output.dataset, "coverage") : c.output.coverage;
  const fs::path attempts =
      c.output.attempts.empty() ? detail::with_suffix(c.output.dataset, "attempts") : c.output.attempts;
  {
    auto out = detail::open_out(c.output.dataset);
    io::write_records(out, scm, {"records", hash, extra}, res.logs);
  }
  {
    auto out = detail::open_out(coverage);
    io::write_history(out, scm, {"coverage", hash, extra}, res.logs, false);
  }
  {
    auto out = detail::open_out(attempts);
    io::write_history(out, scm, {"attempts", hash, extra}, res.logs, true);
  }
  log << "config hash   " << hash << "\n"
      << "skeletons     " << c.m << "\n"
      << "accepted      " << res.accepted_count() << "\n"
      << "coverage log  " << res.failed_count() << " ("
      << detail::fixed(coverage_failure_rate(res.accepted_count(), res.failed_count())) << ")\n";
  if (c.m > 0) log << "phi_hat       " << detail::phi_line(estimate_phi(res.logs, c.k_max)) << "\n";
  log << "records       " << c.output.dataset.string() << "\n"
      << "coverage      " << coverage.string() << "\n"
      << "attempts      " << attempts.string() << "\n";
  return kExitOk;
}


struct CounterfactualArgs {
  fs::path network;
  fs::path dataset;
  std::string assignments;
  fs::path out;
};

inline int cmd_counterfactual(const CounterfactualArgs& a, std::ostream& log) {
  const Scm scm = detail::load_valid_network(a.network);
  const Assignments act = parse_assignments(a.assignments);
  resolve_assignments(scm, act);  // reject unknown names before reading data
  auto in = detail::open_in(a.dataset);
  const auto [header, rows] = io::read_skeletons(in, scm);
  std::string canonical;
  for (const auto& [k, v] : act) canonical += (canonical.empty() ? "" : ",") + k + "=" + v;
  const json canon{{"command", "counterfactual"}, {"source", header.config_hash},
                   {"intervention", canonical}};
  io::DatasetHeader h{"counterfactual", io::fnv1a_hex(canon.dump()),
                      {{"intervention", canonical}, {"source_config_hash", header.config_hash}}};
  auto out = detail::open_out(a.out);
  out << io::header_line(h) << '\n';
  std::size_t changed = 0;
  for (const auto& row : rows) {
    const Skeleton cf = counterfactual(scm, row.skeleton, act);
    changed += cf.v != row.skeleton.v;
    out << io::skeleton_line(scm, row.id, cf) << '\n';
  }
  log << "wrote " << rows.size() << " counterfactuals (" << changed << " differ from factual) to "
      << a.out.string() << "\n";
  return kExitOk;
}


struct EvaluateArgs {
  fs::path network;
  fs::path dataset;
  double alpha = 0.05;
  std::size_t max_cond_size = 2;
  std::optional<std::size_t> max_tests;
  std::uint64_t seed = 0;
  std::optional<std::size_t> reference_size;
  fs::path reference_graph;
  fs::path coverage;  // coverage log of the same run
  fs::path attempts;  // attempt log of the same run
  fs::path out;       // JSON report
  fs::path csv;
};

inline json evaluate_report(const EvaluateArgs& a) {
  const Scm scm = detail::load_valid_network(a.network);
  auto in = detail::open_in(a.dataset);
  const auto [header, rows] = io::read_skeletons(in, scm);
  if (rows.empty()) throw EmptySample("dataset " + a.dataset.string() + " has no rows");
  std::vector<Skeleton> data;
  for (const auto& r : rows) data.push_back(r.skeleton);
  const DiscreteData table = DiscreteData::FromSkeletons(scm, data);

  json metrics;
  const FprResult f = fpr(table, scm.dag(), a.alpha, a.max_cond_size, a.max_tests, a.seed);
  metrics["fpr"] = {{"rate", detail::number_or_null(f.rate())},
                    {"rejected", f.rejected},
                    {"evaluated", f.evaluated()},
                    {"skipped", f.skipped},
                    {"implied", f.total_implied}};
  const FprResult dep = dependence_detection(table, scm.dag(), a.alpha);
  metrics["dependence_detection"] = {{"rate", detail::number_or_null(dep.rate())},
                                     {"rejected", dep.rejected},
                                     {"evaluated", dep.evaluated()},
                                     {"skipped", dep.skipped}};

  // KS of each variable's state index against draws from the model.
  const std::size_t n_ref = a.reference_size.value_or(data.size());
  std::vector<Skeleton> ref;
  for (std::size_t j = 0; j < n_ref; ++j) {
    RngStream rng(a.seed, j, RngStream::kReference);
    ref.push_back(sample_skeleton(scm, rng));
  }
  json ks = json::object();
  std::vector<double> pvals;
  for (std::size_t i = 0; i < scm.size(); ++i) {
    std::vector<double> x, y;
    for (const auto& s : data) x.push_back(static_cast<double>(s.v[i]));
    for (const auto& s : ref) y.push_back(static_cast<double>(s.v[i]));
    const auto r = ks_two_sample(std::move(x), std::move(y));
    ks[scm.variable(i).name] = {{"statistic", r.statistic}, {"p_value", r.p_value}};
    pvals.push_back(r.p_value);
  }
  std::vector<double> sorted = pvals;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                          : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                                   sorted[sorted.size() / 2]);
  const auto above = std::count_if(pvals.begin(), pvals.end(), [&](double p) { return p > a.alpha; });
  metrics["ks"] = {{"per_variable", ks},
                   {"min_p", sorted.front()},
                   {"median_p", median},
                   {"fraction_above_alpha", static_cast<double>(above) / pvals.size()}};

  try {
    const DiscreteDist target = exact_joint(scm);
    std::vector<std::uint64_t> keys;
    for (const auto& s : data) keys.push_back(joint_key(scm, s.v));
    const DiscreteDist empirical = DiscreteDist::Empirical(keys);
    const auto chi = chi2_divergence(empirical, target);
    metrics["tvd"] = tvd(empirical, target);
    metrics["chi2"] = detail::number_or_null(chi.value);
    metrics["chi2_support_violation"] = chi.support_violation;
  } catch (const StateSpaceTooLarge&) {
    metrics["tvd"] = nullptr;
    metrics["chi2"] = nullptr;
  }

  if (!a.reference_graph.empty()) {
    metrics["shd"] = shd(scm.dag(), io::load_network(a.reference_graph).dag());
  }
  if (!a.coverage.empty()) {
    auto cin = detail::open_in(a.coverage);
    const std::size_t failed = io::read_history(cin, scm).second.size();
    metrics["coverage_failure_rate"] = coverage_failure_rate(rows.size(), failed);
    metrics["coverage_failed"] = failed;
  }
  if (!a.attempts.empty()) {
    auto ain = detail::open_in(a.attempts);
    const auto logs = io::read_history(ain, scm).second;
    std::size_t k_max = 1;
    for (const auto& l : logs) {
      for (const auto& at : l.attempts) k_max = std::max(k_max, at.k);
    }
    metrics["phi_hat"] = estimate_phi(logs, k_max);
  }

  return {{"metadata",
           {{"tool_version", CAUSALSYNTH_VERSION},
            {"dataset_config_hash", header.config_hash},
            {"network_hash", io::fnv1a_hex(io::read_file(a.network))},
            {"samples", rows.size()},
            {"alpha", a.alpha},
            {"max_cond_size", a.max_cond_size},
            {"seed", a.seed}}},
          {"metrics", metrics}};
}

inline void print_evaluation(const json& r, std::ostream& out) {
  const auto& m = r["metrics"];
  auto num = [](const json& j, int d = 4) {
    return j.is_null() ? std::string("n/a") : detail::fixed(j.get<double>(), d);
  };
  out << "samples               " << r["metadata"]["samples"].get<std::size_t>() << "\n"
      << "FPR                   " << num(m["fpr"]["rate"]) << "  ("
      << m["fpr"]["rejected"].get<std::size_t>() << " of " << m["fpr"]["evaluated"].get<std::size_t>()
      << " d-separations rejected, " << m["fpr"]["skipped"].get<std::size_t>() << " skipped)\n"
      << "dependence detection  " << num(m["dependence_detection"]["rate"]) << "  ("
      << m["dependence_detection"]["rejected"].get<std::size_t>() << " of "
      << m["dependence_detection"]["evaluated"].get<std::size_t>() << " edges)\n"
      << "KS p-value            min " << num(m["ks"]["min_p"]) << ", median "
      << num(m["ks"]["median_p"]) << "\n";
  for (const auto& [name, v] : m["ks"]["per_variable"].items()) {
    out << "  " << name << std::string(name.size() < 20 ? 20 - name.size() : 1, ' ')
        << num(v["p_value"]) << "\n";
  }
  out << "TVD                   " << num(m["tvd"]) << "\n"
      << "chi2 divergence       " << num(m["chi2"]) << "\n";
  if (m.contains("shd")) out << "SHD                   " << m["shd"].get<std::size_t>() << "\n";
  if (m.contains("coverage_failure_rate")) {
    out << "coverage failure      " << num(m["coverage_failure_rate"]) << "\n";
  }
  if (m.contains("phi_hat")) {
    out << "phi_hat               " << detail::phi_line(m["phi_hat"].get<std::vector<double>>())
        << "\n";
  }
}

inline void write_evaluation_csv(const json& r, std::ostream& out) {
  const auto& m = r["metrics"];
  auto cell = [](const json& j) { return j.is_null() ? std::string() : j.dump(); };
  out << "metric,variable,value\n"
      << "fpr,," << cell(m["fpr"]["rate"]) << "\n"
      << "dependence_detection,," << cell(m["dependence_detection"]["rate"]) << "\n";
  for (const auto& [name, v] : m["ks"]["per_variable"].items()) {
    out << "ks_p," << name << "," << cell(v["p_value"]) << "\n";
  }
  out << "ks_min_p,," << cell(m["ks"]["min_p"]) << "\n"
      << "ks_median_p,," << cell(m["ks"]["median_p"]) << "\n"
      << "tvd,," << cell(m["tvd"]) << "\n"
      << "chi2,," << cell(m["chi2"]) << "\n";
  if (m.contains("shd")) out << "shd,," << m["shd"].dump() << "\n";
  if (m.contains("coverage_failure_rate")) {
    out << "coverage_failure_rate,," << cell(m["coverage_failure_rate"]) << "\n";
  }
  if (m.contains("phi_hat")) {
    for (std::size_t k = 0; k < m["phi_hat"].size(); ++k) {
      out << "phi_hat," << k + 1 << "," << m["phi_hat"][k].dump() << "\n";
    }
  }
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const json report = evaluate_report(a);
  print_evaluation(report, out);
  if (!a.out.empty()) {
    auto f = detail::open_out(a.out);
    f << report.dump(2) << "\n";
  }
  if (!a.csv.empty()) {
    auto f = detail::open_out(a.csv);
    write_evaluation_csv(report, f);
  }
  return kExitOk;
}


struct ReportArgs {
  fs::path network;
  fs::path attempts;
  std::optional<std::size_t> k_max;  // default: longest history in the log
  double quantile = kDefaultTypicalityQuantile;
  fs::path strata;  // JSON {"name": [ids...]}; replaces the typicality split
  fs::path csv;
  fs::path text;    // also written to stdout
};

struct StratumRow {
  std::string name;
  std::size_t n = 0;
  std::vector<double> phi;
  std::vector<std::optional<double>> hazard;
};

struct Report {
  std::size_t k_max = 0;
  std::vector<StratumRow> strata;
  std::vector<std::optional<double>> tvd;   // TVD(accepted within K, P_skel), K = 1..k_max
  std::vector<std::optional<double>> chi2;
  std::optional<double> feedback_covariance;
};

inline Report build_report(const ReportArgs& a) {
  const Scm scm = detail::load_valid_network(a.network);
  auto in = detail::open_in(a.attempts);
  const auto [header, logs] = io::read_history(in, scm);
  if (header.kind != "attempts") {
    throw ValidationError("report needs a full attempt log, not a coverage log");
  }
  if (logs.empty()) throw EmptyLog("attempt log " + a.attempts.string() + " is empty");
  Report rep;
  rep.k_max = 1;
  if (a.k_max) {
    rep.k_max = *a.k_max;
  } else {
    for (const auto& l : logs) {
      for (const auto& at : l.attempts) rep.k_max = std::max(rep.k_max, at.k);
    }
  }
  if (rep.k_max == 0) throw ValidationError("k_max must be at least 1");

  std::vector<std::pair<std::string, std::vector<std::size_t>>> strata;
  std::vector<std::size_t> all(logs.size());
  for (std::size_t j = 0; j < logs.size(); ++j) all[j] = j;
  strata.emplace_back("all", all);
  if (!a.strata.empty()) {
    const json s = json::parse(io::read_file(a.strata), nullptr, false);
    if (s.is_discarded() || !s.is_object()) throw ConfigError("strata file must be a JSON object");
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t j = 0; j < logs.size(); ++j) pos[logs[j].id] = j;
    for (const auto& [name, ids] : s.items()) {
      if (!ids.is_array()) throw ConfigError("stratum '" + name + "' must list skeleton ids");
      std::vector<std::size_t> members;
      for (const auto& id : ids) {
        auto it = pos.find(id.get<std::size_t>());
        if (it == pos.end()) {
          throw ValidationError("stratum '" + name + "' names unknown id " + id.dump());
        }
        members.push_back(it->second);
      }
      strata.emplace_back(name, std::move(members));
    }
  } else {
    std::vector<Skeleton> skels;
    for (const auto& l : logs) skels.push_back(l.skeleton);
    auto split = typicality_split(skels, scm, a.quantile);
    strata.emplace_back("typical", std::move(split.typical));
    strata.emplace_back("atypical", std::move(split.atypical));
  }

  std::vector<StratumPhi> cov_input;
  for (const auto& [name, members] : strata) {
    if (members.empty()) throw ValidationError("stratum '" + name + "' is empty");
    const auto sub = select_logs(logs, members);
    StratumRow row{name, members.size(), estimate_phi(sub, rep.k_max), estimate_hazard(sub, rep.k_max)};
    if (name != "all") {
      cov_input.push_back({static_cast<double>(members.size()) / logs.size(), row.phi.front(),
                           row.phi.back()});
    }
    rep.strata.push_back(std::move(row));
  }
  if (cov_input.size() >= 2) rep.feedback_covariance = feedback_covariance(cov_input);

  std::optional<DiscreteDist> target;
  try {
    target = exact_joint(scm);
  } catch (const StateSpaceTooLarge&) {
  }
  for (std::size_t k = 1; k <= rep.k_max; ++k) {
    std::vector<std::uint64_t> keys;
    for (const auto& l : logs) {
      if (l.accepted_at && *l.accepted_at <= k) keys.push_back(joint_key(scm, l.skeleton.v));
    }
    if (!target || keys.empty()) {
      rep.tvd.emplace_back();
      rep.chi2.emplace_back();
      continue;
    }
    const auto emp = DiscreteDist::Empirical(keys);
    rep.tvd.push_back(tvd(emp, *target));
    const auto c = chi2_divergence(emp, *target);
    rep.chi2.push_back(c.support_violation ? std::nullopt : std::optional<double>(c.value));
  }
  return rep;
}

inline void print_report(const Report& r, std::ostream& out) {
  auto opt = [](const std::optional<double>& x) { return x ? detail::fixed(*x, 3) : "  -  "; };
  out << "stratum        n       ";
  for (std::size_t k = 1; k <= r.k_max; ++k) {
    std::string h = "phi" + std::to_string(k);
    out << h << std::string(h.size() < 7 ? 7 - h.size() : 1, ' ');
  }
  out << "\n";
  for (const auto& s : r.strata) {
    std::string n = std::to_string(s.n);
    out << s.name << std::string(s.name.size() < 15 ? 15 - s.name.size() : 1, ' ') << n
        << std::string(n.size() < 8 ? 8 - n.size() : 1, ' ');
    for (double p : s.phi) out << detail::fixed(p, 3) << "  ";
    out << "\n";
  }
  out << "\nhazard p_k (all)       ";
  for (const auto& h : r.strata.front().hazard) out << opt(h) << "  ";
  out << "\nTVD(K)                 ";
  for (const auto& t : r.tvd) out << opt(t) << "  ";
  out << "\nchi2(K)                ";
  for (const auto& c : r.chi2) out << opt(c) << "  ";
  out << "\n";
  if (r.feedback_covariance) {
    out << "Cov(phi1, log(phi" << r.k_max << "/phi1)) across strata: "
        << detail::fixed(*r.feedback_covariance, 5) << "\n";
  }
}

inline void write_report_csv(const Report& r, std::ostream& out) {
  auto cell = [](const std::optional<double>& x) {
    return x ? json(*x).dump() : std::string();
  };
  out << "stratum,n,k,phi_hat,hazard_hat,tvd,chi2\n";
  for (const auto& s : r.strata) {
    for (std::size_t k = 0; k < r.k_max; ++k) {
      const bool all = s.name == "all";
      out << s.name << "," << s.n << "," << k + 1 << "," << json(s.phi[k]).dump() << ","
          << cell(s.hazard[k]) << "," << (all ? cell(r.tvd[k]) : "") << ","
          << (all ? cell(r.chi2[k]) : "") << "\n";
    }
  }
}

inline int cmd_report(const ReportArgs& a, std::ostream& out) {
  const Report r = build_report(a);
  std::ostringstream text;
  print_report(r, text);
  out << text.str();
  if (!a.text.empty()) {
    auto f = detail::open_out(a.text);
    f << text.str();
  }
  if (!a.csv.empty()) {
    auto f = detail::open_out(a.csv);
    write_report_csv(r, f);
  }
  return kExitOk;
}


inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structurally valid synthetic data from discrete structural causal models"};
  app.set_version_flag("--version", CAUSALSYNTH_VERSION);
  app.require_subcommand(1);

  std::string network_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a network file");
  validate_cmd->add_option("network", network_path, "Network file (.bif or .json)")->required();

  SampleArgs sample;
  std::string sample_net, sample_out;
  auto* sample_cmd = app.add_subcommand("sample", "Draw skeletons without realization");
  sample_cmd->add_option("--network", sample_net, "Network file")->required();
  sample_cmd->add_option("--m", sample.m, "Number of skeletons")->required();
  sample_cmd->add_option("--seed", sample.seed, "Random seed");
  sample_cmd->add_option("--out", sample_out, "Output JSONL file")->required();

  GenerateArgs gen;
  std::string gen_config;
  std::optional<std::string> g_network, g_realizer, g_out, g_prompts;
  std::optional<std::size_t> g_m, g_k_max, g_threads, g_max_cond;
  std::optional<std::uint64_t> g_seed;
  std::optional<double> g_alpha, g_quantile, g_noise;
  auto* gen_cmd = app.add_subcommand("generate", "Run generation with verification and feedback");
  gen_cmd->add_option("--config", gen_config, "Run configuration (JSON)");
  gen_cmd->add_option("--network", g_network, "Network file");
  gen_cmd->add_option("--realizer", g_realizer, "template, backdoor or http");
  gen_cmd->add_option("--m", g_m, "Number of skeletons");
  gen_cmd->add_option("--k-max", g_k_max, "Attempt budget per skeleton (default 10)");
  gen_cmd->add_option("--seed", g_seed, "Random seed");
  gen_cmd->add_option("--threads", g_threads, "Worker threads");
  gen_cmd->add_option("--alpha", g_alpha, "Significance level recorded in the config");
  gen_cmd->add_option("--max-cond-size", g_max_cond, "Recorded in the config");
  gen_cmd->add_option("--typicality-quantile", g_quantile, "Atypical stratum share");
  gen_cmd->add_option("--extractor-noise", g_noise, "Extractor error rate");
  gen_cmd->add_option("--prompts", g_prompts, "Directory of prompt templates");
  gen_cmd->add_option("--out", g_out, "Output records file");

  CounterfactualArgs cf;
  std::string cf_net, cf_data, cf_out;
  auto* cf_cmd = app.add_subcommand("counterfactual", "Counterfactuals of a dataset under do()");
  cf_cmd->add_option("--network", cf_net, "Network file")->required();
  cf_cmd->add_option("--dataset", cf_data, "Skeleton or record file")->required();
  cf_cmd->add_option("--set", cf.assignments, "Intervention, e.g. smoke=no,asia=yes")->required();
  cf_cmd->add_option("--out", cf_out, "Output JSONL file")->required();

  EvaluateArgs ev;
  std::string ev_net, ev_data, ev_ref, ev_cov, ev_att, ev_out, ev_csv;
  auto* ev_cmd = app.add_subcommand("evaluate", "Structural fidelity metrics of a dataset");
  ev_cmd->add_option("--network", ev_net, "Network the data should follow")->required();
  ev_cmd->add_option("--dataset", ev_data, "Records or skeleton file")->required();
  ev_cmd->add_option("--alpha", ev.alpha, "CI test level")->capture_default_str();
  ev_cmd->add_option("--max-cond-size", ev.max_cond_size, "Largest conditioning set")
      ->capture_default_str();
  ev_cmd->add_option("--max-tests", ev.max_tests, "Subsample this many d-separations");
  ev_cmd->add_option("--seed", ev.seed, "Seed for reference draws and subsampling");
  ev_cmd->add_option("--reference-size", ev.reference_size, "Reference draws for KS");
  ev_cmd->add_option("--reference-graph", ev_ref, "Network whose graph SHD is measured against");
  ev_cmd->add_option("--coverage", ev_cov, "Coverage log of the run");
  ev_cmd->add_option("--attempts", ev_att, "Attempt log of the run");
  ev_cmd->add_option("--out", ev_out, "JSON report");
  ev_cmd->add_option("--csv", ev_csv, "CSV report");

  ReportArgs rp;
  std::string rp_net, rp_att, rp_strata, rp_csv, rp_text;
  auto* rp_cmd = app.add_subcommand("report", "Acceptance curves per stratum from an attempt log");
  rp_cmd->add_option("--network", rp_net, "Network of the run")->required();
  rp_cmd->add_option("--attempts", rp_att, "Attempt log")->required();
  rp_cmd->add_option("--k-max", rp.k_max, "Budget to tabulate");
  rp_cmd->add_option("--typicality-quantile", rp.quantile, "Atypical share")->capture_default_str();
  rp_cmd->add_option("--strata", rp_strata, "JSON object of named id lists");
  rp_cmd->add_option("--csv", rp_csv, "CSV output");
  rp_cmd->add_option("--text", rp_text, "Text output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(network_path, out);
    if (sample_cmd->parsed()) {
      sample.network = sample_net;
      sample.out = sample_out;
      return cmd_sample(sample, out);
    }
    if (gen_cmd->parsed()) {
      gen.config = gen_config;
      auto& o = gen.overrides;
      if (g_network) o["network"] = *g_network;
      if (g_realizer) o["realizer"] = *g_realizer;
      if (g_prompts) o["prompts"] = *g_prompts;
      if (g_out) o["output"]["dataset"] = *g_out;
      if (g_m) o["m"] = *g_m;
      if (g_k_max) o["k_max"] = *g_k_max;
      if (g_threads) o["threads"] = *g_threads;
      if (g_max_cond) o["max_cond_size"] = *g_max_cond;
      if (g_seed) o["seed"] = *g_seed;
      if (g_alpha) o["alpha"] = *g_alpha;
      if (g_quantile) o["typicality_quantile"] = *g_quantile;
      if (g_noise) o["extractor_noise"] = *g_noise;
      return cmd_generate(gen, out);
    }
    if (cf_cmd->parsed()) {
      cf.network = cf_net;
      cf.dataset = cf_data;
      cf.out = cf_out;
      return cmd_counterfactual(cf, out);
    }
    if (ev_cmd->parsed()) {
      ev.network = ev_net;
      ev.dataset = ev_data;
      ev.reference_graph = ev_ref;
      ev.coverage = ev_cov;
      ev.attempts = ev_att;
      ev.out = ev_out;
      ev.csv = ev_csv;
      return cmd_evaluate(ev, out);
    }
    if (rp_cmd->parsed()) {
      rp.network = rp_net;
      rp.attempts = rp_att;
      rp.strata = rp_strata;
      rp.csv = rp_csv;
      rp.text = rp_text;
      return cmd_report(rp, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace causalsynth::cli

#endif  // CAUSALSYNTH_CLI_HPP_
