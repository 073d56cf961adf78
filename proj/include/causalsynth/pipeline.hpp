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

#ifndef CAUSALSYNTH_PIPELINE_HPP_
#define CAUSALSYNTH_PIPELINE_HPP_

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "causalsynth/channel.hpp"
#include "causalsynth/error.hpp"
#include "causalsynth/rng.hpp"
#include "causalsynth/scm.hpp"
#include "causalsynth/stats.hpp"

namespace causalsynth {

// Values read back from a document, one slot per schema variable.
struct ExtractedAssignment {
  // Raw text written for each variable; empty when the document never names it.
  std::vector<std::optional<std::string>> values;
  // Set when the document gives a variable two different values.
  std::vector<bool> conflicting;
  // Lines of the form `x = y` whose left side names no variable.
  std::vector<std::string> unparsed_lines;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Drops list bullets and markdown emphasis around a checklist entry.
inline std::string strip_markup(std::string_view s) {
  std::string out = trim(s);
  if (out.size() >= 2 && (out[0] == '-' || out[0] == '*') && out[1] == ' ') {
    out = trim(std::string_view(out).substr(2));
  }
  auto is_mark = [](char c) { return c == '`' || c == '*' || c == '"'; };
  std::size_t b = 0, e = out.size();
  while (b < e && is_mark(out[b])) ++b;
  while (e > b && is_mark(out[e - 1])) --e;
  return trim(std::string_view(out).substr(b, e - b));
}

}  // namespace detail

// Reads the `name = value` checklist. Variable names match case-insensitively
// (an exact-case match wins); values are kept verbatim after trimming.
inline ExtractedAssignment extract_exact(std::string_view document, const Scm& schema) {
  ExtractedAssignment out;
  out.values.resize(schema.size());
  out.conflicting.assign(schema.size(), false);
  std::vector<std::string> folded;
  for (const auto& var : schema.variables()) folded.push_back(detail::lower(var.name));

  std::size_t start = 0;
  while (start <= document.size()) {
    std::size_t end = document.find('\n', start);
    if (end == std::string_view::npos) end = document.size();
    const std::string_view line = document.substr(start, end - start);
    start = end + 1;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string name = detail::strip_markup(line.substr(0, eq));
    const std::string value = detail::strip_markup(line.substr(eq + 1));
    std::optional<std::size_t> idx = schema.find(name);
    if (!idx) {
      const std::string key = detail::lower(name);
      for (std::size_t i = 0; i < folded.size(); ++i) {
        if (folded[i] == key) {
          idx = i;
          break;
        }
      }
    }
    if (!idx) {
      out.unparsed_lines.push_back(trim(line));
      continue;
    }
    auto& slot = out.values[*idx];
    if (!slot) {
      slot = value;
    } else if (*slot != value) {
      out.conflicting[*idx] = true;
      *slot += " | " + value;
    }
  }
  return out;
}

// Exact extraction followed by a symmetric error channel: every recognised
// value is replaced, with probability eps, by a uniformly chosen other state.
inline ExtractedAssignment extract_noisy(std::string_view document, const Scm& schema,
                                         double eps, RngStream& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
  ExtractedAssignment out = extract_exact(document, schema);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const bool corrupt = rng.chance(eps);
    if (!corrupt || !out.values[i] || out.conflicting[i]) continue;
    const auto& states = schema.variable(i).states;
    auto it = std::find(states.begin(), states.end(), *out.values[i]);
    if (it == states.end() || states.size() < 2) continue;
    const auto truth = static_cast<std::size_t>(it - states.begin());
    std::size_t other = rng.below(states.size() - 1);
    if (other >= truth) ++other;
    out.values[i] = states[other];
  }
  return out;
}

// Mismatches between skeleton and extraction, in declaration order. A
// variable mismatches when it is missing, conflicting or not the required label.
inline std::vector<Mismatch> verify(const Skeleton& skeleton, const ExtractedAssignment& extracted,
                                    const Scm& schema) {
  if (skeleton.v.size() != schema.size() || extracted.values.size() != schema.size()) {
    throw SchemaMismatch("skeleton, extraction and schema disagree on variable count");
  }
  std::vector<Mismatch> out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema.variable(i);
    const std::string& expected = var.states.at(skeleton.v[i]);
    const auto& got = extracted.values[i];
    const bool conflict = i < extracted.conflicting.size() && extracted.conflicting[i];
    if (!got || conflict || *got != expected) out.push_back({var.name, expected, got});
  }
  return out;
}

enum class AttemptOutcome { kAccepted, kMismatch, kError };

inline std::string_view outcome_name(AttemptOutcome o) {
  switch (o) {
    case AttemptOutcome::kAccepted: return "accepted";
    case AttemptOutcome::kMismatch: return "mismatch";
    case AttemptOutcome::kError: return "error";
  }
  return "unknown";
}

struct AttemptRecord {
  std::size_t k = 0;
  AttemptOutcome outcome = AttemptOutcome::kMismatch;
  std::vector<Mismatch> mismatches;
  std::string error;
};

// Everything that happened to one skeleton.
struct SkeletonLog {
  std::size_t id = 0;
  Skeleton skeleton;
  std::string realizer_id;
  std::vector<AttemptRecord> attempts;
  std::optional<std::size_t> accepted_at;  // attempt index, 1-based
  std::string document;                    // accepted text, empty otherwise

  bool accepted() const noexcept { return accepted_at.has_value(); }
};

using RealizerSelector = std::function<const Realizer&(std::size_t id, const Skeleton&)>;

struct PipelineOptions {
  std::size_t m = 0;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double extractor_noise = 0.0;
  PromptTemplates templates = PromptTemplates::Default();
  // Overrides the realizer per skeleton, for example per typicality stratum.
  RealizerSelector selector;
  // When set, these skeletons are used instead of sampling m fresh ones.
  std::optional<std::vector<Skeleton>> skeletons;
};

struct PipelineResult {
  std::vector<SkeletonLog> logs;  // indexed by skeleton id

  std::size_t accepted_count() const {
    return static_cast<std::size_t>(std::count_if(
        logs.begin(), logs.end(), [](const SkeletonLog& l) { return l.accepted(); }));
  }
  std::size_t failed_count() const { return logs.size() - accepted_count(); }
};

// Runs one skeleton through generate, extract and verify with feedback. All
// randomness comes from streams keyed by (seed, id), so output does not depend
// on scheduling. AuthError propagates; other realizer errors use up the attempt.
inline SkeletonLog run_skeleton(const Scm& scm, const Realizer& realizer, std::size_t id,
                                Skeleton skeleton, const PipelineOptions& opt) {
  SkeletonLog log;
  log.id = id;
  log.skeleton = std::move(skeleton);
  log.realizer_id = realizer.id();
  RngStream realizer_rng(opt.seed, id, RngStream::kRealizer);
  RngStream extractor_rng(opt.seed, id, RngStream::kExtractor);
  Prompt prompt = construct_prompt(log.skeleton, scm, opt.templates);
  for (std::size_t k = 1; k <= opt.k_max; ++k) {
    CandidateDocument doc;
    try {
      doc = realizer.realize(prompt, k, realizer_rng);
    } catch (const AuthError&) {
      throw;
    } catch (const RealizerError& e) {
      log.attempts.push_back({k, AttemptOutcome::kError, {}, e.what()});
      continue;
    }
    const ExtractedAssignment extracted =
        opt.extractor_noise > 0.0 ? extract_noisy(doc.text, scm, opt.extractor_noise, extractor_rng)
                                  : extract_exact(doc.text, scm);
    auto mismatches = verify(log.skeleton, extracted, scm);
    if (mismatches.empty()) {
      log.attempts.push_back({k, AttemptOutcome::kAccepted, {}, {}});
      log.accepted_at = k;
      log.document = std::move(doc.text);
      break;
    }
    prompt = append_feedback(prompt, mismatches, opt.templates);
    log.attempts.push_back({k, AttemptOutcome::kMismatch, std::move(mismatches), {}});
  }
  return log;
}

inline PipelineResult run_pipeline(const Scm& scm, const Realizer& realizer,
                                   const PipelineOptions& opt) {
  scm.require_valid();
  if (opt.k_max == 0) throw ConfigError("k_max must be at least 1");
  const std::size_t m = opt.skeletons ? opt.skeletons->size() : opt.m;
  PipelineResult result;
  result.logs.resize(m);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t j = next.fetch_add(1);
      if (j >= m) return;
      try {
        Skeleton s = opt.skeletons ? (*opt.skeletons)[j] : sample_skeleton_at(scm, opt.seed, j);
        const Realizer& r = opt.selector ? opt.selector(j, s) : realizer;
        result.logs[j] = run_skeleton(scm, r, j, std::move(s), opt);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(opt.threads, 1, std::max<std::size_t>(m, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

// Logs restricted to the given skeleton ids.
inline std::vector<SkeletonLog> select_logs(std::span<const SkeletonLog> logs,
                                            std::span<const std::size_t> ids) {
  std::vector<SkeletonLog> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(logs[id]);
  return out;
}

// phi_k: fraction of skeletons accepted within k attempts, k = 1..k_max.
inline std::vector<double> estimate_phi(std::span<const SkeletonLog> logs, std::size_t k_max) {
  if (logs.empty()) throw EmptyLog("no skeletons to estimate from");
  std::vector<double> phi(k_max, 0.0);
  for (const auto& log : logs) {
    if (!log.accepted_at) continue;
    for (std::size_t k = *log.accepted_at; k <= k_max; ++k) phi[k - 1] += 1.0;
  }
  for (auto& p : phi) p /= static_cast<double>(logs.size());
  return phi;
}

// p_k: acceptance rate at attempt k among skeletons still unaccepted after
// k - 1 attempts. Empty where no skeleton reached attempt k.
inline std::vector<std::optional<double>> estimate_hazard(std::span<const SkeletonLog> logs,
                                                          std::size_t k_max) {
  if (logs.empty()) throw EmptyLog("no skeletons to estimate from");
  std::vector<double> reached(k_max, 0.0), succeeded(k_max, 0.0);
  for (const auto& log : logs) {
    for (const auto& a : log.attempts) {
      if (a.k == 0 || a.k > k_max) continue;
      reached[a.k - 1] += 1.0;
      if (a.outcome == AttemptOutcome::kAccepted) succeeded[a.k - 1] += 1.0;
    }
  }
  std::vector<std::optional<double>> out(k_max);
  for (std::size_t k = 0; k < k_max; ++k) {
    if (reached[k] > 0.0) out[k] = succeeded[k] / reached[k];
  }
  return out;
}

// Empirical distribution of accepted skeletons, keyed by joint_key().
inline DiscreteDist accepted_empirical(const Scm& scm, std::span<const SkeletonLog> logs) {
  std::vector<std::uint64_t> keys;
  for (const auto& log : logs) {
    if (log.accepted()) keys.push_back(joint_key(scm, log.skeleton.v));
  }
  if (keys.empty()) throw EmptySample("no accepted skeletons");
  return DiscreteDist::Empirical(keys);
}

}  // namespace causalsynth

#endif  // CAUSALSYNTH_PIPELINE_HPP_
