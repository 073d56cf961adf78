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

#ifndef CAUSALSYNTH_CHANNEL_HPP_
#define CAUSALSYNTH_CHANNEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalsynth/error.hpp"
#include "causalsynth/rng.hpp"
#include "causalsynth/scm.hpp"
#include "causalsynth/stats.hpp"

namespace causalsynth {

// Replaces every "{key}" in text. Unknown placeholders are left alone.
inline std::string fill_template(std::string text,
                                 const std::map<std::string, std::string, std::less<>>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = text.find(token); pos != std::string::npos;
         pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

// Wording of the realization prompt. The shipped resources/prompts/*.txt files
// hold the same text; Load() swaps in an edited copy.
struct PromptTemplates {
  std::string system;
  std::string cot;
  // Placeholder: {attempt}.
  std::string feedback_header;
  // Placeholders: {name}, {expected}, {extracted}.
  std::string feedback_line;

  static PromptTemplates Default() {
    return {
        "You are a constrained data generator. You turn a list of variable "
        "assignments into one realistic record. Every assignment below is a "
        "fixed fact about this record. Do not change, omit, soften or "
        "contradict any of them, even if they seem unusual.\n",
        "Before writing the narrative, output a constraint checklist with one "
        "line per constraint in the form `name = value`, using exactly the "
        "names and values given above. Then write the narrative. Do not use "
        "the `=` character anywhere else.\n",
        "Your previous draft (attempt {attempt}) did not match the required "
        "values. Apply these corrections:\n",
        "- {name} = {extracted}\n+ {name} = {expected}\n"
        "  expected {expected}, you wrote {extracted} --- rewrite accordingly\n",
    };
  }

  static PromptTemplates Load(const std::filesystem::path& dir) {
    auto read = [&](const char* file) {
      std::ifstream in(dir / file, std::ios::binary);
      if (!in) throw IoError("cannot read prompt template " + (dir / file).string());
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    return {read("system.txt"), read("cot.txt"), read("feedback_header.txt"),
            read("feedback_line.txt")};
  }
};

struct Constraint {
  std::size_t index = 0;  // 1-based
  std::string variable;
  std::string state;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

// One disagreement between a skeleton and what was extracted from a document.
// `extracted` is the raw text found for the variable, empty when missing.
struct Mismatch {
  std::string variable;
  std::string expected;
  std::optional<std::string> extracted;

  friend bool operator==(const Mismatch&, const Mismatch&) = default;
};

struct FeedbackBlock {
  std::string text;
  std::vector<Mismatch> mismatches;

  friend bool operator==(const FeedbackBlock&, const FeedbackBlock&) = default;
};

inline constexpr std::string_view kMissingValue = "(nothing)";

struct Prompt {
  std::string system_text;
  std::vector<Constraint> constraint_lines;
  std::string cot_instruction;
  std::vector<FeedbackBlock> feedback_blocks;

  static std::string render_constraint(const Constraint& c) {
    return "[C" + std::to_string(c.index) + "] " + c.variable + ": " + c.state +
           " --- You MUST include this exact value";
  }

  // The user message: constraint block, checklist instruction, feedback.
  std::string user_text() const {
    std::string out = "Hard constraints:\n";
    for (const auto& c : constraint_lines) out += render_constraint(c) + "\n";
    out += "\n" + cot_instruction;
    for (const auto& block : feedback_blocks) out += "\n" + block.text;
    return out;
  }

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

inline Prompt construct_prompt(const Skeleton& skeleton, const Scm& schema,
                               const PromptTemplates& templates = PromptTemplates::Default()) {
  if (skeleton.v.size() != schema.size()) {
    throw SchemaMismatch("skeleton has " + std::to_string(skeleton.v.size()) +
                         " values, schema has " + std::to_string(schema.size()) + " variables");
  }
  Prompt prompt;
  prompt.system_text = templates.system;
  prompt.cot_instruction = templates.cot;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema.variable(i);
    if (skeleton.v[i] >= var.states.size()) {
      throw SchemaMismatch("state index " + std::to_string(skeleton.v[i]) +
                           " out of range for '" + var.name + "'");
    }
    prompt.constraint_lines.push_back({i + 1, var.name, var.states[skeleton.v[i]]});
  }
  return prompt;
}

// Returns a copy with one more feedback block listing each mismatch as a
// -/+ correction.
inline Prompt append_feedback(const Prompt& prompt, std::span<const Mismatch> mismatches,
                              const PromptTemplates& templates = PromptTemplates::Default()) {
  if (mismatches.empty()) throw EmptyMismatchList("feedback needs at least one mismatch");
  FeedbackBlock block;
  block.text = fill_template(templates.feedback_header,
                             {{"attempt", std::to_string(prompt.feedback_blocks.size() + 1)}});
  for (const auto& m : mismatches) {
    block.text += fill_template(
        templates.feedback_line,
        {{"name", m.variable},
         {"expected", m.expected},
         {"extracted", m.extracted ? *m.extracted : std::string(kMissingValue)}});
  }
  block.mismatches.assign(mismatches.begin(), mismatches.end());
  Prompt next = prompt;
  next.feedback_blocks.push_back(std::move(block));
  return next;
}

struct CandidateDocument {
  std::string text;
  std::size_t attempt_index = 1;
  std::string realizer_id;
};

// A realization channel. Implementations must be safe to call concurrently
// from several threads; all per-call randomness comes from `rng`.
class Realizer {
 public:
  virtual ~Realizer() = default;
  virtual std::string id() const = 0;
  virtual CandidateDocument realize(const Prompt& prompt, std::size_t attempt,
                                    RngStream& rng) const = 0;
};

// Canonical document layout shared by the simulated channels: one
// `name = state` line per constraint inside a fixed narrative wrapper.
inline std::string render_canonical_document(
    const std::vector<std::pair<std::string, std::string>>& lines) {
  std::string out = "Synthetic record\nConstraint checklist:\n";
  for (const auto& [name, state] : lines) out += name + " = " + state + "\n";
  out += "Narrative: the record above lists every attribute of this unit.\n";
  return out;
}

inline CandidateDocument realize_template(const Prompt& prompt, std::size_t attempt = 1) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const auto& c : prompt.constraint_lines) lines.emplace_back(c.variable, c.state);
  return {render_canonical_document(lines), attempt, "template"};
}

// Ideal channel: always writes the constraints verbatim.
class TemplateRealizer final : public Realizer {
 public:
  std::string id() const override { return "template"; }
  CandidateDocument realize(const Prompt& prompt, std::size_t attempt,
                            RngStream&) const override {
    return realize_template(prompt, attempt);
  }
};

// Simulated channel with a pretraining prior. Each constrained variable is
// written as required with probability
//
//   c_i(k) = min(cap, c0 + g (k - 1) [i named in an earlier feedback block])
//
// and as its prior state otherwise, independently per variable.
struct BackdoorChannelConfig {
  std::map<std::string, std::string, std::less<>> prior;
  double base_compliance = 0.6;
  double feedback_gain = 0.2;
  double compliance_cap = 0.99;

  void validate() const {
    if (!(base_compliance >= 0.0 && base_compliance <= 1.0)) {
      throw ConfigError("base_compliance must lie in [0, 1]");
    }
    if (!(feedback_gain >= 0.0)) throw ConfigError("feedback_gain must be >= 0");
    if (!(compliance_cap > 0.0 && compliance_cap <= 1.0)) {
      throw ConfigError("compliance_cap must lie in (0, 1]");
    }
    if (base_compliance > compliance_cap) {
      throw ConfigError("base_compliance must not exceed compliance_cap");
    }
  }

  double compliance(std::size_t attempt, bool had_feedback) const {
    const double boost =
        had_feedback ? feedback_gain * static_cast<double>(attempt - 1) : 0.0;
    return std::min(compliance_cap, base_compliance + boost);
  }
};

inline CandidateDocument realize_backdoor(const Prompt& prompt, const BackdoorChannelConfig& cfg,
                                          std::size_t attempt, RngStream& rng) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const auto& c : prompt.constraint_lines) {
    auto prior = cfg.prior.find(c.variable);
    if (prior == cfg.prior.end()) throw PriorMissingVariable(c.variable);
    bool had_feedback = false;
    for (const auto& block : prompt.feedback_blocks) {
      for (const auto& m : block.mismatches) had_feedback |= m.variable == c.variable;
    }
    // One draw per constraint, used or not, keeps the stream layout fixed.
    const bool comply = rng.chance(cfg.compliance(attempt, had_feedback));
    lines.emplace_back(c.variable, comply ? c.state : prior->second);
  }
  return {render_canonical_document(lines), attempt, "backdoor"};
}

class BackdoorRealizer final : public Realizer {
 public:
  explicit BackdoorRealizer(BackdoorChannelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
  }
  std::string id() const override { return "backdoor"; }
  CandidateDocument realize(const Prompt& prompt, std::size_t attempt,
                            RngStream& rng) const override {
    return realize_backdoor(prompt, cfg_, attempt, rng);
  }
  const BackdoorChannelConfig& config() const noexcept { return cfg_; }

 private:
  BackdoorChannelConfig cfg_;
};

// Realizability under the backdoor channel with an exact verifier.
// phi[k-1] = P(accepted within k attempts); hazard[k-1] = p_k, the success
// probability of attempt k given that attempts 1..k-1 failed.
struct RealizabilityProfile {
  std::vector<double> phi;
  std::vector<double> hazard;
};

inline constexpr std::size_t kMaxDiscordantVariables = 16;

// Exact profile for a skeleton whose constrained states disagree with the
// prior on `discordant` variables. Only those can fail; the state tracked
// across attempts is which of them have been named in feedback.
inline RealizabilityProfile backdoor_profile(const BackdoorChannelConfig& cfg,
                                             std::size_t discordant, std::size_t k_max) {
  if (discordant > kMaxDiscordantVariables) {
    throw StateSpaceTooLarge("closed form supports at most 16 discordant variables");
  }
  const std::size_t subsets = std::size_t{1} << discordant;
  std::vector<double> alive(subsets, 0.0);  // P(all failed so far, feedback set)
  alive[0] = 1.0;
  RealizabilityProfile out;
  double accepted = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::vector<double> next(subsets, 0.0);
    double success = 0.0;
    const double survive = 1.0 - accepted;
    for (std::size_t s = 0; s < subsets; ++s) {
      if (alive[s] == 0.0) continue;
      std::vector<double> c(discordant);
      for (std::size_t i = 0; i < discordant; ++i) {
        c[i] = cfg.compliance(k, (s >> i) & 1u);
      }
      for (std::size_t wrong = 0; wrong < subsets; ++wrong) {
        double p = alive[s];
        for (std::size_t i = 0; i < discordant; ++i) {
          p *= ((wrong >> i) & 1u) ? 1.0 - c[i] : c[i];
        }
        if (wrong == 0) {
          success += p;
        } else {
          next[s | wrong] += p;
        }
      }
    }
    accepted += success;
    out.phi.push_back(accepted);
    out.hazard.push_back(survive > 0.0 ? success / survive : 1.0);
    alive = std::move(next);
  }
  return out;
}

// Number of variables whose skeleton state differs from the channel prior.
inline std::size_t discordance(const Scm& scm, const Skeleton& s, const BackdoorChannelConfig& cfg) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < scm.size(); ++i) {
    const auto& var = scm.variable(i);
    auto prior = cfg.prior.find(var.name);
    if (prior == cfg.prior.end()) throw PriorMissingVariable(var.name);
    d += var.states[s.v[i]] != prior->second;
  }
  return d;
}

// Base compliance c0 in [0, cap] whose pooled first-attempt success
// sum_v P(v) c0^d(v) equals target, by bisection (the pooled rate is
// increasing in c0). The joint must be keyed by joint_key().
inline double calibrate_base_compliance(const Scm& scm, const DiscreteDist& joint,
                                        const BackdoorChannelConfig& cfg, double target) {
  std::vector<std::pair<double, std::size_t>> mass;
  for (std::size_t k = 0; k < joint.size(); ++k) {
    Skeleton s{joint_assignment(scm, joint.support()[k]), {}};
    mass.emplace_back(joint.probs()[k], discordance(scm, s, cfg));
  }
  auto pooled = [&](double c0) {
    double total = 0.0;
    for (const auto& [p, d] : mass) total += p * std::pow(c0, static_cast<double>(d));
    return total;
  };
  double lo = 0.0, hi = cfg.compliance_cap;
  if (target <= pooled(lo)) return lo;
  if (target >= pooled(hi)) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pooled(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace causalsynth

#endif  // CAUSALSYNTH_CHANNEL_HPP_
