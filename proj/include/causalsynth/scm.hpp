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

#ifndef CAUSALSYNTH_SCM_HPP_
#define CAUSALSYNTH_SCM_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalsynth/error.hpp"
#include "causalsynth/graph.hpp"
#include "causalsynth/rng.hpp"

namespace causalsynth {

inline constexpr double kRowSumTolerance = 1e-9;

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// A discrete endogenous variable with its conditional probability table.
// cpt has one row per parent configuration, row-major over `parents` in
// declared order (the last parent varies fastest), and each row is indexed by
// `states` in declared order.
struct Variable {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> cpt;

  std::optional<std::size_t> state_index(std::string_view label) const {
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (states[s] == label) return s;
    }
    return std::nullopt;
  }

  friend bool operator==(const Variable&, const Variable&) = default;
};

struct Violation {
  enum class Kind {
    kCycle,
    kNormalization,
    kProbabilityRange,
    kRowCount,
    kRowLength,
    kStateCount,
    kDuplicateState,
  };

  Kind kind;
  std::string variable;
  std::string detail;

  static std::string_view KindName(Kind k) {
    switch (k) {
      case Kind::kCycle: return "CycleViolation";
      case Kind::kNormalization: return "NormalizationViolation";
      case Kind::kProbabilityRange: return "ProbabilityRangeViolation";
      case Kind::kRowCount: return "RowCountViolation";
      case Kind::kRowLength: return "RowLengthViolation";
      case Kind::kStateCount: return "StateCountViolation";
      case Kind::kDuplicateState: return "DuplicateStateViolation";
    }
    return "Violation";
  }

  std::string to_string() const {
    return std::string(KindName(kind)) + " [" + variable + "]: " + detail;
  }
};

// One generated unit: state indices v and exogenous noise u, both aligned with
// Scm::variables().
struct Skeleton {
  std::vector<std::size_t> v;
  std::vector<double> u;

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

using Assignments = std::map<std::string, std::string, std::less<>>;

// Discrete SCM with one uniform exogenous noise term per variable. Each
// mechanism is the inverse CDF of its CPT row: u in [0, 1) selects the state
// whose right-open cumulative interval contains it.
//
// Construction trims names and state labels and resolves parent names; it
// does not reject cyclic graphs or bad CPTs. Those surface as violations, and
// the sampling entry points refuse to run on an invalid model.
class Scm {
 public:
  Scm() = default;

  explicit Scm(std::vector<Variable> variables)
      : variables_(std::move(variables)) {
    std::vector<std::string> names;
    names.reserve(variables_.size());
    for (auto& var : variables_) {
      var.name = trim(var.name);
      for (auto& s : var.states) s = trim(s);
      for (auto& p : var.parents) p = trim(p);
      names.push_back(var.name);
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& var : variables_) {
      for (const auto& p : var.parents) edges.emplace_back(p, var.name);
    }
    try {
      dag_ = Dag(std::move(names), edges);
    } catch (const UnknownNode& e) {
      throw SemanticError(std::string("undeclared parent: ") + e.what());
    }

    parent_index_.resize(variables_.size());
    strides_.resize(variables_.size());
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& var = variables_[i];
      auto& idx = parent_index_[i];
      for (const auto& p : var.parents) idx.push_back(dag_.index_of(p));
      auto& stride = strides_[i];
      stride.assign(idx.size(), 1);
      for (std::size_t k = idx.size(); k-- > 1;) {
        stride[k - 1] = stride[k] * variables_[idx[k]].states.size();
      }
    }
    violations_ = ComputeViolations();
    if (violations_.empty()) order_ = topological_order(dag_);
  }

  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const Variable& variable(std::size_t i) const { return variables_.at(i); }
  std::size_t size() const noexcept { return variables_.size(); }
  const Dag& dag() const noexcept { return dag_; }

  std::optional<std::size_t> find(std::string_view name) const {
    return dag_.find(name);
  }
  std::size_t index_of(std::string_view name) const {
    auto i = dag_.find(name);
    if (!i) throw UnknownVariable(std::string(name));
    return *i;
  }
  std::size_t state_index(std::size_t var, std::string_view label) const {
    auto s = variables_.at(var).state_index(trim(label));
    if (!s) throw UnknownState(variables_[var].name, std::string(label));
    return *s;
  }
  std::size_t cardinality(std::size_t var) const {
    return variables_.at(var).states.size();
  }
  const std::vector<std::size_t>& parent_indices(std::size_t var) const {
    return parent_index_.at(var);
  }

  const std::vector<Violation>& violations() const noexcept {
    return violations_;
  }
  bool valid() const noexcept { return violations_.empty(); }

  void require_valid() const {
    if (valid()) return;
    std::string msg = "invalid SCM:";
    for (const auto& v : violations_) msg += "\n  " + v.to_string();
    throw ValidationError(msg);
  }

  // Topological order (indices). Only meaningful on a valid model.
  const std::vector<std::size_t>& order() const {
    require_valid();
    return order_;
  }

  // CPT row of `var` selected by the parent states in the full assignment v.
  std::size_t row_index(std::size_t var, std::span<const std::size_t> v) const {
    const auto& idx = parent_index_[var];
    const auto& stride = strides_[var];
    std::size_t row = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) row += v[idx[k]] * stride[k];
    return row;
  }

  // Inverse-CDF mechanism on a CPT row. Falls back to the last state with
  // positive mass when rounding leaves the row total just under u.
  static std::size_t invert_row(std::span<const double> row, double u) {
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t s = 0; s < row.size(); ++s) {
      if (row[s] > 0.0) last_positive = s;
      cumulative += row[s];
      if (u < cumulative) return s;
    }
    return last_positive;
  }

  std::size_t mechanism(std::size_t var, std::span<const std::size_t> v,
                        double u) const {
    return invert_row(variables_[var].cpt[row_index(var, v)], u);
  }

  // Saturates at the maximum uint64 value.
  std::uint64_t joint_state_count() const noexcept {
    std::uint64_t total = 1;
    for (const auto& var : variables_) {
      const std::uint64_t k = var.states.size();
      if (k != 0 && total > std::numeric_limits<std::uint64_t>::max() / k) {
        return std::numeric_limits<std::uint64_t>::max();
      }
      total *= k;
    }
    return total;
  }

  friend bool operator==(const Scm& a, const Scm& b) {
    return a.variables_ == b.variables_;
  }

 private:
  std::vector<Violation> ComputeViolations() const {
    std::vector<Violation> out;
    using K = Violation::Kind;
    try {
      topological_order(dag_);
    } catch (const CycleError& e) {
      out.push_back({K::kCycle, e.node(), e.what()});
    }
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& var = variables_[i];
      if (var.states.size() < 2) {
        out.push_back({K::kStateCount, var.name,
                       "needs at least 2 states, has " +
                           std::to_string(var.states.size())});
      }
      for (std::size_t a = 0; a < var.states.size(); ++a) {
        for (std::size_t b = a + 1; b < var.states.size(); ++b) {
          if (var.states[a] == var.states[b]) {
            out.push_back({K::kDuplicateState, var.name,
                           "state '" + var.states[a] + "' declared twice"});
          }
        }
      }
      std::size_t rows = 1;
      for (std::size_t p : parent_index_[i]) rows *= variables_[p].states.size();
      if (var.cpt.size() != rows) {
        out.push_back({K::kRowCount, var.name,
                       "cpt has " + std::to_string(var.cpt.size()) +
                           " rows, expected " + std::to_string(rows)});
      }
      for (std::size_t r = 0; r < var.cpt.size(); ++r) {
        const auto& row = var.cpt[r];
        if (row.size() != var.states.size()) {
          out.push_back({K::kRowLength, var.name,
                         "row " + std::to_string(r) + " has " +
                             std::to_string(row.size()) + " entries, expected " +
                             std::to_string(var.states.size())});
          continue;
        }
        double sum = 0.0;
        bool in_range = true;
        for (double p : row) {
          if (!(p >= 0.0 && p <= 1.0)) in_range = false;
          sum += p;
        }
        if (!in_range) {
          out.push_back({K::kProbabilityRange, var.name,
                         "row " + std::to_string(r) +
                             " has an entry outside [0, 1]"});
        }
        if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
          out.push_back({K::kNormalization, var.name,
                         "row " + std::to_string(r) + " sums to " +
                             std::to_string(sum)});
        }
      }
    }
    return out;
  }

  std::vector<Variable> variables_;
  Dag dag_;
  std::vector<std::vector<std::size_t>> parent_index_;
  std::vector<std::vector<std::size_t>> strides_;
  std::vector<Violation> violations_;
  std::vector<std::size_t> order_;
};

inline std::vector<Violation> validate(const Scm& scm) {
  return scm.violations();
}

// Mechanism by names. parent_states must cover the variable's parents.
inline std::string mechanism(const Scm& scm, std::string_view variable,
                             const Assignments& parent_states, double u) {
  const std::size_t i = scm.index_of(variable);
  const auto& var = scm.variable(i);
  if (!(u >= 0.0 && u < 1.0)) {
    throw NoiseOutOfRange("noise for '" + var.name + "' must lie in [0, 1)");
  }
  std::vector<std::size_t> v(scm.size(), 0);
  for (std::size_t p : scm.parent_indices(i)) {
    const auto& parent = scm.variable(p).name;
    auto it = parent_states.find(parent);
    if (it == parent_states.end()) {
      throw MissingParentState("no state given for parent '" + parent +
                               "' of '" + var.name + "'");
    }
    v[p] = scm.state_index(p, it->second);
  }
  return var.states[scm.mechanism(i, v, u)];
}

// Runs the mechanisms in topological order on a given noise vector.
inline std::vector<std::size_t> replay(const Scm& scm,
                                       std::span<const double> u) {
  if (u.size() != scm.size()) {
    throw IncompleteNoise("noise vector has " + std::to_string(u.size()) +
                          " entries, model has " + std::to_string(scm.size()) +
                          " variables");
  }
  std::vector<std::size_t> v(scm.size(), 0);
  for (std::size_t i : scm.order()) v[i] = scm.mechanism(i, v, u[i]);
  return v;
}

// Ancestral sampling with retained noise: one fresh uniform per variable,
// drawn in topological order.
inline Skeleton sample_skeleton(const Scm& scm, RngStream& rng) {
  Skeleton s;
  s.v.assign(scm.size(), 0);
  s.u.assign(scm.size(), 0.0);
  for (std::size_t i : scm.order()) {
    s.u[i] = rng.uniform();
    s.v[i] = scm.mechanism(i, s.v, s.u[i]);
  }
  return s;
}

// Skeleton j comes from RngStream(seed, j), so any index can be regenerated
// alone and the dataset does not depend on evaluation order.
inline Skeleton sample_skeleton_at(const Scm& scm, std::uint64_t seed,
                                   std::uint64_t j) {
  RngStream rng(seed, j, RngStream::kSkeleton);
  return sample_skeleton(scm, rng);
}

inline std::vector<Skeleton> sample_dataset(const Scm& scm, std::size_t m,
                                            std::uint64_t seed) {
  scm.require_valid();
  std::vector<Skeleton> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) out.push_back(sample_skeleton_at(scm, seed, j));
  return out;
}

// Resolved do-assignments: (variable index, state index), ascending by variable.
inline std::vector<std::pair<std::size_t, std::size_t>> resolve_assignments(
    const Scm& scm, const Assignments& assignments) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [name, state] : assignments) {
    const std::size_t i = scm.index_of(name);
    out.emplace_back(i, scm.state_index(i, state));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// do(assignments): each target loses its parents and gets the deterministic
// row selecting its assigned state. The input is left untouched.
inline Scm intervene(const Scm& scm, const Assignments& assignments) {
  const auto resolved = resolve_assignments(scm, assignments);
  if (resolved.empty()) return scm;
  std::vector<Variable> vars = scm.variables();
  for (const auto& [i, s] : resolved) {
    auto& var = vars[i];
    var.parents.clear();
    std::vector<double> row(var.states.size(), 0.0);
    row[s] = 1.0;
    var.cpt = {std::move(row)};
  }
  return Scm(std::move(vars));
}

// Abduction is a lookup of the stored noise; action is intervene(); prediction
// replays the mutilated mechanisms on the same u. The returned skeleton keeps
// the factual u, including the unused entries of intervened variables.
inline Skeleton counterfactual(const Scm& scm, const Skeleton& factual,
                               const Assignments& assignments) {
  if (factual.u.size() != scm.size()) {
    throw IncompleteNoise("factual skeleton carries " +
                          std::to_string(factual.u.size()) +
                          " noise values, model has " +
                          std::to_string(scm.size()) + " variables");
  }
  const Scm mutilated = intervene(scm, assignments);
  return Skeleton{replay(mutilated, factual.u), factual.u};
}

// Name-keyed view of a skeleton's assignment.
inline Assignments named_assignment(const Scm& scm, const Skeleton& s) {
  Assignments out;
  for (std::size_t i = 0; i < scm.size(); ++i) {
    out.emplace(scm.variable(i).name, scm.variable(i).states.at(s.v.at(i)));
  }
  return out;
}

// Parses "A=a,B=b" into assignments. Whitespace around tokens is ignored.
inline Assignments parse_assignments(std::string_view text) {
  Assignments out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = trim(text.substr(pos, comma - pos));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("assignment '" + item + "' is not of the form name=state");
      }
      out[trim(std::string_view(item).substr(0, eq))] =
          trim(std::string_view(item).substr(eq + 1));
    }
    pos = comma + 1;
  }
  return out;
}

}  // namespace causalsynth

#endif  // CAUSALSYNTH_SCM_HPP_
