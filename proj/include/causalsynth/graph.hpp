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

#ifndef CAUSALSYNTH_GRAPH_HPP_
#define CAUSALSYNTH_GRAPH_HPP_

#include <algorithm>
#include <array>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalsynth/error.hpp"

namespace causalsynth {

// Directed graph over named nodes. Construction enforces unique, nonempty
// names and declared endpoints; acyclicity is checked by topological_order(),
// so a cyclic graph can still be represented and reported on.
//
// Node order is declaration order and is the tie-break everywhere.
class Dag {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Dag() = default;

  Dag(std::vector<std::string> nodes,
      const std::vector<std::pair<std::string, std::string>>& edges)
      : nodes_(std::move(nodes)) {
    IndexNodes();
    std::vector<Edge> indexed;
    indexed.reserve(edges.size());
    for (const auto& [from, to] : edges) {
      indexed.emplace_back(index_of(from), index_of(to));
    }
    SetEdges(std::move(indexed));
  }

  static Dag FromIndices(std::vector<std::string> nodes,
                         std::vector<Edge> edges) {
    Dag dag;
    dag.nodes_ = std::move(nodes);
    dag.IndexNodes();
    for (const auto& [from, to] : edges) {
      if (from >= dag.nodes_.size() || to >= dag.nodes_.size()) {
        throw UnknownNode("#" + std::to_string(std::max(from, to)));
      }
    }
    dag.SetEdges(std::move(edges));
    return dag;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::string& name(std::size_t i) const { return nodes_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view name) const {
    auto found = find(name);
    if (!found) throw UnknownNode(std::string(name));
    return *found;
  }

  const std::vector<std::size_t>& parents(std::size_t i) const {
    return parents_.at(i);
  }
  const std::vector<std::size_t>& children(std::size_t i) const {
    return children_.at(i);
  }

  // Edges sorted by (parent, child) declaration index.
  const std::vector<Edge>& edge_indices() const noexcept { return edges_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  std::vector<std::pair<std::string, std::string>> edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(edges_.size());
    for (const auto& [from, to] : edges_) {
      out.emplace_back(nodes_[from], nodes_[to]);
    }
    return out;
  }

  bool has_edge(std::size_t from, std::size_t to) const {
    return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
  }

  friend bool operator==(const Dag& a, const Dag& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  void IndexNodes() {
    index_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].empty()) throw ValidationError("empty node name");
      if (!index_.emplace(nodes_[i], i).second) {
        throw ValidationError("duplicate node name '" + nodes_[i] + "'");
      }
    }
  }

  void SetEdges(std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    parents_.assign(nodes_.size(), {});
    children_.assign(nodes_.size(), {});
    for (const auto& [from, to] : edges_) {
      children_[from].push_back(to);
      parents_[to].push_back(from);
    }
    for (auto& p : parents_) std::sort(p.begin(), p.end());
  }

  std::vector<std::string> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

// Kahn's algorithm; among ready nodes the earliest declared goes first.
inline std::vector<std::size_t> topological_order(const Dag& dag) {
  const std::size_t n = dag.size();
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [from, to] : dag.edge_indices()) ++indegree[to];
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<bool> done(n, false);
  // Quadratic scan keeps the tie rule obvious; networks here are small.
  for (std::size_t round = 0; round < n; ++round) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && indegree[i] == 0) {
        pick = i;
        break;
      }
    }
    if (pick == n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!done[i]) throw CycleError(dag.name(i));
      }
    }
    done[pick] = true;
    order.push_back(pick);
    for (std::size_t c : dag.children(pick)) --indegree[c];
  }
  return order;
}

inline std::vector<std::string> topological_sort(const Dag& dag) {
  std::vector<std::string> names;
  for (std::size_t i : topological_order(dag)) names.push_back(dag.name(i));
  return names;
}

inline bool is_acyclic(const Dag& dag) {
  try {
    topological_order(dag);
    return true;
  } catch (const CycleError&) {
    return false;
  }
}

// mask[j] is true iff j is reachable from x by a nonempty directed path.
inline std::vector<bool> descendant_mask(const Dag& dag, std::size_t x) {
  std::vector<bool> seen(dag.size(), false);
  std::vector<std::size_t> stack(dag.children(x).begin(),
                                 dag.children(x).end());
  while (!stack.empty()) {
    std::size_t n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = true;
    for (std::size_t c : dag.children(n)) {
      if (!seen[c]) stack.push_back(c);
    }
  }
  // x itself only lands in the mask through a cycle; exclude it regardless.
  seen[x] = false;
  return seen;
}

// Descendants of x in declaration order, excluding x.
inline std::vector<std::string> descendants(const Dag& dag,
                                            std::string_view x) {
  const auto mask = descendant_mask(dag, dag.index_of(x));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(dag.name(i));
  }
  return out;
}

// Bayes-ball reachability: is there an active trail from x to y given z?
inline bool d_separated(const Dag& dag, std::size_t x, std::size_t y,
                        const std::vector<std::size_t>& z) {
  const std::size_t n = dag.size();
  if (x >= n || y >= n) throw UnknownNode("#" + std::to_string(std::max(x, y)));
  if (x == y) throw OverlapError("d-separation query with x == y");
  std::vector<bool> observed(n, false);
  for (std::size_t zi : z) {
    if (zi >= n) throw UnknownNode("#" + std::to_string(zi));
    observed[zi] = true;
  }
  if (observed[x] || observed[y]) {
    throw OverlapError("query variable '" +
                       dag.name(observed[x] ? x : y) +
                       "' is in the conditioning set");
  }

  // Z and its ancestors: colliders in this set are open.
  std::vector<bool> z_ancestor(n, false);
  std::vector<std::size_t> stack(z.begin(), z.end());
  while (!stack.empty()) {
    std::size_t a = stack.back();
    stack.pop_back();
    if (z_ancestor[a]) continue;
    z_ancestor[a] = true;
    for (std::size_t p : dag.parents(a)) stack.push_back(p);
  }

  enum Dir : int { kUp = 0, kDown = 1 };  // up: arrived from a child
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<std::size_t, Dir>> queue{{x, kUp}};
  while (!queue.empty()) {
    auto [node, dir] = queue.front();
    queue.pop_front();
    if (visited[node][dir]) continue;
    visited[node][dir] = true;
    if (node == y && !observed[node]) return false;
    if (dir == kUp && !observed[node]) {
      for (std::size_t p : dag.parents(node)) queue.emplace_back(p, kUp);
      for (std::size_t c : dag.children(node)) queue.emplace_back(c, kDown);
    } else if (dir == kDown) {
      if (!observed[node]) {
        for (std::size_t c : dag.children(node)) queue.emplace_back(c, kDown);
      }
      if (z_ancestor[node]) {
        for (std::size_t p : dag.parents(node)) queue.emplace_back(p, kUp);
      }
    }
  }
  return true;
}

inline bool d_separated(const Dag& dag, std::string_view x, std::string_view y,
                        const std::vector<std::string>& z) {
  std::vector<std::size_t> zi;
  zi.reserve(z.size());
  for (const auto& name : z) zi.push_back(dag.index_of(name));
  return d_separated(dag, dag.index_of(x), dag.index_of(y), zi);
}

// One conditional independence statement x ⊥ y | z. x < y; z ascending.
struct DSeparation {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> z;

  friend bool operator==(const DSeparation&, const DSeparation&) = default;
};

// All d-separated (x, y | z) with x < y and |z| <= max_cond_size. Ordered by x,
// then y, then |z|, then z lexicographically (all in declaration order).
inline std::vector<DSeparation> enumerate_d_separations(
    const Dag& dag, std::size_t max_cond_size) {
  std::vector<DSeparation> out;
  const std::size_t n = dag.size();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != x && i != y) rest.push_back(i);
      }
      const std::size_t limit = std::min(max_cond_size, rest.size());
      for (std::size_t k = 0; k <= limit; ++k) {
        // Lexicographic k-combinations of rest.
        std::vector<std::size_t> pick(k);
        for (std::size_t i = 0; i < k; ++i) pick[i] = i;
        while (true) {
          std::vector<std::size_t> z(k);
          for (std::size_t i = 0; i < k; ++i) z[i] = rest[pick[i]];
          if (d_separated(dag, x, y, z)) out.push_back({x, y, std::move(z)});
          std::size_t i = k;
          while (i > 0 && pick[i - 1] == rest.size() - k + i - 1) --i;
          if (i == 0) break;
          ++pick[i - 1];
          for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
        }
      }
    }
  }
  return out;
}

// Removes every edge into a target.
inline Dag mutilate(const Dag& dag, const std::vector<std::size_t>& targets) {
  std::vector<bool> cut(dag.size(), false);
  for (std::size_t t : targets) {
    if (t >= dag.size()) throw UnknownNode("#" + std::to_string(t));
    cut[t] = true;
  }
  std::vector<Dag::Edge> kept;
  for (const auto& e : dag.edge_indices()) {
    if (!cut[e.second]) kept.push_back(e);
  }
  return Dag::FromIndices(dag.nodes(), std::move(kept));
}

inline Dag mutilate(const Dag& dag, const std::vector<std::string>& targets) {
  std::vector<std::size_t> idx;
  for (const auto& t : targets) idx.push_back(dag.index_of(t));
  return mutilate(dag, idx);
}

// Structural Hamming distance: per unordered node pair, a missing, extra or
// reversed edge each costs 1. Nodes are matched by name.
inline std::size_t shd(const Dag& a, const Dag& b) {
  if (a.size() != b.size()) {
    throw NodeSetMismatch("graphs have " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " nodes");
  }
  std::vector<std::size_t> to_b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto j = b.find(a.name(i));
    if (!j) throw NodeSetMismatch("node '" + a.name(i) + "' missing from graph");
    to_b[i] = *j;
  }
  std::size_t distance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool a_ij = a.has_edge(i, j), a_ji = a.has_edge(j, i);
      const bool b_ij = b.has_edge(to_b[i], to_b[j]);
      const bool b_ji = b.has_edge(to_b[j], to_b[i]);
      if (a_ij != b_ij || a_ji != b_ji) ++distance;
    }
  }
  return distance;
}

}  // namespace causalsynth

#endif  // CAUSALSYNTH_GRAPH_HPP_
