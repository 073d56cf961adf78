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

// Test-only reference implementations. Nothing here calls into the library's
// algorithms beyond its plain data types.

#ifndef CAUSALSYNTH_TESTS_ORACLES_HPP_
#define CAUSALSYNTH_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causalsynth/graph.hpp"
#include "causalsynth/scm.hpp"

namespace causalsynth::oracle {

// d-separation by moralizing the ancestral graph of {x, y} ∪ z.
inline bool moral_d_separated(const Dag& dag, std::size_t x, std::size_t y,
                              const std::vector<std::size_t>& z) {
  const std::size_t n = dag.size();
  std::vector<bool> keep(n, false);
  std::vector<std::size_t> stack = z;
  stack.push_back(x);
  stack.push_back(y);
  while (!stack.empty()) {
    auto a = stack.back();
    stack.pop_back();
    if (keep[a]) continue;
    keep[a] = true;
    for (auto p : dag.parents(a)) stack.push_back(p);
  }
  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (!keep[c]) continue;
    const auto& ps = dag.parents(c);
    for (auto p : ps) {
      adj[p].insert(c);
      adj[c].insert(p);
    }
    for (auto a : ps) {
      for (auto b : ps) {
        if (a != b) adj[a].insert(b);
      }
    }
  }
  std::vector<bool> blocked(n, false);
  for (auto zi : z) blocked[zi] = true;
  std::vector<bool> seen(n, false);
  stack = {x};
  while (!stack.empty()) {
    auto a = stack.back();
    stack.pop_back();
    if (seen[a]) continue;
    seen[a] = true;
    if (a == y) return false;
    for (auto b : adj[a]) {
      if (keep[b] && !blocked[b] && !seen[b]) stack.push_back(b);
    }
  }
  return true;
}

// Random DAG: nodes are shuffled names, edges follow a hidden order.
inline Dag random_dag(std::mt19937_64& gen, std::size_t n, double density) {
  std::vector<std::size_t> hidden(n);
  for (std::size_t i = 0; i < n; ++i) hidden[i] = i;
  std::shuffle(hidden.begin(), hidden.end(), gen);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("N" + std::to_string(i));
  std::bernoulli_distribution coin(density);
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (coin(gen)) edges.emplace_back(names[hidden[a]], names[hidden[b]]);
    }
  }
  return Dag(names, edges);
}

// Random SCM over a random DAG with cardinalities in [2, max_card].
inline Scm random_scm(std::mt19937_64& gen, std::size_t n, double density,
                      std::size_t max_card = 3) {
  Dag dag = random_dag(gen, n, density);
  std::uniform_int_distribution<std::size_t> card(2, max_card);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<std::size_t> cards(n);
  for (auto& c : cards) c = card(gen);
  std::vector<Variable> vars;
  for (std::size_t i = 0; i < n; ++i) {
    Variable v;
    v.name = dag.name(i);
    for (std::size_t s = 0; s < cards[i]; ++s) v.states.push_back("s" + std::to_string(s));
    std::size_t rows = 1;
    for (auto p : dag.parents(i)) {
      v.parents.push_back(dag.name(p));
      rows *= cards[p];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row(cards[i]);
      double total = 0;
      for (auto& x : row) total += (x = gamma(gen) + 1e-3);
      for (auto& x : row) x /= total;
      v.cpt.push_back(row);
    }
    vars.push_back(std::move(v));
  }
  return Scm(std::move(vars));
}

// Exact joint by recursive enumeration straight from the CPT definitions,
// keyed by the full assignment vector.
inline std::map<std::vector<std::size_t>, double> enumerate_joint(const Scm& scm) {
  std::map<std::vector<std::size_t>, double> out;
  const auto& vars = scm.variables();
  std::vector<std::size_t> a(vars.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      double p = 1.0;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        std::size_t row = 0;
        for (const auto& pn : vars[k].parents) {
          std::size_t pi = 0;
          while (vars[pi].name != pn) ++pi;
          row = row * vars[pi].states.size() + a[pi];
        }
        p *= vars[k].cpt[row][a[k]];
      }
      out[a] = p;
      return;
    }
    for (std::size_t s = 0; s < vars[i].states.size(); ++s) {
      a[i] = s;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

// Max |P(x,y,z)P(z) - P(x,z)P(y,z)| over all configurations.
inline double ci_gap(const std::map<std::vector<std::size_t>, double>& joint,
                     std::size_t x, std::size_t y,
                     const std::vector<std::size_t>& z) {
  using Key = std::vector<std::size_t>;
  std::map<Key, double> pxyz, pxz, pyz, pz;
  for (const auto& [a, p] : joint) {
    Key zk;
    for (auto zi : z) zk.push_back(a[zi]);
    Key kxyz = zk, kxz = zk, kyz = zk;
    kxyz.push_back(a[x]);
    kxyz.push_back(a[y]);
    kxz.push_back(a[x]);
    kyz.push_back(a[y]);
    pxyz[kxyz] += p;
    pxz[kxz] += p;
    pyz[kyz] += p;
    pz[zk] += p;
  }
  double gap = 0;
  for (const auto& [k, p] : pxyz) {
    Key zk(k.begin(), k.end() - 2);
    Key kxz = zk, kyz = zk;
    kxz.push_back(k[k.size() - 2]);
    kyz.push_back(k.back());
    gap = std::max(gap, std::abs(p * pz[zk] - pxz[kxz] * pyz[kyz]));
  }
  return gap;
}

}  // namespace causalsynth::oracle

#endif  // CAUSALSYNTH_TESTS_ORACLES_HPP_
