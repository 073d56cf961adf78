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

#ifndef CAUSALSYNTH_STATS_HPP_
#define CAUSALSYNTH_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "causalsynth/error.hpp"
#include "causalsynth/graph.hpp"
#include "causalsynth/rng.hpp"
#include "causalsynth/scm.hpp"

namespace causalsynth {

// Finite distribution over integer outcome keys, sorted by key.
class DiscreteDist {
 public:
  DiscreteDist() = default;

  // Duplicated keys are merged. Throws unless probabilities are nonnegative
  // and sum to 1 within 1e-9.
  static DiscreteDist FromPairs(std::vector<std::pair<std::uint64_t, double>> mass) {
    std::sort(mass.begin(), mass.end());
    DiscreteDist d;
    double total = 0.0;
    for (const auto& [key, p] : mass) {
      if (!(p >= 0.0)) throw ValidationError("negative or NaN probability");
      total += p;
      if (!d.support_.empty() && d.support_.back() == key) {
        d.probs_.back() += p;
      } else {
        d.support_.push_back(key);
        d.probs_.push_back(p);
      }
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("distribution sums to " + std::to_string(total));
    }
    return d;
  }

  // Relative frequencies of the given outcomes. Throws on an empty sample.
  static DiscreteDist Empirical(std::span<const std::uint64_t> outcomes) {
    if (outcomes.empty()) throw EmptySample("empirical distribution of no samples");
    std::map<std::uint64_t, std::size_t> counts;
    for (auto k : outcomes) ++counts[k];
    DiscreteDist d;
    const double n = static_cast<double>(outcomes.size());
    for (const auto& [k, c] : counts) {
      d.support_.push_back(k);
      d.probs_.push_back(static_cast<double>(c) / n);
    }
    return d;
  }

  const std::vector<std::uint64_t>& support() const noexcept { return support_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return support_.size(); }

  double prob(std::uint64_t key) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), key);
    if (it == support_.end() || *it != key) return 0.0;
    return probs_[static_cast<std::size_t>(it - support_.begin())];
  }

 private:
  std::vector<std::uint64_t> support_;
  std::vector<double> probs_;
};

// Inverse-CDF sampler over a DiscreteDist.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const DiscreteDist& dist) : support_(dist.support()) {
    double c = 0.0;
    for (double p : dist.probs()) cumulative_.push_back(c += p);
  }

  std::uint64_t draw(RngStream& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<std::uint64_t> support_;
  std::vector<double> cumulative_;
};

inline constexpr std::uint64_t kDefaultJointStateCap = std::uint64_t{1} << 20;

// Mixed-radix index of a full assignment; the first declared variable is the
// most significant digit.
inline std::uint64_t joint_key(const Scm& scm, std::span<const std::size_t> v) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < scm.size(); ++i) key = key * scm.cardinality(i) + v[i];
  return key;
}

inline std::vector<std::size_t> joint_assignment(const Scm& scm, std::uint64_t key) {
  std::vector<std::size_t> v(scm.size());
  for (std::size_t i = scm.size(); i-- > 0;) {
    v[i] = static_cast<std::size_t>(key % scm.cardinality(i));
    key /= scm.cardinality(i);
  }
  return v;
}

// Product of CPT entries along an assignment.
inline double assignment_probability(const Scm& scm, std::span<const std::size_t> v) {
  double p = 1.0;
  for (std::size_t i = 0; i < scm.size(); ++i) {
    p *= scm.variable(i).cpt[scm.row_index(i, v)][v[i]];
  }
  return p;
}

inline double log_likelihood(const Scm& scm, std::span<const std::size_t> v) {
  double ll = 0.0;
  for (std::size_t i = 0; i < scm.size(); ++i) {
    ll += std::log(scm.variable(i).cpt[scm.row_index(i, v)][v[i]]);
  }
  return ll;
}

// Full joint by enumeration, keyed by joint_key().
inline DiscreteDist exact_joint(const Scm& scm,
                                std::uint64_t cap = kDefaultJointStateCap) {
  scm.require_valid();
  const std::uint64_t total = scm.joint_state_count();
  if (total > cap) {
    throw StateSpaceTooLarge("joint has " + std::to_string(total) +
                             " states, cap is " + std::to_string(cap));
  }
  std::vector<std::pair<std::uint64_t, double>> mass;
  mass.reserve(static_cast<std::size_t>(total));
  std::vector<std::size_t> v(scm.size(), 0);
  for (std::uint64_t key = 0; key < total; ++key) {
    mass.emplace_back(key, assignment_probability(scm, v));
    for (std::size_t i = scm.size(); i-- > 0;) {
      if (++v[i] < scm.cardinality(i)) break;
      v[i] = 0;
    }
  }
  return DiscreteDist::FromPairs(std::move(mass));
}

// Marginal of one variable from the joint.
inline std::vector<double> marginal(const Scm& scm, const DiscreteDist& joint,
                                    std::size_t var) {
  std::vector<double> out(scm.cardinality(var), 0.0);
  for (std::size_t k = 0; k < joint.size(); ++k) {
    out[joint_assignment(scm, joint.support()[k])[var]] += joint.probs()[k];
  }
  return out;
}

// Rows of state indices with per-column cardinalities.
struct DiscreteData {
  std::vector<std::size_t> cardinalities;
  std::vector<std::vector<std::size_t>> rows;

  std::size_t size() const noexcept { return rows.size(); }

  static DiscreteData FromSkeletons(const Scm& scm, std::span<const Skeleton> skeletons) {
    DiscreteData d;
    for (std::size_t i = 0; i < scm.size(); ++i) d.cardinalities.push_back(scm.cardinality(i));
    d.rows.reserve(skeletons.size());
    for (const auto& s : skeletons) d.rows.push_back(s.v);
    return d;
  }
};

struct CITestResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  bool rejected = false;
  bool skipped = false;
  std::string skip_reason;
  std::size_t strata_used = 0;
  std::size_t strata_dropped = 0;
};

inline constexpr double kMinExpectedCount = 5.0;

// Upper tail of the chi-square distribution.
inline double chi2_survival(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

// Pearson chi-square test of x ⊥ y | z: one contingency table per observed z
// configuration, statistics and degrees of freedom summed over strata. A
// stratum with any expected cell below 5 is dropped; if every stratum drops,
// the result is skipped rather than reported.
inline CITestResult ci_test_chi2(const DiscreteData& data, std::size_t x, std::size_t y,
                                 const std::vector<std::size_t>& z, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  CITestResult result;
  const std::size_t cx = data.cardinalities.at(x);
  const std::size_t cy = data.cardinalities.at(y);

  std::vector<bool> seen_x(cx, false), seen_y(cy, false);
  std::size_t distinct_x = 0, distinct_y = 0;
  for (const auto& row : data.rows) {
    if (!seen_x[row[x]]) seen_x[row[x]] = true, ++distinct_x;
    if (!seen_y[row[y]]) seen_y[row[y]] = true, ++distinct_y;
  }
  if (distinct_x < 2 || distinct_y < 2) {
    result.skipped = true;
    result.skip_reason = "InsufficientData: fewer than 2 distinct values";
    return result;
  }

  std::map<std::uint64_t, std::vector<double>> strata;
  for (const auto& row : data.rows) {
    std::uint64_t key = 0;
    for (std::size_t zi : z) key = key * data.cardinalities[zi] + row[zi];
    auto& table = strata[key];
    if (table.empty()) table.assign(cx * cy, 0.0);
    table[row[x] * cy + row[y]] += 1.0;
  }

  for (const auto& [key, table] : strata) {
    std::vector<double> rs(cx, 0.0), cs(cy, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < cx; ++i) {
      for (std::size_t j = 0; j < cy; ++j) {
        rs[i] += table[i * cy + j];
        cs[j] += table[i * cy + j];
        n += table[i * cy + j];
      }
    }
    bool keep = true;
    double stat = 0.0;
    for (std::size_t i = 0; i < cx && keep; ++i) {
      for (std::size_t j = 0; j < cy; ++j) {
        const double e = rs[i] * cs[j] / n;
        if (e < kMinExpectedCount) {
          keep = false;
          break;
        }
        const double d = table[i * cy + j] - e;
        stat += d * d / e;
      }
    }
    if (!keep) {
      ++result.strata_dropped;
      continue;
    }
    ++result.strata_used;
    result.statistic += stat;
    result.dof += (cx - 1) * (cy - 1);
  }
  if (result.strata_used == 0) {
    result.skipped = true;
    result.skip_reason = "every stratum has an expected cell below 5";
    return result;
  }
  result.p_value = chi2_survival(result.statistic, static_cast<double>(result.dof));
  result.rejected = result.p_value < alpha;
  return result;
}

struct FprResult {
  std::vector<DSeparation> triples;
  std::vector<CITestResult> results;
  std::size_t rejected = 0;
  std::size_t skipped = 0;
  std::size_t total_implied = 0;  // before subsampling

  std::size_t evaluated() const noexcept { return results.size() - skipped; }
  // Empty when nothing could be evaluated (e.g. a fully connected graph).
  std::optional<double> rate() const {
    if (evaluated() == 0) return std::nullopt;
    return static_cast<double>(rejected) / static_cast<double>(evaluated());
  }
};

// Fraction of the graph's d-separations that the data rejects. When the
// implied set exceeds max_tests, a seeded uniform subset (kept in enumeration
// order) is tested instead.
inline FprResult fpr(const DiscreteData& data, const Dag& dag, double alpha,
                     std::size_t max_cond_size,
                     std::optional<std::size_t> max_tests = std::nullopt,
                     std::uint64_t seed = 0) {
  if (data.cardinalities.size() != dag.size()) {
    throw SchemaMismatch("data has " + std::to_string(data.cardinalities.size()) +
                         " columns, graph has " + std::to_string(dag.size()) + " nodes");
  }
  FprResult out;
  auto triples = enumerate_d_separations(dag, max_cond_size);
  out.total_implied = triples.size();
  if (max_tests && triples.size() > *max_tests) {
    // Partial Fisher-Yates over indices, then restore order.
    std::vector<std::size_t> idx(triples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RngStream rng(seed, 0, RngStream::kSubsample);
    for (std::size_t i = 0; i < *max_tests; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    idx.resize(*max_tests);
    std::sort(idx.begin(), idx.end());
    std::vector<DSeparation> picked;
    for (auto i : idx) picked.push_back(std::move(triples[i]));
    triples = std::move(picked);
  }
  for (const auto& t : triples) {
    auto r = ci_test_chi2(data, t.x, t.y, t.z, alpha);
    if (r.skipped) ++out.skipped;
    if (r.rejected) ++out.rejected;
    out.results.push_back(std::move(r));
  }
  out.triples = std::move(triples);
  return out;
}

// Rejection rate of marginal tests on adjacent pairs, which are d-connected
// under any conditioning set. Complements fpr() as a power check.
inline FprResult dependence_detection(const DiscreteData& data, const Dag& dag,
                                      double alpha) {
  FprResult out;
  for (const auto& [p, c] : dag.edge_indices()) {
    DSeparation t{std::min(p, c), std::max(p, c), {}};
    auto r = ci_test_chi2(data, t.x, t.y, t.z, alpha);
    if (r.skipped) ++out.skipped;
    if (r.rejected) ++out.rejected;
    out.results.push_back(std::move(r));
    out.triples.push_back(std::move(t));
  }
  out.total_implied = out.triples.size();
  return out;
}

// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (lambda < 1.18) {
    // P(K <= l) = sqrt(2 pi) / l * sum_j exp(-(2j-1)^2 pi^2 / (8 l^2))
    double sum = 0.0;
    for (int j = 1; j <= 50; ++j) {
      const double t = (2.0 * j - 1.0) * pi / lambda;
      const double term = std::exp(-t * t / 8.0);
      sum += term;
      if (term < 1e-17) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value
// Q_KS(sqrt(n m / (n + m)) D). Ties are handled by evaluating both ECDFs only
// after every copy of a value has been consumed.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("KS test needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

// Total variation distance; supports are merged with zero fill.
inline double tvd(const DiscreteDist& p, const DiscreteDist& q) {
  const auto& ks = p.support();
  const auto& kq = q.support();
  std::size_t i = 0, j = 0;
  double sum = 0.0;
  while (i < ks.size() || j < kq.size()) {
    if (j == kq.size() || (i < ks.size() && ks[i] < kq[j])) {
      sum += p.probs()[i++];
    } else if (i == ks.size() || kq[j] < ks[i]) {
      sum += q.probs()[j++];
    } else {
      sum += std::abs(p.probs()[i++] - q.probs()[j++]);
    }
  }
  return std::min(1.0, 0.5 * sum);
}

struct Chi2Divergence {
  double value = 0.0;
  bool support_violation = false;
};

// Pearson chi-square divergence sum (p - q)^2 / q. Mass of p outside the
// support of q gives +inf with the violation flag set.
inline Chi2Divergence chi2_divergence(const DiscreteDist& p, const DiscreteDist& q) {
  Chi2Divergence out;
  const auto& kp = p.support();
  const auto& kq = q.support();
  std::size_t i = 0, j = 0;
  while (i < kp.size() || j < kq.size()) {
    if (j == kq.size() || (i < kp.size() && kp[i] < kq[j])) {
      if (p.probs()[i] > 0.0) out.support_violation = true;
      ++i;
    } else if (i == kp.size() || kq[j] < kp[i]) {
      out.value += q.probs()[j];  // (0 - q)^2 / q
      ++j;
    } else {
      const double qv = q.probs()[j], pv = p.probs()[i];
      if (qv > 0.0) {
        out.value += (pv - qv) * (pv - qv) / qv;
      } else if (pv > 0.0) {
        out.support_violation = true;
      }
      ++i, ++j;
    }
  }
  if (out.support_violation) out.value = std::numeric_limits<double>::infinity();
  return out;
}

// P_skel reweighted by an acceptance probability and renormalized.
template <typename Phi>
DiscreteDist accepted_distribution(const DiscreteDist& skel, Phi&& phi) {
  std::vector<std::pair<std::uint64_t, double>> mass;
  double z = 0.0;
  for (std::size_t k = 0; k < skel.size(); ++k) {
    const double w = skel.probs()[k] * phi(skel.support()[k]);
    mass.emplace_back(skel.support()[k], w);
    z += w;
  }
  if (!(z > 0.0)) throw ValidationError("acceptance probability is zero everywhere");
  for (auto& [k, w] : mass) w /= z;
  return DiscreteDist::FromPairs(std::move(mass));
}

// Binary entropy in nats.
inline double binary_entropy(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
  if (eps == 0.0 || eps == 1.0) return 0.0;
  return -eps * std::log(eps) - (1.0 - eps) * std::log(1.0 - eps);
}

// eps log(|V| - 1) + H_b(eps), in nats.
inline double fano_bound(double eps, std::size_t cardinality) {
  if (cardinality < 2) throw ValidationError("cardinality must be at least 2");
  const double spread = eps == 0.0 ? 0.0 : eps * std::log(static_cast<double>(cardinality - 1));
  return spread + binary_entropy(eps);
}

// Plug-in estimate of H(V | V_hat) in nats from paired observations.
inline double conditional_entropy(std::span<const std::size_t> truth,
                                  std::span<const std::size_t> estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("sample sizes differ");
  if (truth.empty()) throw EmptySample("conditional entropy of no samples");
  std::map<std::size_t, std::map<std::size_t, double>> joint;
  for (std::size_t i = 0; i < truth.size(); ++i) joint[estimate[i]][truth[i]] += 1.0;
  const double n = static_cast<double>(truth.size());
  double h = 0.0;
  for (const auto& [vh, row] : joint) {
    double total = 0.0;
    for (const auto& [v, c] : row) total += c;
    for (const auto& [v, c] : row) {
      if (c < total) h -= (c / n) * std::log(c / total);
    }
  }
  return h;
}

struct TypicalitySplit {
  std::vector<std::size_t> typical;   // ascending indices
  std::vector<std::size_t> atypical;  // ascending indices
};

inline constexpr double kDefaultTypicalityQuantile = 0.06;

// The ceil(q m) lowest log-likelihood skeletons are atypical; ties go to the
// lower index first.
inline TypicalitySplit typicality_split(std::span<const Skeleton> skeletons, const Scm& scm,
                                        double q = kDefaultTypicalityQuantile) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile must lie in (0, 1)");
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(skeletons.size());
  for (std::size_t j = 0; j < skeletons.size(); ++j) {
    ranked.emplace_back(log_likelihood(scm, skeletons[j].v), j);
  }
  std::sort(ranked.begin(), ranked.end());
  const double m = static_cast<double>(skeletons.size());
  const auto n_atypical = static_cast<std::size_t>(std::ceil(q * m - 1e-9));
  TypicalitySplit out;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    (r < n_atypical ? out.atypical : out.typical).push_back(ranked[r].second);
  }
  std::sort(out.typical.begin(), out.typical.end());
  std::sort(out.atypical.begin(), out.atypical.end());
  return out;
}

// |L| / (|records| + |L|); zero when nothing was attempted.
inline double coverage_failure_rate(std::size_t accepted, std::size_t failed) {
  const std::size_t total = accepted + failed;
  return total == 0 ? 0.0 : static_cast<double>(failed) / static_cast<double>(total);
}

struct StratumPhi {
  double weight = 0.0;  // stratum share of the skeletons
  double phi_first = 0.0;
  double phi_final = 0.0;
};

// Weighted covariance across strata of phi_1 and log(phi_K / phi_1), the
// relative gain from feedback. Empty when a stratum has phi_1 = 0.
inline std::optional<double> feedback_covariance(std::span<const StratumPhi> strata) {
  double w = 0.0, mx = 0.0, my = 0.0;
  for (const auto& s : strata) {
    if (!(s.phi_first > 0.0)) return std::nullopt;
    w += s.weight;
    mx += s.weight * s.phi_first;
    my += s.weight * std::log(s.phi_final / s.phi_first);
  }
  if (!(w > 0.0)) throw ValidationError("strata carry no weight");
  mx /= w;
  my /= w;
  double cov = 0.0;
  for (const auto& s : strata) {
    cov += s.weight * (s.phi_first - mx) * (std::log(s.phi_final / s.phi_first) - my);
  }
  return cov / w;
}

}  // namespace causalsynth

#endif  // CAUSALSYNTH_STATS_HPP_
