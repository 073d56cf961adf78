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

#include "causalsynth/pipeline.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "causalsynth/channel.hpp"

namespace causalsynth {
namespace {

Scm Schema() {
  return Scm({{"Smoker", {"yes", "no"}, {}, {{0.3, 0.7}}},
              {"Cancer", {"False", "True"}, {"Smoker"}, {{0.9, 0.1}, {0.99, 0.01}}},
              {"Xray", {"pos", "neg", "unk"}, {"Cancer"}, {{0.2, 0.7, 0.1}, {0.9, 0.05, 0.05}}}});
}

Skeleton Sk(std::vector<std::size_t> v) { return {std::move(v), {}}; }

TEST(ExtractExact, CanonicalLines) {
  const auto ex = extract_exact("intro\nSmoker = yes\nCancer=True\n  Xray =  unk  \n", Schema());
  EXPECT_EQ(ex.values[0], "yes");
  EXPECT_EQ(ex.values[1], "True");
  EXPECT_EQ(ex.values[2], "unk");
  EXPECT_TRUE(ex.unparsed_lines.empty());
  EXPECT_TRUE(verify(Sk({0, 1, 2}), ex, Schema()).empty());
}

TEST(ExtractExact, NamesFoldCaseButLabelsDoNot) {
  const auto ex = extract_exact("smoker = yes\nCANCER = true\n", Schema());
  EXPECT_EQ(ex.values[0], "yes");
  EXPECT_EQ(ex.values[1], "true");
  const auto mm = verify(Sk({0, 1, 0}), ex, Schema());
  ASSERT_EQ(mm.size(), 2u);
  EXPECT_EQ(mm[0], (Mismatch{"Cancer", "True", "true"}));
  EXPECT_EQ(mm[1], (Mismatch{"Xray", "pos", std::nullopt}));
}

TEST(ExtractExact, MarkupIsStripped) {
  const auto ex = extract_exact("- **Smoker** = `no`\n* Cancer = False\n", Schema());
  EXPECT_EQ(ex.values[0], "no");
  EXPECT_EQ(ex.values[1], "False");
}

TEST(ExtractExact, ConflictsAndUnparsed) {
  const auto ex =
      extract_exact("Smoker = yes\nSmoker = no\nCancer = True\nCancer = True\nAge = 40\n", Schema());
  EXPECT_TRUE(ex.conflicting[0]);
  EXPECT_FALSE(ex.conflicting[1]);
  ASSERT_EQ(ex.unparsed_lines.size(), 1u);
  EXPECT_EQ(ex.unparsed_lines[0], "Age = 40");
  const auto mm = verify(Sk({0, 1, 1}), ex, Schema());
  ASSERT_EQ(mm.size(), 2u);
  EXPECT_EQ(mm[0].variable, "Smoker");
  EXPECT_EQ(mm[0].extracted, "yes | no");
  EXPECT_EQ(mm[1].variable, "Xray");
}

TEST(ExtractExact, EmptyDocument) {
  const auto ex = extract_exact("", Schema());
  EXPECT_EQ(verify(Sk({0, 0, 0}), ex, Schema()).size(), 3u);
}

TEST(Verify, SchemaMismatch) {
  const auto ex = extract_exact("", Schema());
  EXPECT_THROW(verify(Sk({0, 0}), ex, Schema()), SchemaMismatch);
}

TEST(ExtractNoisy, ZeroNoiseIsExact) {
  const std::string doc = "Smoker = yes\nCancer = True\nXray = neg\n";
  RngStream rng(1, 0, RngStream::kExtractor);
  for (int t = 0; t < 100; ++t) {
    const auto ex = extract_noisy(doc, Schema(), 0.0, rng);
    EXPECT_TRUE(verify(Sk({0, 1, 1}), ex, Schema()).empty());
  }
}

TEST(ExtractNoisy, ErrorRateAndUniformity) {
  const std::string doc = "Smoker = yes\nCancer = True\nXray = neg\n";
  RngStream rng(2, 0, RngStream::kExtractor);
  const int n = 100000;
  int wrong_smoker = 0, xray_pos = 0, xray_unk = 0;
  for (int t = 0; t < n; ++t) {
    const auto ex = extract_noisy(doc, Schema(), 0.2, rng);
    wrong_smoker += *ex.values[0] != "yes";
    xray_pos += *ex.values[2] == "pos";
    xray_unk += *ex.values[2] == "unk";
  }
  const double sd = std::sqrt(0.2 * 0.8 / n);
  EXPECT_NEAR(wrong_smoker / double(n), 0.2, 5 * sd);
  EXPECT_NEAR(xray_pos / double(n), 0.1, 5 * std::sqrt(0.1 * 0.9 / n));
  EXPECT_NEAR(xray_unk / double(n), 0.1, 5 * std::sqrt(0.1 * 0.9 / n));
  RngStream r2(3, 0, RngStream::kExtractor);
  EXPECT_THROW(extract_noisy(doc, Schema(), 1.5, r2), ValidationError);
}

// Realizer driven by a callback, for scripting failures.
class ScriptedRealizer final : public Realizer {
 public:
  using Fn = std::function<CandidateDocument(const Prompt&, std::size_t, RngStream&)>;
  explicit ScriptedRealizer(Fn fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "scripted"; }
  CandidateDocument realize(const Prompt& p, std::size_t k, RngStream& rng) const override {
    return fn_(p, k, rng);
  }

 private:
  Fn fn_;
};

TEST(RunPipeline, TemplateAcceptsEverythingFirstTry) {
  PipelineOptions opt;
  opt.m = 500;
  opt.seed = 11;
  const auto res = run_pipeline(Schema(), TemplateRealizer(), opt);
  ASSERT_EQ(res.logs.size(), 500u);
  EXPECT_EQ(res.accepted_count(), 500u);
  for (std::size_t j = 0; j < res.logs.size(); ++j) {
    const auto& log = res.logs[j];
    EXPECT_EQ(log.id, j);
    EXPECT_EQ(log.accepted_at, 1u);
    EXPECT_EQ(log.skeleton.v, sample_skeleton_at(Schema(), 11, j).v);
    EXPECT_EQ(log.realizer_id, "template");
  }
  const auto phi = estimate_phi(res.logs, 10);
  for (double p : phi) EXPECT_EQ(p, 1.0);
}

TEST(RunPipeline, AlwaysWrongExhaustsBudget) {
  ScriptedRealizer wrong([](const Prompt&, std::size_t k, RngStream&) {
    return CandidateDocument{"nothing here", k, "scripted"};
  });
  PipelineOptions opt;
  opt.m = 20;
  opt.k_max = 4;
  const auto res = run_pipeline(Schema(), wrong, opt);
  EXPECT_EQ(res.accepted_count(), 0u);
  EXPECT_EQ(res.failed_count(), 20u);
  for (const auto& log : res.logs) {
    ASSERT_EQ(log.attempts.size(), 4u);
    for (const auto& a : log.attempts) {
      EXPECT_EQ(a.outcome, AttemptOutcome::kMismatch);
      EXPECT_EQ(a.mismatches.size(), 3u);
    }
  }
}

TEST(RunPipeline, FeedbackGrowsByOnePerFailedAttempt) {
  std::atomic<int> violations{0};
  ScriptedRealizer fn([&](const Prompt& p, std::size_t k, RngStream&) {
    if (p.feedback_blocks.size() != k - 1) ++violations;
    if (k == 3) return realize_template(p, k);
    return CandidateDocument{"Smoker = maybe", k, "scripted"};
  });
  PipelineOptions opt;
  opt.m = 50;
  const auto res = run_pipeline(Schema(), fn, opt);
  EXPECT_EQ(violations.load(), 0);
  for (const auto& log : res.logs) EXPECT_EQ(log.accepted_at, 3u);
  const auto hz = estimate_hazard(res.logs, 10);
  EXPECT_EQ(hz[0], 0.0);
  EXPECT_EQ(hz[1], 0.0);
  EXPECT_EQ(hz[2], 1.0);
  EXPECT_FALSE(hz[3].has_value());
}

TEST(RunPipeline, TransportErrorsConsumeAttemptsWithoutFeedback) {
  ScriptedRealizer flaky([](const Prompt& p, std::size_t k, RngStream&) -> CandidateDocument {
    if (k == 1) throw NetworkError("connection reset");
    if (!p.feedback_blocks.empty()) throw MalformedResponse("unexpected feedback");
    return realize_template(p, k);
  });
  PipelineOptions opt;
  opt.m = 10;
  const auto res = run_pipeline(Schema(), flaky, opt);
  for (const auto& log : res.logs) {
    ASSERT_EQ(log.attempts.size(), 2u);
    EXPECT_EQ(log.attempts[0].outcome, AttemptOutcome::kError);
    EXPECT_EQ(log.attempts[0].error, "connection reset");
    EXPECT_EQ(log.accepted_at, 2u);
  }
}

TEST(RunPipeline, AuthErrorIsFatal) {
  ScriptedRealizer denied([](const Prompt&, std::size_t, RngStream&) -> CandidateDocument {
    throw AuthError("401 unauthorized");
  });
  PipelineOptions opt;
  opt.m = 10;
  opt.threads = 4;
  EXPECT_THROW(run_pipeline(Schema(), denied, opt), AuthError);
}

TEST(RunPipeline, ZeroBudgetRejected) {
  PipelineOptions opt;
  opt.m = 1;
  opt.k_max = 0;
  EXPECT_THROW(run_pipeline(Schema(), TemplateRealizer(), opt), ConfigError);
}

BackdoorChannelConfig Prior() {
  BackdoorChannelConfig cfg;
  cfg.prior = {{"Smoker", "no"}, {"Cancer", "False"}, {"Xray", "neg"}};
  cfg.base_compliance = 0.6;
  cfg.feedback_gain = 0.2;
  cfg.compliance_cap = 0.99;
  return cfg;
}

TEST(RunPipeline, ConservationAndThreadIndependence) {
  const BackdoorRealizer r(Prior());
  PipelineOptions opt;
  opt.m = 3000;
  opt.k_max = 2;
  opt.seed = 9;
  opt.extractor_noise = 0.02;
  const auto a = run_pipeline(Schema(), r, opt);
  opt.threads = 8;
  const auto b = run_pipeline(Schema(), r, opt);
  EXPECT_EQ(a.accepted_count() + a.failed_count(), 3000u);
  EXPECT_GT(a.failed_count(), 0u);
  ASSERT_EQ(a.logs.size(), b.logs.size());
  for (std::size_t j = 0; j < a.logs.size(); ++j) {
    EXPECT_EQ(a.logs[j].accepted_at, b.logs[j].accepted_at);
    EXPECT_EQ(a.logs[j].document, b.logs[j].document);
    EXPECT_EQ(a.logs[j].skeleton.u, b.logs[j].skeleton.u);
  }
}

TEST(RunPipeline, BackdoorMatchesClosedForm) {
  const auto cfg = Prior();
  const BackdoorRealizer r(cfg);
  PipelineOptions opt;
  opt.m = 20000;
  opt.k_max = 5;
  opt.seed = 4;
  opt.threads = 4;
  const Scm s = Schema();
  const auto res = run_pipeline(s, r, opt);
  const auto phi = estimate_phi(res.logs, 5);
  // Expected pooled phi: average the exact profile over sampled skeletons.
  std::vector<double> expect(5, 0.0);
  for (const auto& log : res.logs) {
    const auto prof = backdoor_profile(cfg, discordance(s, log.skeleton, cfg), 5);
    for (std::size_t k = 0; k < 5; ++k) expect[k] += prof.phi[k] / opt.m;
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const double sd = std::sqrt(expect[k] * (1 - expect[k]) / opt.m) + 1e-6;
    EXPECT_NEAR(phi[k], expect[k], 5 * sd) << k;
  }
}

TEST(RunPipeline, SelectorRoutesPerSkeleton) {
  const BackdoorRealizer never([] {
    auto c = Prior();
    c.base_compliance = 0.0;
    c.feedback_gain = 0.0;
    return c;
  }());
  const TemplateRealizer always;
  PipelineOptions opt;
  opt.m = 40;
  opt.k_max = 2;
  opt.selector = [&](std::size_t j, const Skeleton&) -> const Realizer& {
    return j % 2 ? static_cast<const Realizer&>(never) : always;
  };
  const Scm s = Schema();
  const auto res = run_pipeline(s, always, opt);
  for (const auto& log : res.logs) {
    const bool concordant = discordance(s, log.skeleton, Prior()) == 0;
    EXPECT_EQ(log.accepted(), log.id % 2 == 0 || concordant) << log.id;
    EXPECT_EQ(log.realizer_id, log.id % 2 ? "backdoor" : "template");
  }
}

TEST(RunPipeline, ExplicitSkeletons) {
  PipelineOptions opt;
  opt.skeletons = std::vector<Skeleton>{Sk({0, 0, 0}), Sk({1, 1, 2})};
  const auto res = run_pipeline(Schema(), TemplateRealizer(), opt);
  ASSERT_EQ(res.logs.size(), 2u);
  EXPECT_EQ(res.logs[1].skeleton.v, (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_TRUE(res.logs[1].accepted());
}

SkeletonLog Hand(std::size_t id, std::optional<std::size_t> at, std::size_t tried) {
  SkeletonLog log;
  log.id = id;
  for (std::size_t k = 1; k <= tried; ++k) {
    log.attempts.push_back(
        {k, at && *at == k ? AttemptOutcome::kAccepted : AttemptOutcome::kMismatch, {}, {}});
  }
  log.accepted_at = at;
  return log;
}

TEST(Estimators, HandBuiltLog) {
  const std::vector<SkeletonLog> logs{Hand(0, 1, 1), Hand(1, 2, 2), Hand(2, std::nullopt, 3),
                                      Hand(3, 3, 3)};
  const auto phi = estimate_phi(logs, 3);
  EXPECT_DOUBLE_EQ(phi[0], 0.25);
  EXPECT_DOUBLE_EQ(phi[1], 0.5);
  EXPECT_DOUBLE_EQ(phi[2], 0.75);
  const auto hz = estimate_hazard(logs, 3);
  EXPECT_DOUBLE_EQ(*hz[0], 0.25);
  EXPECT_DOUBLE_EQ(*hz[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*hz[2], 0.5);
  const std::vector<std::size_t> ids{1, 2};
  EXPECT_DOUBLE_EQ(estimate_phi(select_logs(logs, ids), 3)[1], 0.5);
  EXPECT_THROW(estimate_phi(std::vector<SkeletonLog>{}, 3), EmptyLog);
  EXPECT_THROW(estimate_hazard(std::vector<SkeletonLog>{}, 3), EmptyLog);
}

}  // namespace
}  // namespace causalsynth
