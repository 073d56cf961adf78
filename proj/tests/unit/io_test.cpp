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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "causalsynth/io/bif.hpp"
#include "causalsynth/io/config.hpp"
#include "causalsynth/io/dataset.hpp"
#include "causalsynth/io/native.hpp"
#include "causalsynth/pipeline.hpp"
#include "causalsynth/stats.hpp"
#include "oracles/diamond.hpp"
#include "oracles/oracles.hpp"

namespace causalsynth::io {
namespace {

const std::filesystem::path kRoot(CAUSALSYNTH_SOURCE_DIR);

std::string Fixture(const char* name) { return read_file(kRoot / "tests" / "fixtures" / name); }
std::string Network(const char* name) { return read_file(kRoot / "networks" / name); }

TEST(ParseBif, Minimal) {
  const Scm s = parse_bif(Fixture("minimal.bif"));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.variable(0).name, "X");
  EXPECT_EQ(s.variable(0).states, (std::vector<std::string>{"on", "off"}));
  EXPECT_EQ(s.variable(0).cpt, (std::vector<std::vector<double>>{{0.3, 0.7}}));
  EXPECT_TRUE(s.valid());
}

TEST(ParseBif, Asia) {
  const Scm s = parse_bif(Network("asia.bif"));
  EXPECT_EQ(s.size(), 8u);
  EXPECT_EQ(s.dag().edge_count(), 8u);
  EXPECT_TRUE(validate(s).empty());
  EXPECT_TRUE(s.dag().has_edge(*s.find("either"), *s.find("dysp")));
  const auto& dysp = s.variable(*s.find("dysp"));
  EXPECT_EQ(dysp.parents, (std::vector<std::string>{"bronc", "either"}));
  // Row (bronc = no, either = yes) is the third in last-parent-fastest order.
  EXPECT_EQ(dysp.cpt[2], (std::vector<double>{0.7, 0.3}));
}

TEST(ParseBif, BundledNetworksAreValid) {
  for (const char* n : {"asia.bif", "cancer.bif", "earthquake.bif", "survey.bif"}) {
    const Scm s = parse_bif(Network(n));
    EXPECT_TRUE(s.valid()) << n;
  }
  EXPECT_EQ(parse_bif(Network("survey.bif")).dag().edge_count(), 6u);
}

TEST(ParseBif, TableFormDefaultCommentsProperties) {
  const BifDocument doc = parse_bif_document(Fixture("table_form.bif"));
  EXPECT_EQ(doc.network_name, "table form");
  const Scm& s = doc.scm;
  EXPECT_EQ(s.variable(0).cpt[0], (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(s.variable(1).cpt[0], (std::vector<double>{0.1, 0.2, 0.7}));
  EXPECT_EQ(s.variable(1).cpt[1], (std::vector<double>{0.4, 0.4, 0.2}));
  const auto& c = s.variable(2).cpt;
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c[0], (std::vector<double>{1, 0}));
  EXPECT_EQ(c[5], (std::vector<double>{0.125, 0.875}));
  EXPECT_EQ(c[3], (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(doc.properties.count("network"), 1u);
  EXPECT_EQ(doc.properties.find("variable A")->second, "position = (10, 20)");
  EXPECT_TRUE(s.valid());
}

TEST(ParseBif, UndeclaredParent) {
  EXPECT_THROW(parse_bif(Fixture("undeclared_parent.bif")), SemanticError);
}

TEST(ParseBif, SyntaxErrorPosition) {
  try {
    parse_bif(Fixture("syntax_error.bif"));
    FAIL() << "expected SyntaxError";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 1u);
    EXPECT_NE(std::string(e.what()).find("';'"), std::string::npos);
  }
}

TEST(ParseBif, MoreSyntaxErrors) {
  struct Case {
    const char* text;
    std::size_t line, col;
  };
  const std::vector<Case> cases{
      {"variable X {\n  type discrete [ two ] { a, b };\n}", 2, 19},
      {"variable X { type discrete [ 2 ] { a, b }; }\nprobability ( X ) { table 0.5, x; }", 2, 32},
      {"/* never closed", 1, 1},
      {"netwrk x { }", 1, 1},
      {"variable X { type discrete [ 2 ] { a, b }; } @", 1, 46},
  };
  for (const auto& c : cases) {
    try {
      parse_bif(c.text);
      ADD_FAILURE() << "accepted: " << c.text;
    } catch (const SyntaxError& e) {
      EXPECT_EQ(e.line(), c.line) << c.text;
      EXPECT_EQ(e.column(), c.col) << c.text;
    }
  }
}

TEST(ParseBif, SemanticErrors) {
  const std::vector<const char*> cases{
      // State count disagrees with the list.
      "variable X { type discrete [ 3 ] { a, b }; } probability ( X ) { table 0.5, 0.5; }",
      // Table of the wrong length.
      "variable X { type discrete [ 2 ] { a, b }; } probability ( X ) { table 0.5, 0.3, 0.2; }",
      // Missing configuration and no default.
      "variable X { type discrete [ 2 ] { a, b }; } variable Y { type discrete [ 2 ] { c, d }; }"
      "probability ( X ) { table 0.5, 0.5; } probability ( Y | X ) { (a) 0.5, 0.5; }",
      // Unknown parent state.
      "variable X { type discrete [ 2 ] { a, b }; } variable Y { type discrete [ 2 ] { c, d }; }"
      "probability ( X ) { table 0.5, 0.5; } probability ( Y | X ) { (a) 0.5, 0.5; (z) 1, 0; }",
      // No probability block.
      "variable X { type discrete [ 2 ] { a, b }; }",
      // Probability for an undeclared variable.
      "probability ( X ) { table 1; }",
      // Declared twice.
      "variable X { type discrete [ 1 ] { a }; } variable X { type discrete [ 1 ] { a }; }",
  };
  for (const char* c : cases) EXPECT_THROW(parse_bif(c), SemanticError) << c;
}

TEST(ParseBif, Normalization) {
  EXPECT_THROW(parse_bif(Fixture("unnormalized.bif")), SemanticError);
  const auto doc = parse_bif_document(Fixture("near_normalized.bif"));
  ASSERT_EQ(doc.warnings.size(), 1u);
  const auto& row = doc.scm.variable(0).cpt[0];
  EXPECT_NEAR(row[0] + row[1], 1.0, 1e-15);
  EXPECT_TRUE(doc.scm.valid());
}

TEST(ParseBif, CycleParsesButFailsValidation) {
  const Scm s = parse_bif(Fixture("cyclic.bif"));
  const auto v = validate(s);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, Violation::Kind::kCycle);
}

TEST(PrintBif, RoundTrip) {
  for (const char* n : {"asia.bif", "cancer.bif", "earthquake.bif", "survey.bif"}) {
    const Scm s = parse_bif(Network(n));
    const std::string text = print_bif(s, "x");
    EXPECT_EQ(parse_bif(text), s) << n;
    EXPECT_EQ(print_bif(parse_bif(text), "x"), text) << n;
  }
  const Scm t = parse_bif(Fixture("table_form.bif"));
  EXPECT_EQ(parse_bif(print_bif(t)), t);
}

TEST(PrintBif, RandomNetworksRoundTrip) {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 30; ++rep) {
    const Scm s = oracle::random_scm(gen, 5, 0.5, 4);
    EXPECT_EQ(parse_bif(print_bif(s)), s);
    EXPECT_EQ(parse_native(print_native(s)), s);
  }
}

TEST(Native, RoundTripIsByteStable) {
  const Scm s = parse_bif(Network("asia.bif"));
  const std::string once = print_native(s);
  const std::string twice = print_native(parse_native(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(parse_native(once), s);
}

TEST(Native, BundledFilesMatchBif) {
  EXPECT_EQ(parse_native(Network("asia.json")), parse_bif(Network("asia.bif")));
  EXPECT_EQ(print_native(parse_bif(Network("asia.bif"))), Network("asia.json"));
  EXPECT_EQ(parse_native(Network("diamond4.json")), oracle::diamond_scm());
}

TEST(Native, RowLengthErrorNamesVariable) {
  try {
    parse_native(Fixture("bad_row_length.json"));
    FAIL() << "expected JsonSchemaError";
  } catch (const JsonSchemaError& e) {
    EXPECT_EQ(e.path(), "$.variables[1].cpt[0]");
    EXPECT_NE(std::string(e.what()).find("'Y'"), std::string::npos);
  }
}

TEST(Native, SchemaErrors) {
  auto path_of = [](const char* text) {
    try {
      parse_native(text);
    } catch (const JsonSchemaError& e) {
      return e.path();
    }
    return std::string("accepted");
  };
  EXPECT_EQ(path_of("{"), "$");
  EXPECT_EQ(path_of("[]"), "$");
  EXPECT_EQ(path_of(R"({"format": "other", "variables": []})"), "$.format");
  EXPECT_EQ(path_of(R"({"vars": []})"), "$");
  EXPECT_EQ(path_of(R"({"variables": [{"name": 3}]})"), "$.variables[0].name");
  EXPECT_EQ(path_of(R"({"variables": [{"name": "X", "states": ["a", 1], "cpt": []}]})"),
            "$.variables[0].states[1]");
  EXPECT_EQ(path_of(R"({"variables": [{"name": "X", "states": ["a"], "cpt": [["x"]]}]})"),
            "$.variables[0].cpt[0][0]");
  EXPECT_EQ(path_of(R"({"variables": [{"name": "X", "states": ["a"], "parents": ["Q"], "cpt": [[1]]}]})"),
            "$.variables[0].parents");
  EXPECT_EQ(path_of(R"({"variables": [{"name": "X", "states": ["a"], "cpt": [[1], [1]]}]})"),
            "$.variables[0].cpt");
}

PipelineResult SmallRun(std::size_t m) {
  const Scm s = parse_bif(Network("asia.bif"));
  BackdoorChannelConfig cfg;
  for (const auto& v : s.variables()) cfg.prior.emplace(v.name, "no");
  cfg.base_compliance = 0.5;
  PipelineOptions opt;
  opt.m = m;
  opt.k_max = 3;
  opt.seed = 21;
  return run_pipeline(s, BackdoorRealizer(cfg), opt);
}

TEST(Dataset, RecordsRoundTrip) {
  const Scm s = parse_bif(Network("asia.bif"));
  const auto res = SmallRun(300);
  std::stringstream ss;
  write_records(ss, s, {"records", "abc", {}}, res.logs);
  const auto [header, rows] = read_records(ss, s);
  EXPECT_EQ(header.kind, "records");
  EXPECT_EQ(header.config_hash, "abc");
  ASSERT_EQ(rows.size(), res.accepted_count());
  std::size_t r = 0;
  for (const auto& log : res.logs) {
    if (!log.accepted()) continue;
    EXPECT_EQ(rows[r].id, log.id);
    EXPECT_EQ(rows[r].skeleton.v, log.skeleton.v);
    EXPECT_EQ(rows[r].skeleton.u, log.skeleton.u);  // bit-exact
    EXPECT_EQ(rows[r].document, log.document);
    EXPECT_EQ(rows[r].attempts_used, *log.accepted_at);
    EXPECT_EQ(rows[r].realizer_id, "backdoor");
    // Replaying the stored noise reproduces the stored states.
    EXPECT_EQ(replay(s, rows[r].skeleton.u), rows[r].skeleton.v);
    ++r;
  }
}

TEST(Dataset, HistoryRoundTrip) {
  const Scm s = parse_bif(Network("asia.bif"));
  const auto res = SmallRun(300);
  ASSERT_GT(res.failed_count(), 0u);
  std::stringstream ss;
  write_history(ss, s, {"attempts", "h", {}}, res.logs, true);
  const auto [header, logs] = read_history(ss, s);
  ASSERT_EQ(logs.size(), res.logs.size());
  for (std::size_t j = 0; j < logs.size(); ++j) {
    EXPECT_EQ(logs[j].id, j);
    EXPECT_EQ(logs[j].accepted_at, res.logs[j].accepted_at);
    EXPECT_EQ(logs[j].skeleton.u, res.logs[j].skeleton.u);
    ASSERT_EQ(logs[j].attempts.size(), res.logs[j].attempts.size());
    for (std::size_t a = 0; a < logs[j].attempts.size(); ++a) {
      EXPECT_EQ(logs[j].attempts[a].k, res.logs[j].attempts[a].k);
      EXPECT_EQ(logs[j].attempts[a].outcome, res.logs[j].attempts[a].outcome);
      EXPECT_EQ(logs[j].attempts[a].mismatches, res.logs[j].attempts[a].mismatches);
    }
  }
  EXPECT_EQ(estimate_phi(logs, 3), estimate_phi(res.logs, 3));

  std::stringstream cov;
  write_history(cov, s, {"coverage", "h", {}}, res.logs, false);
  EXPECT_EQ(read_history(cov, s).second.size(), res.failed_count());
}

TEST(Dataset, NoisePrintedWithSeventeenDigits) {
  const Scm s = oracle::diamond_scm();
  const Skeleton sk{{0, 0, 0, 0}, {0.1, 0.2, 1.0 / 3.0, 0.9999999999999999}};
  const std::string line = skeleton_line(s, 4, sk);
  EXPECT_NE(line.find("\"A\":0.10000000000000001"), std::string::npos) << line;
  EXPECT_NE(line.find("\"C\":0.33333333333333331"), std::string::npos) << line;
  std::stringstream ss;
  const std::vector<SkeletonRow> rows{{4, sk}};
  write_skeletons(ss, s, {"skeletons", "", {}}, rows);
  EXPECT_EQ(read_skeletons(ss, s).second[0].skeleton.u, sk.u);
}

TEST(Dataset, TruncatedLineNamesLineNumber) {
  const Scm s = oracle::diamond_scm();
  std::stringstream ss;
  std::vector<SkeletonRow> rows;
  for (std::size_t j = 0; j < 3; ++j) rows.push_back({j, sample_skeleton_at(s, 1, j)});
  write_skeletons(ss, s, {"skeletons", "", {}}, rows);
  std::string text = ss.str();
  text.resize(text.size() - 12);
  std::stringstream cut(text);
  try {
    read_skeletons(cut, s);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Dataset, SchemaErrors) {
  const Scm s = oracle::diamond_scm();
  auto line_of = [&](const std::string& text) -> std::size_t {
    std::stringstream ss(text);
    try {
      read_skeletons(ss, s);
    } catch (const FormatError& e) {
      return e.line();
    }
    return 999;
  };
  const std::string head = header_line({"skeletons", "", {}}) + "\n";
  EXPECT_EQ(line_of(""), 0u);
  EXPECT_EQ(line_of("{\"id\":1}\n"), 1u);
  EXPECT_EQ(line_of(header_line({"records-ish", "", {}}) + "\n"), 1u);
  EXPECT_EQ(line_of(head + "{\"v\":{},\"u\":{}}\n"), 2u);
  EXPECT_EQ(line_of(head + "{\"id\":0,\"v\":{\"A\":\"a0\"},\"u\":{\"A\":0.5}}\n"), 2u);
  EXPECT_EQ(line_of(head + "\n" +
                    "{\"id\":0,\"v\":{\"A\":\"zz\",\"B\":\"b0\",\"C\":\"c0\",\"D\":\"d0\"},"
                    "\"u\":{\"A\":0.5,\"B\":0.5,\"C\":0.5,\"D\":0.5}}\n"),
            3u);
  EXPECT_EQ(line_of(head + "{\"id\":0,\"v\":{\"A\":\"a0\",\"B\":\"b0\",\"C\":\"c0\",\"D\":\"d0\"},"
                           "\"u\":{\"A\":1.5,\"B\":0.5,\"C\":0.5,\"D\":0.5}}\n"),
            2u);
  EXPECT_EQ(line_of(head), 999u);
}

TEST(Config, LoadsAndResolvesPaths) {
  const auto dir = std::filesystem::temp_directory_path() / "causalsynth_io_test";
  std::filesystem::create_directories(dir);
  write_file(dir / "net.bif", Network("asia.bif"));
  write_file(dir / "run.json", R"({"network": "net.bif", "m": 50, "seed": 3, "k_max": 4,
      "realizer": {"type": "backdoor", "prior": "marginal_mode", "base_compliance": 0.7},
      "output": {"dataset": "out/d.jsonl"}})");
  const RunConfig c = load_config(dir / "run.json");
  EXPECT_EQ(c.network, (dir / "net.bif").lexically_normal());
  EXPECT_EQ(c.output.dataset, (dir / "out" / "d.jsonl").lexically_normal());
  EXPECT_EQ(c.m, 50u);
  EXPECT_EQ(c.k_max, 4u);
  EXPECT_EQ(c.realizer.kind, RealizerKind::kBackdoor);
  EXPECT_TRUE(c.realizer.prior_from_mode);
  EXPECT_DOUBLE_EQ(c.realizer.backdoor.base_compliance, 0.7);
  EXPECT_DOUBLE_EQ(c.alpha, 0.05);

  const auto cfg = resolve_backdoor(c.realizer, load_network(c.network));
  EXPECT_EQ(cfg.prior.at("asia"), "no");
  EXPECT_EQ(cfg.prior.at("smoke"), "yes");  // 0.5/0.5 tie goes to the first state
  EXPECT_EQ(cfg.prior.at("dysp"), "no");

  // The hash ignores output paths but follows the network contents.
  RunConfig moved = c;
  moved.output.dataset = "elsewhere.jsonl";
  EXPECT_EQ(config_hash(moved), config_hash(c));
  RunConfig reseeded = c;
  reseeded.seed = 4;
  EXPECT_NE(config_hash(reseeded), config_hash(c));
  const std::string before = config_hash(c);
  write_file(dir / "net.bif", Network("cancer.bif"));
  EXPECT_NE(config_hash(c), before);
  std::filesystem::remove_all(dir);
}

TEST(Config, ValidationErrors) {
  const std::vector<const char*> bad{
      R"({"m": 5})",
      R"({"network": "x.bif", "k_max": 0})",
      R"({"network": "x.bif", "alpha": 1.5})",
      R"({"network": "x.bif", "typicality_quantile": 0})",
      R"({"network": "x.bif", "seeed": 1})",
      R"({"network": "x.bif", "m": -3})",
      R"({"network": "x.bif", "m": "ten"})",
      R"({"network": "x.bif", "realizer": {"type": "oracle"}})",
      R"({"network": "x.bif", "realizer": {"type": "backdoor", "base_compliance": 1.2}})",
      R"({"network": "x.bif", "realizer": {"type": "http"}})",
      R"({"network": "x.bif", "realizer": {"type": "backdoor", "prior": 3}})",
      R"({"network": "x.bif", "endpoint": {"url": ""}})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(parse_config(nlohmann::json::parse(text), "."), ConfigError) << text;
  }
}

TEST(Config, ExplicitPriorChecked) {
  RealizerConfig r;
  r.kind = RealizerKind::kBackdoor;
  r.backdoor.prior = {{"X", "maybe"}};
  const Scm s = parse_bif(Fixture("minimal.bif"));
  EXPECT_THROW(resolve_backdoor(r, s), UnknownState);
  r.backdoor.prior = {};
  EXPECT_THROW(resolve_backdoor(r, s), PriorMissingVariable);
  r.backdoor.prior = {{"X", "off"}};
  r.target_phi1 = 0.85;
  // P(X = on) = 0.3 is discordant, so 0.7 + 0.3 c0 = 0.85.
  EXPECT_NEAR(resolve_backdoor(r, s).base_compliance, 0.5, 1e-9);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

}  // namespace
}  // namespace causalsynth::io
