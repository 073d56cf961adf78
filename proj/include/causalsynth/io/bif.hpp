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

// Reader and writer for the discrete subset of the Bayesian Interchange
// Format:
//
//   network asia { }
//   variable smoke { type discrete [ 2 ] { yes, no }; }
//   probability ( smoke ) { table 0.5, 0.5; }
//   probability ( lung | smoke ) { (yes) 0.1, 0.9; (no) 0.01, 0.99; }
//
// A `table` entry for a node with parents lists the child state slowest and
// the parent configurations fastest, last parent varying fastest. `default`
// fills configurations that have no explicit row. `property` statements are
// kept verbatim but carry no meaning.

#ifndef CAUSALSYNTH_IO_BIF_HPP_
#define CAUSALSYNTH_IO_BIF_HPP_

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalsynth/error.hpp"
#include "causalsynth/scm.hpp"

namespace causalsynth::io {

// Rows whose sum is off by more than this are rejected; smaller deviations
// above the Scm tolerance are renormalized with a warning.
inline constexpr double kBifRowTolerance = 1e-6;

struct BifDocument {
  std::string network_name;
  Scm scm;
  // Opaque `property` text keyed by block: "network", "variable <name>" or
  // "probability <name>".
  std::multimap<std::string, std::string> properties;
  std::vector<std::string> warnings;
};

namespace bif_detail {

struct Token {
  enum Kind { kWord, kString, kPunct, kEnd } kind = kEnd;
  std::string text;
  std::size_t line = 1, column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  const Token& peek() {
    if (!ahead_) ahead_ = scan();
    return *ahead_;
  }
  Token next() {
    Token t = peek();
    ahead_.reset();
    return t;
  }

  // Raw text up to the next ';', used for property values.
  std::string until_semicolon() {
    ahead_.reset();
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != ';') advance(out);
    return trim(out);
  }

 private:
  void advance(std::string& sink) {
    sink.push_back(src_[pos_]);
    step();
  }
  void step() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) step();
      if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') step();
      } else if (src_.substr(pos_, 2) == "/*") {
        const std::size_t l = line_, c = col_;
        step();
        step();
        while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") step();
        if (pos_ >= src_.size()) throw SyntaxError(l, c, "end of comment '*/'");
        step();
        step();
      } else {
        return;
      }
    }
  }

  static bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == '+';
  }

  Token scan() {
    skip_space_and_comments();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (c == '"') {
      step();
      t.kind = Token::kString;
      while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') advance(t.text);
      if (pos_ >= src_.size() || src_[pos_] != '"') {
        throw SyntaxError(t.line, t.column, "closing '\"'");
      }
      step();
      return t;
    }
    if (word_char(c)) {
      t.kind = Token::kWord;
      while (pos_ < src_.size() && word_char(src_[pos_])) advance(t.text);
      return t;
    }
    if (std::string_view("{}()[]|,;").find(c) != std::string_view::npos) {
      t.kind = Token::kPunct;
      advance(t.text);
      return t;
    }
    throw SyntaxError(t.line, t.column, "a name, number or punctuation");
  }

  std::string_view src_;
  std::size_t pos_ = 0, line_ = 1, col_ = 1;
  std::optional<Token> ahead_;
};

struct RawProbability {
  std::string child;
  std::vector<std::string> parents;
  std::optional<std::vector<double>> table;
  std::optional<std::vector<double>> default_row;
  std::vector<std::pair<std::vector<std::string>, std::vector<double>>> rows;
  std::size_t line = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  BifDocument parse() {
    std::vector<Variable> vars;
    std::map<std::string, std::size_t, std::less<>> index;
    std::vector<RawProbability> probs;
    while (lex_.peek().kind != Token::kEnd) {
      const Token kw = expect_word("'network', 'variable' or 'probability'");
      if (kw.text == "network") {
        doc_.network_name = name("network name");
        block_body("network");
      } else if (kw.text == "variable") {
        Variable v;
        v.name = name("variable name");
        if (index.count(v.name)) throw SemanticError("variable '" + v.name + "' declared twice");
        variable_body(v);
        index.emplace(v.name, vars.size());
        vars.push_back(std::move(v));
      } else if (kw.text == "probability") {
        probs.push_back(probability_block(kw.line));
      } else {
        throw SyntaxError(kw.line, kw.column, "'network', 'variable' or 'probability'");
      }
    }
    std::vector<bool> seen(vars.size(), false);
    for (auto& p : probs) {
      auto it = index.find(p.child);
      if (it == index.end()) {
        throw SemanticError("line " + std::to_string(p.line) +
                            ": probability for undeclared variable '" + p.child + "'");
      }
      if (seen[it->second]) {
        throw SemanticError("variable '" + p.child + "' has two probability blocks");
      }
      seen[it->second] = true;
      fill_cpt(p, vars, index, vars[it->second]);
    }
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (!seen[i]) throw SemanticError("variable '" + vars[i].name + "' has no probability block");
    }
    doc_.scm = Scm(std::move(vars));
    return std::move(doc_);
  }

 private:
  [[noreturn]] static void fail(const Token& t, const std::string& expected) {
    throw SyntaxError(t.line, t.column, expected);
  }

  Token expect_word(const std::string& what) {
    Token t = lex_.next();
    if (t.kind != Token::kWord) fail(t, what);
    return t;
  }
  std::string name(const std::string& what) {
    Token t = lex_.next();
    if (t.kind != Token::kWord && t.kind != Token::kString) fail(t, what);
    return t.text;
  }
  void expect(const char* punct) {
    Token t = lex_.next();
    if (t.kind != Token::kPunct || t.text != punct) fail(t, std::string("'") + punct + "'");
  }
  bool accept(const char* punct) {
    const Token& t = lex_.peek();
    if (t.kind == Token::kPunct && t.text == punct) {
      lex_.next();
      return true;
    }
    return false;
  }
  bool peek_word(const char* w) {
    const Token& t = lex_.peek();
    return t.kind == Token::kWord && t.text == w;
  }

  double number() {
    Token t = lex_.next();
    double value = 0.0;
    if (t.kind == Token::kWord) {
      const char* b = t.text.data();
      const char* e = b + t.text.size();
      auto [ptr, ec] = std::from_chars(b, e, value);
      if (ec == std::errc() && ptr == e) return value;
    }
    fail(t, "a probability");
  }

  // Comma- or space-separated numbers up to ';'.
  std::vector<double> numbers() {
    std::vector<double> out{number()};
    while (!accept(";")) {
      accept(",");
      out.push_back(number());
    }
    return out;
  }

  void property(const std::string& owner) {
    lex_.next();  // 'property'
    doc_.properties.emplace(owner, lex_.until_semicolon());
    expect(";");
  }

  // Network block: only properties.
  void block_body(const std::string& owner) {
    expect("{");
    while (!accept("}")) {
      if (!peek_word("property")) fail(lex_.peek(), "'property' or '}'");
      property(owner);
    }
  }

  void variable_body(Variable& v) {
    expect("{");
    bool typed = false;
    while (!accept("}")) {
      if (peek_word("property")) {
        property("variable " + v.name);
        continue;
      }
      const Token kw = expect_word("'type', 'property' or '}'");
      if (kw.text != "type") fail(kw, "'type', 'property' or '}'");
      const Token kind = expect_word("'discrete'");
      if (kind.text != "discrete") fail(kind, "'discrete'");
      expect("[");
      const Token count = lex_.next();
      std::size_t k = 0;
      auto [ptr, ec] = std::from_chars(count.text.data(), count.text.data() + count.text.size(), k);
      if (count.kind != Token::kWord || ec != std::errc() ||
          ptr != count.text.data() + count.text.size()) {
        fail(count, "a state count");
      }
      expect("]");
      expect("{");
      v.states.push_back(name("a state name"));
      while (!accept("}")) {
        expect(",");
        v.states.push_back(name("a state name"));
      }
      expect(";");
      if (v.states.size() != k) {
        throw SemanticError("variable '" + v.name + "' declares " + std::to_string(k) +
                            " states but lists " + std::to_string(v.states.size()));
      }
      typed = true;
    }
    if (!typed) throw SemanticError("variable '" + v.name + "' has no type");
  }

  RawProbability probability_block(std::size_t line) {
    RawProbability p;
    p.line = line;
    expect("(");
    p.child = name("variable name");
    if (accept("|")) {
      p.parents.push_back(name("parent name"));
      while (!accept(")")) {
        expect(",");
        p.parents.push_back(name("parent name"));
      }
    } else {
      expect(")");
    }
    expect("{");
    while (!accept("}")) {
      if (peek_word("property")) {
        property("probability " + p.child);
      } else if (peek_word("table")) {
        lex_.next();
        p.table = numbers();
      } else if (peek_word("default")) {
        lex_.next();
        p.default_row = numbers();
      } else if (accept("(")) {
        std::vector<std::string> config{name("a parent state")};
        while (!accept(")")) {
          expect(",");
          config.push_back(name("a parent state"));
        }
        p.rows.emplace_back(std::move(config), numbers());
      } else {
        fail(lex_.peek(), "'table', 'default', '(' or '}'");
      }
    }
    return p;
  }

  void fill_cpt(const RawProbability& p, const std::vector<Variable>& vars,
                const std::map<std::string, std::size_t, std::less<>>& index, Variable& child) {
    const std::string where = "variable '" + p.child + "'";
    std::vector<const Variable*> parents;
    for (const auto& name : p.parents) {
      auto it = index.find(name);
      if (it == index.end()) {
        throw SemanticError("line " + std::to_string(p.line) + ": " + where +
                            " has undeclared parent '" + name + "'");
      }
      parents.push_back(&vars[it->second]);
    }
    std::size_t configs = 1;
    for (const auto* par : parents) configs *= par->states.size();
    const std::size_t card = child.states.size();
    child.parents = p.parents;
    std::vector<std::optional<std::vector<double>>> rows(configs);

    if (p.table) {
      if (p.table->size() != card * configs) {
        throw SemanticError(where + ": table has " + std::to_string(p.table->size()) +
                            " entries, expected " + std::to_string(card * configs));
      }
      for (std::size_t r = 0; r < configs; ++r) {
        std::vector<double> row(card);
        for (std::size_t s = 0; s < card; ++s) row[s] = (*p.table)[s * configs + r];
        rows[r] = std::move(row);
      }
    }
    for (const auto& [config, values] : p.rows) {
      if (config.size() != parents.size()) {
        throw SemanticError(where + ": row names " + std::to_string(config.size()) +
                            " parent states, expected " + std::to_string(parents.size()));
      }
      std::size_t r = 0;
      for (std::size_t i = 0; i < parents.size(); ++i) {
        auto s = parents[i]->state_index(config[i]);
        if (!s) throw SemanticError(where + ": unknown state '" + config[i] + "' of parent '" +
                                    parents[i]->name + "'");
        r = r * parents[i]->states.size() + *s;
      }
      if (rows[r] && !p.table) throw SemanticError(where + ": configuration given twice");
      rows[r] = values;
    }
    for (auto& row : rows) {
      if (!row && p.default_row) row = *p.default_row;
      if (!row) throw SemanticError(where + ": missing rows for some parent configurations");
      if (row->size() != card) {
        throw SemanticError(where + ": row has " + std::to_string(row->size()) +
                            " entries, expected " + std::to_string(card));
      }
      double sum = 0.0;
      for (double x : *row) sum += x;
      if (std::abs(sum - 1.0) > kBifRowTolerance) {
        throw SemanticError(where + ": row sums to " + std::to_string(sum));
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        for (double& x : *row) x /= sum;
        doc_.warnings.push_back(where + ": renormalized a row summing to " +
                                std::to_string(sum));
      }
    }
    child.cpt.clear();
    for (auto& row : rows) child.cpt.push_back(std::move(*row));
  }

  Lexer lex_;
  BifDocument doc_;
};

inline bool plain_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
          c == '+')) {
      return false;
    }
  }
  return true;
}

inline std::string quote(std::string_view s) {
  return plain_name(s) ? std::string(s) : "\"" + std::string(s) + "\"";
}

inline std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  std::string shortest(buf);
  // Prefer the shortest representation that reads back to the same double.
  for (int digits = 1; digits < 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, p);
    if (std::strtod(buf, nullptr) == p) return buf;
  }
  return shortest;
}

}  // namespace bif_detail

inline BifDocument parse_bif_document(std::string_view text) {
  return bif_detail::Parser(text).parse();
}

inline Scm parse_bif(std::string_view text) { return parse_bif_document(text).scm; }

// Writes per-configuration rows, which parse back to an equal Scm.
inline std::string print_bif(const Scm& scm, std::string_view network_name = "network") {
  using bif_detail::quote;
  std::string out = "network " + quote(network_name) + " {\n}\n";
  for (const auto& v : scm.variables()) {
    out += "variable " + quote(v.name) + " {\n  type discrete [ " +
           std::to_string(v.states.size()) + " ] { ";
    for (std::size_t s = 0; s < v.states.size(); ++s) {
      out += (s ? ", " : "") + quote(v.states[s]);
    }
    out += " };\n}\n";
  }
  for (std::size_t i = 0; i < scm.size(); ++i) {
    const auto& v = scm.variable(i);
    out += "probability ( " + quote(v.name);
    for (std::size_t p = 0; p < v.parents.size(); ++p) {
      out += (p ? ", " : " | ") + quote(v.parents[p]);
    }
    out += " ) {\n";
    const auto& pidx = scm.parent_indices(i);
    for (std::size_t r = 0; r < v.cpt.size(); ++r) {
      out += "  ";
      if (pidx.empty()) {
        out += "table ";
      } else {
        // Decode r in mixed radix, last parent fastest.
        std::vector<std::size_t> config(pidx.size());
        std::size_t rest = r;
        for (std::size_t p = pidx.size(); p-- > 0;) {
          const std::size_t card = scm.cardinality(pidx[p]);
          config[p] = rest % card;
          rest /= card;
        }
        out += "(";
        for (std::size_t p = 0; p < pidx.size(); ++p) {
          out += (p ? ", " : "") + quote(scm.variable(pidx[p]).states[config[p]]);
        }
        out += ") ";
      }
      for (std::size_t s = 0; s < v.cpt[r].size(); ++s) {
        out += (s ? ", " : "") + bif_detail::format_probability(v.cpt[r][s]);
      }
      out += ";\n";
    }
    out += "}\n";
  }
  return out;
}

}  // namespace causalsynth::io

#endif  // CAUSALSYNTH_IO_BIF_HPP_
