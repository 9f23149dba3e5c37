#pragma once

// Reader and writer for the HOA v1 text format (state-based acceptance subset).

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hoaexec/automaton.hpp"
#include "hoaexec/errors.hpp"
#include "hoaexec/label_expr.hpp"

namespace hoaexec {

/// Header items kept verbatim for output; they carry no semantics here.
struct HoaHeaderInfo {
  std::vector<std::string> tool;
  std::optional<std::string> acc_name;
  std::vector<std::string> properties;

  friend bool operator==(const HoaHeaderInfo&, const HoaHeaderInfo&) = default;
};

struct HoaEntry {
  Automaton automaton;
  HoaHeaderInfo header;

  friend bool operator==(const HoaEntry&, const HoaEntry&) = default;
};

struct HoaDocument {
  std::vector<HoaEntry> automata;

  friend bool operator==(const HoaDocument&, const HoaDocument&) = default;
};

struct ParseDiagnostic {
  enum class Severity : std::uint8_t { Error, Warning };

  std::size_t line = 1;
  std::size_t column = 1;
  std::string message;
  Severity severity = Severity::Error;

  std::string to_string() const {
    return std::to_string(line) + ":" + std::to_string(column) + ": " +
           (severity == Severity::Error ? "error: " : "warning: ") + message;
  }
};

struct ParseOptions {
  /// Accept Fin/Inf over sets no state belongs to (Fin of an empty set holds, Inf fails).
  bool allow_empty_accsets = false;
};

struct ParseResult {
  std::optional<HoaDocument> document;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const noexcept { return document.has_value(); }
};

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<ParseDiagnostic> diagnostics)
      : Error(diagnostics.empty() ? std::string("parse error") : diagnostics.front().to_string()),
        diagnostics_(std::move(diagnostics)) {}
  const std::vector<ParseDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<ParseDiagnostic> diagnostics_;
};

namespace hoa_detail {

inline constexpr std::size_t kMaxNesting = 256;
inline constexpr std::uint64_t kMaxStates = 1U << 20;
inline constexpr std::uint64_t kMaxAccSets = 4096;
inline constexpr std::uint64_t kMaxAps = 4096;

struct Failure {
  std::size_t line;
  std::size_t column;
  std::string message;
};

struct Token {
  enum class Kind : std::uint8_t { Header, Ident, Int, String, Alias, Punct, Body, End, Abort, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  std::uint64_t value = 0;
  std::size_t line = 1;
  std::size_t column = 1;
};

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      Token t;
      t.line = line_;
      t.column = column_;
      if (pos_ >= text_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = text_[pos_];
      if (c == '"') {
        t.kind = Token::Kind::String;
        t.text = read_string();
      } else if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
        t.kind = Token::Kind::Int;
        t.value = read_int();
      } else if (ident_start(c)) {
        t.text = read_ident();
        if (pos_ < text_.size() && text_[pos_] == ':') {
          advance();
          t.kind = Token::Kind::Header;
        } else {
          t.kind = Token::Kind::Ident;
        }
      } else if (c == '@') {
        advance();
        t.kind = Token::Kind::Alias;
        t.text = read_ident_chars();
        if (t.text.empty()) fail(t.line, t.column, "empty alias name");
      } else if (c == '-') {
        t.kind = read_marker(t);
      } else if (std::string_view("[]{}()!&|").find(c) != std::string_view::npos) {
        t.kind = Token::Kind::Punct;
        t.text = std::string(1, c);
        advance();
      } else {
        std::string shown = (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f)
                                ? std::string(1, c)
                                : "\\x" + hex(static_cast<unsigned char>(c));
        fail(t.line, t.column, "unexpected character '" + shown + "'");
      }
      out.push_back(std::move(t));
    }
  }

 private:
  static std::string hex(unsigned char c) {
    const char* digits = "0123456789abcdef";
    return {digits[c >> 4], digits[c & 15]};
  }

  [[noreturn]] static void fail(std::size_t line, std::size_t column, std::string msg) {
    throw Failure{line, column, std::move(msg)};
  }

  void advance() {
    const char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++column_;
    }
  }

  void skip_space_and_comments() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        const auto line = line_;
        const auto column = column_;
        std::size_t depth = 0;
        do {
          if (pos_ + 1 < text_.size() && text_[pos_] == '/' && text_[pos_ + 1] == '*') {
            ++depth;
            advance();
            advance();
          } else if (pos_ + 1 < text_.size() && text_[pos_] == '*' && text_[pos_ + 1] == '/') {
            --depth;
            advance();
            advance();
          } else if (pos_ < text_.size()) {
            advance();
          } else {
            fail(line, column, "unterminated comment");
          }
        } while (depth > 0);
      } else {
        return;
      }
    }
  }

  std::string read_string() {
    const auto line = line_;
    const auto column = column_;
    advance();
    std::string s;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        advance();
        if (pos_ >= text_.size()) break;
      }
      s.push_back(text_[pos_]);
      advance();
    }
    if (pos_ >= text_.size()) fail(line, column, "unterminated string");
    advance();
    return s;
  }

  std::uint64_t read_int() {
    const auto line = line_;
    const auto column = column_;
    std::uint64_t v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])) != 0) {
      const auto digit = static_cast<std::uint64_t>(text_[pos_] - '0');
      if (v > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) {
        fail(line, column, "integer literal too large");
      }
      v = v * 10 + digit;
      advance();
    }
    return v;
  }

  std::string read_ident_chars() {
    std::string s;
    while (pos_ < text_.size() && ident_char(text_[pos_])) {
      s.push_back(text_[pos_]);
      advance();
    }
    return s;
  }

  std::string read_ident() {
    std::string s(1, text_[pos_]);
    advance();
    return s + read_ident_chars();
  }

  Token::Kind read_marker(const Token& t) {
    for (auto [marker, kind] : {std::pair{std::string_view("--BODY--"), Token::Kind::Body},
                                std::pair{std::string_view("--END--"), Token::Kind::End},
                                std::pair{std::string_view("--ABORT--"), Token::Kind::Abort}}) {
      if (text_.substr(pos_, marker.size()) == marker) {
        for (std::size_t i = 0; i < marker.size(); ++i) advance();
        return kind;
      }
    }
    fail(t.line, t.column, "unexpected character '-'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

/// Resolves an atom token of a label expression (Int, Ident, String or Alias).
using AtomResolver = std::function<LabelExpr(const Token&)>;

class TokenStream {
 public:
  TokenStream(const std::vector<Token>& tokens, std::size_t begin, std::size_t end)
      : tokens_(tokens), pos_(begin), end_(end) {}

  // At the end of a sub-range this yields the delimiting token, for diagnostics.
  const Token& peek() const { return tokens_[std::min(pos_ < end_ ? pos_ : end_, tokens_.size() - 1)]; }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < end_) ++pos_;
    return t;
  }
  bool at_end() const { return pos_ >= end_; }
  std::size_t position() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

  bool is_punct(char c) const {
    return !at_end() && peek().kind == Token::Kind::Punct && peek().text[0] == c;
  }
  bool accept_punct(char c) {
    if (!is_punct(c)) return false;
    next();
    return true;
  }
  void expect_punct(char c) {
    if (!accept_punct(c)) fail_here("expected '" + std::string(1, c) + "'");
  }

  [[noreturn]] void fail_here(std::string msg) const {
    const Token& t = peek();
    throw Failure{t.line, t.column, std::move(msg)};
  }

 private:
  const std::vector<Token>& tokens_;
  std::size_t pos_;
  std::size_t end_;
};

inline LabelExpr parse_label_or(TokenStream& ts, const AtomResolver& atom, std::size_t depth);

inline LabelExpr parse_label_primary(TokenStream& ts, const AtomResolver& atom, std::size_t depth) {
  if (depth > kMaxNesting) ts.fail_here("label expression nested too deeply");
  if (ts.accept_punct('!')) {
    return LabelExpr::negate(parse_label_primary(ts, atom, depth + 1));
  }
  if (ts.accept_punct('(')) {
    auto e = parse_label_or(ts, atom, depth + 1);
    ts.expect_punct(')');
    return e;
  }
  if (ts.at_end()) ts.fail_here("expected a label expression");
  const Token& t = ts.peek();
  if (t.kind == Token::Kind::Ident && t.text == "t") {
    ts.next();
    return LabelExpr::top();
  }
  if (t.kind == Token::Kind::Ident && t.text == "f") {
    ts.next();
    return LabelExpr::bottom();
  }
  if (t.kind == Token::Kind::Int || t.kind == Token::Kind::Ident ||
      t.kind == Token::Kind::String || t.kind == Token::Kind::Alias) {
    ts.next();
    return atom(t);
  }
  ts.fail_here("expected a label expression");
}

inline LabelExpr parse_label_and(TokenStream& ts, const AtomResolver& atom, std::size_t depth) {
  std::vector<LabelExpr> parts{parse_label_primary(ts, atom, depth)};
  while (ts.accept_punct('&')) parts.push_back(parse_label_primary(ts, atom, depth));
  return LabelExpr::conj(std::move(parts));
}

inline LabelExpr parse_label_or(TokenStream& ts, const AtomResolver& atom, std::size_t depth) {
  std::vector<LabelExpr> parts{parse_label_and(ts, atom, depth)};
  while (ts.accept_punct('|')) parts.push_back(parse_label_and(ts, atom, depth));
  return LabelExpr::disj(std::move(parts));
}

inline AcceptanceCond parse_acc_or(TokenStream& ts, std::size_t depth);

inline AcceptanceCond parse_acc_primary(TokenStream& ts, std::size_t depth) {
  if (depth > kMaxNesting) ts.fail_here("acceptance condition nested too deeply");
  if (ts.accept_punct('(')) {
    auto c = parse_acc_or(ts, depth + 1);
    ts.expect_punct(')');
    return c;
  }
  if (ts.at_end() || ts.peek().kind != Token::Kind::Ident) {
    ts.fail_here("expected an acceptance condition");
  }
  const std::string word = ts.peek().text;
  if (word == "t") {
    ts.next();
    return AcceptanceCond::top();
  }
  if (word == "f") {
    ts.next();
    return AcceptanceCond::bot();
  }
  if (word != "Fin" && word != "Inf") ts.fail_here("unknown acceptance primitive '" + word + "'");
  ts.next();
  ts.expect_punct('(');
  if (ts.is_punct('!')) ts.fail_here("negated acceptance sets are not supported");
  if (ts.at_end() || ts.peek().kind != Token::Kind::Int) ts.fail_here("expected a set index");
  const auto set = ts.next().value;
  ts.expect_punct(')');
  return word == "Fin" ? AcceptanceCond::fin(set) : AcceptanceCond::inf(set);
}

inline AcceptanceCond parse_acc_and(TokenStream& ts, std::size_t depth) {
  std::vector<AcceptanceCond> parts{parse_acc_primary(ts, depth)};
  while (ts.accept_punct('&')) parts.push_back(parse_acc_primary(ts, depth));
  return AcceptanceCond::conj(std::move(parts));
}

inline AcceptanceCond parse_acc_or(TokenStream& ts, std::size_t depth) {
  std::vector<AcceptanceCond> parts{parse_acc_and(ts, depth)};
  while (ts.accept_punct('|')) parts.push_back(parse_acc_and(ts, depth));
  return AcceptanceCond::disj(std::move(parts));
}

// Replaces Fin/Inf over empty sets by their constant value.
inline AcceptanceCond fold_empty_sets(const AcceptanceCond& c, const std::vector<StateSet>& sets) {
  using K = AcceptanceCond::Kind;
  switch (c.kind()) {
    case K::Fin:
      return sets[c.set_index()].empty() ? AcceptanceCond::top() : c;
    case K::Inf:
      return sets[c.set_index()].empty() ? AcceptanceCond::bot() : c;
    case K::And:
    case K::Or: {
      const bool is_and = c.kind() == K::And;
      const K absorbing = is_and ? K::Bot : K::Top;
      const K neutral = is_and ? K::Top : K::Bot;
      std::vector<AcceptanceCond> parts;
      for (const auto& child : c.children()) {
        auto folded = fold_empty_sets(child, sets);
        if (folded.kind() == absorbing) return folded;
        if (folded.kind() != neutral) parts.push_back(std::move(folded));
      }
      return is_and ? AcceptanceCond::conj(std::move(parts)) : AcceptanceCond::disj(std::move(parts));
    }
    default:
      return c;
  }
}

struct RawEdge {
  std::optional<LabelExpr> label;
  std::uint64_t target;
  std::size_t line;
  std::size_t column;
};

struct RawState {
  std::uint64_t id;
  std::optional<std::string> name;
  std::optional<LabelExpr> label;
  std::vector<std::uint64_t> marks;
  std::vector<RawEdge> edges;
  std::size_t line;
  std::size_t column;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, ParseOptions options)
      : tokens_(std::move(tokens)), options_(options) {}

  HoaDocument run(std::vector<ParseDiagnostic>& warnings) {
    HoaDocument doc;
    TokenStream ts(tokens_, 0, tokens_.size() - 1);
    if (ts.at_end()) ts.fail_here("empty input: expected 'HOA:'");
    while (!ts.at_end()) {
      auto entry = parse_automaton(ts, warnings);
      if (entry) doc.automata.push_back(std::move(*entry));
    }
    return doc;
  }

 private:
  bool at_header_or_body(const TokenStream& ts) const {
    if (ts.at_end()) return true;
    const auto k = ts.peek().kind;
    return k == Token::Kind::Header || k == Token::Kind::Body;
  }

  void expect_value_end(TokenStream& ts, const std::string& header) const {
    if (!at_header_or_body(ts)) ts.fail_here("unexpected token in '" + header + ":' header");
  }

  std::uint64_t expect_int(TokenStream& ts, const std::string& what) const {
    if (ts.at_end() || ts.peek().kind != Token::Kind::Int) ts.fail_here("expected " + what);
    return ts.next().value;
  }

  std::optional<HoaEntry> parse_automaton(TokenStream& ts, std::vector<ParseDiagnostic>& warnings) {
    const Token& first = ts.peek();
    if (first.kind != Token::Kind::Header || first.text != "HOA") ts.fail_here("expected 'HOA:'");
    ts.next();
    if (ts.at_end() || ts.peek().kind != Token::Kind::Ident || ts.peek().text != "v1") {
      ts.fail_here("unsupported format version (expected v1)");
    }
    ts.next();

    HoaEntry entry;
    std::optional<std::uint64_t> declared_states;
    std::vector<std::pair<std::uint64_t, const Token*>> starts;
    std::optional<std::vector<std::string>> ap_names;
    std::optional<std::uint64_t> acc_count;
    std::optional<AcceptanceCond> condition;
    const Token* acceptance_token = nullptr;
    aliases_.clear();
    bool seen_name = false;
    bool seen_tool = false;

    while (!ts.at_end() && ts.peek().kind == Token::Kind::Header) {
      const Token& h = ts.next();
      const std::string& key = h.text;
      auto duplicate = [&](bool seen) {
        if (seen) throw Failure{h.line, h.column, "duplicate '" + key + ":' header"};
      };
      if (key == "HOA") {
        throw Failure{h.line, h.column, "duplicate 'HOA:' header"};
      } else if (key == "States") {
        duplicate(declared_states.has_value());
        const auto n = expect_int(ts, "a state count");
        if (n > kMaxStates) throw Failure{h.line, h.column, "state count exceeds supported limit"};
        declared_states = n;
      } else if (key == "Start") {
        const Token& t = ts.peek();
        starts.emplace_back(expect_int(ts, "a start state"), &t);
        if (ts.is_punct('&')) ts.fail_here("conjunctive start states (alternation) are not supported");
      } else if (key == "AP") {
        duplicate(ap_names.has_value());
        const auto n = expect_int(ts, "an AP count");
        if (n > kMaxAps) throw Failure{h.line, h.column, "AP count exceeds supported limit"};
        std::vector<std::string> names;
        for (std::uint64_t i = 0; i < n; ++i) {
          if (ts.at_end() || ts.peek().kind != Token::Kind::String) {
            ts.fail_here("expected " + std::to_string(n) + " quoted AP names");
          }
          const Token& s = ts.next();
          if (std::find(names.begin(), names.end(), s.text) != names.end()) {
            throw Failure{s.line, s.column, "duplicate AP name \"" + s.text + "\""};
          }
          names.push_back(s.text);
        }
        ap_names = std::move(names);
      } else if (key == "Acceptance") {
        duplicate(acc_count.has_value());
        acceptance_token = &h;
        const auto m = expect_int(ts, "an acceptance set count");
        if (m > kMaxAccSets) throw Failure{h.line, h.column, "too many acceptance sets"};
        acc_count = m;
        condition = parse_acc_or(ts, 0);
      } else if (key == "acc-name") {
        duplicate(entry.header.acc_name.has_value());
        std::string value;
        while (!at_header_or_body(ts)) {
          const Token& t = ts.next();
          if (t.kind != Token::Kind::Ident && t.kind != Token::Kind::Int) {
            throw Failure{t.line, t.column, "unexpected token in 'acc-name:' header"};
          }
          if (!value.empty()) value += ' ';
          value += t.kind == Token::Kind::Int ? std::to_string(t.value) : t.text;
        }
        entry.header.acc_name = value;
      } else if (key == "name") {
        duplicate(seen_name);
        seen_name = true;
        if (ts.at_end() || ts.peek().kind != Token::Kind::String) ts.fail_here("expected a quoted name");
        entry.automaton.name = ts.next().text;
      } else if (key == "tool") {
        duplicate(seen_tool);
        seen_tool = true;
        while (!ts.at_end() && ts.peek().kind == Token::Kind::String) {
          entry.header.tool.push_back(ts.next().text);
        }
        if (entry.header.tool.empty()) ts.fail_here("expected a quoted tool name");
      } else if (key == "properties") {
        while (!ts.at_end() && ts.peek().kind == Token::Kind::Ident) {
          entry.header.properties.push_back(ts.next().text);
        }
      } else if (key == "Alias") {
        if (ts.at_end() || ts.peek().kind != Token::Kind::Alias) ts.fail_here("expected an @alias name");
        const Token& a = ts.next();
        if (aliases_.count(a.text) != 0) {
          throw Failure{a.line, a.column, "duplicate alias @" + a.text};
        }
        const auto begin = ts.position();
        while (!at_header_or_body(ts)) ts.next();
        aliases_[a.text] = AliasDef{begin, ts.position(), std::nullopt, false};
      } else if (std::isupper(static_cast<unsigned char>(key[0])) != 0) {
        throw Failure{h.line, h.column, "unsupported header '" + key + ":'"};
      } else {
        warnings.push_back({h.line, h.column, "ignoring header '" + key + ":'",
                            ParseDiagnostic::Severity::Warning});
        while (!at_header_or_body(ts)) ts.next();
      }
      expect_value_end(ts, key);
    }

    if (ts.at_end() || ts.peek().kind != Token::Kind::Body) ts.fail_here("expected --BODY--");
    const Token& body = ts.next();
    if (!acc_count) throw Failure{body.line, body.column, "missing 'Acceptance:' header"};
    if (starts.empty()) throw Failure{body.line, body.column, "missing 'Start:' header"};
    const std::size_t ap_count = ap_names ? ap_names->size() : 0;

    // Resolve aliases up front so cycles and undefined references are reported
    // even when unused.
    for (auto& [name, def] : aliases_) resolve_alias(name, ap_count, body);

    std::vector<RawState> raw;
    std::map<std::uint64_t, std::size_t> declared;
    while (!ts.at_end() && ts.peek().kind == Token::Kind::Header && ts.peek().text == "State") {
      raw.push_back(parse_state(ts, ap_count));
      const auto& st = raw.back();
      if (!declared.emplace(st.id, raw.size() - 1).second) {
        throw Failure{st.line, st.column, "duplicate declaration of state " + std::to_string(st.id)};
      }
    }
    if (ts.at_end() || ts.peek().kind == Token::Kind::Header) {
      ts.fail_here("missing --END--");
    }
    if (ts.peek().kind == Token::Kind::Abort) {
      const Token& t = ts.next();
      warnings.push_back({t.line, t.column, "automaton aborted by producer; skipped",
                          ParseDiagnostic::Severity::Warning});
      return std::nullopt;
    }
    if (ts.peek().kind != Token::Kind::End) ts.fail_here("expected 'State:' or --END--");
    ts.next();

    Automaton& a = entry.automaton;
    if (ap_names) {
      for (std::size_t i = 0; i < ap_names->size(); ++i) a.aps.push_back({i, (*ap_names)[i]});
    }

    // Dense numbering: declaration order first, then remaining ids ascending.
    std::map<std::uint64_t, StateId> dense;
    auto check_range = [&](std::uint64_t id, std::size_t line, std::size_t column) {
      if (declared_states && id >= *declared_states) {
        throw Failure{line, column, "state " + std::to_string(id) + " out of declared range 0.." +
                                        std::to_string(*declared_states) + "-1"};
      }
    };
    for (const auto& st : raw) {
      check_range(st.id, st.line, st.column);
      dense.emplace(st.id, a.add_state(st.id));
      a.state_names.back() = st.name;
    }
    std::set<std::uint64_t> others;
    if (declared_states) {
      for (std::uint64_t id = 0; id < *declared_states; ++id) {
        if (declared.count(id) == 0) others.insert(id);
      }
    } else {
      for (const auto& st : raw) {
        for (const auto& e : st.edges) {
          if (declared.count(e.target) == 0) others.insert(e.target);
        }
      }
      for (const auto& [id, tok] : starts) {
        if (declared.count(id) == 0) others.insert(id);
      }
      if (raw.size() + others.size() > kMaxStates) {
        throw Failure{body.line, body.column, "state count exceeds supported limit"};
      }
    }
    for (auto id : others) dense.emplace(id, a.add_state(id));

    std::vector<StateId> initial;
    for (const auto& [id, tok] : starts) {
      check_range(id, tok->line, tok->column);
      initial.push_back(dense.at(id));
    }
    a.initial = make_state_set(std::move(initial));

    a.acc_sets.assign(*acc_count, {});
    for (const auto& st : raw) {
      const StateId q = dense.at(st.id);
      for (auto m : st.marks) {
        if (m >= *acc_count) {
          throw Failure{st.line, st.column, "acceptance mark " + std::to_string(m) +
                                                " exceeds declared set count " +
                                                std::to_string(*acc_count)};
        }
        a.acc_sets[m].push_back(q);
      }
      for (const auto& e : st.edges) {
        check_range(e.target, e.line, e.column);
        a.add_edge(q, e.label.value_or(LabelExpr::top()), dense.at(e.target));
      }
    }
    for (auto& s : a.acc_sets) s = make_state_set(std::move(s));

    AcceptanceCond cond = *condition;
    std::optional<std::string> bad_ref;
    cond.for_each_leaf([&](const AcceptanceCond& leaf) {
      if (bad_ref) return;
      if (leaf.set_index() >= *acc_count) {
        bad_ref = "acceptance condition references set " + std::to_string(leaf.set_index()) +
                  " but only " + std::to_string(*acc_count) + " are declared";
      } else if (a.acc_sets[leaf.set_index()].empty() && !options_.allow_empty_accsets) {
        bad_ref = "acceptance set " + std::to_string(leaf.set_index()) +
                  " is used by the condition but contains no state";
      }
    });
    if (bad_ref) throw Failure{acceptance_token->line, acceptance_token->column, *bad_ref};
    if (options_.allow_empty_accsets) cond = fold_empty_sets(cond, a.acc_sets);
    a.condition = std::move(cond);
    return entry;
  }

  RawState parse_state(TokenStream& ts, std::size_t ap_count) {
    const Token& kw = ts.next();
    RawState st{0, std::nullopt, std::nullopt, {}, {}, kw.line, kw.column};
    if (ts.accept_punct('[')) {
      st.label = parse_label(ts, ap_count);
      ts.expect_punct(']');
    }
    st.id = expect_int(ts, "a state id");
    if (!ts.at_end() && ts.peek().kind == Token::Kind::String) st.name = ts.next().text;
    if (ts.accept_punct('{')) {
      while (!ts.at_end() && ts.peek().kind == Token::Kind::Int) st.marks.push_back(ts.next().value);
      ts.expect_punct('}');
    }

    std::size_t implicit = 0;
    bool explicit_labels = false;
    for (;;) {
      if (ts.at_end()) break;
      const Token& t = ts.peek();
      const bool labelled = t.kind == Token::Kind::Punct && t.text == "[";
      if (!labelled && t.kind != Token::Kind::Int) break;
      RawEdge e{std::nullopt, 0, t.line, t.column};
      if (labelled) {
        ts.next();
        if (st.label) {
          throw Failure{t.line, t.column, "edge label on a state that already carries a label"};
        }
        e.label = parse_label(ts, ap_count);
        ts.expect_punct(']');
        explicit_labels = true;
      }
      e.target = expect_int(ts, "an edge target");
      if (ts.is_punct('&')) ts.fail_here("conjunctive edge targets (alternation) are not supported");
      if (ts.is_punct('{')) ts.fail_here("transition-based acceptance unsupported");
      if (!labelled) {
        if (st.label) {
          e.label = st.label;
        } else {
          if (explicit_labels) {
            throw Failure{t.line, t.column, "mixing implicit and explicit edge labels"};
          }
          if (ap_count < 63 && implicit >= (std::size_t{1} << ap_count)) {
            throw Failure{t.line, t.column, "more implicit edges than valuations"};
          }
          e.label = LabelExpr::minterm(implicit++, ap_count);
        }
      } else if (implicit > 0) {
        throw Failure{t.line, t.column, "mixing implicit and explicit edge labels"};
      }
      st.edges.push_back(std::move(e));
    }
    return st;
  }

  LabelExpr parse_label(TokenStream& ts, std::size_t ap_count) {
    return parse_label_or(ts, [&](const Token& t) { return resolve_atom(t, ap_count); }, 0);
  }

  LabelExpr resolve_atom(const Token& t, std::size_t ap_count) {
    if (t.kind == Token::Kind::Int) {
      if (t.value >= ap_count) {
        throw Failure{t.line, t.column, "proposition " + std::to_string(t.value) +
                                            " not declared (AP count " +
                                            std::to_string(ap_count) + ")"};
      }
      return LabelExpr::ap(t.value);
    }
    if (t.kind == Token::Kind::Alias) return resolve_alias(t.text, ap_count, t);
    throw Failure{t.line, t.column, "unexpected token '" + t.text + "' in label"};
  }

  LabelExpr resolve_alias(const std::string& name, std::size_t ap_count, const Token& where) {
    const auto it = aliases_.find(name);
    if (it == aliases_.end()) {
      throw Failure{where.line, where.column, "undefined alias @" + name};
    }
    auto& def = it->second;
    if (def.value) return *def.value;
    if (def.resolving) throw Failure{where.line, where.column, "cyclic alias @" + name};
    def.resolving = true;
    TokenStream sub(tokens_, def.begin, def.end);
    auto e = parse_label(sub, ap_count);
    if (!sub.at_end()) sub.fail_here("unexpected token in alias @" + name);
    def.resolving = false;
    def.value = e;
    return e;
  }

  struct AliasDef {
    std::size_t begin;
    std::size_t end;
    std::optional<LabelExpr> value;
    bool resolving;
  };

  std::vector<Token> tokens_;
  ParseOptions options_;
  std::map<std::string, AliasDef> aliases_;
};

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace hoa_detail

/// Parses one or more automata. Never throws: failures come back as diagnostics.
inline ParseResult parse_hoa(std::string_view text, ParseOptions options = {}) {
  ParseResult result;
  try {
    auto tokens = hoa_detail::Lexer(text).run();
    hoa_detail::Parser parser(std::move(tokens), options);
    result.document = parser.run(result.diagnostics);
  } catch (const hoa_detail::Failure& f) {
    result.diagnostics.push_back({f.line, f.column, f.message, ParseDiagnostic::Severity::Error});
  } catch (const std::exception& e) {
    result.diagnostics.push_back({1, 1, e.what(), ParseDiagnostic::Severity::Error});
  }
  return result;
}

inline HoaDocument parse_hoa_or_throw(std::string_view text, ParseOptions options = {}) {
  auto r = parse_hoa(text, options);
  if (!r.document) throw ParseError(std::move(r.diagnostics));
  return std::move(*r.document);
}

/// Parses a label over AP names (`a & !"b c"`), for configuration files.
inline LabelExpr parse_named_label(std::string_view text,
                                   const std::function<std::optional<std::size_t>(const std::string&)>& lookup) {
  std::vector<hoa_detail::Token> tokens;
  try {
    tokens = hoa_detail::Lexer(text).run();
    hoa_detail::TokenStream ts(tokens, 0, tokens.size() - 1);
    auto e = hoa_detail::parse_label_or(
        ts,
        [&](const hoa_detail::Token& t) -> LabelExpr {
          using K = hoa_detail::Token::Kind;
          if (t.kind != K::Ident && t.kind != K::String) {
            throw hoa_detail::Failure{t.line, t.column, "expected a proposition name"};
          }
          const auto idx = lookup(t.text);
          if (!idx) throw hoa_detail::Failure{t.line, t.column, "unknown proposition '" + t.text + "'"};
          return LabelExpr::ap(*idx);
        },
        0);
    if (!ts.at_end()) ts.fail_here("unexpected trailing input");
    return e;
  } catch (const hoa_detail::Failure& f) {
    throw Error("column " + std::to_string(f.column) + ": " + f.message);
  }
}

/// Prints a label in HOA syntax. `ap_name`, when given, prints names instead of indices.
inline std::string to_string(const LabelExpr& e,
                             const std::function<std::string(std::size_t)>& ap_name = {}) {
  using K = LabelExpr::Kind;
  auto wrap = [&](const LabelExpr& child) {
    const bool compound = child.kind() == K::And || child.kind() == K::Or;
    const auto s = to_string(child, ap_name);
    return compound ? "(" + s + ")" : s;
  };
  switch (e.kind()) {
    case K::True:
      return "t";
    case K::False:
      return "f";
    case K::Ap:
      return ap_name ? ap_name(e.ap_index()) : std::to_string(e.ap_index());
    case K::Not:
      return "!" + wrap(e.children().front());
    case K::And:
    case K::Or: {
      std::string out;
      for (const auto& c : e.children()) {
        if (!out.empty()) out += e.kind() == K::And ? " & " : " | ";
        out += wrap(c);
      }
      return out;
    }
  }
  return "t";
}

inline std::string to_string(const AcceptanceCond& c) {
  using K = AcceptanceCond::Kind;
  auto wrap = [](const AcceptanceCond& child) {
    const bool compound = child.kind() == K::And || child.kind() == K::Or;
    return compound ? "(" + to_string(child) + ")" : to_string(child);
  };
  switch (c.kind()) {
    case K::Top:
      return "t";
    case K::Bot:
      return "f";
    case K::Fin:
      return "Fin(" + std::to_string(c.set_index()) + ")";
    case K::Inf:
      return "Inf(" + std::to_string(c.set_index()) + ")";
    case K::And:
    case K::Or: {
      std::string out;
      for (const auto& child : c.children()) {
        if (!out.empty()) out += c.kind() == K::And ? " & " : " | ";
        out += wrap(child);
      }
      return out;
    }
  }
  return "t";
}

inline void serialize_hoa(const HoaEntry& entry, std::ostream& os) {
  using hoa_detail::quote;
  const Automaton& a = entry.automaton;
  os << "HOA: v1\n";
  if (a.name) os << "name: " << quote(*a.name) << '\n';
  if (!entry.header.tool.empty()) {
    os << "tool:";
    for (const auto& t : entry.header.tool) os << ' ' << quote(t);
    os << '\n';
  }
  auto sorted_ids = a.hoa_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  bool dense_ids = true;
  for (std::size_t i = 0; i < sorted_ids.size(); ++i) dense_ids = dense_ids && sorted_ids[i] == i;
  if (dense_ids) os << "States: " << a.state_count() << '\n';
  for (auto q : a.initial) os << "Start: " << a.hoa_ids[q] << '\n';
  os << "AP: " << a.aps.size();
  for (const auto& ap : a.aps) os << ' ' << quote(ap.name);
  os << '\n';
  if (entry.header.acc_name) os << "acc-name: " << *entry.header.acc_name << '\n';
  os << "Acceptance: " << a.acc_sets.size() << ' ' << to_string(a.condition) << '\n';
  if (!entry.header.properties.empty()) {
    os << "properties:";
    for (const auto& p : entry.header.properties) os << ' ' << p;
    os << '\n';
  }
  os << "--BODY--\n";
  for (StateId q = 0; q < a.state_count(); ++q) {
    os << "State: " << a.hoa_ids[q];
    if (a.state_names[q]) os << ' ' << quote(*a.state_names[q]);
    std::vector<std::size_t> marks;
    for (std::size_t k = 0; k < a.acc_sets.size(); ++k) {
      if (a.in_acc_set(k, q)) marks.push_back(k);
    }
    if (!marks.empty()) {
      os << " {";
      for (std::size_t i = 0; i < marks.size(); ++i) os << (i ? " " : "") << marks[i];
      os << '}';
    }
    os << '\n';
    for (const auto& e : a.edges[q]) {
      os << '[' << to_string(e.label) << "] " << a.hoa_ids[e.target] << '\n';
    }
  }
  os << "--END--\n";
}

inline std::string serialize_hoa(const HoaDocument& doc) {
  std::ostringstream os;
  for (const auto& entry : doc.automata) serialize_hoa(entry, os);
  return os.str();
}

}  // namespace hoaexec
