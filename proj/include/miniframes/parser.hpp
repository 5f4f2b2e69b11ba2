/*
 * Copyright 2026 The MiniFrames Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cctype>
#include <string>
#include <variant>
#include <vector>

#include "miniframes/stmt.hpp"

namespace mf {

// ---- surface AST (one node per grammar statement) ----

struct SSource {
  std::string frame, path;
  FileFormat format = FileFormat::Csv;
  Schema schema;
};
struct SFilter {
  std::string out, in;
  ExprPtr pred;
};
struct SJoin {
  std::string out, left, right, left_key, right_key;
};
struct SAggItem {
  std::string name;
  ReduceFn fn;
  ExprPtr expr;
};
struct SAggregate {
  std::string out, in, key;
  std::vector<SAggItem> items;
};
struct SConcat {
  std::string out;
  std::vector<std::string> ins;
};
struct SCol {
  std::string out, frame, column;
};
struct SMap {
  std::string out;
  ExprPtr expr;
};
struct SCumsum {
  std::string out, in;
};
struct SStencil {
  std::string out, in;
  std::vector<double> weights;
  double divisor = 1.0;
};
struct SAssemble {
  std::string out;
  bool transpose = false;
  std::vector<std::string> inputs;
};
struct SSet {
  std::string frame, column;
  ExprPtr expr;
};
struct SSink {
  std::string name;
  bool replicated = false;
  std::vector<std::string> items;
};

struct SurfaceStmt {
  using Node = std::variant<SSource, SFilter, SJoin, SAggregate, SConcat, SCol,
                            SMap, SCumsum, SStencil, SAssemble, SSet, SSink>;
  int line = 0;
  Node node;
};

struct SurfaceProgram {
  std::vector<SurfaceStmt> stmts;
};

class ParseError : public Error {
 public:
  ParseError(std::string msg, int line, int col)
      : Error(Stage::Parse,
              std::move(msg) + " at " + std::to_string(line) + ":" +
                  std::to_string(col),
              line) {}
};

namespace detail {

enum class Tok { Ident, Keyword, Int, Float, Str, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int64_t ival = 0;
  double fval = 0.0;
  int line = 0, col = 0;
};

inline bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw = {
      "source", "format",  "csv",      "hfb",    "schema", "filter",
      "join",   "on",      "aggregate", "by",    "concat", "col",
      "map",    "cumsum",  "stencil",  "weights", "div",   "assemble",
      "transpose", "hcat", "sink",     "set",    "replicated", "and",
      "or",     "not",     "true",     "false",  "log",    "exp",
      "sum",    "mean",    "var",      "length", "i64",    "f64",
      "bool"};
  return kw.count(s) > 0;
}

class Lexer {
 public:
  Lexer(const std::string& text, int line) : s_(text), line_(line) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] == '#') break;
      out.push_back(next());
    }
    Token end;
    end.kind = Tok::End;
    end.line = line_;
    end.col = static_cast<int>(pos_) + 1;
    out.push_back(end);
    return out;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) pos_++;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, line_, static_cast<int>(pos_) + 1);
  }

  Token next() {
    Token t;
    t.line = line_;
    t.col = static_cast<int>(pos_) + 1;
    char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
              s_[pos_] == '_'))
        pos_++;
      t.text = s_.substr(start, pos_ - start);
      t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
      return t;
    }
    if (c == '_') fail("names starting with '_' are reserved");
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      bool is_float = false;
      while (pos_ < s_.size() &&
             std::isdigit(static_cast<unsigned char>(s_[pos_])))
        pos_++;
      if (pos_ < s_.size() && s_[pos_] == '.') {
        is_float = true;
        pos_++;
        while (pos_ < s_.size() &&
               std::isdigit(static_cast<unsigned char>(s_[pos_])))
          pos_++;
      }
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        is_float = true;
        pos_++;
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) pos_++;
        while (pos_ < s_.size() &&
               std::isdigit(static_cast<unsigned char>(s_[pos_])))
          pos_++;
      }
      t.text = s_.substr(start, pos_ - start);
      if (is_float) {
        t.kind = Tok::Float;
        auto res =
            std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.fval);
        if (res.ec != std::errc()) fail("bad float literal");
      } else {
        t.kind = Tok::Int;
        auto res =
            std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.ival);
        if (res.ec != std::errc()) fail("bad integer literal");
      }
      return t;
    }
    if (c == '"') {
      pos_++;
      size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') pos_++;
      if (pos_ >= s_.size()) fail("unterminated string");
      t.kind = Tok::Str;
      t.text = s_.substr(start, pos_ - start);
      pos_++;
      return t;
    }
    // multi-char operators first
    static const char* two[] = {"==", "!=", "<=", ">="};
    for (const char* op : two) {
      if (s_.compare(pos_, 2, op) == 0) {
        t.kind = Tok::Sym;
        t.text = op;
        pos_ += 2;
        return t;
      }
    }
    if (std::string("=()[],:.<>+-*/").find(c) != std::string::npos) {
      t.kind = Tok::Sym;
      t.text = std::string(1, c);
      pos_++;
      return t;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  size_t pos_ = 0;
  int line_;
};

// Recursive-descent parser over one statement line.
class LineParser {
 public:
  LineParser(std::vector<Token> toks, int line)
      : toks_(std::move(toks)), line_(line) {}

  SurfaceStmt parse_stmt() {
    SurfaceStmt out;
    out.line = line_;
    if (at_kw("sink")) {
      out.node = parse_sink();
    } else if (at_kw("set")) {
      out.node = parse_set();
    } else {
      std::string name = expect_ident("statement name");
      expect_sym("=");
      out.node = parse_rhs(name);
    }
    if (!at_end()) fail("trailing input after statement");
    return out;
  }

  ExprPtr parse_whole_expr() {
    ExprPtr e = parse_expr();
    if (!at_end()) fail("trailing input after expression");
    return e;
  }

 private:
  SurfaceStmt::Node parse_rhs(std::string name) {
    if (at_kw("source")) return parse_source(name);
    if (at_kw("filter")) return parse_filter(name);
    if (at_kw("join")) return parse_join(name);
    if (at_kw("aggregate")) return parse_aggregate(name);
    if (at_kw("concat")) return parse_concat(name);
    if (at_kw("col")) return parse_col(name);
    if (at_kw("map")) return parse_map(name);
    if (at_kw("cumsum")) return parse_cumsum(name);
    if (at_kw("stencil")) return parse_stencil(name);
    if (at_kw("assemble")) return parse_assemble(name);
    fail("expected an operation keyword");
  }

  SSource parse_source(std::string name) {
    eat();
    SSource s;
    s.frame = std::move(name);
    s.path = expect_str("source path");
    expect_kw("format");
    if (at_kw("csv")) {
      eat();
      s.format = FileFormat::Csv;
    } else if (at_kw("hfb")) {
      eat();
      s.format = FileFormat::Hfb;
    } else {
      fail("expected 'csv' or 'hfb'");
    }
    expect_kw("schema");
    expect_sym("(");
    while (true) {
      SchemaCol c;
      c.name = expect_ident("column name");
      expect_sym(":");
      c.type = parse_type();
      s.schema.push_back(c);
      if (at_sym(",")) {
        eat();
        continue;
      }
      break;
    }
    expect_sym(")");
    return s;
  }

  ScalarType parse_type() {
    if (at_kw("i64")) { eat(); return ScalarType::Int64; }
    if (at_kw("f64")) { eat(); return ScalarType::Float64; }
    if (at_kw("bool")) { eat(); return ScalarType::Bool; }
    fail("expected a type (i64, f64, bool)");
  }

  SFilter parse_filter(std::string name) {
    eat();
    SFilter f;
    f.out = std::move(name);
    f.in = expect_ident("input frame");
    expect_sym("(");
    f.pred = parse_expr();
    expect_sym(")");
    return f;
  }

  SJoin parse_join(std::string name) {
    eat();
    SJoin j;
    j.out = std::move(name);
    j.left = expect_ident("left frame");
    j.right = expect_ident("right frame");
    expect_kw("on");
    j.left_key = expect_ident("left key");
    expect_sym("==");
    j.right_key = expect_ident("right key");
    return j;
  }

  SAggregate parse_aggregate(std::string name) {
    eat();
    SAggregate a;
    a.out = std::move(name);
    a.in = expect_ident("input frame");
    expect_kw("by");
    a.key = expect_ident("key column");
    expect_sym("(");
    while (true) {
      SAggItem item;
      item.name = expect_ident("output column");
      expect_sym("=");
      item.fn = parse_reducer();
      expect_sym("(");
      item.expr = parse_expr();
      expect_sym(")");
      a.items.push_back(std::move(item));
      if (at_sym(",")) {
        eat();
        continue;
      }
      break;
    }
    expect_sym(")");
    return a;
  }

  ReduceFn parse_reducer() {
    if (at_kw("sum")) { eat(); return ReduceFn::Sum; }
    if (at_kw("mean")) { eat(); return ReduceFn::Mean; }
    if (at_kw("var")) { eat(); return ReduceFn::Var; }
    if (at_kw("length")) { eat(); return ReduceFn::Length; }
    fail("aggregate output must be reducer(expr) with reducer in {sum, mean, var, length}");
  }

  SConcat parse_concat(std::string name) {
    eat();
    SConcat c;
    c.out = std::move(name);
    c.ins.push_back(expect_ident("input frame"));
    while (cur().kind == Tok::Ident) c.ins.push_back(expect_ident(""));
    if (c.ins.size() < 2) fail("concat needs at least two frames");
    return c;
  }

  SCol parse_col(std::string name) {
    eat();
    SCol c;
    c.out = std::move(name);
    c.frame = expect_ident("frame");
    c.column = expect_ident("column");
    return c;
  }

  SMap parse_map(std::string name) {
    eat();
    SMap m;
    m.out = std::move(name);
    expect_sym("(");
    m.expr = parse_expr();
    expect_sym(")");
    return m;
  }

  SCumsum parse_cumsum(std::string name) {
    eat();
    SCumsum c;
    c.out = std::move(name);
    c.in = expect_ident("input array");
    return c;
  }

  SStencil parse_stencil(std::string name) {
    eat();
    SStencil st;
    st.out = std::move(name);
    st.in = expect_ident("input array");
    expect_kw("weights");
    expect_sym("[");
    while (true) {
      st.weights.push_back(parse_number());
      if (at_sym(",")) {
        eat();
        continue;
      }
      break;
    }
    expect_sym("]");
    expect_kw("div");
    st.divisor = parse_number();
    return st;
  }

  double parse_number() {
    bool neg = false;
    if (at_sym("-")) {
      eat();
      neg = true;
    }
    Token t = cur();
    double v;
    if (t.kind == Tok::Int)
      v = static_cast<double>(t.ival);
    else if (t.kind == Tok::Float)
      v = t.fval;
    else
      fail("expected a number");
    eat();
    return neg ? -v : v;
  }

  SAssemble parse_assemble(std::string name) {
    eat();
    SAssemble a;
    a.out = std::move(name);
    if (at_kw("transpose")) {
      eat();
      a.transpose = true;
    }
    expect_kw("hcat");
    expect_sym("(");
    while (true) {
      a.inputs.push_back(expect_ident("input array"));
      if (at_sym(",")) {
        eat();
        continue;
      }
      break;
    }
    expect_sym(")");
    return a;
  }

  SSet parse_set() {
    eat();
    SSet s;
    s.frame = expect_ident("frame");
    s.column = expect_ident("column");
    expect_sym("(");
    s.expr = parse_expr();
    expect_sym(")");
    return s;
  }

  SSink parse_sink() {
    eat();
    SSink s;
    s.name = expect_str("sink name");
    if (at_kw("replicated")) {
      eat();
      s.replicated = true;
    }
    expect_sym("(");
    while (true) {
      s.items.push_back(expect_ident("sink item"));
      if (at_sym(",")) {
        eat();
        continue;
      }
      break;
    }
    expect_sym(")");
    return s;
  }

  // expression grammar: or > and > comparison > additive > multiplicative >
  // unary > primary
  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (at_kw("or")) {
      eat();
      e = bin(BinOpKind::Or, e, parse_and());
    }
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_cmp();
    while (at_kw("and")) {
      eat();
      e = bin(BinOpKind::And, e, parse_cmp());
    }
    return e;
  }

  ExprPtr parse_cmp() {
    ExprPtr e = parse_add();
    static const std::pair<const char*, BinOpKind> ops[] = {
        {"<=", BinOpKind::Le}, {">=", BinOpKind::Ge}, {"==", BinOpKind::Eq},
        {"!=", BinOpKind::Ne}, {"<", BinOpKind::Lt},  {">", BinOpKind::Gt}};
    for (const auto& [tok, op] : ops) {
      if (at_sym(tok)) {
        eat();
        return bin(op, e, parse_add());
      }
    }
    return e;
  }

  ExprPtr parse_add() {
    ExprPtr e = parse_mul();
    while (at_sym("+") || at_sym("-")) {
      BinOpKind op = at_sym("+") ? BinOpKind::Add : BinOpKind::Sub;
      eat();
      e = bin(op, e, parse_mul());
    }
    return e;
  }

  ExprPtr parse_mul() {
    ExprPtr e = parse_unary();
    while (at_sym("*") || at_sym("/")) {
      BinOpKind op = at_sym("*") ? BinOpKind::Mul : BinOpKind::Div;
      eat();
      e = bin(op, e, parse_unary());
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (at_sym("-")) {
      eat();
      return un(UnOpKind::Neg, parse_unary());
    }
    if (at_kw("not")) {
      eat();
      return un(UnOpKind::Not, parse_unary());
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    Token t = cur();
    if (t.kind == Tok::Int) {
      eat();
      return lit(t.ival);
    }
    if (t.kind == Tok::Float) {
      eat();
      return lit(t.fval);
    }
    if (at_kw("true")) {
      eat();
      return lit(true);
    }
    if (at_kw("false")) {
      eat();
      return lit(false);
    }
    if (at_sym("(")) {
      eat();
      ExprPtr e = parse_expr();
      expect_sym(")");
      return e;
    }
    if (at_kw("log") || at_kw("exp")) {
      MapFn fn = at_kw("log") ? MapFn::Log : MapFn::Exp;
      eat();
      expect_sym("(");
      ExprPtr e = parse_expr();
      expect_sym(")");
      return elementwise(fn, e);
    }
    if (at_kw("sum") || at_kw("mean") || at_kw("var") || at_kw("length")) {
      ReduceFn fn = at_kw("sum")    ? ReduceFn::Sum
                    : at_kw("mean") ? ReduceFn::Mean
                    : at_kw("var")  ? ReduceFn::Var
                                    : ReduceFn::Length;
      eat();
      expect_sym("(");
      ExprPtr e = parse_expr();
      expect_sym(")");
      return reduce(fn, e);
    }
    if (t.kind == Tok::Ident) {
      eat();
      if (at_sym(".")) {
        eat();
        std::string colname = expect_ident("column name");
        return col_ref(t.text, colname);
      }
      return col_ref(t.text);
    }
    fail("expected an expression");
  }

  const Token& cur() const { return toks_[idx_]; }
  void eat() { idx_++; }
  bool at_end() const { return cur().kind == Tok::End; }
  bool at_kw(const char* kw) const {
    return cur().kind == Tok::Keyword && cur().text == kw;
  }
  bool at_sym(const char* s) const {
    return cur().kind == Tok::Sym && cur().text == s;
  }
  void expect_kw(const char* kw) {
    if (!at_kw(kw)) fail(std::string("expected '") + kw + "'");
    eat();
  }
  void expect_sym(const char* s) {
    if (!at_sym(s)) fail(std::string("expected '") + s + "'");
    eat();
  }
  std::string expect_ident(const char* what) {
    if (cur().kind != Tok::Ident) {
      if (cur().kind == Tok::Keyword)
        fail("'" + cur().text + "' is a reserved word");
      fail(std::string("expected identifier") +
           (*what ? std::string(" (") + what + ")" : ""));
    }
    std::string s = cur().text;
    eat();
    return s;
  }
  std::string expect_str(const char* what) {
    if (cur().kind != Tok::Str)
      fail(std::string("expected string (") + what + ")");
    std::string s = cur().text;
    eat();
    return s;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, cur().line, cur().col);
  }

  std::vector<Token> toks_;
  size_t idx_ = 0;
  int line_;
};

}  // namespace detail

// Parses the textual DSL: one statement per line, '#' comments, blank lines
// allowed.
inline SurfaceProgram parse(const std::string& text) {
  SurfaceProgram out;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string line = text.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    line_no++;
    detail::Lexer lex(line, line_no);
    std::vector<detail::Token> toks = lex.run();
    if (toks.size() > 1) {
      detail::LineParser p(std::move(toks), line_no);
      out.stmts.push_back(p.parse_stmt());
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return out;
}

// Parses a standalone expression (used by tests and the builder API).
inline ExprPtr parse_expr_text(const std::string& text) {
  detail::Lexer lex(text, 1);
  detail::LineParser p(lex.run(), 1);
  return p.parse_whole_expr();
}

}  // namespace mf
