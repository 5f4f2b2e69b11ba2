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

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "miniframes/common.hpp"

namespace mf {

enum class BinOpKind {
  Add, Sub, Mul, Div,
  Lt, Le, Eq, Ne, Gt, Ge,
  And, Or,
};

enum class UnOpKind { Neg, Not };

enum class MapFn { Log, Exp };

enum class ReduceFn { Sum, Mean, Var, Length };

inline const char* binop_token(BinOpKind op) {
  switch (op) {
    case BinOpKind::Add: return "+";
    case BinOpKind::Sub: return "-";
    case BinOpKind::Mul: return "*";
    case BinOpKind::Div: return "/";
    case BinOpKind::Lt: return "<";
    case BinOpKind::Le: return "<=";
    case BinOpKind::Eq: return "==";
    case BinOpKind::Ne: return "!=";
    case BinOpKind::Gt: return ">";
    case BinOpKind::Ge: return ">=";
    case BinOpKind::And: return "and";
    case BinOpKind::Or: return "or";
  }
  return "?";
}

inline const char* mapfn_name(MapFn f) {
  return f == MapFn::Log ? "log" : "exp";
}

inline const char* reducefn_name(ReduceFn f) {
  switch (f) {
    case ReduceFn::Sum: return "sum";
    case ReduceFn::Mean: return "mean";
    case ReduceFn::Var: return "var";
    case ReduceFn::Length: return "length";
  }
  return "?";
}

inline bool is_comparison(BinOpKind op) {
  return op >= BinOpKind::Lt && op <= BinOpKind::Ge;
}

inline bool is_logical(BinOpKind op) {
  return op == BinOpKind::And || op == BinOpKind::Or;
}

inline bool is_arith(BinOpKind op) {
  return op >= BinOpKind::Add && op <= BinOpKind::Div;
}

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

// Element-wise expression tree over columns/arrays with scalar-reduction
// leaves. Before desugaring a ColumnRef may carry a frame qualifier; after
// desugaring every ColumnRef names a concrete array.
struct Expr {
  struct ColumnRef {
    std::string frame;  // empty once resolved to an array
    std::string name;
  };
  struct Const {
    Scalar value;
  };
  struct BinOp {
    BinOpKind op;
    ExprPtr lhs, rhs;
  };
  struct UnOp {
    UnOpKind op;
    ExprPtr operand;
  };
  struct Elementwise {
    MapFn fn;
    ExprPtr operand;
  };
  struct ScalarReduce {
    ReduceFn fn;
    ExprPtr operand;
  };

  using Node =
      std::variant<ColumnRef, Const, BinOp, UnOp, Elementwise, ScalarReduce>;

  Node node;
  std::optional<ScalarType> type;  // filled by the typechecker
};

inline ExprPtr make_expr(Expr::Node n) {
  auto e = std::make_shared<Expr>();
  e->node = std::move(n);
  return e;
}

inline ExprPtr col_ref(std::string name) {
  return make_expr(Expr::ColumnRef{"", std::move(name)});
}
inline ExprPtr col_ref(std::string frame, std::string name) {
  return make_expr(Expr::ColumnRef{std::move(frame), std::move(name)});
}
inline ExprPtr lit(int64_t v) { return make_expr(Expr::Const{Scalar(v)}); }
inline ExprPtr lit(double v) { return make_expr(Expr::Const{Scalar(v)}); }
inline ExprPtr lit(bool v) { return make_expr(Expr::Const{Scalar(v)}); }
inline ExprPtr bin(BinOpKind op, ExprPtr l, ExprPtr r) {
  return make_expr(Expr::BinOp{op, std::move(l), std::move(r)});
}
inline ExprPtr un(UnOpKind op, ExprPtr e) {
  return make_expr(Expr::UnOp{op, std::move(e)});
}
inline ExprPtr elementwise(MapFn f, ExprPtr e) {
  return make_expr(Expr::Elementwise{f, std::move(e)});
}
inline ExprPtr reduce(ReduceFn f, ExprPtr e) {
  return make_expr(Expr::ScalarReduce{f, std::move(e)});
}

inline ExprPtr clone_expr(const ExprPtr& e) {
  auto out = std::make_shared<Expr>();
  out->type = e->type;
  out->node = std::visit(
      [](const auto& n) -> Expr::Node {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::BinOp>) {
          return Expr::BinOp{n.op, clone_expr(n.lhs), clone_expr(n.rhs)};
        } else if constexpr (std::is_same_v<T, Expr::UnOp>) {
          return Expr::UnOp{n.op, clone_expr(n.operand)};
        } else if constexpr (std::is_same_v<T, Expr::Elementwise>) {
          return Expr::Elementwise{n.fn, clone_expr(n.operand)};
        } else if constexpr (std::is_same_v<T, Expr::ScalarReduce>) {
          return Expr::ScalarReduce{n.fn, clone_expr(n.operand)};
        } else {
          return n;
        }
      },
      e->node);
  return out;
}

// Visits every node, children first.
inline void walk_expr(const ExprPtr& e,
                      const std::function<void(const Expr&)>& fn) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::BinOp>) {
          walk_expr(n.lhs, fn);
          walk_expr(n.rhs, fn);
        } else if constexpr (std::is_same_v<T, Expr::UnOp> ||
                             std::is_same_v<T, Expr::Elementwise> ||
                             std::is_same_v<T, Expr::ScalarReduce>) {
          walk_expr(n.operand, fn);
        }
      },
      e->node);
  fn(*e);
}

// Rewrites ColumnRef nodes in place.
inline void rewrite_refs(
    ExprPtr& e, const std::function<Expr::ColumnRef(const Expr::ColumnRef&)>& fn) {
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          n = fn(n);
        } else if constexpr (std::is_same_v<T, Expr::BinOp>) {
          rewrite_refs(n.lhs, fn);
          rewrite_refs(n.rhs, fn);
        } else if constexpr (std::is_same_v<T, Expr::UnOp> ||
                             std::is_same_v<T, Expr::Elementwise> ||
                             std::is_same_v<T, Expr::ScalarReduce>) {
          rewrite_refs(n.operand, fn);
        }
      },
      e->node);
}

struct ExprArrays {
  std::set<std::string> elementwise;  // arrays used element-wise
  std::set<std::string> reduced;      // arrays used only under a reduction
};

// Splits referenced arrays into element-wise uses and reduction-only uses;
// the latter never constrain distributions (a reduction yields a replicated
// scalar regardless of its operand's distribution).
inline void collect_arrays(const ExprPtr& e, ExprArrays& out,
                           bool under_reduce = false) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          if (under_reduce)
            out.reduced.insert(n.name);
          else
            out.elementwise.insert(n.name);
        } else if constexpr (std::is_same_v<T, Expr::BinOp>) {
          collect_arrays(n.lhs, out, under_reduce);
          collect_arrays(n.rhs, out, under_reduce);
        } else if constexpr (std::is_same_v<T, Expr::UnOp> ||
                             std::is_same_v<T, Expr::Elementwise>) {
          collect_arrays(n.operand, out, under_reduce);
        } else if constexpr (std::is_same_v<T, Expr::ScalarReduce>) {
          collect_arrays(n.operand, out, true);
        }
      },
      e->node);
}

inline std::set<std::string> all_arrays(const ExprPtr& e) {
  ExprArrays a;
  collect_arrays(e, a);
  a.elementwise.insert(a.reduced.begin(), a.reduced.end());
  return a.elementwise;
}

inline bool contains_reduce(const ExprPtr& e) {
  bool found = false;
  walk_expr(e, [&](const Expr& n) {
    if (std::holds_alternative<Expr::ScalarReduce>(n.node)) found = true;
  });
  return found;
}

// ---- scalar operation semantics ----
// Bool participates in arithmetic as 0/1 Int64 so that sum(x < 1.0) counts
// matching rows.

inline ScalarType promote_numeric(ScalarType a, ScalarType b) {
  if (a == ScalarType::Float64 || b == ScalarType::Float64)
    return ScalarType::Float64;
  return ScalarType::Int64;
}

class EvalError : public Error {
 public:
  explicit EvalError(std::string msg) : Error(Stage::Execute, std::move(msg)) {}
};

inline int64_t checked_div(int64_t a, int64_t b) {
  if (b == 0) throw EvalError("integer division by zero");
  return a / b;
}

}  // namespace mf
