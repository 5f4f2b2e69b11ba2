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

#include <cmath>
#include <functional>

#include "miniframes/stmt.hpp"

namespace mf {

// Element-wise expression evaluation over a set of named arrays. The reduce
// hook makes the same walker usable sequentially (oracle) and per-rank with
// collective reductions (runtime): the hook receives the locally evaluated
// operand chunk and returns the (global) scalar.
struct EvalEnv {
  std::function<const ColumnVec*(const std::string&)> array;
  // (fn, operand expression, locally evaluated operand) -> global scalar;
  // the operand expression lets the runtime pick local vs collective
  // reduction from the operand's distribution
  std::function<Scalar(ReduceFn, const ExprPtr&, const ColumnVec&)> reduce;
};

inline std::vector<double> to_f64_vec(const ColumnVec& v) {
  std::vector<double> out(v.size());
  switch (v.dtype()) {
    case ScalarType::Int64:
      for (size_t i = 0; i < out.size(); i++)
        out[i] = static_cast<double>(v.i64()[i]);
      break;
    case ScalarType::Float64: return v.f64();
    case ScalarType::Bool:
      for (size_t i = 0; i < out.size(); i++) out[i] = v.b8()[i] ? 1.0 : 0.0;
      break;
  }
  return out;
}

inline std::vector<int64_t> to_i64_vec(const ColumnVec& v) {
  std::vector<int64_t> out(v.size());
  switch (v.dtype()) {
    case ScalarType::Int64: return v.i64();
    case ScalarType::Float64:
      for (size_t i = 0; i < out.size(); i++)
        out[i] = static_cast<int64_t>(v.f64()[i]);
      break;
    case ScalarType::Bool:
      for (size_t i = 0; i < out.size(); i++) out[i] = v.b8()[i] ? 1 : 0;
      break;
  }
  return out;
}

inline ColumnVec splat(const Scalar& s, size_t n) {
  switch (scalar_type(s)) {
    case ScalarType::Int64:
      return ColumnVec(std::vector<int64_t>(n, std::get<int64_t>(s)));
    case ScalarType::Float64:
      return ColumnVec(std::vector<double>(n, std::get<double>(s)));
    case ScalarType::Bool:
      return ColumnVec(std::vector<uint8_t>(n, std::get<bool>(s) ? 1 : 0));
  }
  return ColumnVec();
}

namespace detail {

inline ColumnVec eval_binop(BinOpKind op, const ColumnVec& l,
                            const ColumnVec& r) {
  size_t n = l.size();
  if (is_logical(op)) {
    const auto& a = l.b8();
    const auto& b = r.b8();
    std::vector<uint8_t> out(n);
    if (op == BinOpKind::And)
      for (size_t i = 0; i < n; i++) out[i] = (a[i] && b[i]) ? 1 : 0;
    else
      for (size_t i = 0; i < n; i++) out[i] = (a[i] || b[i]) ? 1 : 0;
    return ColumnVec(std::move(out));
  }
  bool any_f64 =
      l.dtype() == ScalarType::Float64 || r.dtype() == ScalarType::Float64;
  if (is_comparison(op)) {
    std::vector<uint8_t> out(n);
    auto cmp = [&](auto x, auto y) -> uint8_t {
      switch (op) {
        case BinOpKind::Lt: return x < y;
        case BinOpKind::Le: return x <= y;
        case BinOpKind::Eq: return x == y;
        case BinOpKind::Ne: return x != y;
        case BinOpKind::Gt: return x > y;
        default: return x >= y;
      }
    };
    if (any_f64) {
      auto a = to_f64_vec(l);
      auto b = to_f64_vec(r);
      for (size_t i = 0; i < n; i++) out[i] = cmp(a[i], b[i]);
    } else {
      auto a = to_i64_vec(l);
      auto b = to_i64_vec(r);
      for (size_t i = 0; i < n; i++) out[i] = cmp(a[i], b[i]);
    }
    return ColumnVec(std::move(out));
  }
  // arithmetic
  if (any_f64) {
    auto a = to_f64_vec(l);
    auto b = to_f64_vec(r);
    std::vector<double> out(n);
    switch (op) {
      case BinOpKind::Add:
        for (size_t i = 0; i < n; i++) out[i] = a[i] + b[i];
        break;
      case BinOpKind::Sub:
        for (size_t i = 0; i < n; i++) out[i] = a[i] - b[i];
        break;
      case BinOpKind::Mul:
        for (size_t i = 0; i < n; i++) out[i] = a[i] * b[i];
        break;
      default:
        for (size_t i = 0; i < n; i++) out[i] = a[i] / b[i];
        break;
    }
    return ColumnVec(std::move(out));
  }
  auto a = to_i64_vec(l);
  auto b = to_i64_vec(r);
  std::vector<int64_t> out(n);
  switch (op) {
    case BinOpKind::Add:
      for (size_t i = 0; i < n; i++) out[i] = a[i] + b[i];
      break;
    case BinOpKind::Sub:
      for (size_t i = 0; i < n; i++) out[i] = a[i] - b[i];
      break;
    case BinOpKind::Mul:
      for (size_t i = 0; i < n; i++) out[i] = a[i] * b[i];
      break;
    default:
      for (size_t i = 0; i < n; i++) out[i] = checked_div(a[i], b[i]);
      break;
  }
  return ColumnVec(std::move(out));
}

}  // namespace detail

// Natural domain length of an expression: the length of the first array it
// references element-wise (all others must agree, checked during eval).
inline std::optional<size_t> expr_domain(const ExprPtr& e, const EvalEnv& env) {
  ExprArrays refs;
  collect_arrays(e, refs);
  for (const auto& a : refs.elementwise) {
    const ColumnVec* v = env.array(a);
    if (v) return v->size();
  }
  return std::nullopt;
}

inline ColumnVec eval_expr(const ExprPtr& e, const EvalEnv& env, size_t domain) {
  return std::visit(
      [&](const auto& n) -> ColumnVec {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          const ColumnVec* v = env.array(n.name);
          if (!v) throw EvalError("unknown array '" + n.name + "'");
          if (v->size() != domain)
            throw EvalError("length mismatch: array '" + n.name + "' has " +
                            std::to_string(v->size()) + " rows, expected " +
                            std::to_string(domain));
          return *v;
        } else if constexpr (std::is_same_v<T, Expr::Const>) {
          return splat(n.value, domain);
        } else if constexpr (std::is_same_v<T, Expr::BinOp>) {
          ColumnVec l = eval_expr(n.lhs, env, domain);
          ColumnVec r = eval_expr(n.rhs, env, domain);
          return detail::eval_binop(n.op, l, r);
        } else if constexpr (std::is_same_v<T, Expr::UnOp>) {
          ColumnVec v = eval_expr(n.operand, env, domain);
          if (n.op == UnOpKind::Not) {
            auto out = v.b8();
            for (auto& x : out) x = x ? 0 : 1;
            return ColumnVec(std::move(out));
          }
          if (v.dtype() == ScalarType::Float64) {
            auto out = v.f64();
            for (auto& x : out) x = -x;
            return ColumnVec(std::move(out));
          }
          auto out = to_i64_vec(v);
          for (auto& x : out) x = -x;
          return ColumnVec(std::move(out));
        } else if constexpr (std::is_same_v<T, Expr::Elementwise>) {
          ColumnVec v = eval_expr(n.operand, env, domain);
          auto out = to_f64_vec(v);
          if (n.fn == MapFn::Log)
            for (auto& x : out) x = std::log(x);
          else
            for (auto& x : out) x = std::exp(x);
          return ColumnVec(std::move(out));
        } else {
          const auto& red = std::get<Expr::ScalarReduce>(e->node);
          // reductions run over the operand's own domain and broadcast
          auto od = expr_domain(red.operand, env);
          if (!od) throw EvalError("reduction needs an array operand");
          ColumnVec operand = eval_expr(red.operand, env, *od);
          Scalar result = env.reduce(red.fn, red.operand, operand);
          return splat(result, domain);
        }
      },
      e->node);
}

// Sequential stencil semantics: interior out[i] = sum(w[j]*x[i+j-k])/div,
// global borders (first and last k elements) copy the input.
inline std::vector<double> sequential_stencil(std::vector<double> x,
                                              const std::vector<double>& w,
                                              double divisor) {
  size_t n = x.size();
  size_t k = w.size() / 2;
  std::vector<double> out(x.begin(), x.end());
  for (size_t i = k; i + k < n; i++) {
    double acc = 0.0;
    for (size_t j = 0; j < w.size(); j++) acc += w[j] * x[i + j - k];
    out[i] = acc / divisor;
  }
  return out;
}

// Sequential reductions; the reference semantics. Sums accumulate
// left-to-right in input order; var is two-pass sample variance with the
// singleton case pinned to 0.
inline Scalar sequential_reduce(ReduceFn fn, const ColumnVec& v) {
  size_t n = v.size();
  switch (fn) {
    case ReduceFn::Length: return Scalar(static_cast<int64_t>(n));
    case ReduceFn::Sum: {
      if (v.dtype() == ScalarType::Float64) {
        double s = 0.0;
        for (double x : v.f64()) s += x;
        return Scalar(s);
      }
      auto xs = to_i64_vec(v);
      int64_t s = 0;
      for (int64_t x : xs) s += x;
      return Scalar(s);
    }
    case ReduceFn::Mean: {
      auto xs = to_f64_vec(v);
      double s = 0.0;
      for (double x : xs) s += x;
      return Scalar(s / static_cast<double>(n));
    }
    case ReduceFn::Var: {
      if (n < 2) return Scalar(0.0);
      auto xs = to_f64_vec(v);
      double s = 0.0;
      for (double x : xs) s += x;
      double mean = s / static_cast<double>(n);
      double ssd = 0.0;
      for (double x : xs) ssd += (x - mean) * (x - mean);
      return Scalar(ssd / static_cast<double>(n - 1));
    }
  }
  return Scalar(int64_t{0});
}

inline EvalEnv sequential_env(
    const std::function<const ColumnVec*(const std::string&)>& lookup) {
  EvalEnv env;
  env.array = lookup;
  env.reduce = [](ReduceFn fn, const ExprPtr&, const ColumnVec& v) {
    return sequential_reduce(fn, v);
  };
  return env;
}

}  // namespace mf
