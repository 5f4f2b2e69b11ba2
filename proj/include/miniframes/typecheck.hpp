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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miniframes/stmt.hpp"

namespace mf {

struct Diagnostic {
  Stage stage = Stage::Typecheck;
  int stmt_index = -1;
  int line = 0;
  std::string message;
};

inline std::string render(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "\n";
    if (d.stmt_index >= 0) out += "stmt " + std::to_string(d.stmt_index) + " ";
    if (d.line > 0) out += "(line " + std::to_string(d.line) + ") ";
    out += d.message;
  }
  return out;
}

class TypecheckFailed : public Error {
 public:
  explicit TypecheckFailed(const std::vector<Diagnostic>& diags)
      : Error(diags.empty() ? Stage::Typecheck : diags.front().stage,
              render(diags),
              diags.empty() ? 0 : diags.front().line),
        diags_(diags) {}
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

using TypeResolver =
    std::function<std::optional<ScalarType>(const std::string&)>;

// Bottom-up expression typing; annotates each node. Comparisons yield Bool,
// Bool promotes to Int64 in arithmetic, reductions follow the aggregate
// output rules (sum keeps the numeric type with Bool counting as Int64,
// mean/var are Float64, length is Int64).
inline ScalarType type_expr(const ExprPtr& e, const TypeResolver& resolve) {
  ScalarType t = std::visit(
      [&](const auto& n) -> ScalarType {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          auto rt = resolve(n.name);
          if (!rt)
            throw Error(Stage::Typecheck, "unknown column or array '" +
                                              (n.frame.empty()
                                                   ? n.name
                                                   : n.frame + "." + n.name) +
                                              "'");
          return *rt;
        } else if constexpr (std::is_same_v<T, Expr::Const>) {
          return scalar_type(n.value);
        } else if constexpr (std::is_same_v<T, Expr::BinOp>) {
          ScalarType lt = type_expr(n.lhs, resolve);
          ScalarType rt = type_expr(n.rhs, resolve);
          if (is_logical(n.op)) {
            if (lt != ScalarType::Bool || rt != ScalarType::Bool)
              throw Error(Stage::Typecheck,
                          std::string("'") + binop_token(n.op) +
                              "' requires bool operands");
            return ScalarType::Bool;
          }
          if (is_comparison(n.op)) {
            bool lb = lt == ScalarType::Bool, rb = rt == ScalarType::Bool;
            if (lb != rb)
              throw Error(Stage::Typecheck, "type mismatch: cannot compare " +
                                                std::string(type_name(lt)) +
                                                " with " + type_name(rt));
            if (lb && n.op != BinOpKind::Eq && n.op != BinOpKind::Ne)
              throw Error(Stage::Typecheck,
                          "bool values only support == and !=");
            return ScalarType::Bool;
          }
          // arithmetic: Bool promotes to Int64
          ScalarType la = lt == ScalarType::Bool ? ScalarType::Int64 : lt;
          ScalarType ra = rt == ScalarType::Bool ? ScalarType::Int64 : rt;
          return promote_numeric(la, ra);
        } else if constexpr (std::is_same_v<T, Expr::UnOp>) {
          ScalarType ot = type_expr(n.operand, resolve);
          if (n.op == UnOpKind::Not) {
            if (ot != ScalarType::Bool)
              throw Error(Stage::Typecheck, "'not' requires a bool operand");
            return ScalarType::Bool;
          }
          return ot == ScalarType::Bool ? ScalarType::Int64 : ot;
        } else if constexpr (std::is_same_v<T, Expr::Elementwise>) {
          ScalarType ot = type_expr(n.operand, resolve);
          if (ot == ScalarType::Bool)
            throw Error(Stage::Typecheck, std::string("type mismatch: '") +
                                              mapfn_name(n.fn) +
                                              "' of bool");
          return ScalarType::Float64;
        } else {
          const auto& r = std::get<Expr::ScalarReduce>(e->node);
          if (all_arrays(r.operand).empty())
            throw Error(Stage::Typecheck,
                        std::string(reducefn_name(r.fn)) +
                            "() needs an array operand");
          ScalarType ot = type_expr(r.operand, resolve);
          switch (r.fn) {
            case ReduceFn::Sum:
              return ot == ScalarType::Float64 ? ScalarType::Float64
                                               : ScalarType::Int64;
            case ReduceFn::Mean:
            case ReduceFn::Var: return ScalarType::Float64;
            case ReduceFn::Length: return ScalarType::Int64;
          }
          return ScalarType::Int64;
        }
      },
      e->node);
  e->type = t;
  return t;
}

inline ScalarType reducer_output_type(ReduceFn fn, ScalarType operand) {
  switch (fn) {
    case ReduceFn::Sum:
      return operand == ScalarType::Float64 ? ScalarType::Float64
                                            : ScalarType::Int64;
    case ReduceFn::Mean:
    case ReduceFn::Var: return ScalarType::Float64;
    case ReduceFn::Length: return ScalarType::Int64;
  }
  return ScalarType::Int64;
}

namespace detail {

// Per-position array types; AssignColumn may retype its array mid-program.
struct TypeEnv {
  std::map<std::string, ScalarType> arrays;
  std::set<std::string> matrices;

  TypeResolver resolver() const {
    return [this](const std::string& name) -> std::optional<ScalarType> {
      auto it = arrays.find(name);
      if (it == arrays.end()) return std::nullopt;
      return it->second;
    };
  }
};

}  // namespace detail

// Checks and annotates a desugared program: every Expr node gets a type,
// aggregate output columns get inferred types recorded in meta. Collects all
// diagnostics instead of stopping at the first.
inline std::vector<Diagnostic> typecheck(Program& p) {
  std::vector<Diagnostic> diags;
  detail::TypeEnv env;
  std::map<std::string, Schema> schemas;  // per-position frame schemas

  auto note_frame = [&](const std::string& frame, const Schema& schema) {
    schemas[frame] = schema;
    for (const auto& c : schema)
      env.arrays[array_name(frame, c.name)] = c.type;
  };

  for (size_t i = 0; i < p.stmts.size(); i++) {
    auto& s = p.stmts[i];
    auto diag = [&](std::string msg) {
      diags.push_back(
          {Stage::Typecheck, static_cast<int>(i), s.line, std::move(msg)});
    };
    auto check_expr = [&](const ExprPtr& e) -> std::optional<ScalarType> {
      try {
        return type_expr(e, env.resolver());
      } catch (const Error& err) {
        diag(err.message());
        return std::nullopt;
      }
    };
    try {
      std::visit(
          [&](auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, DataSourceStmt>) {
              note_frame(n.frame, n.schema);
            } else if constexpr (std::is_same_v<T, FilterStmt>) {
              auto pt = check_expr(n.pred);
              if (pt && *pt != ScalarType::Bool)
                diag("filter predicate must be bool, got " +
                     std::string(type_name(*pt)));
              Schema out;
              const Schema& in = schemas.at(n.in);
              for (const auto& c : n.columns) {
                const SchemaCol* sc = schema_find(in, c);
                if (!sc)
                  diag("unknown column '" + c + "' in frame '" + n.in + "'");
                else
                  out.push_back(*sc);
              }
              note_frame(n.out, out);
            } else if constexpr (std::is_same_v<T, JoinStmt>) {
              const Schema& ls = schemas.at(n.left);
              const Schema& rs = schemas.at(n.right);
              const SchemaCol* lk = schema_find(ls, n.left_key);
              const SchemaCol* rk = schema_find(rs, n.right_key);
              if (!lk) diag("unknown column '" + n.left_key + "' in frame '" +
                            n.left + "'");
              if (!rk) diag("unknown column '" + n.right_key + "' in frame '" +
                            n.right + "'");
              if (lk && rk && lk->type != rk->type)
                diag("key type mismatch: " + n.left + "." + n.left_key + " is " +
                     type_name(lk->type) + ", " + n.right + "." + n.right_key +
                     " is " + type_name(rk->type));
              Schema out;
              for (const auto& c : n.out_cols) {
                const Schema& side = c.from_right ? rs : ls;
                const SchemaCol* sc = schema_find(side, c.src);
                if (!sc) {
                  diag("unknown join output source column '" + c.src + "'");
                  continue;
                }
                out.push_back({c.name, sc->type});
              }
              note_frame(n.out, out);
            } else if constexpr (std::is_same_v<T, AggregateStmt>) {
              const Schema& in = schemas.at(n.in);
              const SchemaCol* kc = schema_find(in, n.key);
              if (!kc) {
                diag("unknown key column '" + n.key + "' in frame '" + n.in +
                     "'");
                return;
              }
              Schema out;
              out.push_back({n.key, kc->type});
              for (auto& o : n.outputs) {
                auto et = check_expr(o.expr);
                out.push_back({o.name, et ? reducer_output_type(o.reducer, *et)
                                          : ScalarType::Int64});
              }
              note_frame(n.out, out);
            } else if constexpr (std::is_same_v<T, ConcatStmt>) {
              Schema out;
              const Schema& in = schemas.at(n.ins.at(0));
              for (const auto& c : n.columns) {
                const SchemaCol* sc = schema_find(in, c);
                if (!sc)
                  diag("unknown column '" + c + "' in frame '" + n.ins[0] + "'");
                else
                  out.push_back(*sc);
              }
              note_frame(n.out, out);
            } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
              auto it = schemas.find(n.frame);
              if (it == schemas.end()) {
                diag("unknown frame '" + n.frame + "'");
                return;
              }
              if (!schema_find(it->second, n.column)) {
                diag("unknown column '" + n.column + "' in frame '" + n.frame +
                     "'");
                return;
              }
              auto et = check_expr(n.expr);
              if (et) {
                for (auto& c : it->second)
                  if (c.name == n.column) c.type = *et;
                env.arrays[array_name(n.frame, n.column)] = *et;
              }
            } else if constexpr (std::is_same_v<T, MapExprStmt>) {
              ExprArrays refs;
              collect_arrays(n.expr, refs);
              if (refs.elementwise.empty())
                diag("map expression must reference at least one array "
                     "element-wise");
              auto et = check_expr(n.expr);
              if (et) env.arrays[n.out] = *et;
            } else if constexpr (std::is_same_v<T, CumsumStmt>) {
              auto it = env.arrays.find(n.in);
              if (it == env.arrays.end()) {
                diag("unknown array '" + n.in + "'");
                return;
              }
              env.arrays[n.out] = it->second == ScalarType::Float64
                                      ? ScalarType::Float64
                                      : ScalarType::Int64;
            } else if constexpr (std::is_same_v<T, StencilStmt>) {
              auto it = env.arrays.find(n.in);
              if (it == env.arrays.end()) {
                diag("unknown array '" + n.in + "'");
                return;
              }
              if (it->second == ScalarType::Bool)
                diag("stencil input must be numeric");
              env.arrays[n.out] = ScalarType::Float64;
            } else if constexpr (std::is_same_v<T, HcatStmt> ||
                                 std::is_same_v<T, MatrixAssemblyStmt>) {
              for (const auto& a : n.inputs) {
                auto it = env.arrays.find(a);
                if (it == env.arrays.end())
                  diag("unknown array '" + a + "'");
                else if (it->second == ScalarType::Bool)
                  diag("matrix assembly input must be numeric");
              }
              env.matrices.insert(n.out);
            } else if constexpr (std::is_same_v<T, TransposeStmt>) {
              if (!env.matrices.count(n.in))
                diag("unknown matrix '" + n.in + "'");
              env.matrices.insert(n.out);
            } else if constexpr (std::is_same_v<T, RebalanceStmt>) {
              if (!env.arrays.count(n.array))
                diag("unknown array '" + n.array + "'");
            } else if constexpr (std::is_same_v<T, SinkStmt>) {
              for (const auto& item : n.items) {
                if (item.is_matrix) {
                  if (!env.matrices.count(item.matrix))
                    diag("unknown matrix '" + item.matrix + "'");
                } else {
                  for (const auto& c : item.columns)
                    if (!env.arrays.count(c.array))
                      diag("unknown array '" + c.array + "'");
                }
              }
            }
          },
          s.node);
    } catch (const std::out_of_range&) {
      diag("reference to an undefined frame");
    }
  }
  if (diags.empty()) recompute_meta(p);
  return diags;
}

inline std::string print_schema_inline(const Schema& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); i++) {
    if (i) out += ", ";
    out += s[i].name + ":" + type_name(s[i].type);
  }
  return out;
}

// Structural validation: def-before-use, unique definitions (AssignColumn is
// the allowed redefinition), equal schemas for concat inputs, odd stencil
// windows. Every violation is reported with its statement index.
inline std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> diags;
  std::set<std::string> defined;
  std::map<std::string, Schema> schemas;

  for (size_t i = 0; i < p.stmts.size(); i++) {
    const auto& s = p.stmts[i];
    auto diag = [&](std::string msg) {
      diags.push_back(
          {Stage::Validate, static_cast<int>(i), s.line, std::move(msg)});
    };
    DefUse du = def_use(s);
    bool is_assign = stmt_is<AssignColumnStmt>(s);
    for (const auto& u : du.uses)
      if (!defined.count(u)) diag("use of '" + u + "' before definition");
    for (const auto& d : du.defs) {
      if (defined.count(d) && !is_assign)
        diag("redefinition of '" + d + "'");
      defined.insert(d);
    }
    if (is_assign) {
      const auto* a = stmt_as<AssignColumnStmt>(s);
      if (!defined.count(array_name(a->frame, a->column)))
        diag("assignment to undefined column '" + a->frame + "." + a->column +
             "'");
    }
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DataSourceStmt>) {
            schemas[n.frame] = n.schema;
          } else if constexpr (std::is_same_v<T, FilterStmt>) {
            if (schemas.count(n.in)) schemas[n.out] = schemas[n.in];
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            const Schema* first = nullptr;
            for (const auto& in : n.ins) {
              auto it = schemas.find(in);
              if (it == schemas.end()) continue;
              if (!first) {
                first = &it->second;
              } else if (*first != it->second) {
                diag("concat inputs have different schemas: (" +
                     print_schema_inline(*first) + ") vs (" +
                     print_schema_inline(it->second) + ")");
              }
            }
            if (first) schemas[n.out] = *first;
          } else if constexpr (std::is_same_v<T, StencilStmt>) {
            if (n.weights.empty() || n.weights.size() % 2 == 0)
              diag("stencil window must be odd, got " +
                   std::to_string(n.weights.size()) + " weights");
          } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
            auto it = schemas.find(n.frame);
            if (it != schemas.end() && n.expr->type)
              for (auto& c : it->second)
                if (c.name == n.column) c.type = *n.expr->type;
          } else if constexpr (std::is_same_v<T, JoinStmt> ||
                               std::is_same_v<T, AggregateStmt>) {
            if (p.meta.has(n.out)) schemas[n.out] = p.meta.schema(n.out);
          }
        },
        s.node);
  }
  return diags;
}

inline void require_ok(const std::vector<Diagnostic>& diags) {
  if (!diags.empty()) throw TypecheckFailed(diags);
}

}  // namespace mf
