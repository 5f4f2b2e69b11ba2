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

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "miniframes/expr.hpp"

namespace mf {

struct SchemaCol {
  std::string name;
  ScalarType type;
  bool operator==(const SchemaCol&) const = default;
};
using Schema = std::vector<SchemaCol>;

inline const SchemaCol* schema_find(const Schema& s, const std::string& name) {
  for (const auto& c : s)
    if (c.name == name) return &c;
  return nullptr;
}

// Frame name -> ordered (column, type) list. Column-name sets are fixed at
// frame definition; AssignColumn may retype a column, recorded here as the
// final type (per-position types come from replaying the statement list).
struct FrameMeta {
  std::map<std::string, Schema> frames;

  bool has(const std::string& f) const { return frames.count(f) > 0; }
  const Schema& schema(const std::string& f) const { return frames.at(f); }
};

// The array that backs column `col` of frame `frame`.
inline std::string array_name(const std::string& frame, const std::string& col) {
  return "_" + frame + "_" + col;
}

enum class FileFormat { Csv, Hfb };

struct AggOutput {
  std::string name;
  ReduceFn reducer;
  ExprPtr expr;
  std::string expr_array;  // implicit expression-array name, e.g. expr_arr1
};

struct JoinOutCol {
  std::string name;       // output column name (right side renamed on clash)
  bool from_right;
  std::string src;        // source column name on its side
};

struct DataSourceStmt {
  std::string frame;
  Schema schema;
  std::string path;
  FileFormat format;
};

struct FilterStmt {
  std::string out, in;
  ExprPtr pred;
  std::string pred_array;           // implicit expression-array name
  std::vector<std::string> columns; // columns copied through (pruning shrinks)
};

struct JoinStmt {
  std::string out, left, right;
  std::string left_key, right_key;
  std::vector<JoinOutCol> out_cols;
};

struct AggregateStmt {
  std::string out, in, key;
  std::vector<AggOutput> outputs;
};

struct ConcatStmt {
  std::string out;
  std::vector<std::string> ins;
  std::vector<std::string> columns; // columns copied through (pruning shrinks)
};

struct AssignColumnStmt {
  std::string frame, column;
  ExprPtr expr;
};

struct MapExprStmt {
  std::string out;
  ExprPtr expr;
};

struct CumsumStmt {
  std::string out, in;
};

struct StencilStmt {
  std::string out, in;
  std::vector<double> weights;
  double divisor = 1.0;
};

// Unfused horizontal concatenation / transpose; produced by desugaring an
// `assemble` statement and normally fused into MatrixAssembly.
struct HcatStmt {
  std::string out;
  std::vector<std::string> inputs;
};

struct TransposeStmt {
  std::string out, in;
};

struct MatrixAssemblyStmt {
  std::string out;
  std::vector<std::string> inputs;
};

struct RebalanceStmt {
  std::string array;
};

struct SinkColumn {
  std::string display;  // column name in the written file
  std::string array;
};

struct SinkItem {
  std::string display;             // frame/array/matrix surface name
  bool is_matrix = false;
  std::string matrix;              // matrix name when is_matrix
  std::vector<SinkColumn> columns; // otherwise, columns to write
};

struct SinkStmt {
  std::string name;
  bool replicated = false;
  std::vector<SinkItem> items;
};

struct Stmt {
  using Node = std::variant<DataSourceStmt, FilterStmt, JoinStmt, AggregateStmt,
                            ConcatStmt, AssignColumnStmt, MapExprStmt,
                            CumsumStmt, StencilStmt, HcatStmt, TransposeStmt,
                            MatrixAssemblyStmt, RebalanceStmt, SinkStmt>;
  int line = 0;
  Node node;
};

template <typename T>
bool stmt_is(const Stmt& s) {
  return std::holds_alternative<T>(s.node);
}

template <typename T>
const T* stmt_as(const Stmt& s) {
  return std::get_if<T>(&s.node);
}

template <typename T>
T* stmt_as(Stmt& s) {
  return std::get_if<T>(&s.node);
}

inline bool is_relational(const Stmt& s) {
  return stmt_is<DataSourceStmt>(s) || stmt_is<FilterStmt>(s) ||
         stmt_is<JoinStmt>(s) || stmt_is<AggregateStmt>(s) ||
         stmt_is<ConcatStmt>(s);
}

struct Program {
  std::vector<Stmt> stmts;
  FrameMeta meta;
};

inline std::set<std::string> frame_arrays(const FrameMeta& meta,
                                          const std::string& frame) {
  std::set<std::string> out;
  for (const auto& c : meta.schema(frame)) out.insert(array_name(frame, c.name));
  return out;
}

struct DefUse {
  std::set<std::string> defs;
  std::set<std::string> uses;
};

// Arrays (and matrices) defined/used by a statement. Rebalance renormalizes
// in place and defines nothing; AssignColumn is the one statement that
// redefines a name.
inline DefUse def_use(const Stmt& s) {
  DefUse du;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DataSourceStmt>) {
          for (const auto& c : n.schema)
            du.defs.insert(array_name(n.frame, c.name));
        } else if constexpr (std::is_same_v<T, FilterStmt>) {
          for (const auto& c : n.columns) {
            du.defs.insert(array_name(n.out, c));
            du.uses.insert(array_name(n.in, c));
          }
          for (const auto& a : all_arrays(n.pred)) du.uses.insert(a);
        } else if constexpr (std::is_same_v<T, JoinStmt>) {
          du.uses.insert(array_name(n.left, n.left_key));
          du.uses.insert(array_name(n.right, n.right_key));
          for (const auto& c : n.out_cols) {
            du.defs.insert(array_name(n.out, c.name));
            du.uses.insert(array_name(c.from_right ? n.right : n.left, c.src));
          }
        } else if constexpr (std::is_same_v<T, AggregateStmt>) {
          du.defs.insert(array_name(n.out, n.key));
          du.uses.insert(array_name(n.in, n.key));
          for (const auto& o : n.outputs) {
            du.defs.insert(array_name(n.out, o.name));
            for (const auto& a : all_arrays(o.expr)) du.uses.insert(a);
          }
        } else if constexpr (std::is_same_v<T, ConcatStmt>) {
          for (const auto& c : n.columns) {
            du.defs.insert(array_name(n.out, c));
            for (const auto& in : n.ins) du.uses.insert(array_name(in, c));
          }
        } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
          du.defs.insert(array_name(n.frame, n.column));
          for (const auto& a : all_arrays(n.expr)) du.uses.insert(a);
        } else if constexpr (std::is_same_v<T, MapExprStmt>) {
          du.defs.insert(n.out);
          for (const auto& a : all_arrays(n.expr)) du.uses.insert(a);
        } else if constexpr (std::is_same_v<T, CumsumStmt>) {
          du.defs.insert(n.out);
          du.uses.insert(n.in);
        } else if constexpr (std::is_same_v<T, StencilStmt>) {
          du.defs.insert(n.out);
          du.uses.insert(n.in);
        } else if constexpr (std::is_same_v<T, HcatStmt>) {
          du.defs.insert(n.out);
          for (const auto& a : n.inputs) du.uses.insert(a);
        } else if constexpr (std::is_same_v<T, TransposeStmt>) {
          du.defs.insert(n.out);
          du.uses.insert(n.in);
        } else if constexpr (std::is_same_v<T, MatrixAssemblyStmt>) {
          du.defs.insert(n.out);
          for (const auto& a : n.inputs) du.uses.insert(a);
        } else if constexpr (std::is_same_v<T, RebalanceStmt>) {
          du.uses.insert(n.array);
        } else if constexpr (std::is_same_v<T, SinkStmt>) {
          for (const auto& item : n.items) {
            if (item.is_matrix)
              du.uses.insert(item.matrix);
            else
              for (const auto& c : item.columns) du.uses.insert(c.array);
          }
        }
      },
      s.node);
  return du;
}

// Rebuilds FrameMeta by replaying the statement list; used after passes that
// insert, remove, or retype statements.
inline void recompute_meta(Program& p) {
  FrameMeta meta;
  std::map<std::string, ScalarType> array_types;
  auto note = [&](const std::string& frame, Schema schema) {
    for (const auto& c : schema)
      array_types[array_name(frame, c.name)] = c.type;
    meta.frames[frame] = std::move(schema);
  };
  for (auto& s : p.stmts) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DataSourceStmt>) {
            note(n.frame, n.schema);
          } else if constexpr (std::is_same_v<T, FilterStmt>) {
            Schema out;
            const auto& in = meta.frames.at(n.in);
            for (const auto& c : n.columns)
              out.push_back({c, schema_find(in, c)->type});
            note(n.out, std::move(out));
          } else if constexpr (std::is_same_v<T, JoinStmt>) {
            Schema out;
            for (const auto& c : n.out_cols) {
              const auto& side = meta.frames.at(c.from_right ? n.right : n.left);
              out.push_back({c.name, schema_find(side, c.src)->type});
            }
            note(n.out, std::move(out));
          } else if constexpr (std::is_same_v<T, AggregateStmt>) {
            // Output types are the typechecker's job; replay keeps whatever
            // the expr annotations already say (meta rebuilt after typecheck).
            Schema out;
            const auto& in = meta.frames.at(n.in);
            out.push_back({n.key, schema_find(in, n.key)->type});
            for (const auto& o : n.outputs) {
              ScalarType et =
                  o.expr->type.value_or(ScalarType::Float64);
              ScalarType t;
              switch (o.reducer) {
                case ReduceFn::Sum:
                  t = et == ScalarType::Float64 ? ScalarType::Float64
                                                : ScalarType::Int64;
                  break;
                case ReduceFn::Mean:
                case ReduceFn::Var: t = ScalarType::Float64; break;
                case ReduceFn::Length: t = ScalarType::Int64; break;
              }
              out.push_back({o.name, t});
            }
            note(n.out, std::move(out));
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            Schema out;
            const auto& in = meta.frames.at(n.ins.at(0));
            for (const auto& c : n.columns)
              out.push_back({c, schema_find(in, c)->type});
            note(n.out, std::move(out));
          } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
            Schema s2 = meta.frames.at(n.frame);
            for (auto& c : s2)
              if (c.name == n.column && n.expr->type)
                c.type = *n.expr->type;
            note(n.frame, std::move(s2));
          }
        },
        s.node);
  }
  p.meta = std::move(meta);
}

}  // namespace mf
