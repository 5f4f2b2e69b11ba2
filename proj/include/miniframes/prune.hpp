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

#include "miniframes/stmt.hpp"

namespace mf {

// Whole-program dead code elimination at array (= frame column) granularity:
// anything that cannot reach a Sink is dropped, including individual source
// column reads. A single backward pass suffices (defs precede uses;
// AssignColumn conservatively keeps its column's earlier definition alive).
inline Program prune_dead_code(Program p) {
  std::set<std::string> live;
  std::vector<bool> keep(p.stmts.size(), false);

  for (size_t idx = p.stmts.size(); idx-- > 0;) {
    Stmt& s = p.stmts[idx];
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          auto mark = [&](const std::string& a) { live.insert(a); };
          if constexpr (std::is_same_v<T, SinkStmt>) {
            keep[idx] = true;
            for (const auto& item : n.items) {
              if (item.is_matrix) mark(item.matrix);
              for (const auto& c : item.columns) mark(c.array);
            }
          } else if constexpr (std::is_same_v<T, DataSourceStmt>) {
            Schema pruned;
            for (const auto& c : n.schema)
              if (live.count(array_name(n.frame, c.name))) pruned.push_back(c);
            n.schema = std::move(pruned);
            keep[idx] = !n.schema.empty();
          } else if constexpr (std::is_same_v<T, FilterStmt>) {
            std::vector<std::string> cols;
            for (const auto& c : n.columns)
              if (live.count(array_name(n.out, c))) cols.push_back(c);
            n.columns = std::move(cols);
            keep[idx] = !n.columns.empty();
            if (keep[idx]) {
              for (const auto& c : n.columns) mark(array_name(n.in, c));
              for (const auto& a : all_arrays(n.pred)) mark(a);
            }
          } else if constexpr (std::is_same_v<T, JoinStmt>) {
            std::vector<JoinOutCol> cols;
            for (const auto& c : n.out_cols)
              if (live.count(array_name(n.out, c.name))) cols.push_back(c);
            n.out_cols = std::move(cols);
            keep[idx] = !n.out_cols.empty();
            if (keep[idx]) {
              mark(array_name(n.left, n.left_key));
              mark(array_name(n.right, n.right_key));
              for (const auto& c : n.out_cols)
                mark(array_name(c.from_right ? n.right : n.left, c.src));
            }
          } else if constexpr (std::is_same_v<T, AggregateStmt>) {
            std::vector<AggOutput> outs;
            bool any = live.count(array_name(n.out, n.key)) > 0;
            for (auto& o : n.outputs)
              if (live.count(array_name(n.out, o.name))) {
                outs.push_back(std::move(o));
                any = true;
              }
            n.outputs = std::move(outs);
            keep[idx] = any;
            if (keep[idx]) {
              mark(array_name(n.in, n.key));
              for (const auto& o : n.outputs)
                for (const auto& a : all_arrays(o.expr)) mark(a);
            }
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            std::vector<std::string> cols;
            for (const auto& c : n.columns)
              if (live.count(array_name(n.out, c))) cols.push_back(c);
            n.columns = std::move(cols);
            keep[idx] = !n.columns.empty();
            if (keep[idx])
              for (const auto& c : n.columns)
                for (const auto& in : n.ins) mark(array_name(in, c));
          } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
            keep[idx] = live.count(array_name(n.frame, n.column)) > 0;
            if (keep[idx])
              for (const auto& a : all_arrays(n.expr)) mark(a);
            // the pre-assignment column stays live: the frame's producer
            // still materializes it
          } else if constexpr (std::is_same_v<T, MapExprStmt>) {
            keep[idx] = live.count(n.out) > 0;
            if (keep[idx])
              for (const auto& a : all_arrays(n.expr)) mark(a);
          } else if constexpr (std::is_same_v<T, CumsumStmt> ||
                               std::is_same_v<T, StencilStmt> ||
                               std::is_same_v<T, TransposeStmt>) {
            keep[idx] = live.count(n.out) > 0;
            if (keep[idx]) mark(n.in);
          } else if constexpr (std::is_same_v<T, HcatStmt> ||
                               std::is_same_v<T, MatrixAssemblyStmt>) {
            keep[idx] = live.count(n.out) > 0;
            if (keep[idx])
              for (const auto& a : n.inputs) mark(a);
          } else if constexpr (std::is_same_v<T, RebalanceStmt>) {
            keep[idx] = live.count(n.array) > 0;
          }
        },
        s.node);
  }

  std::vector<Stmt> kept;
  for (size_t i = 0; i < p.stmts.size(); i++)
    if (keep[i]) kept.push_back(std::move(p.stmts[i]));
  p.stmts = std::move(kept);
  recompute_meta(p);
  return p;
}

}  // namespace mf
