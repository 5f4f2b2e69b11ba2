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

#include <sstream>

#include "miniframes/lattice.hpp"
#include "miniframes/stmt.hpp"

namespace mf {

struct DistMap {
  std::vector<std::string> order;            // first-definition order
  std::map<std::string, Distribution> dist;  // array/matrix name -> element
  std::map<size_t, bool> parallel;           // statement -> parallel flag
  int iterations = 0;                        // fixed-point passes taken

  Distribution at(const std::string& name) const {
    auto it = dist.find(name);
    return it == dist.end() ? Distribution::OneDBlock : it->second;
  }
};

namespace detail {

struct DistSolver {
  explicit DistSolver(const Program& p) : prog(p) {}

  const Program& prog;
  DistMap map;
  bool changed = false;

  void reg(const std::string& name) {
    if (map.dist.emplace(name, Distribution::OneDBlock).second)
      map.order.push_back(name);
  }

  void lower(const std::string& name, Distribution d) {
    auto& cur = map.dist.at(name);
    Distribution next = meet(cur, d);
    if (next != cur) {
      cur = next;
      changed = true;
    }
  }

  Distribution meet_of(const std::vector<std::string>& names) {
    Distribution m = Distribution::OneDBlock;
    for (const auto& n : names) m = meet(m, map.dist.at(n));
    return m;
  }

  void meet_group(const std::vector<std::string>& names) {
    Distribution m = meet_of(names);
    for (const auto& n : names) lower(n, m);
  }

  // Inputs are grouped per frame; outputs take 1D_VAR ∧ inputs. REP is
  // contagious in both directions (a replicated participant makes the
  // whole operation sequential).
  void relational(const std::vector<std::vector<std::string>>& in_groups,
                  const std::vector<std::string>& outs) {
    Distribution mo = meet_of(outs);
    bool any_rep = mo == Distribution::Rep;
    Distribution all_in = Distribution::OneDBlock;
    for (const auto& g : in_groups) {
      Distribution m = meet_of(g);
      all_in = meet(all_in, m);
      if (m == Distribution::Rep) any_rep = true;
    }
    if (any_rep) {
      for (const auto& g : in_groups)
        for (const auto& n : g) lower(n, Distribution::Rep);
      for (const auto& n : outs) lower(n, Distribution::Rep);
      return;
    }
    for (const auto& g : in_groups) meet_group(g);
    for (const auto& n : outs)
      lower(n, meet(Distribution::OneDVar, all_in));
  }

  // Matrix assembly wants 1D_BLOCK inputs; 1D_VAR is allowed during analysis
  // and fixed up by rebalance insertion, so inputs are not lowered here.
  void assembly(const std::vector<std::string>& inputs,
                const std::string& out) {
    bool any_rep = map.dist.at(out) == Distribution::Rep;
    for (const auto& a : inputs)
      if (map.dist.at(a) == Distribution::Rep) any_rep = true;
    if (any_rep) {
      for (const auto& a : inputs) lower(a, Distribution::Rep);
      lower(out, Distribution::Rep);
    }
  }

  std::vector<std::string> ew_arrays(const ExprPtr& e) {
    ExprArrays refs;
    collect_arrays(e, refs);
    return {refs.elementwise.begin(), refs.elementwise.end()};
  }

  void register_names() {
    for (const auto& s : prog.stmts) {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, DataSourceStmt>) {
              for (const auto& c : n.schema) reg(array_name(n.frame, c.name));
            } else if constexpr (std::is_same_v<T, FilterStmt>) {
              reg(n.pred_array);
              for (const auto& c : n.columns) reg(array_name(n.out, c));
            } else if constexpr (std::is_same_v<T, JoinStmt>) {
              for (const auto& c : n.out_cols) reg(array_name(n.out, c.name));
            } else if constexpr (std::is_same_v<T, AggregateStmt>) {
              for (const auto& o : n.outputs) reg(o.expr_array);
              reg(array_name(n.out, n.key));
              for (const auto& o : n.outputs) reg(array_name(n.out, o.name));
            } else if constexpr (std::is_same_v<T, ConcatStmt>) {
              for (const auto& c : n.columns) reg(array_name(n.out, c));
            } else if constexpr (std::is_same_v<T, MapExprStmt>) {
              reg(n.out);
            } else if constexpr (std::is_same_v<T, CumsumStmt> ||
                                 std::is_same_v<T, StencilStmt> ||
                                 std::is_same_v<T, TransposeStmt>) {
              reg(n.out);
            } else if constexpr (std::is_same_v<T, HcatStmt> ||
                                 std::is_same_v<T, MatrixAssemblyStmt>) {
              reg(n.out);
            } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
              reg(array_name(n.frame, n.column));
            }
          },
          s.node);
    }
  }

  void transfer(const Stmt& s) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, FilterStmt>) {
            std::vector<std::string> ins;
            for (const auto& c : n.columns) ins.push_back(array_name(n.in, c));
            for (const auto& a : ew_arrays(n.pred)) ins.push_back(a);
            ins.push_back(n.pred_array);
            std::vector<std::string> outs;
            for (const auto& c : n.columns) outs.push_back(array_name(n.out, c));
            relational({ins}, outs);
          } else if constexpr (std::is_same_v<T, JoinStmt>) {
            std::vector<std::string> left = {array_name(n.left, n.left_key)};
            std::vector<std::string> right = {array_name(n.right, n.right_key)};
            std::vector<std::string> outs;
            for (const auto& c : n.out_cols) {
              (c.from_right ? right : left)
                  .push_back(array_name(c.from_right ? n.right : n.left, c.src));
              outs.push_back(array_name(n.out, c.name));
            }
            relational({left, right}, outs);
          } else if constexpr (std::is_same_v<T, AggregateStmt>) {
            std::vector<std::string> ins = {array_name(n.in, n.key)};
            for (const auto& o : n.outputs) {
              for (const auto& a : ew_arrays(o.expr)) ins.push_back(a);
              ins.push_back(o.expr_array);
            }
            std::vector<std::string> outs = {array_name(n.out, n.key)};
            for (const auto& o : n.outputs)
              outs.push_back(array_name(n.out, o.name));
            relational({ins}, outs);
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            std::vector<std::vector<std::string>> groups;
            for (const auto& in : n.ins) {
              std::vector<std::string> g;
              for (const auto& c : n.columns) g.push_back(array_name(in, c));
              groups.push_back(std::move(g));
            }
            std::vector<std::string> outs;
            for (const auto& c : n.columns) outs.push_back(array_name(n.out, c));
            relational(groups, outs);
          } else if constexpr (std::is_same_v<T, MapExprStmt>) {
            std::vector<std::string> g = ew_arrays(n.expr);
            g.push_back(n.out);
            meet_group(g);
          } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
            std::vector<std::string> g = ew_arrays(n.expr);
            g.push_back(array_name(n.frame, n.column));
            meet_group(g);
          } else if constexpr (std::is_same_v<T, CumsumStmt> ||
                               std::is_same_v<T, StencilStmt> ||
                               std::is_same_v<T, TransposeStmt>) {
            meet_group({n.in, n.out});
          } else if constexpr (std::is_same_v<T, HcatStmt> ||
                               std::is_same_v<T, MatrixAssemblyStmt>) {
            assembly(n.inputs, n.out);
          } else if constexpr (std::is_same_v<T, SinkStmt>) {
            if (n.replicated) {
              for (const auto& item : n.items) {
                if (item.is_matrix) lower(item.matrix, Distribution::Rep);
                for (const auto& c : item.columns)
                  lower(c.array, Distribution::Rep);
              }
            }
          }
        },
        s.node);
  }

  // Columns of one data frame always share a distribution (the frame is
  // read, filtered, and emitted as a unit); each pass re-aligns them.
  void align_frames() {
    for (const auto& [frame, schema] : prog.meta.frames) {
      std::vector<std::string> group;
      for (const auto& c : schema) {
        std::string a = array_name(frame, c.name);
        if (map.dist.count(a)) group.push_back(a);
      }
      if (group.size() > 1) meet_group(group);
    }
  }

  DistMap solve(const std::vector<size_t>* visit_order) {
    register_names();
    int bound = static_cast<int>(map.dist.size()) * 3 + 2;
    do {
      changed = false;
      if (visit_order) {
        for (size_t i : *visit_order) transfer(prog.stmts[i]);
      } else {
        for (const auto& s : prog.stmts) transfer(s);
      }
      align_frames();
      map.iterations++;
      if (map.iterations > bound)
        throw Error(Stage::Distribute,
                    "distribution inference failed to reach a fixed point");
    } while (changed);
    for (size_t i = 0; i < prog.stmts.size(); i++) {
      DefUse du = def_use(prog.stmts[i]);
      bool par = true;
      if (const auto* sink = stmt_as<SinkStmt>(prog.stmts[i])) {
        par = !sink->replicated;
      } else {
        for (const auto& d : du.defs)
          if (map.at(d) == Distribution::Rep) par = false;
      }
      map.parallel[i] = par;
    }
    return std::move(map);
  }
};

}  // namespace detail

// Fixed-point distribution inference: every array starts at the top element
// (1D_BLOCK) and transfer functions move it downward until stable. The
// result is independent of the statement visit order (meet is monotone);
// an explicit order can be passed to check exactly that.
inline DistMap infer_distributions(const Program& p,
                                   const std::vector<size_t>* visit_order =
                                       nullptr) {
  detail::DistSolver s(p);
  return s.solve(visit_order);
}

inline bool requires_block_inputs(const Stmt& s) {
  return stmt_is<HcatStmt>(s) || stmt_is<MatrixAssemblyStmt>(s);
}

// Inserts Rebalance immediately before each statement that needs 1D_BLOCK
// inputs but would receive 1D_VAR; nothing is rebalanced twice (the first
// rebalance leaves the array blocked for later consumers). When the array is
// a frame column, the frame's sibling columns are rebalanced with it:
// columns of one frame must stay co-partitioned or later per-rank
// element-wise use of the frame would see misaligned chunks.
inline Program insert_rebalance(Program p, const DistMap& dm) {
  std::map<std::string, Distribution> eff = dm.dist;
  std::map<std::string, std::vector<std::string>> frame_of;  // array -> siblings
  for (const auto& [frame, schema] : p.meta.frames) {
    std::vector<std::string> arrays;
    for (const auto& c : schema) arrays.push_back(array_name(frame, c.name));
    for (const auto& a : arrays) frame_of[a] = arrays;
  }
  std::vector<Stmt> out;
  for (auto& s : p.stmts) {
    if (requires_block_inputs(s)) {
      const auto& inputs = stmt_is<HcatStmt>(s)
                               ? stmt_as<HcatStmt>(s)->inputs
                               : stmt_as<MatrixAssemblyStmt>(s)->inputs;
      for (const auto& a : inputs) {
        auto it = eff.find(a);
        if (it == eff.end() || it->second != Distribution::OneDVar) continue;
        std::vector<std::string> group{a};
        auto fr = frame_of.find(a);
        if (fr != frame_of.end()) group = fr->second;
        for (const auto& g : group) {
          auto git = eff.find(g);
          if (git == eff.end() || git->second != Distribution::OneDVar)
            continue;
          out.push_back({s.line, RebalanceStmt{g}});
          git->second = Distribution::OneDBlock;
        }
      }
    }
    out.push_back(std::move(s));
  }
  p.stmts = std::move(out);
  return p;
}

// Walks the program with per-position effective distributions and reports
// unmet 1D_BLOCK input requirements; empty after a correct insert_rebalance.
inline std::vector<std::string> check_block_requirements(const Program& p,
                                                         const DistMap& dm) {
  std::map<std::string, Distribution> eff = dm.dist;
  std::vector<std::string> violations;
  for (size_t i = 0; i < p.stmts.size(); i++) {
    const Stmt& s = p.stmts[i];
    if (const auto* r = stmt_as<RebalanceStmt>(s)) {
      auto it = eff.find(r->array);
      if (it != eff.end() && it->second == Distribution::OneDVar)
        it->second = Distribution::OneDBlock;
      continue;
    }
    if (requires_block_inputs(s)) {
      const auto& inputs = stmt_is<HcatStmt>(s)
                               ? stmt_as<HcatStmt>(s)->inputs
                               : stmt_as<MatrixAssemblyStmt>(s)->inputs;
      for (const auto& a : inputs) {
        auto it = eff.find(a);
        if (it != eff.end() && it->second == Distribution::OneDVar)
          violations.push_back("stmt " + std::to_string(i) + ": input '" + a +
                               "' is 1D_VAR, needs 1D_BLOCK");
      }
    }
  }
  return violations;
}

// Stable text form for --dump-dist: array table, rebalance points, and per
// sink the distribution of what leaves the pipeline (a sink consuming an
// assembled matrix stands for the opaque model call, whose output is
// replicated).
inline std::string dump_dist(const Program& p, const DistMap& dm) {
  std::ostringstream os;
  os << "arrays:\n";
  for (const auto& name : dm.order)
    os << "  " << name << " " << dist_name(dm.dist.at(name)) << "\n";
  os << "rebalances:\n";
  for (size_t i = 0; i < p.stmts.size(); i++)
    if (const auto* r = stmt_as<RebalanceStmt>(p.stmts[i]))
      os << "  at " << i << ": " << r->array << "\n";
  os << "sinks:\n";
  for (const auto& s : p.stmts) {
    const auto* sink = stmt_as<SinkStmt>(s);
    if (!sink) continue;
    bool rep = sink->replicated;
    bool all_rep = true;
    for (const auto& item : sink->items) {
      if (item.is_matrix) rep = true;  // opaque model sink: output REP
      for (const auto& c : item.columns)
        if (dm.at(c.array) != Distribution::Rep) all_rep = false;
      if (item.is_matrix && dm.at(item.matrix) != Distribution::Rep)
        all_rep = false;
    }
    os << "  " << sink->name << " "
       << ((rep || all_rep) ? "REP" : "distributed") << "\n";
  }
  return os.str();
}

}  // namespace mf
