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

#include "miniframes/liveness.hpp"
#include "miniframes/query_tree.hpp"

namespace mf {

struct PushdownReport {
  int fired = 0;
};

namespace detail {

// Push one filter below its producing join, if the guards allow it.
// Returns true when the program was rewritten.
inline bool try_push_one(Program& p, int& fresh_counter,
                         PushdownReport* report) {
  QueryTree tree = build_query_tree(p);
  Liveness live(p);

  for (size_t fi = 0; fi < p.stmts.size(); fi++) {
    const auto* f = stmt_as<FilterStmt>(p.stmts[fi]);
    if (!f) continue;
    const QueryNode* prod = tree.producer(f->in);
    if (!prod) continue;
    const auto* join = stmt_as<JoinStmt>(p.stmts[prod->stmt_index]);
    if (!join) continue;
    size_t ji = prod->stmt_index;

    // a predicate with a whole-column reduction cannot move: its domain
    // would change from post-join rows to pre-join rows
    if (contains_reduce(f->pred)) continue;

    // every predicate reference must be a column of the joined frame, and
    // all of them must originate from a single side
    std::set<std::string> pred_arrays = all_arrays(f->pred);
    bool from_left = false, from_right = false, foreign = false;
    for (const auto& a : pred_arrays) {
      const JoinOutCol* found = nullptr;
      for (const auto& c : join->out_cols)
        if (array_name(join->out, c.name) == a) found = &c;
      if (!found) {
        foreign = true;
        break;
      }
      (found->from_right ? from_right : from_left) = true;
    }
    if (foreign || from_left == from_right) continue;  // both sides or neither

    // liveness guards. The rewrite deletes the joined frame, so this filter
    // must be its only consumer anywhere in the program; and nothing between
    // the join and the filter may touch any column of the join output or of
    // either input.
    std::set<std::string> join_arrays;
    for (const auto& c : join->out_cols)
      join_arrays.insert(array_name(join->out, c.name));
    bool blocked = false;
    for (size_t k = 0; k < p.stmts.size() && !blocked; k++) {
      if (k == ji || k == fi) continue;
      for (const auto& u : live.at(k).uses)
        if (join_arrays.count(u)) blocked = true;
    }
    std::set<std::string> protected_arrays = join_arrays;
    for (const auto& fr : {join->left, join->right})
      if (p.meta.has(fr))
        for (const auto& c : p.meta.schema(fr))
          protected_arrays.insert(array_name(fr, c.name));
    for (const auto& a : live.interval_refs(ji, fi))
      if (protected_arrays.count(a)) blocked = true;
    if (blocked) continue;

    // rewrite: filter the originating side first, join afterward
    const std::string side = from_right ? join->right : join->left;
    std::string pushed = "_pd" + std::to_string(fresh_counter++) + "_" + side;

    // predicate references move from the join output's arrays to the
    // pre-join side's own arrays
    std::map<std::string, std::string> remap;
    for (const auto& c : join->out_cols) {
      if (c.from_right != from_right) continue;
      remap[array_name(join->out, c.name)] = array_name(side, c.src);
    }
    FilterStmt side_filter;
    side_filter.out = pushed;
    side_filter.in = side;
    side_filter.pred_array = f->pred_array;
    side_filter.pred = clone_expr(f->pred);
    rewrite_refs(side_filter.pred, [&](const Expr::ColumnRef& r) {
      return Expr::ColumnRef{"", remap.at(r.name)};
    });
    for (const auto& c : p.meta.schema(side))
      side_filter.columns.push_back(c.name);

    JoinStmt new_join = *join;
    new_join.out = f->out;  // the join now produces the filtered frame
    (from_right ? new_join.right : new_join.left) = pushed;

    int join_line = p.stmts[ji].line;
    int filter_line = p.stmts[fi].line;
    std::vector<Stmt> stmts;
    for (size_t k = 0; k < p.stmts.size(); k++) {
      if (k == fi) continue;  // old filter disappears
      if (k == ji) {
        stmts.push_back({filter_line, std::move(side_filter)});
        stmts.push_back({join_line, std::move(new_join)});
        continue;
      }
      stmts.push_back(std::move(p.stmts[k]));
    }
    p.stmts = std::move(stmts);
    recompute_meta(p);
    if (report) report->fired++;
    return true;
  }
  return false;
}

}  // namespace detail

// Push predicate through join, repeated to a fixed point. Filters are
// visited in ascending statement order and at most one moves per iteration;
// the transformation is skipped (never wrong) whenever a guard fails.
inline Program push_filter_through_join(Program p,
                                        PushdownReport* report = nullptr) {
  int fresh = 1;
  while (detail::try_push_one(p, fresh, report)) {
  }
  return p;
}

}  // namespace mf
