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
#include <string>
#include <vector>

#include "miniframes/stmt.hpp"

namespace mf {

// Query forest over the relational statements embedded in the program:
// one node per relational statement, linked producer -> consumer by frame
// name. Non-relational statements are ignored but indices refer to the full
// statement list.
struct QueryNode {
  size_t stmt_index = 0;
  std::string frame;                // frame this node produces
  std::vector<std::string> inputs;  // producing frames consumed (empty: leaf)
};

struct QueryTree {
  std::vector<QueryNode> nodes;               // statement order
  std::map<std::string, size_t> producer_of;  // frame -> node index
  std::vector<size_t> roots;                  // not consumed by relational nodes

  const QueryNode* producer(const std::string& frame) const {
    auto it = producer_of.find(frame);
    return it == producer_of.end() ? nullptr : &nodes[it->second];
  }
};

inline QueryTree build_query_tree(const Program& p) {
  QueryTree t;
  for (size_t i = 0; i < p.stmts.size(); i++) {
    const Stmt& s = p.stmts[i];
    if (!is_relational(s)) continue;
    QueryNode node;
    node.stmt_index = i;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DataSourceStmt>) {
            node.frame = n.frame;
          } else if constexpr (std::is_same_v<T, FilterStmt>) {
            node.frame = n.out;
            node.inputs = {n.in};
          } else if constexpr (std::is_same_v<T, JoinStmt>) {
            node.frame = n.out;
            node.inputs = {n.left, n.right};
          } else if constexpr (std::is_same_v<T, AggregateStmt>) {
            node.frame = n.out;
            node.inputs = {n.in};
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            node.frame = n.out;
            node.inputs = n.ins;
          }
        },
        s.node);
    t.producer_of[node.frame] = t.nodes.size();
    t.nodes.push_back(std::move(node));
  }
  std::set<std::string> consumed;
  for (const auto& n : t.nodes)
    for (const auto& in : n.inputs) consumed.insert(in);
  for (size_t i = 0; i < t.nodes.size(); i++)
    if (!consumed.count(t.nodes[i].frame)) t.roots.push_back(i);
  return t;
}

}  // namespace mf
