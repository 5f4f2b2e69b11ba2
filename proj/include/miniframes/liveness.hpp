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

// Per-statement def/use sets plus interval queries over the statement list;
// the guard data for relational transformations.
class Liveness {
 public:
  explicit Liveness(const Program& p) {
    for (const auto& s : p.stmts) sets_.push_back(def_use(s));
  }

  const DefUse& at(size_t i) const { return sets_[i]; }
  size_t size() const { return sets_.size(); }

  // Arrays referenced (used or defined) by statements strictly between i and j.
  std::set<std::string> interval_refs(size_t i, size_t j) const {
    std::set<std::string> out;
    for (size_t k = i + 1; k < j && k < sets_.size(); k++) {
      out.insert(sets_[k].uses.begin(), sets_[k].uses.end());
      out.insert(sets_[k].defs.begin(), sets_[k].defs.end());
    }
    return out;
  }

 private:
  std::vector<DefUse> sets_;
};

}  // namespace mf
