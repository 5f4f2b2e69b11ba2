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

#include "miniframes/desugar.hpp"
#include "miniframes/dist.hpp"
#include "miniframes/prune.hpp"
#include "miniframes/pushdown.hpp"

namespace mf {

struct CompileOptions {
  bool pushdown = true;
  bool prune = true;
};

struct Compiled {
  SurfaceProgram surface;
  Program desugared;    // after desugaring + pattern matching, typechecked
  Program optimized;    // after relational optimization
  Program distributed;  // optimized plus rebalance statements
  DistMap dist;
  PushdownReport pushdown_report;
};

// parse -> desugar -> match patterns -> typecheck -> validate ->
// optimize -> infer distributions -> insert rebalances
inline Compiled compile(const std::string& text,
                        const CompileOptions& opt = {}) {
  Compiled c;
  c.surface = parse(text);
  c.desugared = match_matrix_assembly(desugar(c.surface));
  require_ok(typecheck(c.desugared));
  require_ok(validate(c.desugared));

  c.optimized = c.desugared;
  if (opt.pushdown)
    c.optimized = push_filter_through_join(std::move(c.optimized),
                                           &c.pushdown_report);
  if (opt.prune) c.optimized = prune_dead_code(std::move(c.optimized));
  require_ok(typecheck(c.optimized));

  c.dist = infer_distributions(c.optimized);
  c.distributed = insert_rebalance(c.optimized, c.dist);
  return c;
}

}  // namespace mf
