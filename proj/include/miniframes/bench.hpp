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

#include <chrono>

#include "miniframes/compiler.hpp"
#include "miniframes/datagen.hpp"
#include "miniframes/execute.hpp"

namespace mf {

struct BenchCell {
  uint64_t rows = 0;
  int ranks = 0;
  int reps = 0;
  double min_s = 0.0;
  double median_s = 0.0;
};

struct BenchResult {
  double compile_s = 0.0;
  std::vector<BenchCell> cells;  // one row per (rows, ranks)
};

// Times execution over generated data: fresh uniform tables per size are
// pre-materialized in memory, so generation and load stay out of the
// measurement; compilation is timed separately.
inline BenchResult run_bench(const std::string& program_text,
                             const std::vector<uint64_t>& rows_list,
                             const std::vector<int>& ranks_list, int reps,
                             int64_t cardinality = 0, uint64_t seed = 42) {
  if (reps < 1) throw Error(Stage::Cli, "need >= 1 repetition");
  if (rows_list.empty() || ranks_list.empty())
    throw Error(Stage::Cli, "need at least one size and one ranks value");
  BenchResult out;
  auto t0 = std::chrono::steady_clock::now();
  Compiled c = compile(program_text);
  auto t1 = std::chrono::steady_clock::now();
  out.compile_s = std::chrono::duration<double>(t1 - t0).count();

  for (uint64_t rows : rows_list) {
    DataRepo repo;
    uint64_t table_seed = seed;
    for (const auto& s : c.optimized.stmts) {
      if (const auto* src = stmt_as<DataSourceStmt>(s)) {
        int64_t card =
            cardinality > 0
                ? cardinality
                : std::max<int64_t>(1, static_cast<int64_t>(rows / 10));
        repo.preload(src->path, generate_table(src->frame, src->schema, rows,
                                               card, table_seed++));
      }
    }
    for (int ranks : ranks_list) {
      std::vector<double> times;
      for (int rep = 0; rep < reps; rep++) {
        ExecOptions eopt;
        eopt.ranks = ranks;
        eopt.debug_checks = false;
        auto b0 = std::chrono::steady_clock::now();
        execute(c.distributed, c.dist, repo, eopt);
        auto b1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(b1 - b0).count());
      }
      std::sort(times.begin(), times.end());
      double median = times[times.size() / 2];
      if (times.size() % 2 == 0)
        median = (times[times.size() / 2 - 1] + times[times.size() / 2]) / 2;
      out.cells.push_back(
          {rows, ranks, reps, times.front(), median});
    }
  }
  return out;
}

}  // namespace mf
