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

#include <random>

#include "miniframes/stmt.hpp"

namespace mf {

// Uniform random test data: Int64 columns draw keys from [0, cardinality),
// Float64 from [0, 1), Bool fair coin flips. Deterministic for a fixed seed.
inline Table generate_table(const std::string& name, const Schema& schema,
                            size_t rows, int64_t key_cardinality,
                            uint64_t seed) {
  if (key_cardinality < 1) key_cardinality = 1;
  std::mt19937_64 rng(seed);
  Table t;
  t.name = name;
  for (const auto& col : schema) {
    ColumnVec v = ColumnVec::make(col.type, rows);
    switch (col.type) {
      case ScalarType::Int64: {
        std::uniform_int_distribution<int64_t> d(0, key_cardinality - 1);
        for (size_t i = 0; i < rows; i++) v.i64()[i] = d(rng);
        break;
      }
      case ScalarType::Float64: {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        for (size_t i = 0; i < rows; i++) v.f64()[i] = d(rng);
        break;
      }
      case ScalarType::Bool: {
        std::uniform_int_distribution<int> d(0, 1);
        for (size_t i = 0; i < rows; i++) v.b8()[i] = static_cast<uint8_t>(d(rng));
        break;
      }
    }
    t.columns.push_back({col.name, std::move(v)});
  }
  return t;
}

}  // namespace mf
