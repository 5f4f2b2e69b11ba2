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

#include <cstdint>

namespace mf {

// Meet-semilattice of array distributions. 1D_BLOCK is top (the default),
// REP is bottom; 1D_VAR and 2D_BLOCK_CYCLIC sit between and are
// incomparable, so their meet is REP. Inference only ever moves values
// downward.
enum class Distribution : uint8_t {
  OneDBlock,
  OneDVar,
  TwoDBlockCyclic,
  Rep,
};

inline const char* dist_name(Distribution d) {
  switch (d) {
    case Distribution::OneDBlock: return "1D_BLOCK";
    case Distribution::OneDVar: return "1D_VAR";
    case Distribution::TwoDBlockCyclic: return "2D_BLOCK_CYCLIC";
    case Distribution::Rep: return "REP";
  }
  return "?";
}

// Height in the lattice: top 2, middle 1, bottom 0. meet never increases it.
inline int dist_level(Distribution d) {
  switch (d) {
    case Distribution::OneDBlock: return 2;
    case Distribution::OneDVar:
    case Distribution::TwoDBlockCyclic: return 1;
    case Distribution::Rep: return 0;
  }
  return 0;
}

inline Distribution meet(Distribution a, Distribution b) {
  if (a == b) return a;
  if (a == Distribution::OneDBlock) return b;
  if (b == Distribution::OneDBlock) return a;
  // distinct middle elements, or anything with REP
  return Distribution::Rep;
}

}  // namespace mf
