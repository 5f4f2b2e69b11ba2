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

#include <algorithm>
#include <cstddef>

namespace mf {

struct BlockRange {
  size_t start = 0;
  size_t len = 0;
};

// 1D_BLOCK partitioning: equal ceil(n/p) chunks, the last rank takes the
// remainder; trailing ranks may be empty for tiny n.
inline BlockRange partition_block(size_t n, int p, int r) {
  size_t chunk = (n + static_cast<size_t>(p) - 1) / static_cast<size_t>(p);
  size_t start = std::min(n, static_cast<size_t>(r) * chunk);
  size_t len = (r == p - 1) ? n - start : std::min(chunk, n - start);
  return {start, len};
}

}  // namespace mf
