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
#include <bit>
#include <cmath>
#include <unordered_map>

#include "miniframes/eval.hpp"
#include "miniframes/fabric.hpp"
#include "miniframes/partition.hpp"

namespace mf {

// ---- key hashing ----

inline constexpr uint64_t kHashSeed = 0x9e3779b97f4a7c15ull;

// multiply-xor-shift mix (splitmix64 finalizer), fixed seed
inline uint64_t mix_key(uint64_t x) {
  x ^= kHashSeed;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// -0.0 folds onto +0.0 so equal keys always co-locate
inline uint64_t key_bits(const ColumnVec& key, size_t i) {
  switch (key.dtype()) {
    case ScalarType::Int64:
      return static_cast<uint64_t>(key.i64()[i]);
    case ScalarType::Float64: {
      double d = key.f64()[i];
      if (d == 0.0) d = 0.0;
      return std::bit_cast<uint64_t>(d);
    }
    case ScalarType::Bool:
      return key.b8()[i];
  }
  return 0;
}

inline int dest_rank(const ColumnVec& key, size_t i, int p) {
  return static_cast<int>(mix_key(key_bits(key, i)) % static_cast<uint64_t>(p));
}

inline bool key_eq(const ColumnVec& a, size_t i, const ColumnVec& b, size_t j) {
  switch (a.dtype()) {
    case ScalarType::Int64: return a.i64()[i] == b.i64()[j];
    case ScalarType::Float64: return a.f64()[i] == b.f64()[j];
    case ScalarType::Bool: return a.b8()[i] == b.b8()[j];
  }
  return false;
}

inline bool key_lt(const ColumnVec& a, size_t i, const ColumnVec& b, size_t j) {
  switch (a.dtype()) {
    case ScalarType::Int64: return a.i64()[i] < b.i64()[j];
    case ScalarType::Float64: return a.f64()[i] < b.f64()[j];
    case ScalarType::Bool: return a.b8()[i] < b.b8()[j];
  }
  return false;
}

// ---- shuffle ----

struct ShuffleResult {
  ColumnVec key;
  std::vector<ColumnVec> payload;
};

// Hash-partition repartitioning: rank = hash(key) mod p. Counts are
// exchanged first so receivers know what is coming, then one variable-sized
// exchange per column. Incoming rows are concatenated in source-rank order.
inline ShuffleResult shuffle_by_key(CollectiveCtx& ctx, const ColumnVec& key,
                                    const std::vector<const ColumnVec*>& cols,
                                    bool debug_checks = false) {
  int p = ctx.nranks();
  size_t n = key.size();
  std::vector<int> dest(n);
  std::vector<uint64_t> counts(static_cast<size_t>(p), 0);
  for (size_t i = 0; i < n; i++) {
    dest[i] = dest_rank(key, i, p);
    counts[static_cast<size_t>(dest[i])]++;
  }

  // counts coordination before the data exchange
  std::vector<ColumnVec> count_bufs;
  for (int dst = 0; dst < p; dst++)
    count_bufs.push_back(ColumnVec(std::vector<int64_t>{
        static_cast<int64_t>(counts[static_cast<size_t>(dst)])}));
  std::vector<ColumnVec> incoming_counts =
      alltoallv(ctx, std::move(count_bufs), "shuffle_counts");

  auto pack_and_exchange = [&](const ColumnVec& src,
                               const std::string& name) -> ColumnVec {
    std::vector<ColumnVec> bufs;
    for (int dst = 0; dst < p; dst++) {
      ColumnVec b = ColumnVec::make(src.dtype());
      bufs.push_back(std::move(b));
    }
    for (size_t i = 0; i < n; i++)
      bufs[static_cast<size_t>(dest[i])].push_from(src, i);
    std::vector<ColumnVec> recvd = alltoallv(ctx, std::move(bufs), name);
    ColumnVec out = ColumnVec::make(src.dtype());
    for (int src_rank = 0; src_rank < p; src_rank++) {
      const ColumnVec& piece = recvd[static_cast<size_t>(src_rank)];
      if (piece.size() !=
          static_cast<uint64_t>(
              incoming_counts[static_cast<size_t>(src_rank)].i64()[0]))
        throw Error(Stage::Execute, "shuffle: size/count mismatch from rank " +
                                        std::to_string(src_rank));
      out.append(piece);
    }
    return out;
  };

  ShuffleResult result;
  result.key = pack_and_exchange(key, "shuffle_key");
  for (size_t c = 0; c < cols.size(); c++)
    result.payload.push_back(
        pack_and_exchange(*cols[c], "shuffle_col" + std::to_string(c)));

  if (debug_checks) {
    // co-partition: everything that arrived hashes here
    for (size_t i = 0; i < result.key.size(); i++)
      if (dest_rank(result.key, i, p) != ctx.rank)
        throw Error(Stage::Execute, "shuffle: received a foreign key");
    // conservation: global row count unchanged
    auto before = allgather_u64(ctx, n, "shuffle_check_before");
    auto after = allgather_u64(ctx, result.key.size(), "shuffle_check_after");
    uint64_t b = 0, a = 0;
    for (int r = 0; r < p; r++) {
      b += before[static_cast<size_t>(r)];
      a += after[static_cast<size_t>(r)];
    }
    if (a != b)
      throw Error(Stage::Execute, "shuffle: rows not conserved");
  }
  return result;
}

// ---- sort-merge join ----

// Inner join on co-partitioned sides. Both sides are stably sorted by key
// and merged; equal-key runs emit their cross product. The pair list is
// then restored to left-row-major order, which makes single-rank execution
// reproduce the sequential nested-loop order exactly.
inline std::vector<std::pair<size_t, size_t>> sort_merge_join_pairs(
    const ColumnVec& lkey, const ColumnVec& rkey) {
  std::vector<size_t> li(lkey.size()), ri(rkey.size());
  for (size_t i = 0; i < li.size(); i++) li[i] = i;
  for (size_t i = 0; i < ri.size(); i++) ri[i] = i;
  std::stable_sort(li.begin(), li.end(), [&](size_t a, size_t b) {
    return key_lt(lkey, a, lkey, b);
  });
  std::stable_sort(ri.begin(), ri.end(), [&](size_t a, size_t b) {
    return key_lt(rkey, a, rkey, b);
  });
  std::vector<std::pair<size_t, size_t>> pairs;
  size_t a = 0, b = 0;
  while (a < li.size() && b < ri.size()) {
    if (key_lt(lkey, li[a], rkey, ri[b])) {
      a++;
    } else if (key_lt(rkey, ri[b], lkey, li[a])) {
      b++;
    } else {
      size_t a_end = a;
      while (a_end < li.size() && key_eq(lkey, li[a_end], lkey, li[a])) a_end++;
      size_t b_end = b;
      while (b_end < ri.size() && key_eq(rkey, ri[b_end], rkey, ri[b])) b_end++;
      for (size_t x = a; x < a_end; x++)
        for (size_t y = b; y < b_end; y++)
          pairs.emplace_back(li[x], ri[y]);
      a = a_end;
      b = b_end;
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// ---- hash aggregation ----

struct AggGroups {
  std::vector<size_t> first_row;               // one representative per group
  std::vector<std::vector<size_t>> members;    // rows per group, input order
  std::vector<size_t> emit_order;              // groups sorted by key
};

// Groups rows with a hash table; output order is sorted by key so results
// are deterministic regardless of hash iteration order.
inline AggGroups hash_group_by(const ColumnVec& key) {
  AggGroups g;
  std::unordered_map<uint64_t, std::vector<size_t>> table;  // bits -> groups
  for (size_t i = 0; i < key.size(); i++) {
    auto& bucket = table[key_bits(key, i)];
    bool found = false;
    for (size_t gi : bucket) {
      if (key_eq(key, g.first_row[gi], key, i)) {
        g.members[gi].push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      bucket.push_back(g.first_row.size());
      g.first_row.push_back(i);
      g.members.emplace_back(1, i);
    }
  }
  g.emit_order.resize(g.first_row.size());
  for (size_t i = 0; i < g.emit_order.size(); i++) g.emit_order[i] = i;
  std::sort(g.emit_order.begin(), g.emit_order.end(), [&](size_t a, size_t b) {
    return key_lt(key, g.first_row[a], key, g.first_row[b]);
  });
  return g;
}

// Group reduction in member-row order; same formulas as the sequential
// reference (two-pass var, singleton var = 0).
inline Scalar group_reduce_rows(ReduceFn fn, const ColumnVec& v,
                                const std::vector<size_t>& rows) {
  switch (fn) {
    case ReduceFn::Length: return Scalar(static_cast<int64_t>(rows.size()));
    case ReduceFn::Sum: {
      if (v.dtype() == ScalarType::Float64) {
        double s = 0.0;
        for (size_t r : rows) s += v.f64()[r];
        return Scalar(s);
      }
      int64_t s = 0;
      if (v.dtype() == ScalarType::Bool) {
        for (size_t r : rows) s += v.b8()[r] ? 1 : 0;
      } else {
        for (size_t r : rows) s += v.i64()[r];
      }
      return Scalar(s);
    }
    case ReduceFn::Mean: {
      double s = 0.0;
      for (size_t r : rows) s += value_f64(v, r);
      return Scalar(s / static_cast<double>(rows.size()));
    }
    case ReduceFn::Var: {
      if (rows.size() < 2) return Scalar(0.0);
      double s = 0.0;
      for (size_t r : rows) s += value_f64(v, r);
      double mean = s / static_cast<double>(rows.size());
      double ssd = 0.0;
      for (size_t r : rows) {
        double d = value_f64(v, r) - mean;
        ssd += d * d;
      }
      return Scalar(ssd / static_cast<double>(rows.size() - 1));
    }
  }
  return Scalar(int64_t{0});
}

// ---- parallel scan ----

// Each rank prefix-sums its chunk, then adds the exclusive scan of the
// lower ranks' totals. Int64 stays exact for any rank count.
inline ColumnVec exscan_cumsum(CollectiveCtx& ctx, const ColumnVec& in) {
  if (in.dtype() == ScalarType::Float64) {
    std::vector<double> local = in.f64();
    double total = 0.0;
    for (auto& x : local) {
      total += x;
      x = total;
    }
    auto totals = allgather(ctx, ColumnVec(std::vector<double>{total}),
                            "exscan_cumsum");
    double offset = 0.0;
    for (int r = 0; r < ctx.rank; r++) offset += totals[static_cast<size_t>(r)].f64()[0];
    for (auto& x : local) x += offset;
    return ColumnVec(std::move(local));
  }
  std::vector<int64_t> local = to_i64_vec(in);
  int64_t total = 0;
  for (auto& x : local) {
    total += x;
    x = total;
  }
  auto totals =
      allgather(ctx, ColumnVec(std::vector<int64_t>{total}), "exscan_cumsum");
  int64_t offset = 0;
  for (int r = 0; r < ctx.rank; r++) offset += totals[static_cast<size_t>(r)].i64()[0];
  for (auto& x : local) x += offset;
  return ColumnVec(std::move(local));
}

// ---- halo stencil ----

// Near-neighbor halo exchange: each rank ships up to k edge elements to its
// neighbors, computes interior windows locally, and copies the input at the
// global borders. A neighbor too short to cover the halo is a documented
// limitation (the halo would have to hop ranks).
inline ColumnVec halo_stencil(CollectiveCtx& ctx, const ColumnVec& in,
                              const std::vector<double>& w, double divisor) {
  int p = ctx.nranks();
  int rank = ctx.rank;
  size_t k = w.size() / 2;
  std::vector<double> local = to_f64_vec(in);
  size_t m = local.size();

  auto lens = allgather_u64(ctx, m, "halo_lens");
  size_t n = 0, s = 0;
  for (int r = 0; r < p; r++) {
    if (r < rank) s += lens[static_cast<size_t>(r)];
    n += lens[static_cast<size_t>(r)];
  }

  std::string tag = ctx.begin("halo_exchange");
  size_t edge = std::min(k, m);
  if (rank > 0) {
    ColumnVec head(std::vector<double>(local.begin(),
                                       local.begin() + static_cast<long>(edge)));
    ctx.fabric.send(rank, rank - 1, tag, std::move(head));
  }
  if (rank < p - 1) {
    ColumnVec tail(std::vector<double>(local.end() - static_cast<long>(edge),
                                       local.end()));
    ctx.fabric.send(rank, rank + 1, tag, std::move(tail));
  }
  std::vector<double> left_halo, right_halo;
  if (rank > 0) left_halo = ctx.fabric.recv(rank - 1, rank, tag).f64();
  if (rank < p - 1) right_halo = ctx.fabric.recv(rank + 1, rank, tag).f64();

  // computed global indices: [max(s, k), min(s+m, n-k))
  size_t lo = std::max(s, k);
  size_t hi = std::min(s + m, n >= k ? n - k : size_t{0});
  std::vector<double> out(local.begin(), local.end());
  if (lo < hi) {
    size_t need_left = s > lo - k ? s - (lo - k) : 0;  // elements below s
    if (need_left > left_halo.size())
      throw Error(Stage::Execute,
                  "stencil halo spans more than one rank (a neighbor chunk is "
                  "shorter than the window radius); rerun with fewer ranks");
    size_t need_right = (hi - 1) + k >= s + m ? (hi - 1) + k - (s + m) + 1 : 0;
    if (need_right > right_halo.size())
      throw Error(Stage::Execute,
                  "stencil halo spans more than one rank (a neighbor chunk is "
                  "shorter than the window radius); rerun with fewer ranks");
    // assemble [needed-left-suffix | local | needed-right-prefix]
    std::vector<double> ext;
    ext.reserve(need_left + m + need_right);
    ext.insert(ext.end(), left_halo.end() - static_cast<long>(need_left),
               left_halo.end());
    ext.insert(ext.end(), local.begin(), local.end());
    ext.insert(ext.end(), right_halo.begin(),
               right_halo.begin() + static_cast<long>(need_right));
    for (size_t g = lo; g < hi; g++) {
      size_t c = (g - s) + need_left;  // position in ext
      double acc = 0.0;
      for (size_t j = 0; j < w.size(); j++) acc += w[j] * ext[c + j - k];
      out[g - s] = acc / divisor;
    }
  }
  return ColumnVec(std::move(out));
}

// ---- rebalance ----

// 1D_VAR -> 1D_BLOCK: exclusive scan of chunk lengths locates every element
// globally; overlapping segments move point-to-point, order preserved.
// Already-balanced data exchanges only the lengths.
inline ColumnVec rebalance(CollectiveCtx& ctx, const ColumnVec& in,
                           uint64_t* moved_rows = nullptr) {
  int p = ctx.nranks();
  int rank = ctx.rank;
  size_t m = in.size();
  auto lens = allgather_u64(ctx, m, "rebalance_lens");
  std::vector<size_t> offsets(static_cast<size_t>(p) + 1, 0);
  for (int r = 0; r < p; r++)
    offsets[static_cast<size_t>(r) + 1] =
        offsets[static_cast<size_t>(r)] + lens[static_cast<size_t>(r)];
  size_t n = offsets[static_cast<size_t>(p)];
  size_t my_lo = offsets[static_cast<size_t>(rank)];

  auto overlap = [&](size_t a_lo, size_t a_hi, size_t b_lo,
                     size_t b_hi) -> std::pair<size_t, size_t> {
    size_t lo = std::max(a_lo, b_lo), hi = std::min(a_hi, b_hi);
    return lo < hi ? std::make_pair(lo, hi) : std::make_pair(size_t{0}, size_t{0});
  };

  std::string tag = ctx.begin("rebalance_move");
  ColumnVec keep = ColumnVec::make(in.dtype());
  for (int t = 0; t < p; t++) {
    BlockRange target = partition_block(n, p, t);
    auto [lo, hi] = overlap(my_lo, my_lo + m, target.start,
                            target.start + target.len);
    if (lo >= hi) continue;
    ColumnVec piece = in.slice(lo - my_lo, hi - lo);
    if (t == rank) {
      keep = std::move(piece);
    } else {
      if (moved_rows) *moved_rows += piece.size();
      ctx.fabric.send(rank, t, tag, std::move(piece));
    }
  }
  // receive in source-rank order = ascending global offset
  BlockRange mine = partition_block(n, p, rank);
  ColumnVec out = ColumnVec::make(in.dtype());
  for (int src = 0; src < p; src++) {
    size_t src_lo = offsets[static_cast<size_t>(src)];
    size_t src_hi = offsets[static_cast<size_t>(src) + 1];
    auto [lo, hi] = overlap(src_lo, src_hi, mine.start, mine.start + mine.len);
    if (lo >= hi) continue;
    if (src == rank)
      out.append(keep);
    else
      out.append(ctx.fabric.recv(src, rank, tag));
  }
  return out;
}

}  // namespace mf
