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

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

#include "miniframes/common.hpp"

namespace mf {

struct RankError {
  int rank = 0;
  int op_index = 0;
  std::string message;
};

// Thrown inside a worker when another rank failed; unwinds quietly.
struct CancelledError {};

// In-process message-passing fabric for the SPMD workers: FIFO channels per
// ordered (src, dst) pair plus a cancellable barrier. Point-to-point
// delivery order is preserved per pair; collectives are matched by program
// order and verified by tag.
class Fabric {
 public:
  explicit Fabric(int nranks)
      : nranks_(nranks),
        channels_(static_cast<size_t>(nranks) * nranks),
        tags_(nranks) {}

  int nranks() const { return nranks_; }

  void send(int src, int dst, std::string tag, ColumnVec payload) {
    Channel& ch = channel(src, dst);
    {
      std::lock_guard<std::mutex> lk(ch.m);
      ch.q.push_back({std::move(tag), std::move(payload)});
    }
    ch.cv.notify_all();
  }

  ColumnVec recv(int src, int dst, const std::string& tag) {
    Channel& ch = channel(src, dst);
    std::unique_lock<std::mutex> lk(ch.m);
    ch.cv.wait(lk, [&] { return !ch.q.empty() || cancelled_.load(); });
    if (ch.q.empty() && cancelled_.load()) throw CancelledError{};
    Message msg = std::move(ch.q.front());
    ch.q.pop_front();
    if (msg.tag != tag)
      throw Error(Stage::Execute, "collective mismatch: expected '" + tag +
                                      "', got '" + msg.tag + "' from rank " +
                                      std::to_string(src));
    return std::move(msg.payload);
  }

  // Reusable barrier; throws CancelledError for everyone once a rank failed.
  void barrier() {
    std::unique_lock<std::mutex> lk(bar_m_);
    if (cancelled_.load()) throw CancelledError{};
    uint64_t gen = bar_gen_;
    if (++bar_count_ == nranks_) {
      bar_count_ = 0;
      bar_gen_++;
      bar_cv_.notify_all();
      return;
    }
    bar_cv_.wait(lk, [&] { return bar_gen_ != gen || cancelled_.load(); });
    if (bar_gen_ == gen && cancelled_.load()) throw CancelledError{};
  }

  // Every rank announces the collective it is entering; any divergence in
  // the SPMD sequence aborts the run (compiler bug, not data error).
  void collective_begin(int rank, const std::string& tag) {
    tags_[rank] = tag;
    barrier();
    for (int r = 0; r < nranks_; r++) {
      if (tags_[r] != tag)
        throw Error(Stage::Execute,
                    "collective mismatch: rank " + std::to_string(rank) +
                        " entered '" + tag + "' while rank " +
                        std::to_string(r) + " entered '" + tags_[r] + "'");
    }
    barrier();
  }

  void cancel(RankError e) {
    {
      std::lock_guard<std::mutex> lk(err_m_);
      errors_.push_back(std::move(e));
    }
    cancelled_.store(true);
    {
      std::lock_guard<std::mutex> lk(bar_m_);
      bar_cv_.notify_all();
    }
    for (auto& ch : channels_) {
      std::lock_guard<std::mutex> lk(ch.m);
      ch.cv.notify_all();
    }
  }

  bool cancelled() const { return cancelled_.load(); }

  // Deterministic pick: earliest failing operator, then lowest rank. Later
  // failures may or may not be reached depending on cancellation timing;
  // the earliest one always is.
  std::optional<RankError> first_error() const {
    std::lock_guard<std::mutex> lk(err_m_);
    if (errors_.empty()) return std::nullopt;
    const RankError* best = &errors_[0];
    for (const auto& e : errors_)
      if (e.op_index < best->op_index ||
          (e.op_index == best->op_index && e.rank < best->rank))
        best = &e;
    return *best;
  }

 private:
  struct Message {
    std::string tag;
    ColumnVec payload;
  };
  struct Channel {
    std::mutex m;
    std::condition_variable cv;
    std::deque<Message> q;
  };

  Channel& channel(int src, int dst) {
    return channels_[static_cast<size_t>(src) * nranks_ + dst];
  }

  int nranks_;
  std::vector<Channel> channels_;
  std::vector<std::string> tags_;

  std::mutex bar_m_;
  std::condition_variable bar_cv_;
  int bar_count_ = 0;
  uint64_t bar_gen_ = 0;

  mutable std::mutex err_m_;
  std::vector<RankError> errors_;
  std::atomic<bool> cancelled_{false};
};

// Per-worker handle carrying the collective sequence number; every
// collective call site advances it identically on all ranks.
struct CollectiveCtx {
  Fabric& fabric;
  int rank;
  uint64_t seq = 0;

  std::string begin(const std::string& name) {
    std::string tag = name + "#" + std::to_string(seq++);
    fabric.collective_begin(rank, tag);
    return tag;
  }

  int nranks() const { return fabric.nranks(); }
};

// ---- collectives over the fabric ----

// Every rank contributes one vector; everyone receives all of them in rank
// order.
inline std::vector<ColumnVec> allgather(CollectiveCtx& ctx, ColumnVec local,
                                        const std::string& name) {
  std::string tag = ctx.begin(name);
  int p = ctx.nranks();
  std::vector<ColumnVec> out(static_cast<size_t>(p));
  for (int dst = 0; dst < p; dst++) {
    if (dst == ctx.rank) continue;
    ctx.fabric.send(ctx.rank, dst, tag, local);
  }
  out[static_cast<size_t>(ctx.rank)] = std::move(local);
  for (int src = 0; src < p; src++) {
    if (src == ctx.rank) continue;
    out[static_cast<size_t>(src)] = ctx.fabric.recv(src, ctx.rank, tag);
  }
  return out;
}

inline std::vector<uint64_t> allgather_u64(CollectiveCtx& ctx, uint64_t v,
                                           const std::string& name) {
  ColumnVec local(std::vector<int64_t>{static_cast<int64_t>(v)});
  auto all = allgather(ctx, std::move(local), name);
  std::vector<uint64_t> out(all.size());
  for (size_t r = 0; r < all.size(); r++)
    out[r] = static_cast<uint64_t>(all[r].i64()[0]);
  return out;
}

// Variable-sized exchange: send_bufs[dst] goes to dst, result[src] arrives
// from src.
inline std::vector<ColumnVec> alltoallv(CollectiveCtx& ctx,
                                        std::vector<ColumnVec> send_bufs,
                                        const std::string& name) {
  std::string tag = ctx.begin(name);
  int p = ctx.nranks();
  std::vector<ColumnVec> out(static_cast<size_t>(p));
  for (int dst = 0; dst < p; dst++) {
    if (dst == ctx.rank) continue;
    ctx.fabric.send(ctx.rank, dst, tag,
                    std::move(send_bufs[static_cast<size_t>(dst)]));
  }
  out[static_cast<size_t>(ctx.rank)] =
      std::move(send_bufs[static_cast<size_t>(ctx.rank)]);
  for (int src = 0; src < p; src++) {
    if (src == ctx.rank) continue;
    out[static_cast<size_t>(src)] = ctx.fabric.recv(src, ctx.rank, tag);
  }
  return out;
}

}  // namespace mf
