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

#include <thread>
#include <unordered_map>

#include "miniframes/dist.hpp"
#include "miniframes/io.hpp"
#include "miniframes/runtime_ops.hpp"

namespace mf {

struct ExecOptions {
  int ranks = 1;
#ifdef NDEBUG
  bool debug_checks = false;
#else
  bool debug_checks = true;
#endif
};

struct ExecStats {
  uint64_t join_rows_in = 0;        // rows entering sort-merge joins
  uint64_t shuffle_rows = 0;        // rows passed through shuffles
  uint64_t rebalance_rows_moved = 0;
};

struct ExecResult {
  SinkOutputs sinks;
  ExecStats stats;
};

namespace detail {

inline uint64_t hash_column(const ColumnVec& v) {
  uint64_t h = 0x243f6a8885a308d3ull ^ v.size();
  for (size_t i = 0; i < v.size(); i++) h = mix_key(h ^ key_bits(v, i));
  return mix_key(h ^ static_cast<uint64_t>(v.dtype()));
}

inline ColumnVec sequential_cumsum(const ColumnVec& in) {
  if (in.dtype() == ScalarType::Float64) {
    std::vector<double> out = in.f64();
    double s = 0.0;
    for (auto& x : out) {
      s += x;
      x = s;
    }
    return ColumnVec(std::move(out));
  }
  std::vector<int64_t> out = to_i64_vec(in);
  int64_t s = 0;
  for (auto& x : out) {
    s += x;
    x = s;
  }
  return ColumnVec(std::move(out));
}

struct SinkSlot {
  std::string sink;
  std::string display;
  bool is_matrix = false;
  bool replicated = false;  // take rank 0's copy instead of gathering
  std::vector<Table> chunks;
  std::vector<Matrix> matrix_chunks;
};

// The SPMD engine: every rank interprets the same lowered statement
// sequence over its partition; the fabric is the only inter-rank channel.
class Engine {
 public:
  Engine(const Program& p, const DistMap& dm, DataRepo& repo,
         const ExecOptions& opt)
      : prog_(p), dm_(dm), repo_(repo), opt_(opt), fabric_(opt.ranks) {}

  ExecResult run() {
    prepare();
    std::vector<std::thread> workers;
    for (int r = 0; r < opt_.ranks; r++)
      workers.emplace_back([this, r] { worker(r); });
    for (auto& t : workers) t.join();
    if (auto err = fabric_.first_error())
      throw Error(Stage::Execute, "rank " + std::to_string(err->rank) +
                                      ", operator " +
                                      std::to_string(err->op_index) + ": " +
                                      err->message);
    ExecResult res;
    res.stats.join_rows_in = join_rows_in_.load();
    res.stats.shuffle_rows = shuffle_rows_.load();
    res.stats.rebalance_rows_moved = rebalance_moved_.load();
    for (auto& slot : slots_) {
      SinkFile f;
      f.sink = slot.sink;
      f.display = slot.display;
      if (slot.is_matrix) {
        Matrix whole;
        if (slot.replicated) {
          whole = std::move(slot.matrix_chunks[0]);
        } else {
          whole.rows = slot.matrix_chunks[0].rows;
          for (const auto& m : slot.matrix_chunks) whole.cols += m.cols;
          whole.values.resize(whole.rows * whole.cols);
          size_t base = 0;
          for (const auto& m : slot.matrix_chunks) {
            for (size_t r = 0; r < m.rows; r++)
              for (size_t c = 0; c < m.cols; c++)
                whole.at(r, base + c) = m.at(r, c);
            base += m.cols;
          }
        }
        f.table = matrix_to_table(whole);
      } else if (slot.replicated) {
        f.table = std::move(slot.chunks[0]);
      } else {
        f.table = std::move(slot.chunks[0]);
        for (int r = 1; r < opt_.ranks; r++)
          for (size_t c = 0; c < f.table.columns.size(); c++)
            f.table.columns[c].values.append(
                slot.chunks[static_cast<size_t>(r)].columns[c].values);
      }
      res.sinks.push_back(std::move(f));
    }
    return res;
  }

 private:
  void prepare() {
    if (opt_.ranks < 1)
      throw Error(Stage::Cli, "ranks must be >= 1");
    rep_mode_.assign(prog_.stmts.size(), false);
    for (size_t i = 0; i < prog_.stmts.size(); i++) {
      const Stmt& s = prog_.stmts[i];
      if (stmt_is<HcatStmt>(s) || stmt_is<TransposeStmt>(s))
        throw Error(Stage::Execute,
                    "unfused hcat/transpose has no parallel lowering; use "
                    "'assemble transpose hcat (...)'");
      DefUse du = def_use(s);
      for (const auto& d : du.defs)
        if (dm_.at(d) == Distribution::Rep) rep_mode_[i] = true;

      if (const auto* src = stmt_as<DataSourceStmt>(s)) {
        const Table& t = repo_.load(src->path, src->format, src->schema);
        size_t rows = 0;
        bool first = true;
        for (const auto& c : src->schema) {
          const Column* col = t.find(c.name);
          if (!col)
            throw Error(Stage::Io,
                        "'" + src->path + "' has no column '" + c.name + "'");
          if (col->values.dtype() != c.type)
            throw Error(Stage::Io, "'" + src->path + "." + c.name + "' is " +
                                       type_name(col->values.dtype()) +
                                       ", declared " + type_name(c.type));
          if (first) {
            rows = col->values.size();
            first = false;
          } else if (col->values.size() != rows) {
            throw Error(Stage::Io,
                        "'" + src->path + "' columns differ in length");
          }
        }
        source_tables_[i] = &t;
      } else if (const auto* sink = stmt_as<SinkStmt>(s)) {
        sink_slot_base_[i] = slots_.size();
        for (const auto& item : sink->items) {
          SinkSlot slot;
          slot.sink = sink->name;
          slot.display = item.display;
          slot.is_matrix = item.is_matrix;
          bool rep = true;
          if (item.is_matrix) {
            rep = dm_.at(item.matrix) == Distribution::Rep;
          } else {
            for (const auto& c : item.columns)
              if (dm_.at(c.array) != Distribution::Rep) rep = false;
          }
          slot.replicated = rep || sink->replicated;
          slot.chunks.resize(static_cast<size_t>(opt_.ranks));
          slot.matrix_chunks.resize(static_cast<size_t>(opt_.ranks));
          slots_.push_back(std::move(slot));
        }
      }
    }
  }

  struct RankState {
    CollectiveCtx ctx;
    std::unordered_map<std::string, ColumnVec> arrays;
    std::unordered_map<std::string, Matrix> matrices;
  };

  void worker(int rank) {
    RankState st{CollectiveCtx{fabric_, rank}, {}, {}};
    for (size_t i = 0; i < prog_.stmts.size(); i++) {
      try {
        std::visit([&](const auto& n) { exec(st, i, n); }, prog_.stmts[i].node);
      } catch (const CancelledError&) {
        return;
      } catch (const Error& e) {
        fabric_.cancel({rank, static_cast<int>(i), e.message()});
        return;
      } catch (const std::exception& e) {
        fabric_.cancel({rank, static_cast<int>(i), e.what()});
        return;
      }
    }
  }

  const ColumnVec& arr(RankState& st, const std::string& name) {
    auto it = st.arrays.find(name);
    if (it == st.arrays.end())
      throw Error(Stage::Execute, "array '" + name + "' is not materialized");
    return it->second;
  }

  EvalEnv env_for(RankState& st) {
    EvalEnv env;
    env.array = [&st](const std::string& name) -> const ColumnVec* {
      auto it = st.arrays.find(name);
      return it == st.arrays.end() ? nullptr : &it->second;
    };
    env.reduce = [this, &st](ReduceFn fn, const ExprPtr& operand,
                             const ColumnVec& local) -> Scalar {
      bool any_rep = false, any_dist = false;
      for (const auto& a : all_arrays(operand)) {
        if (dm_.at(a) == Distribution::Rep)
          any_rep = true;
        else
          any_dist = true;
      }
      if (any_rep && any_dist)
        throw EvalError(
            "reduction mixes replicated and distributed arrays");
      if (any_rep) return sequential_reduce(fn, local);  // full local copy
      return collective_reduce(st.ctx, fn, local);
    };
    return env;
  }

  // Rank-ordered combination keeps results identical on every rank and
  // equal to the sequential fold at one rank.
  Scalar collective_reduce(CollectiveCtx& ctx, ReduceFn fn,
                           const ColumnVec& local) {
    switch (fn) {
      case ReduceFn::Length: {
        auto lens = allgather_u64(ctx, local.size(), "reduce_length");
        int64_t n = 0;
        for (auto l : lens) n += static_cast<int64_t>(l);
        return Scalar(n);
      }
      case ReduceFn::Sum: {
        Scalar part = sequential_reduce(ReduceFn::Sum, local);
        if (scalar_type(part) == ScalarType::Float64) {
          auto parts = allgather(
              ctx, ColumnVec(std::vector<double>{std::get<double>(part)}),
              "reduce_sum");
          double s = 0.0;
          for (const auto& p : parts) s += p.f64()[0];
          return Scalar(s);
        }
        auto parts = allgather(
            ctx, ColumnVec(std::vector<int64_t>{std::get<int64_t>(part)}),
            "reduce_sum");
        int64_t s = 0;
        for (const auto& p : parts) s += p.i64()[0];
        return Scalar(s);
      }
      case ReduceFn::Mean: {
        auto [sum, n] = global_sum_count(ctx, local);
        return Scalar(sum / static_cast<double>(n));
      }
      case ReduceFn::Var: {
        auto [sum, n] = global_sum_count(ctx, local);
        if (n < 2) return Scalar(0.0);
        double mean = sum / static_cast<double>(n);
        double ssd = 0.0;
        for (size_t i = 0; i < local.size(); i++) {
          double d = value_f64(local, i) - mean;
          ssd += d * d;
        }
        auto parts = allgather(ctx, ColumnVec(std::vector<double>{ssd}),
                               "reduce_var");
        double total = 0.0;
        for (const auto& p : parts) total += p.f64()[0];
        return Scalar(total / static_cast<double>(n - 1));
      }
    }
    return Scalar(int64_t{0});
  }

  std::pair<double, int64_t> global_sum_count(CollectiveCtx& ctx,
                                              const ColumnVec& local) {
    double s = 0.0;
    for (size_t i = 0; i < local.size(); i++) s += value_f64(local, i);
    auto parts = allgather(
        ctx,
        ColumnVec(std::vector<double>{s, static_cast<double>(local.size())}),
        "reduce_sum_count");
    double sum = 0.0;
    int64_t n = 0;
    for (const auto& p : parts) {
      sum += p.f64()[0];
      n += static_cast<int64_t>(p.f64()[1]);
    }
    return {sum, n};
  }

  size_t frame_local_rows(RankState& st, const std::string& frame) {
    const Schema& s = prog_.meta.schema(frame);
    return arr(st, array_name(frame, s.at(0).name)).size();
  }

  // ---- statement execution ----

  void exec(RankState& st, size_t i, const DataSourceStmt& n) {
    const Table& t = *source_tables_.at(i);
    size_t rows = 0;
    for (const auto& c : n.schema) rows = t.find(c.name)->values.size();
    BlockRange r = rep_mode_[i] ? BlockRange{0, rows}
                                : partition_block(rows, opt_.ranks, st.ctx.rank);
    for (const auto& c : n.schema)
      st.arrays[array_name(n.frame, c.name)] =
          t.find(c.name)->values.slice(r.start, r.len);
  }

  void exec(RankState& st, size_t i, const FilterStmt& n) {
    size_t dom = arr(st, array_name(n.in, n.columns.at(0))).size();
    ColumnVec pred = eval_expr(n.pred, env_for(st), dom);
    const auto& keep = pred.b8();
    for (const auto& c : n.columns) {
      const ColumnVec& in = arr(st, array_name(n.in, c));
      ColumnVec out = ColumnVec::make(in.dtype());
      for (size_t r = 0; r < dom; r++)
        if (keep[r]) out.push_from(in, r);
      st.arrays[array_name(n.out, c)] = std::move(out);
    }
  }

  void exec(RankState& st, size_t i, const JoinStmt& n) {
    // columns each side contributes, key first
    std::vector<std::string> lsrcs{n.left_key}, rsrcs{n.right_key};
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
      if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& c : n.out_cols)
      add_unique(c.from_right ? rsrcs : lsrcs, c.src);

    auto materialize = [&](const std::string& frame,
                           const std::vector<std::string>& srcs) {
      std::vector<const ColumnVec*> ptrs;
      for (const auto& s : srcs) ptrs.push_back(&arr(st, array_name(frame, s)));
      return ptrs;
    };

    std::vector<ColumnVec> lcols, rcols;
    ColumnVec lkey, rkey;
    if (rep_mode_[i]) {
      for (const auto* p : materialize(n.left, lsrcs)) lcols.push_back(*p);
      for (const auto* p : materialize(n.right, rsrcs)) rcols.push_back(*p);
      lkey = lcols[0];
      rkey = rcols[0];
    } else {
      auto lp = materialize(n.left, lsrcs);
      ShuffleResult ls = shuffle_by_key(st.ctx, *lp[0],
                                        {lp.begin() + 1, lp.end()},
                                        opt_.debug_checks);
      auto rp = materialize(n.right, rsrcs);
      ShuffleResult rs = shuffle_by_key(st.ctx, *rp[0],
                                        {rp.begin() + 1, rp.end()},
                                        opt_.debug_checks);
      shuffle_rows_.fetch_add(lp[0]->size() + rp[0]->size());
      lkey = std::move(ls.key);
      rkey = std::move(rs.key);
      lcols.push_back(lkey);
      for (auto& c : ls.payload) lcols.push_back(std::move(c));
      rcols.push_back(rkey);
      for (auto& c : rs.payload) rcols.push_back(std::move(c));
    }
    join_rows_in_.fetch_add(lkey.size() + rkey.size());

    auto pairs = sort_merge_join_pairs(lkey, rkey);
    auto index_of = [](const std::vector<std::string>& v,
                       const std::string& s) {
      return static_cast<size_t>(
          std::find(v.begin(), v.end(), s) - v.begin());
    };
    for (const auto& c : n.out_cols) {
      const ColumnVec& src = c.from_right ? rcols[index_of(rsrcs, c.src)]
                                          : lcols[index_of(lsrcs, c.src)];
      ColumnVec out = ColumnVec::make(src.dtype());
      for (const auto& [li, ri] : pairs)
        out.push_from(src, c.from_right ? ri : li);
      st.arrays[array_name(n.out, c.name)] = std::move(out);
    }
  }

  void exec(RankState& st, size_t i, const AggregateStmt& n) {
    size_t dom = frame_local_rows(st, n.in);
    ColumnVec key = arr(st, array_name(n.in, n.key));
    std::vector<ColumnVec> exprs;
    for (const auto& o : n.outputs)
      exprs.push_back(eval_expr(o.expr, env_for(st), dom));

    if (!rep_mode_[i]) {
      // expression arrays travel with their rows through the shuffle
      std::vector<const ColumnVec*> ptrs;
      for (const auto& e : exprs) ptrs.push_back(&e);
      ShuffleResult sh = shuffle_by_key(st.ctx, key, ptrs, opt_.debug_checks);
      shuffle_rows_.fetch_add(key.size());
      key = std::move(sh.key);
      exprs = std::move(sh.payload);
    }

    AggGroups groups = hash_group_by(key);
    ColumnVec out_key = ColumnVec::make(key.dtype());
    for (size_t g : groups.emit_order) out_key.push_from(key, groups.first_row[g]);
    st.arrays[array_name(n.out, n.key)] = std::move(out_key);
    const Schema& out_schema = prog_.meta.schema(n.out);
    for (size_t oi = 0; oi < n.outputs.size(); oi++) {
      const auto& o = n.outputs[oi];
      ColumnVec out =
          ColumnVec::make(schema_find(out_schema, o.name)->type);
      for (size_t g : groups.emit_order)
        out.push_back(group_reduce_rows(o.reducer, exprs[oi],
                                        groups.members[g]));
      st.arrays[array_name(n.out, o.name)] = std::move(out);
    }
  }

  void exec(RankState& st, size_t, const ConcatStmt& n) {
    for (const auto& c : n.columns) {
      ColumnVec out = ColumnVec::make(arr(st, array_name(n.ins[0], c)).dtype());
      for (const auto& in : n.ins) out.append(arr(st, array_name(in, c)));
      st.arrays[array_name(n.out, c)] = std::move(out);
    }
  }

  void exec(RankState& st, size_t, const AssignColumnStmt& n) {
    size_t dom = frame_local_rows(st, n.frame);
    ColumnVec v = eval_expr(n.expr, env_for(st), dom);
    st.arrays[array_name(n.frame, n.column)] = std::move(v);
  }

  void exec(RankState& st, size_t, const MapExprStmt& n) {
    EvalEnv env = env_for(st);
    auto dom = expr_domain(n.expr, env);
    if (!dom) throw EvalError("map expression references no array");
    st.arrays[n.out] = eval_expr(n.expr, env, *dom);
  }

  void exec(RankState& st, size_t i, const CumsumStmt& n) {
    const ColumnVec& in = arr(st, n.in);
    st.arrays[n.out] =
        rep_mode_[i] ? sequential_cumsum(in) : exscan_cumsum(st.ctx, in);
  }

  void exec(RankState& st, size_t i, const StencilStmt& n) {
    const ColumnVec& in = arr(st, n.in);
    if (rep_mode_[i]) {
      st.arrays[n.out] =
          ColumnVec(sequential_stencil(to_f64_vec(in), n.weights, n.divisor));
    } else {
      st.arrays[n.out] = halo_stencil(st.ctx, in, n.weights, n.divisor);
    }
  }

  void exec(RankState& st, size_t, const RebalanceStmt& n) {
    uint64_t moved = 0;
    st.arrays[n.array] = rebalance(st.ctx, arr(st, n.array), &moved);
    rebalance_moved_.fetch_add(moved);
  }

  void exec(RankState& st, size_t, const MatrixAssemblyStmt& n) {
    Matrix m;
    m.rows = n.inputs.size();
    m.cols = arr(st, n.inputs[0]).size();
    for (const auto& a : n.inputs)
      if (arr(st, a).size() != m.cols)
        throw Error(Stage::Execute,
                    "matrix assembly inputs differ in local length");
    m.values.resize(m.rows * m.cols);
    for (size_t r = 0; r < m.rows; r++) {
      auto row = to_f64_vec(arr(st, n.inputs[r]));
      for (size_t c = 0; c < m.cols; c++) m.at(r, c) = row[c];
    }
    st.matrices[n.out] = std::move(m);
  }

  void exec(RankState&, size_t, const HcatStmt&) {
    throw Error(Stage::Execute, "unreachable: unfused hcat");
  }
  void exec(RankState&, size_t, const TransposeStmt&) {
    throw Error(Stage::Execute, "unreachable: unfused transpose");
  }

  void exec(RankState& st, size_t i, const SinkStmt& n) {
    size_t base = sink_slot_base_.at(i);
    for (size_t item_i = 0; item_i < n.items.size(); item_i++) {
      const SinkItem& item = n.items[item_i];
      SinkSlot& slot = slots_[base + item_i];
      if (opt_.debug_checks && slot.replicated && opt_.ranks > 1) {
        // replicated data must be bit-identical on every rank
        uint64_t h = 0;
        if (item.is_matrix) {
          const Matrix& m = st.matrices.at(item.matrix);
          h = hash_column(ColumnVec(m.values)) ^ m.rows;
        } else {
          for (const auto& c : item.columns)
            h = mix_key(h ^ hash_column(arr(st, c.array)));
        }
        auto hashes = allgather_u64(st.ctx, h, "rep_sink_check");
        for (auto other : hashes)
          if (other != h)
            throw Error(Stage::Execute,
                        "replicated sink data differs across ranks");
      }
      if (item.is_matrix) {
        slot.matrix_chunks[static_cast<size_t>(st.ctx.rank)] =
            st.matrices.at(item.matrix);
      } else {
        Table t;
        for (const auto& c : item.columns)
          t.columns.push_back({c.display, arr(st, c.array)});
        slot.chunks[static_cast<size_t>(st.ctx.rank)] = std::move(t);
      }
    }
  }

  const Program& prog_;
  const DistMap& dm_;
  DataRepo& repo_;
  ExecOptions opt_;
  Fabric fabric_;
  std::vector<bool> rep_mode_;
  std::map<size_t, const Table*> source_tables_;
  std::map<size_t, size_t> sink_slot_base_;
  std::vector<SinkSlot> slots_;
  std::atomic<uint64_t> join_rows_in_{0};
  std::atomic<uint64_t> shuffle_rows_{0};
  std::atomic<uint64_t> rebalance_moved_{0};
};

}  // namespace detail

// Runs the compiled program on `ranks` SPMD workers and gathers sink outputs
// in rank order. Any rank failure cancels all ranks; the earliest failing
// operator (lowest rank on ties) is reported.
inline ExecResult execute(const Program& p, const DistMap& dm, DataRepo& repo,
                          const ExecOptions& opt) {
  detail::Engine engine(p, dm, repo, opt);
  return engine.run();
}

}  // namespace mf
