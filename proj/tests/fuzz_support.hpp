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

// Random-program generator for differential testing. Programs are built
// bottom-up over a pool of frames/arrays with known row universes ("length
// classes"); order-sensitive operations are only applied where the runtime's
// global row order provably matches the sequential reference (source and
// filter lineage), everything else is compared as a multiset.

#pragma once

#include <random>
#include <sstream>

#include "miniframes/compiler.hpp"
#include "miniframes/datagen.hpp"
#include "miniframes/execute.hpp"
#include "miniframes/oracle.hpp"

namespace fuzz {

struct GenOptions {
  size_t max_rows = 400;
  int max_relational = 6;
  int max_extra_ops = 8;
  double replicated_sink_prob = 0.1;
};

struct GenProgram {
  std::string text;
  std::shared_ptr<mf::DataRepo> repo;
  // sink display name -> safe to compare as an ordered sequence at p > 1
  std::map<std::string, bool> ordered_item;
};

class Generator {
 public:
  Generator(std::mt19937_64& rng, GenOptions opt) : rng_(rng), opt_(opt) {}

  GenProgram run() {
    repo_ = std::make_shared<mf::DataRepo>();
    int nsources = pick(1, 2);
    for (int i = 0; i < nsources; i++) emit_source();
    int ops = pick(2, opt_.max_extra_ops + opt_.max_relational);
    for (int i = 0; i < ops; i++) emit_random_op();
    emit_sinks();
    GenProgram out;
    out.text = text_.str();
    out.repo = repo_;
    out.ordered_item = ordered_;
    return out;
  }

 private:
  struct Cls {
    bool stable = false;  // runtime global row order == oracle order
    bool block = false;   // 1D_BLOCK universe (safe for stencils)
    size_t rows = 0;      // oracle row count (approximate after filters)
    bool exact_rows = false;  // rows is exact, not an estimate
  };
  struct Fr {
    std::string name;
    std::vector<std::pair<std::string, mf::ScalarType>> cols;
    int cls = 0;
    // aggregate output types are only guessed here; frames carrying guessed
    // types are excluded from schema-sensitive ops (concat/assign/col)
    bool tainted = false;
  };
  struct Arr {
    std::string name;
    mf::ScalarType type;
    int cls = 0;
    bool alias = false;        // direct frame-column binding
    std::string alias_frame;
    // derived through a broadcast reduction (x - mean(x) style): prefix sums
    // over such arrays telescope to cancellation noise where no fixed
    // tolerance is meaningful, so cumsum/stencil stay away
    bool reduce_derived = false;
  };

  int pick(int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  bool chance(double p) {
    return std::uniform_real_distribution<double>(0, 1)(rng_) < p;
  }

  std::string fresh(const char* prefix) {
    return prefix + std::to_string(++counter_);
  }

  int new_cls(bool stable, bool block, size_t rows, bool exact = false) {
    classes_.push_back({stable, block, rows, exact});
    return static_cast<int>(classes_.size()) - 1;
  }

  void emit_source() {
    Fr f;
    f.name = fresh("f");
    f.cols.emplace_back("k", mf::ScalarType::Int64);
    if (chance(0.9)) f.cols.emplace_back("x", mf::ScalarType::Float64);
    if (chance(0.5)) f.cols.emplace_back("y", mf::ScalarType::Float64);
    if (chance(0.5)) f.cols.emplace_back("v", mf::ScalarType::Int64);
    size_t rows = chance(0.06) ? 0
                               : static_cast<size_t>(
                                     pick(1, static_cast<int>(opt_.max_rows)));
    int64_t card = std::max<int64_t>(1, static_cast<int64_t>(rows) / 3);
    mf::Schema schema;
    for (const auto& [n, t] : f.cols) schema.push_back({n, t});
    std::string path = "gen/" + f.name + ".hfb";
    repo_->preload(path,
                   mf::generate_table(f.name, schema, rows, card, seed_++));
    text_ << f.name << " = source \"" << path << "\" format hfb schema (";
    for (size_t i = 0; i < f.cols.size(); i++) {
      if (i) text_ << ", ";
      text_ << f.cols[i].first << ":" << mf::type_name(f.cols[i].second);
    }
    text_ << ")\n";
    f.cls = new_cls(true, true, rows, true);
    frames_.push_back(std::move(f));
  }

  const Fr* random_frame() {
    if (frames_.empty()) return nullptr;
    return &frames_[static_cast<size_t>(pick(0, static_cast<int>(frames_.size()) - 1))];
  }

  std::vector<size_t> numeric_cols(const Fr& f) {
    std::vector<size_t> out;
    for (size_t i = 0; i < f.cols.size(); i++)
      if (f.cols[i].second != mf::ScalarType::Bool) out.push_back(i);
    return out;
  }

  std::vector<size_t> i64_cols(const Fr& f) {
    std::vector<size_t> out;
    for (size_t i = 0; i < f.cols.size(); i++)
      if (f.cols[i].second == mf::ScalarType::Int64) out.push_back(i);
    return out;
  }

  // numeric expression over a frame's columns; never divides by a variable
  std::string num_expr(const Fr& f, int depth) {
    auto cols = numeric_cols(f);
    if (cols.empty() || depth <= 0) {
      if (chance(0.5)) return std::to_string(pick(0, 50));
      return mf::format_f64(pick(0, 100) / 100.0);
    }
    switch (pick(0, 5)) {
      case 0:
      case 1: return f.cols[cols[static_cast<size_t>(pick(
                          0, static_cast<int>(cols.size()) - 1))]].first;
      case 2:
        return "(" + num_expr(f, depth - 1) + " + " + num_expr(f, depth - 1) +
               ")";
      case 3:
        return "(" + num_expr(f, depth - 1) + " - " + num_expr(f, depth - 1) +
               ")";
      case 4:
        return "(" + num_expr(f, depth - 1) + " * " +
               mf::format_f64(pick(1, 4) / 2.0) + ")";
      default: {
        const char* fns[] = {"mean", "sum", "var", "length"};
        std::string col = f.cols[cols[static_cast<size_t>(pick(
            0, static_cast<int>(cols.size()) - 1))]].first;
        return "(" + col + " - " + fns[pick(0, 3)] + "(" + col + "))";
      }
    }
  }

  std::string bool_expr(const Fr& f, int depth) {
    if (depth > 0 && chance(0.3)) {
      const char* op = chance(0.5) ? "and" : "or";
      return "(" + bool_expr(f, depth - 1) + " " + op + " " +
             bool_expr(f, depth - 1) + ")";
    }
    auto cols = numeric_cols(f);
    if (cols.empty()) return chance(0.5) ? "true" : "false";
    const auto& [name, type] = f.cols[cols[static_cast<size_t>(
        pick(0, static_cast<int>(cols.size()) - 1))]];
    const char* cmps[] = {"<", "<=", ">", ">=", "==", "!="};
    std::string rhs = type == mf::ScalarType::Float64
                          ? mf::format_f64(pick(0, 100) / 100.0)
                          : std::to_string(pick(0, 80));
    return "(" + name + " " + cmps[pick(0, 5)] + " " + rhs + ")";
  }

  void emit_random_op() {
    switch (pick(0, 9)) {
      case 0:
      case 1: emit_filter(); break;
      case 2: emit_join(); break;
      case 3: emit_aggregate(); break;
      case 4: emit_concat(); break;
      case 5: emit_col_map(); break;
      case 6: emit_cumsum(); break;
      case 7: emit_stencil(); break;
      case 8: emit_assign(); break;
      default: emit_assemble(); break;
    }
  }

  void emit_filter() {
    const Fr* in = random_frame();
    if (!in || relational_ >= opt_.max_relational) return;
    relational_++;
    Fr out;
    out.name = fresh("f");
    out.cols = in->cols;
    out.tainted = in->tainted;
    bool stable = classes_[static_cast<size_t>(in->cls)].stable;
    size_t rows = classes_[static_cast<size_t>(in->cls)].rows;
    out.cls = new_cls(stable, false, rows / 2);
    std::string pred = chance(0.05) ? "true" : bool_expr(*in, 2);
    text_ << out.name << " = filter " << in->name << " (" << pred << ")\n";
    frames_.push_back(std::move(out));
  }

  void emit_join() {
    if (frames_.size() < 1 || relational_ >= opt_.max_relational) return;
    const Fr* l = random_frame();
    const Fr* r = random_frame();
    if (l->tainted || r->tainted) return;  // key types are only guessed there
    auto lk = i64_cols(*l);
    auto rk = i64_cols(*r);
    if (lk.empty() || rk.empty()) return;
    // keep join fan-out bounded
    size_t lrows = classes_[static_cast<size_t>(l->cls)].rows;
    size_t rrows = classes_[static_cast<size_t>(r->cls)].rows;
    size_t estimate = 3 * std::max(lrows, rrows);
    if (estimate > 3000 || joins_ >= 2) return;
    relational_++;
    joins_++;
    Fr out;
    out.name = fresh("f");
    out.tainted = l->tainted || r->tainted;
    std::string lkey = l->cols[lk[static_cast<size_t>(
        pick(0, static_cast<int>(lk.size()) - 1))]].first;
    std::string rkey = r->cols[rk[static_cast<size_t>(
        pick(0, static_cast<int>(rk.size()) - 1))]].first;
    std::set<std::string> taken;
    for (const auto& c : l->cols) {
      out.cols.push_back(c);
      taken.insert(c.first);
    }
    for (const auto& c : r->cols) {
      if (c.first == rkey) continue;
      std::string name = c.first;
      if (taken.count(name)) name = r->name + "_" + c.first;
      if (!taken.insert(name).second) return;  // still colliding: skip op
      out.cols.emplace_back(name, c.second);
    }
    out.cls = new_cls(false, false, estimate);
    text_ << out.name << " = join " << l->name << " " << r->name << " on "
          << lkey << " == " << rkey << "\n";
    frames_.push_back(std::move(out));
  }

  void emit_aggregate() {
    const Fr* in = random_frame();
    if (!in || relational_ >= opt_.max_relational) return;
    auto keys = i64_cols(*in);
    if (keys.empty()) return;
    relational_++;
    Fr out;
    out.name = fresh("f");
    std::string key = in->cols[keys[static_cast<size_t>(
        pick(0, static_cast<int>(keys.size()) - 1))]].first;
    out.cols.emplace_back(key, mf::ScalarType::Int64);
    text_ << out.name << " = aggregate " << in->name << " by " << key << " (";
    int nouts = pick(1, 3);
    for (int i = 0; i < nouts; i++) {
      if (i) text_ << ", ";
      std::string name = "o" + std::to_string(i);
      if (name == key) name = "g" + std::to_string(i);
      const char* fns[] = {"sum", "mean", "var", "length"};
      const char* fn = fns[pick(0, 3)];
      std::string expr = chance(0.4) ? bool_expr(*in, 1) : num_expr(*in, 1);
      text_ << name << " = " << fn << "(" << expr << ")";
      mf::ScalarType t = (std::string(fn) == "mean" || std::string(fn) == "var")
                             ? mf::ScalarType::Float64
                             : mf::ScalarType::Int64;
      if (std::string(fn) == "sum" && !chance(0.4)) t = mf::ScalarType::Float64;
      // exact type comes from the compiler; only the name matters here
      out.cols.emplace_back(name, t);
    }
    text_ << ")\n";
    const Cls& c = classes_[static_cast<size_t>(in->cls)];
    out.cls = new_cls(false, false, std::min<size_t>(c.rows, 200));
    out.tainted = true;
    frames_.push_back(std::move(out));
  }

  void emit_concat() {
    if (relational_ >= opt_.max_relational) return;
    // find two frames with identical schemas
    for (size_t a = 0; a < frames_.size(); a++) {
      for (size_t b = 0; b < frames_.size(); b++) {
        if (a == b) continue;
        if (frames_[a].cols != frames_[b].cols) continue;
        if (frames_[a].tainted || frames_[b].tainted) continue;
        relational_++;
        Fr out;
        out.name = fresh("f");
        out.cols = frames_[a].cols;
        size_t rows = classes_[static_cast<size_t>(frames_[a].cls)].rows +
                      classes_[static_cast<size_t>(frames_[b].cls)].rows;
        out.cls = new_cls(false, false, rows);
        text_ << out.name << " = concat " << frames_[a].name << " "
              << frames_[b].name << "\n";
        frames_.push_back(std::move(out));
        return;
      }
    }
  }

  void emit_col_map() {
    const Fr* f = random_frame();
    if (!f) return;
    auto cols = numeric_cols(*f);
    if (cols.empty()) return;
    const auto& [cname, ctype] = f->cols[cols[static_cast<size_t>(
        pick(0, static_cast<int>(cols.size()) - 1))]];
    Arr a;
    a.name = fresh("a");
    a.type = ctype;
    a.cls = f->cls;
    a.alias = true;
    a.alias_frame = f->name;
    text_ << a.name << " = col " << f->name << " " << cname << "\n";
    arrays_.push_back(a);
    if (chance(0.7)) {
      Arr m;
      m.name = fresh("a");
      m.cls = f->cls;
      std::string expr;
      int kind = pick(0, 3);
      if (kind == 3) m.reduce_derived = true;
      switch (kind) {
        case 0:
          expr = a.name + " + " + mf::format_f64(pick(0, 9) / 3.0);
          m.type = mf::ScalarType::Float64;
          break;
        case 1:
          expr = "log(" + a.name + " + 1.0)";
          m.type = mf::ScalarType::Float64;
          break;
        case 2:
          expr = a.name + " * 2";
          m.type = a.type;
          break;
        default:
          expr = a.name + " - mean(" + a.name + ")";
          m.type = mf::ScalarType::Float64;
          break;
      }
      text_ << m.name << " = map (" << expr << ")\n";
      arrays_.push_back(std::move(m));
    }
  }

  const Arr* random_array(bool need_stable, bool need_block,
                          bool numeric_only, bool well_scaled = false) {
    std::vector<const Arr*> pool;
    for (const auto& a : arrays_) {
      const Cls& c = classes_[static_cast<size_t>(a.cls)];
      if (need_stable && !c.stable) continue;
      if (need_block && !c.block) continue;
      if (numeric_only && a.type == mf::ScalarType::Bool) continue;
      if (well_scaled && a.reduce_derived) continue;
      pool.push_back(&a);
    }
    if (pool.empty()) return nullptr;
    return pool[static_cast<size_t>(pick(0, static_cast<int>(pool.size()) - 1))];
  }

  void emit_cumsum() {
    const Arr* in = random_array(true, false, true, true);
    if (!in) return;
    Arr out;
    out.name = fresh("a");
    out.type = in->type == mf::ScalarType::Float64 ? mf::ScalarType::Float64
                                                   : mf::ScalarType::Int64;
    out.cls = in->cls;
    text_ << out.name << " = cumsum " << in->name << "\n";
    arrays_.push_back(std::move(out));
  }

  void emit_stencil() {
    const Arr* in = random_array(true, true, true, true);
    if (!in) return;
    const Cls& c = classes_[static_cast<size_t>(in->cls)];
    // a radius-2 window must fit in every rank's block chunk at up to 7
    // ranks, so it needs an exactly known row count of at least 28;
    // radius-1 windows are safe on any block partition
    const char* window = nullptr;
    if (c.exact_rows && c.rows >= 28 && chance(0.3))
      window = " weights [1.0, 1.0, 1.0, 1.0, 1.0] div 5.0";
    else if (chance(0.5))
      window = " weights [1.0, 1.0, 1.0] div 3.0";
    else
      window = " weights [1.0, 2.0, 1.0] div 4.0";
    Arr out;
    out.name = fresh("a");
    out.type = mf::ScalarType::Float64;
    out.cls = in->cls;
    text_ << out.name << " = stencil " << in->name << window << "\n";
    arrays_.push_back(std::move(out));
  }

  void emit_assign() {
    Fr* f = frames_.empty()
                ? nullptr
                : &frames_[static_cast<size_t>(
                      pick(0, static_cast<int>(frames_.size()) - 1))];
    if (!f || f->tainted) return;
    auto cols = numeric_cols(*f);
    if (cols.empty()) return;
    size_t ci = cols[static_cast<size_t>(pick(0, static_cast<int>(cols.size()) - 1))];
    // type-preserving update
    std::string expr = f->cols[ci].second == mf::ScalarType::Float64
                           ? f->cols[ci].first + " * 0.5 + 0.25"
                           : f->cols[ci].first + " * 2 + 1";
    text_ << "set " << f->name << " " << f->cols[ci].first << " (" << expr
          << ")\n";
  }

  void emit_assemble() {
    Fr* f = frames_.empty()
                ? nullptr
                : &frames_[static_cast<size_t>(
                      pick(0, static_cast<int>(frames_.size()) - 1))];
    if (!f) return;
    auto cols = numeric_cols(*f);
    if (cols.size() < 2) return;
    std::vector<std::string> aliases;
    for (size_t i = 0; i < std::min<size_t>(cols.size(), 3); i++) {
      std::string alias = fresh("a");
      text_ << alias << " = col " << f->name << " " << f->cols[cols[i]].first
            << "\n";
      aliases.push_back(alias);
    }
    std::string m = fresh("m");
    text_ << m << " = assemble transpose hcat (";
    for (size_t i = 0; i < aliases.size(); i++) {
      if (i) text_ << ", ";
      text_ << aliases[i];
    }
    text_ << ")\n";
    matrices_.push_back(m);
    // assembly rebalances the frame's columns in place: the frame (and its
    // column aliases) live in a fresh block universe; derived arrays of the
    // old class keep stale var chunks and must not mix with it
    const Cls old = classes_[static_cast<size_t>(f->cls)];
    int fresh_cls = new_cls(old.stable, true, old.rows, old.exact_rows);
    std::string fname = f->name;
    f->cls = fresh_cls;
    for (auto& a : arrays_)
      if (a.alias && a.alias_frame == fname) a.cls = fresh_cls;
  }

  void emit_sinks() {
    int sinks = 0;
    for (const auto& f : frames_) {
      if (!chance(0.8)) continue;
      bool rep = chance(opt_.replicated_sink_prob);
      text_ << "sink \"s" << ++counter_ << "\"" << (rep ? " replicated" : "")
            << " (" << f.name << ")\n";
      ordered_[f.name] = false;
      sinks++;
    }
    for (const auto& a : arrays_) {
      if (!classes_[static_cast<size_t>(a.cls)].stable || !chance(0.5))
        continue;
      text_ << "sink \"s" << ++counter_ << "\" (" << a.name << ")\n";
      ordered_[a.name] = true;
      sinks++;
    }
    for (const auto& m : matrices_) {
      text_ << "sink \"s" << ++counter_ << "\" (" << m << ")\n";
      ordered_[m] = false;
      sinks++;
    }
    if (sinks == 0 && !frames_.empty()) {
      text_ << "sink \"s" << ++counter_ << "\" (" << frames_[0].name << ")\n";
      ordered_[frames_[0].name] = false;
    }
  }

  std::mt19937_64& rng_;
  GenOptions opt_;
  std::shared_ptr<mf::DataRepo> repo_;
  std::ostringstream text_;
  std::vector<Cls> classes_;
  std::vector<Fr> frames_;
  std::vector<Arr> arrays_;
  std::vector<std::string> matrices_;
  std::map<std::string, bool> ordered_;
  int counter_ = 0;
  int relational_ = 0;
  int joins_ = 0;
  uint64_t seed_ = 1000;
};

inline GenProgram random_program(std::mt19937_64& rng,
                                 const GenOptions& opt = {}) {
  Generator g(rng, opt);
  GenProgram p = g.run();
  p.text = "# fuzz program\n" + p.text;
  return p;
}

// Runs the full differential check: oracle vs SPMD execution at each rank
// count, plus oracle(optimized) == oracle(desugared). Returns "" when
// everything matches, else a description with the offending program.
inline std::string check_differential(const GenProgram& gp,
                                      const std::vector<int>& ranks_list) {
  try {
    mf::Compiled c = mf::compile(gp.text);
    mf::SinkOutputs oracle_out = mf::interpret(c.desugared, *gp.repo);

    mf::SinkOutputs opt_out = mf::interpret(c.optimized, *gp.repo);
    mf::CompareResult same =
        mf::compare(oracle_out, opt_out, {mf::CompareMode::Ordered, 0.0, 0.0});
    if (!same.equal)
      return "optimizer changed oracle semantics: " + same.diff + "\n" +
             gp.text;

    for (int ranks : ranks_list) {
      mf::ExecOptions eopt;
      eopt.ranks = ranks;
      eopt.debug_checks = true;
      mf::ExecResult res = mf::execute(c.distributed, c.dist, *gp.repo, eopt);
      if (res.sinks.size() != oracle_out.size())
        return "sink count mismatch at ranks=" + std::to_string(ranks) + "\n" +
               gp.text;
      for (size_t i = 0; i < oracle_out.size(); i++) {
        mf::CompareOptions copt;
        if (ranks == 1) {
          copt.mode = mf::CompareMode::Ordered;
          copt.rel_tol = 0.0;
          copt.abs_tol = 0.0;
        } else {
          bool ordered = false;
          auto it = gp.ordered_item.find(oracle_out[i].display);
          if (it != gp.ordered_item.end()) ordered = it->second;
          copt.mode = ordered ? mf::CompareMode::Ordered
                              : mf::CompareMode::Multiset;
          copt.rel_tol = 1e-9;
          copt.abs_tol = 1e-12;
        }
        mf::CompareResult r = mf::compare_tables(
            oracle_out[i].sink + "/" + oracle_out[i].display,
            oracle_out[i].table, res.sinks[i].table, copt);
        if (!r.equal)
          return "diff at ranks=" + std::to_string(ranks) + ": " + r.diff +
                 "\n" + gp.text;
      }
    }
  } catch (const mf::Error& e) {
    return std::string("error: ") + e.what() + "\n" + gp.text;
  }
  return "";
}

}  // namespace fuzz
