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
#include <cmath>
#include <bit>
#include <map>

#include "miniframes/eval.hpp"
#include "miniframes/io.hpp"

namespace mf {

// Sequential reference interpreter. Row orders are pinned: filter preserves
// input order, join is a nested loop over left order then right order,
// aggregate groups in first-occurrence order and emits sorted by key,
// concat appends inputs in order. Deliberately naive; the runtime is checked
// against it, so the two share no operator algorithms.
class Oracle {
 public:
  explicit Oracle(DataRepo& repo) : repo_(repo) {}

  SinkOutputs run(const Program& p) {
    for (const auto& s : p.stmts) {
      meta_ = &p.meta;
      std::visit([&](const auto& n) { exec(n); }, s.node);
    }
    return std::move(outputs_);
  }

 private:
  EvalEnv env() {
    return sequential_env([this](const std::string& name) -> const ColumnVec* {
      auto it = arrays_.find(name);
      return it == arrays_.end() ? nullptr : &it->second;
    });
  }

  size_t frame_rows(const std::string& frame) const {
    const Schema& s = meta_->schema(frame);
    if (s.empty()) return 0;
    return arrays_.at(array_name(frame, s[0].name)).size();
  }

  void exec(const DataSourceStmt& n) {
    const Table& t = repo_.load(n.path, n.format, n.schema);
    size_t rows = 0;
    bool first = true;
    for (const auto& c : n.schema) {
      const Column* col = t.find(c.name);
      if (!col)
        throw Error(Stage::Io,
                    "'" + n.path + "' has no column '" + c.name + "'");
      if (col->values.dtype() != c.type)
        throw Error(Stage::Io, "'" + n.path + ".." + c.name + "' is " +
                                   type_name(col->values.dtype()) +
                                   ", declared " + type_name(c.type));
      if (first) {
        rows = col->values.size();
        first = false;
      } else if (col->values.size() != rows) {
        throw Error(Stage::Io, "'" + n.path + "' columns differ in length");
      }
      arrays_[array_name(n.frame, c.name)] = col->values;
    }
  }

  void exec(const FilterStmt& n) {
    size_t rows = frame_rows(n.in);
    ColumnVec pred = eval_expr(n.pred, env(), rows);
    const auto& keep = pred.b8();
    for (const auto& c : n.columns) {
      const ColumnVec& in = arrays_.at(array_name(n.in, c));
      ColumnVec out = ColumnVec::make(in.dtype());
      for (size_t i = 0; i < rows; i++)
        if (keep[i]) out.push_from(in, i);
      arrays_[array_name(n.out, c)] = std::move(out);
    }
  }

  void exec(const JoinStmt& n) {
    const ColumnVec& lk = arrays_.at(array_name(n.left, n.left_key));
    const ColumnVec& rk = arrays_.at(array_name(n.right, n.right_key));
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < lk.size(); i++)
      for (size_t j = 0; j < rk.size(); j++)
        if (key_equal(lk, i, rk, j)) pairs.emplace_back(i, j);
    for (const auto& c : n.out_cols) {
      const ColumnVec& src = arrays_.at(
          array_name(c.from_right ? n.right : n.left, c.src));
      ColumnVec out = ColumnVec::make(src.dtype());
      for (const auto& [i, j] : pairs) out.push_from(src, c.from_right ? j : i);
      arrays_[array_name(n.out, c.name)] = std::move(out);
    }
  }

  void exec(const AggregateStmt& n) {
    size_t rows = frame_rows(n.in);
    const ColumnVec& key = arrays_.at(array_name(n.in, n.key));
    // expression arrays are computed up front, then grouped
    std::vector<ColumnVec> exprs;
    for (const auto& o : n.outputs)
      exprs.push_back(eval_expr(o.expr, env(), rows));

    // groups in first-occurrence order, then emitted sorted by key
    std::vector<size_t> group_first;
    std::vector<std::vector<size_t>> members;
    auto group_rows = [&](auto key_of) {
      std::map<decltype(key_of(size_t{0})), size_t> ids;
      for (size_t i = 0; i < rows; i++) {
        auto [it, inserted] = ids.emplace(key_of(i), members.size());
        if (inserted) {
          group_first.push_back(i);
          members.emplace_back();
        }
        members[it->second].push_back(i);
      }
    };
    switch (key.dtype()) {
      case ScalarType::Int64:
        group_rows([&](size_t i) { return key.i64()[i]; });
        break;
      case ScalarType::Float64:
        group_rows([&](size_t i) { return key.f64()[i]; });
        break;
      case ScalarType::Bool:
        group_rows([&](size_t i) { return key.b8()[i]; });
        break;
    }
    std::vector<size_t> order(members.size());
    for (size_t g = 0; g < order.size(); g++) order[g] = g;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return key_less(key, group_first[a], key, group_first[b]);
    });

    const Schema& out_schema = meta_->schema(n.out);
    ColumnVec out_key = ColumnVec::make(key.dtype());
    for (size_t g : order) out_key.push_from(key, group_first[g]);
    arrays_[array_name(n.out, n.key)] = std::move(out_key);
    for (size_t oi = 0; oi < n.outputs.size(); oi++) {
      const auto& o = n.outputs[oi];
      ScalarType out_t = schema_find(out_schema, o.name)->type;
      ColumnVec out = ColumnVec::make(out_t);
      for (size_t g : order)
        out.push_back(group_reduce(o.reducer, exprs[oi], members[g]));
      arrays_[array_name(n.out, o.name)] = std::move(out);
    }
  }

  Scalar group_reduce(ReduceFn fn, const ColumnVec& v,
                      const std::vector<size_t>& rows) {
    ColumnVec sub = ColumnVec::make(v.dtype());
    for (size_t r : rows) sub.push_from(v, r);
    return sequential_reduce(fn, sub);
  }

  void exec(const ConcatStmt& n) {
    for (const auto& c : n.columns) {
      ColumnVec out =
          ColumnVec::make(arrays_.at(array_name(n.ins[0], c)).dtype());
      for (const auto& in : n.ins)
        out.append(arrays_.at(array_name(in, c)));
      arrays_[array_name(n.out, c)] = std::move(out);
    }
  }

  void exec(const AssignColumnStmt& n) {
    size_t rows = frame_rows(n.frame);
    arrays_[array_name(n.frame, n.column)] = eval_expr(n.expr, env(), rows);
  }

  void exec(const MapExprStmt& n) {
    auto domain = expr_domain(n.expr, env());
    if (!domain) throw EvalError("map expression references no array");
    arrays_[n.out] = eval_expr(n.expr, env(), *domain);
  }

  void exec(const CumsumStmt& n) {
    const ColumnVec& in = arrays_.at(n.in);
    if (in.dtype() == ScalarType::Float64) {
      std::vector<double> out(in.size());
      double s = 0.0;
      for (size_t i = 0; i < in.size(); i++) {
        s += in.f64()[i];
        out[i] = s;
      }
      arrays_[n.out] = ColumnVec(std::move(out));
    } else {
      auto xs = to_i64_vec(in);
      std::vector<int64_t> out(xs.size());
      int64_t s = 0;
      for (size_t i = 0; i < xs.size(); i++) {
        s += xs[i];
        out[i] = s;
      }
      arrays_[n.out] = ColumnVec(std::move(out));
    }
  }

  void exec(const StencilStmt& n) {
    const ColumnVec& in = arrays_.at(n.in);
    arrays_[n.out] = ColumnVec(sequential_stencil(
        to_f64_vec(in), n.weights, n.divisor));
  }

  void exec(const HcatStmt& n) {
    Matrix m;
    m.cols = n.inputs.size();
    m.rows = arrays_.at(n.inputs[0]).size();
    for (const auto& a : n.inputs)
      if (arrays_.at(a).size() != m.rows)
        throw EvalError("hcat inputs differ in length");
    m.values.resize(m.rows * m.cols);
    for (size_t c = 0; c < m.cols; c++) {
      auto col = to_f64_vec(arrays_.at(n.inputs[c]));
      for (size_t r = 0; r < m.rows; r++) m.at(r, c) = col[r];
    }
    matrices_[n.out] = std::move(m);
  }

  void exec(const TransposeStmt& n) {
    const Matrix& in = matrices_.at(n.in);
    Matrix out;
    out.rows = in.cols;
    out.cols = in.rows;
    out.values.resize(in.values.size());
    for (size_t r = 0; r < in.rows; r++)
      for (size_t c = 0; c < in.cols; c++) out.at(c, r) = in.at(r, c);
    matrices_[n.out] = std::move(out);
  }

  void exec(const MatrixAssemblyStmt& n) {
    Matrix m;
    m.rows = n.inputs.size();
    m.cols = arrays_.at(n.inputs[0]).size();
    for (const auto& a : n.inputs)
      if (arrays_.at(a).size() != m.cols)
        throw EvalError("matrix assembly inputs differ in length");
    m.values.resize(m.rows * m.cols);
    for (size_t r = 0; r < m.rows; r++) {
      auto row = to_f64_vec(arrays_.at(n.inputs[r]));
      for (size_t c = 0; c < m.cols; c++) m.at(r, c) = row[c];
    }
    matrices_[n.out] = std::move(m);
  }

  void exec(const RebalanceStmt&) {}  // sequential no-op

  void exec(const SinkStmt& n) {
    for (const auto& item : n.items) {
      SinkFile f;
      f.sink = n.name;
      f.display = item.display;
      if (item.is_matrix) {
        f.table = matrix_to_table(matrices_.at(item.matrix));
      } else {
        for (const auto& c : item.columns)
          f.table.columns.push_back({c.display, arrays_.at(c.array)});
      }
      outputs_.push_back(std::move(f));
    }
  }

  static bool key_equal(const ColumnVec& a, size_t i, const ColumnVec& b,
                        size_t j) {
    if (a.dtype() == ScalarType::Float64)
      return a.f64()[i] == b.f64()[j];
    if (a.dtype() == ScalarType::Bool) return a.b8()[i] == b.b8()[j];
    return a.i64()[i] == b.i64()[j];
  }

  static bool key_less(const ColumnVec& a, size_t i, const ColumnVec& b,
                       size_t j) {
    if (a.dtype() == ScalarType::Float64) return a.f64()[i] < b.f64()[j];
    if (a.dtype() == ScalarType::Bool) return a.b8()[i] < b.b8()[j];
    return a.i64()[i] < b.i64()[j];
  }

  DataRepo& repo_;
  const FrameMeta* meta_ = nullptr;
  std::map<std::string, ColumnVec> arrays_;
  std::map<std::string, Matrix> matrices_;
  SinkOutputs outputs_;
};

inline SinkOutputs interpret(const Program& p, DataRepo& repo) {
  Oracle o(repo);
  return o.run(p);
}

// ---- output comparison ----

enum class CompareMode { Ordered, Multiset };

struct CompareOptions {
  CompareMode mode = CompareMode::Multiset;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
};

struct CompareResult {
  bool equal = true;
  std::string diff;  // first difference, empty when equal
};

namespace detail {

inline bool f64_close(double a, double b, const CompareOptions& opt) {
  if (std::isnan(a) && std::isnan(b)) return true;
  if (std::isinf(a) || std::isinf(b)) return a == b;
  double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= opt.abs_tol + opt.rel_tol * scale;
}

inline bool cell_close(const ColumnVec& a, size_t i, const ColumnVec& b,
                       size_t j, const CompareOptions& opt) {
  switch (a.dtype()) {
    case ScalarType::Int64: return a.i64()[i] == b.i64()[j];
    case ScalarType::Float64: return f64_close(a.f64()[i], b.f64()[j], opt);
    case ScalarType::Bool: return a.b8()[i] == b.b8()[j];
  }
  return false;
}

// IEEE total order on doubles (NaN sorts consistently), bit-pattern based.
inline uint64_t f64_order_key(double d) {
  uint64_t u = std::bit_cast<uint64_t>(d);
  return (u >> 63) ? ~u : (u | 0x8000000000000000ull);
}

// Canonical row order for multiset comparison: exact lexicographic sort with
// Int64/Bool columns as leading keys (stable against float noise).
inline std::vector<size_t> canonical_order(const Table& t) {
  std::vector<size_t> cols;
  for (size_t c = 0; c < t.columns.size(); c++)
    if (t.columns[c].values.dtype() != ScalarType::Float64) cols.push_back(c);
  for (size_t c = 0; c < t.columns.size(); c++)
    if (t.columns[c].values.dtype() == ScalarType::Float64) cols.push_back(c);
  std::vector<size_t> idx(t.rows());
  for (size_t i = 0; i < idx.size(); i++) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    for (size_t c : cols) {
      const ColumnVec& v = t.columns[c].values;
      switch (v.dtype()) {
        case ScalarType::Int64:
          if (v.i64()[a] != v.i64()[b]) return v.i64()[a] < v.i64()[b];
          break;
        case ScalarType::Bool:
          if (v.b8()[a] != v.b8()[b]) return v.b8()[a] < v.b8()[b];
          break;
        case ScalarType::Float64: {
          uint64_t ka = f64_order_key(v.f64()[a]);
          uint64_t kb = f64_order_key(v.f64()[b]);
          if (ka != kb) return ka < kb;
          break;
        }
      }
    }
    return false;
  });
  return idx;
}

inline std::string cell_str(const ColumnVec& v, size_t i) {
  return format_scalar(v.get(i));
}

}  // namespace detail

inline CompareResult compare_tables(const std::string& label, const Table& a,
                                    const Table& b, const CompareOptions& opt) {
  auto fail = [&](std::string msg) {
    return CompareResult{false, label + ": " + std::move(msg)};
  };
  if (a.columns.size() != b.columns.size())
    return fail("column count " + std::to_string(a.columns.size()) + " vs " +
                std::to_string(b.columns.size()));
  for (size_t c = 0; c < a.columns.size(); c++) {
    if (a.columns[c].name != b.columns[c].name)
      return fail("column " + std::to_string(c) + " named '" +
                  a.columns[c].name + "' vs '" + b.columns[c].name + "'");
    if (a.columns[c].values.dtype() != b.columns[c].values.dtype())
      return fail("column '" + a.columns[c].name + "' dtype " +
                  type_name(a.columns[c].values.dtype()) + " vs " +
                  type_name(b.columns[c].values.dtype()));
  }
  if (a.rows() != b.rows())
    return fail("row count " + std::to_string(a.rows()) + " vs " +
                std::to_string(b.rows()));
  std::vector<size_t> ia(a.rows()), ib(b.rows());
  if (opt.mode == CompareMode::Multiset) {
    ia = detail::canonical_order(a);
    ib = detail::canonical_order(b);
  } else {
    for (size_t i = 0; i < ia.size(); i++) ia[i] = ib[i] = i;
  }
  for (size_t r = 0; r < ia.size(); r++) {
    for (size_t c = 0; c < a.columns.size(); c++) {
      const ColumnVec& va = a.columns[c].values;
      const ColumnVec& vb = b.columns[c].values;
      if (!detail::cell_close(va, ia[r], vb, ib[r], opt))
        return fail("row " + std::to_string(r) + " column '" +
                    a.columns[c].name + "': " + detail::cell_str(va, ia[r]) +
                    " vs " + detail::cell_str(vb, ib[r]));
    }
  }
  return {};
}

inline CompareResult compare(const SinkOutputs& a, const SinkOutputs& b,
                             const CompareOptions& opt) {
  if (a.size() != b.size())
    return {false, "sink count " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size())};
  for (size_t i = 0; i < a.size(); i++) {
    if (a[i].sink != b[i].sink || a[i].display != b[i].display)
      return {false, "sink item '" + a[i].sink + "/" + a[i].display +
                         "' vs '" + b[i].sink + "/" + b[i].display + "'"};
    CompareResult r = compare_tables(a[i].sink + "/" + a[i].display,
                                     a[i].table, b[i].table, opt);
    if (!r.equal) return r;
  }
  return {};
}

}  // namespace mf
