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

#include <map>
#include <string>

#include "miniframes/parser.hpp"
#include "miniframes/typecheck.hpp"

namespace mf {

// Desugars the surface program: every frame column becomes an independent
// array named _<frame>_<col>, column references inside expressions are
// rewritten to those arrays, projections become pure aliases (no statement,
// no copy), and `assemble` expands to hcat/transpose nodes for the pattern
// matcher. Frame schemas are recorded in FrameMeta; aggregate output types
// are computed here from the expression types.
class Desugarer {
 public:
  Program run(const SurfaceProgram& sp) {
    for (const auto& s : sp.stmts) {
      line_ = s.line;
      std::visit([&](const auto& n) { handle(n); }, s.node);
    }
    prog_.meta = std::move(meta_);
    return std::move(prog_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw Error(Stage::Desugar, msg, line_);
  }

  void declare_frame(const std::string& frame, Schema schema) {
    if (meta_.has(frame) || aliases_.count(frame) || arrays_.count(frame) ||
        matrices_.count(frame))
      fail("redefinition of '" + frame + "'");
    std::set<std::string> seen;
    for (const auto& c : schema) {
      if (!seen.insert(c.name).second)
        fail("duplicate column '" + c.name + "' in frame '" + frame + "'");
      arrays_[array_name(frame, c.name)] = c.type;
    }
    meta_.frames[frame] = std::move(schema);
  }

  void declare_array(const std::string& name, ScalarType t) {
    if (meta_.has(name) || aliases_.count(name) || arrays_.count(name) ||
        matrices_.count(name))
      fail("redefinition of '" + name + "'");
    arrays_[name] = t;
  }

  void declare_matrix(const std::string& name) {
    if (meta_.has(name) || aliases_.count(name) || arrays_.count(name) ||
        matrices_.count(name))
      fail("redefinition of '" + name + "'");
    matrices_.insert(name);
  }

  const Schema& schema_of(const std::string& frame) {
    if (!meta_.has(frame)) fail("undeclared frame '" + frame + "'");
    return meta_.frames.at(frame);
  }

  // Resolves one surface column reference to a concrete array name.
  std::string resolve_ref(const Expr::ColumnRef& r, const std::string& ctx) {
    if (!r.frame.empty()) {
      const Schema& s = schema_of(r.frame);
      if (!schema_find(s, r.name))
        fail("unknown column '" + r.name + "' in frame '" + r.frame + "'");
      return array_name(r.frame, r.name);
    }
    if (!ctx.empty() && schema_find(meta_.frames.at(ctx), r.name))
      return array_name(ctx, r.name);
    auto al = aliases_.find(r.name);
    if (al != aliases_.end()) return al->second;
    if (arrays_.count(r.name)) return r.name;
    fail("unknown column or array '" + r.name + "'");
  }

  ExprPtr resolve_expr(const ExprPtr& e, const std::string& ctx) {
    ExprPtr out = clone_expr(e);
    rewrite_refs(out, [&](const Expr::ColumnRef& r) {
      return Expr::ColumnRef{"", resolve_ref(r, ctx)};
    });
    return out;
  }

  // Types an expression over the current array environment; the static
  // equivalent of the dummy-call trick for aggregate output types.
  ScalarType type_of(const ExprPtr& e) {
    try {
      return type_expr(e, [&](const std::string& a) -> std::optional<ScalarType> {
        auto it = arrays_.find(a);
        if (it == arrays_.end()) return std::nullopt;
        return it->second;
      });
    } catch (const Error& err) {
      throw Error(err.stage(), err.message(), line_);
    }
  }

  std::string resolve_array_operand(const std::string& name) {
    auto al = aliases_.find(name);
    if (al != aliases_.end()) return al->second;
    if (arrays_.count(name)) return name;
    fail("unknown array '" + name + "'");
  }

  std::string next_expr_array() {
    return "expr_arr" + std::to_string(expr_counter_++);
  }

  void emit(Stmt::Node node) { prog_.stmts.push_back({line_, std::move(node)}); }

  void handle(const SSource& n) {
    declare_frame(n.frame, n.schema);
    emit(DataSourceStmt{n.frame, n.schema, n.path, n.format});
  }

  void handle(const SFilter& n) {
    const Schema& in = schema_of(n.in);
    FilterStmt f;
    f.out = n.out;
    f.in = n.in;
    f.pred = resolve_expr(n.pred, n.in);
    f.pred_array = next_expr_array();
    for (const auto& c : in) f.columns.push_back(c.name);
    declare_frame(n.out, in);
    emit(std::move(f));
  }

  void handle(const SJoin& n) {
    const Schema ls = schema_of(n.left);
    const Schema rs = schema_of(n.right);
    if (!schema_find(ls, n.left_key))
      fail("unknown column '" + n.left_key + "' in frame '" + n.left + "'");
    if (!schema_find(rs, n.right_key))
      fail("unknown column '" + n.right_key + "' in frame '" + n.right + "'");
    JoinStmt j;
    j.out = n.out;
    j.left = n.left;
    j.right = n.right;
    j.left_key = n.left_key;
    j.right_key = n.right_key;
    Schema out;
    std::set<std::string> taken;
    for (const auto& c : ls) {
      j.out_cols.push_back({c.name, false, c.name});
      out.push_back(c);
      taken.insert(c.name);
    }
    // right columns minus the duplicated key; clashes get frame-qualified
    for (const auto& c : rs) {
      if (c.name == n.right_key) continue;
      std::string name = c.name;
      if (taken.count(name)) name = n.right + "_" + c.name;
      if (!taken.insert(name).second)
        fail("join output column clash on '" + name + "'");
      j.out_cols.push_back({name, true, c.name});
      out.push_back({name, c.type});
    }
    declare_frame(n.out, std::move(out));
    emit(std::move(j));
  }

  void handle(const SAggregate& n) {
    const Schema& in = schema_of(n.in);
    const SchemaCol* kc = schema_find(in, n.key);
    if (!kc) fail("unknown column '" + n.key + "' in frame '" + n.in + "'");
    AggregateStmt a;
    a.out = n.out;
    a.in = n.in;
    a.key = n.key;
    Schema out;
    out.push_back({n.key, kc->type});
    for (const auto& item : n.items) {
      AggOutput o;
      o.name = item.name;
      o.reducer = item.fn;
      o.expr = resolve_expr(item.expr, n.in);
      o.expr_array = next_expr_array();
      out.push_back({item.name, reducer_output_type(item.fn, type_of(o.expr))});
      a.outputs.push_back(std::move(o));
    }
    declare_frame(n.out, std::move(out));
    emit(std::move(a));
  }

  void handle(const SConcat& n) {
    for (const auto& in : n.ins) schema_of(in);
    ConcatStmt c;
    c.out = n.out;
    c.ins = n.ins;
    for (const auto& col : schema_of(n.ins[0])) c.columns.push_back(col.name);
    declare_frame(n.out, schema_of(n.ins[0]));
    emit(std::move(c));
  }

  void handle(const SCol& n) {
    // projection is a name binding, not a copy
    const Schema& s = schema_of(n.frame);
    if (!schema_find(s, n.column))
      fail("unknown column '" + n.column + "' in frame '" + n.frame + "'");
    if (meta_.has(n.out) || aliases_.count(n.out) || arrays_.count(n.out) ||
        matrices_.count(n.out))
      fail("redefinition of '" + n.out + "'");
    aliases_[n.out] = array_name(n.frame, n.column);
  }

  void handle(const SMap& n) {
    MapExprStmt m;
    m.out = n.out;
    m.expr = resolve_expr(n.expr, "");
    ScalarType t = type_of(m.expr);
    declare_array(n.out, t);
    emit(std::move(m));
  }

  void handle(const SCumsum& n) {
    std::string in = resolve_array_operand(n.in);
    ScalarType t = arrays_.at(in) == ScalarType::Float64 ? ScalarType::Float64
                                                         : ScalarType::Int64;
    declare_array(n.out, t);
    emit(CumsumStmt{n.out, in});
  }

  void handle(const SStencil& n) {
    std::string in = resolve_array_operand(n.in);
    declare_array(n.out, ScalarType::Float64);
    emit(StencilStmt{n.out, in, n.weights, n.divisor});
  }

  void handle(const SAssemble& n) {
    std::vector<std::string> inputs;
    for (const auto& a : n.inputs) inputs.push_back(resolve_array_operand(a));
    if (n.transpose) {
      std::string tmp = "_" + n.out + "_hcat";
      declare_matrix(tmp);
      declare_matrix(n.out);
      emit(HcatStmt{tmp, std::move(inputs)});
      emit(TransposeStmt{n.out, tmp});
    } else {
      declare_matrix(n.out);
      emit(HcatStmt{n.out, std::move(inputs)});
    }
  }

  void handle(const SSet& n) {
    const Schema& s = schema_of(n.frame);
    if (!schema_find(s, n.column))
      fail("unknown column '" + n.column + "' in frame '" + n.frame + "'");
    AssignColumnStmt a;
    a.frame = n.frame;
    a.column = n.column;
    a.expr = resolve_expr(n.expr, n.frame);
    ScalarType t = type_of(a.expr);
    arrays_[array_name(n.frame, n.column)] = t;
    for (auto& c : meta_.frames.at(n.frame))
      if (c.name == n.column) c.type = t;
    emit(std::move(a));
  }

  void handle(const SSink& n) {
    SinkStmt s;
    s.name = n.name;
    s.replicated = n.replicated;
    for (const auto& item : n.items) {
      SinkItem si;
      si.display = item;
      if (meta_.has(item)) {
        for (const auto& c : meta_.frames.at(item))
          si.columns.push_back({c.name, array_name(item, c.name)});
      } else if (matrices_.count(item)) {
        si.is_matrix = true;
        si.matrix = item;
      } else {
        auto al = aliases_.find(item);
        if (al != aliases_.end())
          si.columns.push_back({item, al->second});
        else if (arrays_.count(item))
          si.columns.push_back({item, item});
        else
          fail("unknown sink item '" + item + "'");
      }
      s.items.push_back(std::move(si));
    }
    emit(std::move(s));
  }

  Program prog_;
  FrameMeta meta_;
  std::map<std::string, ScalarType> arrays_;
  std::map<std::string, std::string> aliases_;
  std::set<std::string> matrices_;
  int line_ = 0;
  int expr_counter_ = 1;
};

inline Program desugar(const SurfaceProgram& sp) {
  Desugarer d;
  return d.run(sp);
}

// Fuses adjacent Transpose(Hcat(...)) pairs into a single MatrixAssembly
// node; everything else is left untouched. A lone hcat (or transpose) stays
// unfused.
inline Program match_matrix_assembly(Program p) {
  std::vector<Stmt> out;
  for (size_t i = 0; i < p.stmts.size(); i++) {
    if (i + 1 < p.stmts.size()) {
      const auto* h = stmt_as<HcatStmt>(p.stmts[i]);
      const auto* t = stmt_as<TransposeStmt>(p.stmts[i + 1]);
      if (h && t && t->in == h->out) {
        out.push_back({p.stmts[i].line, MatrixAssemblyStmt{t->out, h->inputs}});
        i++;
        continue;
      }
    }
    out.push_back(std::move(p.stmts[i]));
  }
  p.stmts = std::move(out);
  return p;
}

}  // namespace mf
