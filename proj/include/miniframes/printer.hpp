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

#include <charconv>
#include <sstream>
#include <string>

#include "miniframes/parser.hpp"

namespace mf {

// Shortest decimal that round-trips the exact double.
inline std::string format_f64(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  // keep float literals lexically distinct from integers
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

inline std::string format_scalar(const Scalar& s) {
  switch (s.index()) {
    case 0: return std::to_string(std::get<int64_t>(s));
    case 1: return format_f64(std::get<double>(s));
    default: return std::get<bool>(s) ? "true" : "false";
  }
}

namespace detail {

inline int precedence(BinOpKind op) {
  if (op == BinOpKind::Or) return 1;
  if (op == BinOpKind::And) return 2;
  if (is_comparison(op)) return 3;
  if (op == BinOpKind::Add || op == BinOpKind::Sub) return 4;
  return 5;  // Mul/Div
}

inline void print_expr(std::ostream& os, const ExprPtr& e, int parent_prec) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expr::ColumnRef>) {
          if (!n.frame.empty()) os << n.frame << ".";
          os << n.name;
        } else if constexpr (std::is_same_v<T, Expr::Const>) {
          os << format_scalar(n.value);
        } else if constexpr (std::is_same_v<T, Expr::BinOp>) {
          int prec = precedence(n.op);
          bool parens = prec <= parent_prec;
          if (parens) os << "(";
          print_expr(os, n.lhs, prec - 1);
          os << " " << binop_token(n.op) << " ";
          print_expr(os, n.rhs, prec);
          if (parens) os << ")";
        } else if constexpr (std::is_same_v<T, Expr::UnOp>) {
          os << (n.op == UnOpKind::Neg ? "-" : "not ");
          print_expr(os, n.operand, 6);
        } else if constexpr (std::is_same_v<T, Expr::Elementwise>) {
          os << mapfn_name(n.fn) << "(";
          print_expr(os, n.operand, 0);
          os << ")";
        } else if constexpr (std::is_same_v<T, Expr::ScalarReduce>) {
          os << reducefn_name(n.fn) << "(";
          print_expr(os, n.operand, 0);
          os << ")";
        }
      },
      e->node);
}

}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
  std::ostringstream os;
  detail::print_expr(os, e, 0);
  return os.str();
}

inline std::string print_schema(const Schema& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); i++) {
    if (i) out += ", ";
    out += s[i].name;
    out += ":";
    out += type_name(s[i].type);
  }
  return out;
}

// Canonical surface form; parse(print_surface(p)) reproduces p.
inline std::string print_surface(const SurfaceProgram& p) {
  std::ostringstream os;
  for (const auto& s : p.stmts) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SSource>) {
            os << n.frame << " = source \"" << n.path << "\" format "
               << (n.format == FileFormat::Csv ? "csv" : "hfb") << " schema ("
               << print_schema(n.schema) << ")";
          } else if constexpr (std::is_same_v<T, SFilter>) {
            os << n.out << " = filter " << n.in << " (" << print_expr(n.pred)
               << ")";
          } else if constexpr (std::is_same_v<T, SJoin>) {
            os << n.out << " = join " << n.left << " " << n.right << " on "
               << n.left_key << " == " << n.right_key;
          } else if constexpr (std::is_same_v<T, SAggregate>) {
            os << n.out << " = aggregate " << n.in << " by " << n.key << " (";
            for (size_t i = 0; i < n.items.size(); i++) {
              if (i) os << ", ";
              os << n.items[i].name << " = " << reducefn_name(n.items[i].fn)
                 << "(" << print_expr(n.items[i].expr) << ")";
            }
            os << ")";
          } else if constexpr (std::is_same_v<T, SConcat>) {
            os << n.out << " = concat";
            for (const auto& in : n.ins) os << " " << in;
          } else if constexpr (std::is_same_v<T, SCol>) {
            os << n.out << " = col " << n.frame << " " << n.column;
          } else if constexpr (std::is_same_v<T, SMap>) {
            os << n.out << " = map (" << print_expr(n.expr) << ")";
          } else if constexpr (std::is_same_v<T, SCumsum>) {
            os << n.out << " = cumsum " << n.in;
          } else if constexpr (std::is_same_v<T, SStencil>) {
            os << n.out << " = stencil " << n.in << " weights [";
            for (size_t i = 0; i < n.weights.size(); i++) {
              if (i) os << ", ";
              os << format_f64(n.weights[i]);
            }
            os << "] div " << format_f64(n.divisor);
          } else if constexpr (std::is_same_v<T, SAssemble>) {
            os << n.out << " = assemble " << (n.transpose ? "transpose " : "")
               << "hcat (";
            for (size_t i = 0; i < n.inputs.size(); i++) {
              if (i) os << ", ";
              os << n.inputs[i];
            }
            os << ")";
          } else if constexpr (std::is_same_v<T, SSet>) {
            os << "set " << n.frame << " " << n.column << " ("
               << print_expr(n.expr) << ")";
          } else if constexpr (std::is_same_v<T, SSink>) {
            os << "sink \"" << n.name << "\""
               << (n.replicated ? " replicated" : "") << " (";
            for (size_t i = 0; i < n.items.size(); i++) {
              if (i) os << ", ";
              os << n.items[i];
            }
            os << ")";
          }
        },
        s.node);
    os << "\n";
  }
  return os.str();
}

// Canonical dump of the desugared/optimized IR; golden-file friendly.
inline std::string print_ir(const Program& p) {
  std::ostringstream os;
  for (const auto& [frame, schema] : p.meta.frames)
    os << "meta " << frame << " = (" << print_schema(schema) << ")\n";
  for (size_t i = 0; i < p.stmts.size(); i++) {
    os << i << ": ";
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, DataSourceStmt>) {
            os << n.frame << " = source \"" << n.path << "\" format "
               << (n.format == FileFormat::Csv ? "csv" : "hfb") << " schema ("
               << print_schema(n.schema) << ")";
          } else if constexpr (std::is_same_v<T, FilterStmt>) {
            os << n.out << " = filter " << n.in << " [" << n.pred_array
               << " = " << print_expr(n.pred) << "]";
          } else if constexpr (std::is_same_v<T, JoinStmt>) {
            os << n.out << " = join " << n.left << " " << n.right << " on "
               << array_name(n.left, n.left_key) << " == "
               << array_name(n.right, n.right_key);
          } else if constexpr (std::is_same_v<T, AggregateStmt>) {
            os << n.out << " = aggregate " << n.in << " by "
               << array_name(n.in, n.key) << " (";
            for (size_t k = 0; k < n.outputs.size(); k++) {
              const auto& o = n.outputs[k];
              if (k) os << ", ";
              os << o.name << " = " << reducefn_name(o.reducer) << "["
                 << o.expr_array << " = " << print_expr(o.expr) << "]";
            }
            os << ")";
          } else if constexpr (std::is_same_v<T, ConcatStmt>) {
            os << n.out << " = concat";
            for (const auto& in : n.ins) os << " " << in;
          } else if constexpr (std::is_same_v<T, AssignColumnStmt>) {
            os << "set " << array_name(n.frame, n.column) << " = "
               << print_expr(n.expr);
          } else if constexpr (std::is_same_v<T, MapExprStmt>) {
            os << n.out << " = map " << print_expr(n.expr);
          } else if constexpr (std::is_same_v<T, CumsumStmt>) {
            os << n.out << " = cumsum " << n.in;
          } else if constexpr (std::is_same_v<T, StencilStmt>) {
            os << n.out << " = stencil " << n.in << " weights [";
            for (size_t k = 0; k < n.weights.size(); k++) {
              if (k) os << ", ";
              os << format_f64(n.weights[k]);
            }
            os << "] div " << format_f64(n.divisor);
          } else if constexpr (std::is_same_v<T, HcatStmt>) {
            os << n.out << " = hcat (";
            for (size_t k = 0; k < n.inputs.size(); k++) {
              if (k) os << ", ";
              os << n.inputs[k];
            }
            os << ")";
          } else if constexpr (std::is_same_v<T, TransposeStmt>) {
            os << n.out << " = transpose " << n.in;
          } else if constexpr (std::is_same_v<T, MatrixAssemblyStmt>) {
            os << n.out << " = matrix_assembly (";
            for (size_t k = 0; k < n.inputs.size(); k++) {
              if (k) os << ", ";
              os << n.inputs[k];
            }
            os << ")";
          } else if constexpr (std::is_same_v<T, RebalanceStmt>) {
            os << "rebalance " << n.array;
          } else if constexpr (std::is_same_v<T, SinkStmt>) {
            os << "sink \"" << n.name << "\""
               << (n.replicated ? " replicated" : "") << " (";
            for (size_t k = 0; k < n.items.size(); k++) {
              const auto& item = n.items[k];
              if (k) os << ", ";
              os << item.display << ": ";
              if (item.is_matrix) {
                os << item.matrix;
              } else {
                os << "[";
                for (size_t c = 0; c < item.columns.size(); c++) {
                  if (c) os << ", ";
                  os << item.columns[c].display << "=" << item.columns[c].array;
                }
                os << "]";
              }
            }
            os << ")";
          }
        },
        p.stmts[i].node);
    os << "\n";
  }
  return os.str();
}

}  // namespace mf
