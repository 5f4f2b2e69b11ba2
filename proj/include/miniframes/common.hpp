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
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mf {

enum class ScalarType : uint8_t { Int64 = 0, Float64 = 1, Bool = 2 };

inline const char* type_name(ScalarType t) {
  switch (t) {
    case ScalarType::Int64: return "i64";
    case ScalarType::Float64: return "f64";
    case ScalarType::Bool: return "bool";
  }
  return "?";
}

using Scalar = std::variant<int64_t, double, bool>;

inline ScalarType scalar_type(const Scalar& s) {
  return static_cast<ScalarType>(s.index());
}

inline double scalar_f64(const Scalar& s) {
  switch (s.index()) {
    case 0: return static_cast<double>(std::get<int64_t>(s));
    case 1: return std::get<double>(s);
    default: return std::get<bool>(s) ? 1.0 : 0.0;
  }
}

inline int64_t scalar_i64(const Scalar& s) {
  switch (s.index()) {
    case 0: return std::get<int64_t>(s);
    case 1: return static_cast<int64_t>(std::get<double>(s));
    default: return std::get<bool>(s) ? 1 : 0;
  }
}

// Pipeline stage, used for diagnostics and CLI exit codes.
enum class Stage {
  Cli,
  Io,
  Parse,
  Desugar,
  Typecheck,
  Validate,
  Optimize,
  Distribute,
  Execute,
};

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Cli: return "cli";
    case Stage::Io: return "io";
    case Stage::Parse: return "parse";
    case Stage::Desugar: return "desugar";
    case Stage::Typecheck: return "typecheck";
    case Stage::Validate: return "validate";
    case Stage::Optimize: return "optimize";
    case Stage::Distribute: return "distribute";
    case Stage::Execute: return "execute";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, std::string msg, int line = 0)
      : std::runtime_error(format(stage, msg, line)),
        stage_(stage),
        line_(line),
        msg_(std::move(msg)) {}

  Stage stage() const { return stage_; }
  int line() const { return line_; }
  const std::string& message() const { return msg_; }

 private:
  static std::string format(Stage stage, const std::string& msg, int line) {
    std::string out = stage_name(stage);
    out += " error";
    if (line > 0) {
      out += " (line ";
      out += std::to_string(line);
      out += ")";
    }
    out += ": ";
    out += msg;
    return out;
  }

  Stage stage_;
  int line_;
  std::string msg_;
};

// A typed homogeneous value vector; one per data-frame column or standalone
// array. Bool is stored as one byte per element.
class ColumnVec {
 public:
  using Storage = std::variant<std::vector<int64_t>, std::vector<double>,
                               std::vector<uint8_t>>;

  ColumnVec() : data_(std::vector<int64_t>{}) {}
  explicit ColumnVec(std::vector<int64_t> v) : data_(std::move(v)) {}
  explicit ColumnVec(std::vector<double> v) : data_(std::move(v)) {}
  explicit ColumnVec(std::vector<uint8_t> v) : data_(std::move(v)) {}

  static ColumnVec make(ScalarType t, size_t n = 0) {
    switch (t) {
      case ScalarType::Int64: return ColumnVec(std::vector<int64_t>(n));
      case ScalarType::Float64: return ColumnVec(std::vector<double>(n));
      case ScalarType::Bool: return ColumnVec(std::vector<uint8_t>(n));
    }
    return ColumnVec();
  }

  ScalarType dtype() const { return static_cast<ScalarType>(data_.index()); }

  size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data_);
  }

  bool empty() const { return size() == 0; }

  Scalar get(size_t i) const {
    switch (data_.index()) {
      case 0: return Scalar(std::get<0>(data_)[i]);
      case 1: return Scalar(std::get<1>(data_)[i]);
      default: return Scalar(std::get<2>(data_)[i] != 0);
    }
  }

  void push_back(const Scalar& s) {
    switch (data_.index()) {
      case 0: std::get<0>(data_).push_back(scalar_i64(s)); break;
      case 1: std::get<1>(data_).push_back(scalar_f64(s)); break;
      default:
        std::get<2>(data_).push_back(scalar_i64(s) != 0 ? 1 : 0);
        break;
    }
  }

  void push_from(const ColumnVec& src, size_t i) {
    switch (data_.index()) {
      case 0: std::get<0>(data_).push_back(std::get<0>(src.data_)[i]); break;
      case 1: std::get<1>(data_).push_back(std::get<1>(src.data_)[i]); break;
      default: std::get<2>(data_).push_back(std::get<2>(src.data_)[i]); break;
    }
  }

  ColumnVec slice(size_t start, size_t len) const {
    ColumnVec out = make(dtype());
    std::visit(
        [&](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          V part(v.begin() + start, v.begin() + start + len);
          out.data_ = std::move(part);
        },
        data_);
    return out;
  }

  void append(const ColumnVec& other) {
    if (other.dtype() != dtype())
      throw Error(Stage::Execute, "column append: dtype mismatch");
    std::visit(
        [&](auto& v) {
          using V = std::decay_t<decltype(v)>;
          const V& o = std::get<V>(other.data_);
          v.insert(v.end(), o.begin(), o.end());
        },
        data_);
  }

  const std::vector<int64_t>& i64() const { return std::get<0>(data_); }
  const std::vector<double>& f64() const { return std::get<1>(data_); }
  const std::vector<uint8_t>& b8() const { return std::get<2>(data_); }
  std::vector<int64_t>& i64() { return std::get<0>(data_); }
  std::vector<double>& f64() { return std::get<1>(data_); }
  std::vector<uint8_t>& b8() { return std::get<2>(data_); }

  bool operator==(const ColumnVec& other) const { return data_ == other.data_; }

 private:
  Storage data_;
};

// Row-major matrix of Float64; the training-matrix value produced by
// assemble statements.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  double at(size_t r, size_t c) const { return values[r * cols + c]; }
  double& at(size_t r, size_t c) { return values[r * cols + c]; }
  bool operator==(const Matrix& o) const = default;
};

inline double value_f64(const ColumnVec& v, size_t i) {
  switch (v.dtype()) {
    case ScalarType::Int64: return static_cast<double>(v.i64()[i]);
    case ScalarType::Float64: return v.f64()[i];
    case ScalarType::Bool: return v.b8()[i] ? 1.0 : 0.0;
  }
  return 0.0;
}

struct Column {
  std::string name;
  ColumnVec values;
};

struct Table {
  std::string name;
  std::vector<Column> columns;

  size_t rows() const { return columns.empty() ? 0 : columns[0].values.size(); }

  const Column* find(const std::string& col) const {
    for (const auto& c : columns)
      if (c.name == col) return &c;
    return nullptr;
  }
};

}  // namespace mf
