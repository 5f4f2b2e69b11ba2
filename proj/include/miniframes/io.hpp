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

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>

#include "miniframes/printer.hpp"

namespace mf {

// HFB1 binary columnar file:
//   magic "HFB1"
//   u64 column count (little-endian)
//   per column: u64 name length, name bytes, u8 type tag
//               (0=Int64, 1=Float64, 2=Bool), u64 row count,
//               raw little-endian values (Bool one byte each)
// All columns in one file share a row count.

static_assert(std::endian::native == std::endian::little,
              "HFB1 writer assumes a little-endian host");

namespace detail {

inline void put_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

inline uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

inline void write_hfb(const std::string& path, const Table& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Stage::Io, "cannot open '" + path + "' for writing");
  os.write("HFB1", 4);
  detail::put_u64(os, t.columns.size());
  for (const auto& c : t.columns) {
    detail::put_u64(os, c.name.size());
    os.write(c.name.data(), static_cast<std::streamsize>(c.name.size()));
    uint8_t tag = static_cast<uint8_t>(c.values.dtype());
    os.write(reinterpret_cast<const char*>(&tag), 1);
    detail::put_u64(os, c.values.size());
    switch (c.values.dtype()) {
      case ScalarType::Int64:
        os.write(reinterpret_cast<const char*>(c.values.i64().data()),
                 static_cast<std::streamsize>(c.values.size() * 8));
        break;
      case ScalarType::Float64:
        os.write(reinterpret_cast<const char*>(c.values.f64().data()),
                 static_cast<std::streamsize>(c.values.size() * 8));
        break;
      case ScalarType::Bool:
        os.write(reinterpret_cast<const char*>(c.values.b8().data()),
                 static_cast<std::streamsize>(c.values.size()));
        break;
    }
  }
  if (!os) throw Error(Stage::Io, "short write to '" + path + "'");
}

inline Table read_hfb(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Stage::Io, "source not found: '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HFB1", 4) != 0)
    throw Error(Stage::Io, "'" + path + "' is not an HFB1 file (bad magic)");
  uint64_t ncols = detail::get_u64(is);
  Table t;
  uint64_t rows = 0;
  for (uint64_t i = 0; i < ncols; i++) {
    uint64_t namelen = detail::get_u64(is);
    if (!is || namelen > (1u << 20))
      throw Error(Stage::Io, "'" + path + "' is corrupt (column name length)");
    std::string name(namelen, '\0');
    is.read(name.data(), static_cast<std::streamsize>(namelen));
    uint8_t tag = 0;
    is.read(reinterpret_cast<char*>(&tag), 1);
    if (tag > 2)
      throw Error(Stage::Io, "'" + path + "' has an unknown type tag " +
                                 std::to_string(tag));
    uint64_t n = detail::get_u64(is);
    if (i == 0)
      rows = n;
    else if (n != rows)
      throw Error(Stage::Io, "'" + path + "' columns have differing row counts");
    ColumnVec v = ColumnVec::make(static_cast<ScalarType>(tag), n);
    switch (static_cast<ScalarType>(tag)) {
      case ScalarType::Int64:
        is.read(reinterpret_cast<char*>(v.i64().data()),
                static_cast<std::streamsize>(n * 8));
        break;
      case ScalarType::Float64:
        is.read(reinterpret_cast<char*>(v.f64().data()),
                static_cast<std::streamsize>(n * 8));
        break;
      case ScalarType::Bool:
        is.read(reinterpret_cast<char*>(v.b8().data()),
                static_cast<std::streamsize>(n));
        break;
    }
    if (!is) throw Error(Stage::Io, "'" + path + "' is truncated");
    t.columns.push_back({std::move(name), std::move(v)});
  }
  return t;
}

// CSV: header row carries column names; values use shortest round-trip
// decimals for Float64 and 0/1 for Bool. Types come from the program's
// schema clause (or are inferred when reading standalone files).
inline void write_csv(const std::string& path, const Table& t) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(Stage::Io, "cannot open '" + path + "' for writing");
  for (size_t c = 0; c < t.columns.size(); c++) {
    if (c) os << ",";
    os << t.columns[c].name;
  }
  os << "\n";
  size_t rows = t.rows();
  for (size_t r = 0; r < rows; r++) {
    for (size_t c = 0; c < t.columns.size(); c++) {
      if (c) os << ",";
      const ColumnVec& v = t.columns[c].values;
      switch (v.dtype()) {
        case ScalarType::Int64: os << v.i64()[r]; break;
        case ScalarType::Float64: os << format_f64(v.f64()[r]); break;
        case ScalarType::Bool: os << (v.b8()[r] ? 1 : 0); break;
      }
    }
    os << "\n";
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  for (auto& s : out) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    size_t b = s.find_first_not_of(' ');
    if (b != std::string::npos && b > 0) s = s.substr(b);
  }
  return out;
}

inline Scalar parse_cell(const std::string& cell, ScalarType t,
                         const std::string& path, size_t lineno) {
  auto bad = [&]() -> Error {
    return Error(Stage::Io, "'" + path + "' line " + std::to_string(lineno) +
                                ": cannot parse '" + cell + "' as " +
                                type_name(t));
  };
  switch (t) {
    case ScalarType::Int64: {
      int64_t v = 0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw bad();
      return Scalar(v);
    }
    case ScalarType::Float64: {
      double v = 0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw bad();
      return Scalar(v);
    }
    case ScalarType::Bool: {
      if (cell == "1" || cell == "true") return Scalar(true);
      if (cell == "0" || cell == "false") return Scalar(false);
      throw bad();
    }
  }
  throw bad();
}

}  // namespace detail

// Reads a CSV with declared column types; the file may carry extra columns.
inline Table read_csv(const std::string& path, const Schema& schema) {
  std::ifstream is(path);
  if (!is) throw Error(Stage::Io, "source not found: '" + path + "'");
  std::string line;
  if (!std::getline(is, line))
    throw Error(Stage::Io, "'" + path + "' is empty (missing CSV header)");
  std::vector<std::string> header = detail::split_csv_line(line);
  std::vector<int> index(schema.size(), -1);
  for (size_t i = 0; i < schema.size(); i++) {
    for (size_t h = 0; h < header.size(); h++)
      if (header[h] == schema[i].name) index[i] = static_cast<int>(h);
    if (index[i] < 0)
      throw Error(Stage::Io,
                  "'" + path + "' has no column '" + schema[i].name + "'");
  }
  Table t;
  for (const auto& c : schema) t.columns.push_back({c.name, ColumnVec::make(c.type)});
  size_t lineno = 1;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() < header.size())
      throw Error(Stage::Io, "'" + path + "' line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(header.size()) +
                                 " cells");
    for (size_t i = 0; i < schema.size(); i++)
      t.columns[i].values.push_back(detail::parse_cell(
          cells[static_cast<size_t>(index[i])], schema[i].type, path, lineno));
  }
  return t;
}

// Type-inferring CSV read for standalone files (compare subcommand): a column
// is Int64 if every cell parses as an integer, else Float64; true/false cells
// make it Bool.
inline Table read_csv_infer(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Stage::Io, "source not found: '" + path + "'");
  std::string line;
  if (!std::getline(is, line))
    throw Error(Stage::Io, "'" + path + "' is empty (missing CSV header)");
  std::vector<std::string> header = detail::split_csv_line(line);
  std::vector<std::vector<std::string>> cells;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty() || line == "\r") continue;
    cells.push_back(detail::split_csv_line(line));
    if (cells.back().size() != header.size())
      throw Error(Stage::Io, "'" + path + "' line " + std::to_string(lineno) +
                                 ": ragged row");
  }
  Schema schema;
  for (size_t c = 0; c < header.size(); c++) {
    bool all_int = true, all_bool = true;
    for (const auto& row : cells) {
      const std::string& s = row[c];
      if (s != "true" && s != "false") all_bool = false;
      int64_t iv;
      auto res = std::from_chars(s.data(), s.data() + s.size(), iv);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        all_int = false;
    }
    ScalarType t = all_bool  ? ScalarType::Bool
                   : all_int ? ScalarType::Int64
                             : ScalarType::Float64;
    schema.push_back({header[c], t});
  }
  Table t;
  for (size_t c = 0; c < header.size(); c++) {
    ColumnVec v = ColumnVec::make(schema[c].type);
    for (size_t r = 0; r < cells.size(); r++)
      v.push_back(detail::parse_cell(cells[r][c], schema[c].type, path, r + 2));
    t.columns.push_back({header[c], std::move(v)});
  }
  return t;
}

inline Table read_table(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return read_csv_infer(path);
  return read_hfb(path);
}

// One written sink item: a frame, a standalone array, or an assembled matrix
// flattened to feature columns r0..r{k-1} (one file row per sample).
struct SinkFile {
  std::string sink;
  std::string display;
  Table table;
};

using SinkOutputs = std::vector<SinkFile>;

inline Table matrix_to_table(const Matrix& m) {
  Table t;
  for (size_t r = 0; r < m.rows; r++) {
    std::vector<double> col(m.cols);
    for (size_t c = 0; c < m.cols; c++) col[c] = m.at(r, c);
    t.columns.push_back({"r" + std::to_string(r), ColumnVec(std::move(col))});
  }
  return t;
}

// Sink files land in `dir`: <sink>.<ext> for single-item sinks, else
// <sink>_<display>.<ext>.
inline std::string sink_file_name(const SinkOutputs& outs, size_t i,
                                  bool csv) {
  size_t items = 0;
  for (const auto& f : outs)
    if (f.sink == outs[i].sink) items++;
  std::string base = items == 1 ? outs[i].sink
                                : outs[i].sink + "_" + outs[i].display;
  return base + (csv ? ".csv" : ".hfb");
}

inline std::vector<std::string> write_sinks(const SinkOutputs& outs,
                                            const std::string& dir, bool csv) {
  std::vector<std::string> written;
  for (size_t i = 0; i < outs.size(); i++) {
    std::filesystem::path path =
        std::filesystem::path(dir) / sink_file_name(outs, i, csv);
    if (csv)
      write_csv(path.string(), outs[i].table);
    else
      write_hfb(path.string(), outs[i].table);
    written.push_back(path.string());
  }
  return written;
}

// Source-table registry. Tables are loaded (or preloaded in-memory) once by
// the driver before workers start; ranks slice read-only from the cache.
// Node-based storage keeps references stable, and the lock makes concurrent
// engines sharing one repo safe.
class DataRepo {
 public:
  DataRepo() = default;
  explicit DataRepo(std::string root) : root_(std::move(root)) {}

  void preload(const std::string& path, Table t) {
    std::lock_guard<std::mutex> lk(m_);
    cache_[path] = std::move(t);
  }

  const Table& load(const std::string& path, FileFormat format,
                    const Schema& schema) {
    {
      std::lock_guard<std::mutex> lk(m_);
      auto it = cache_.find(path);
      if (it != cache_.end()) return it->second;
    }
    std::string full = resolve(path);
    Table t =
        format == FileFormat::Csv ? read_csv(full, schema) : read_hfb(full);
    std::lock_guard<std::mutex> lk(m_);
    return cache_.emplace(path, std::move(t)).first->second;
  }

  const Table& get(const std::string& path) const {
    std::lock_guard<std::mutex> lk(m_);
    return cache_.at(path);
  }

  std::string resolve(const std::string& path) const {
    if (root_.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(root_) / path).string();
  }

 private:
  std::string root_;
  mutable std::mutex m_;
  std::map<std::string, Table> cache_;
};

}  // namespace mf
