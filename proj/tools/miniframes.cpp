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

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "miniframes/bench.hpp"
#include "miniframes/compiler.hpp"
#include "miniframes/datagen.hpp"
#include "miniframes/execute.hpp"
#include "miniframes/oracle.hpp"

namespace {

// Exit codes, one per failure class (documented in the README):
//   0 ok, 1 compare found differences, 2 data/file errors, 3 parse,
//   4 desugar, 5 typecheck, 6 validate, 7 execution, 8 compiler-internal,
//   64 command-line usage.
int exit_code_for(mf::Stage stage) {
  switch (stage) {
    case mf::Stage::Io: return 2;
    case mf::Stage::Parse: return 3;
    case mf::Stage::Desugar: return 4;
    case mf::Stage::Typecheck: return 5;
    case mf::Stage::Validate: return 6;
    case mf::Stage::Execute: return 7;
    case mf::Stage::Optimize:
    case mf::Stage::Distribute: return 8;
    case mf::Stage::Cli: return 64;
  }
  return 8;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mf::Error(mf::Stage::Io, "source not found: '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

mf::Schema parse_schema_arg(const std::string& text) {
  mf::Schema schema;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    std::string item = text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw mf::Error(mf::Stage::Cli,
                      "schema items must be name:type, got '" + item + "'");
    std::string name = item.substr(0, colon);
    std::string type = item.substr(colon + 1);
    auto strip = [](std::string& s) {
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      while (!s.empty() && s.back() == ' ') s.pop_back();
    };
    strip(name);
    strip(type);
    mf::ScalarType t;
    if (type == "i64")
      t = mf::ScalarType::Int64;
    else if (type == "f64")
      t = mf::ScalarType::Float64;
    else if (type == "bool")
      t = mf::ScalarType::Bool;
    else
      throw mf::Error(mf::Stage::Cli, "unknown type '" + type + "'");
    schema.push_back({name, t});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (schema.empty()) throw mf::Error(mf::Stage::Cli, "empty schema");
  return schema;
}

int default_ranks() {
  if (const char* env = std::getenv("MINIFRAMES_RANKS")) {
    int r = std::atoi(env);
    if (r >= 1) return r;
  }
  return 1;
}

struct RunArgs {
  std::string program;
  std::string data_dir = ".";
  std::string out_dir = ".";
  int ranks = 0;  // 0: env/default
  bool oracle = false;
  bool no_pushdown = false;
  bool no_prune = false;
  bool csv = false;
  bool stats = false;
  bool dump_dist = false;
  std::vector<std::string> dump_ir;
};

int cmd_run(const RunArgs& a) {
  std::filesystem::create_directories(a.out_dir);
  mf::CompileOptions copt;
  copt.pushdown = !a.no_pushdown;
  copt.prune = !a.no_prune;
  auto t0 = std::chrono::steady_clock::now();
  mf::Compiled c = mf::compile(read_file(a.program), copt);
  auto t1 = std::chrono::steady_clock::now();

  for (const auto& stage : a.dump_ir) {
    if (stage == "parsed")
      std::cout << mf::print_surface(c.surface);
    else if (stage == "desugared")
      std::cout << mf::print_ir(c.desugared);
    else if (stage == "optimized")
      std::cout << mf::print_ir(c.optimized);
    else if (stage == "distributed")
      std::cout << mf::print_ir(c.distributed);
    else
      throw mf::Error(mf::Stage::Cli, "unknown dump stage '" + stage +
                                          "' (parsed, desugared, optimized, "
                                          "distributed)");
  }
  if (a.dump_dist) std::cout << mf::dump_dist(c.distributed, c.dist);

  mf::DataRepo repo(a.data_dir);
  mf::SinkOutputs sinks;
  mf::ExecStats stats;
  if (a.oracle) {
    sinks = mf::interpret(c.optimized, repo);
  } else {
    mf::ExecOptions eopt;
    eopt.ranks = a.ranks > 0 ? a.ranks : default_ranks();
    mf::ExecResult res = mf::execute(c.distributed, c.dist, repo, eopt);
    sinks = std::move(res.sinks);
    stats = res.stats;
  }
  auto files = mf::write_sinks(sinks, a.out_dir, a.csv);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  if (a.stats) {
    double compile_s = std::chrono::duration<double>(t1 - t0).count();
    std::cout << "stats compile_s=" << compile_s
              << " pushdowns=" << c.pushdown_report.fired
              << " join_rows_in=" << stats.join_rows_in
              << " shuffle_rows=" << stats.shuffle_rows
              << " rebalance_rows_moved=" << stats.rebalance_rows_moved
              << "\n";
  }
  return 0;
}

struct GenArgs {
  std::string out;
  std::string schema;
  std::string name = "table";
  uint64_t rows = 0;
  int64_t cardinality = 100;
  uint64_t seed = 42;
  bool csv = false;
};

int cmd_gen(const GenArgs& a) {
  mf::Schema schema = parse_schema_arg(a.schema);
  mf::Table t =
      mf::generate_table(a.name, schema, a.rows, a.cardinality, a.seed);
  if (a.csv)
    mf::write_csv(a.out, t);
  else
    mf::write_hfb(a.out, t);
  std::cout << "wrote " << a.out << " (" << a.rows << " rows)\n";
  return 0;
}

struct BenchArgs {
  std::string program;
  std::vector<uint64_t> rows_list;
  std::vector<int> ranks_list;
  int reps = 3;
  int64_t cardinality = 0;  // 0: rows/10
  uint64_t seed = 42;
};

int cmd_bench(const BenchArgs& a) {
  mf::BenchResult res =
      mf::run_bench(read_file(a.program), a.rows_list, a.ranks_list, a.reps,
                    a.cardinality, a.seed);
  std::cout << "bench program=" << a.program << " compile_s=" << res.compile_s
            << "\n";
  for (const auto& cell : res.cells)
    std::cout << "bench rows=" << cell.rows << " ranks=" << cell.ranks
              << " reps=" << cell.reps << " min_s=" << cell.min_s
              << " median_s=" << cell.median_s << "\n";
  return 0;
}

struct CompareArgs {
  std::string a, b;
  std::string mode = "multiset";
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
};

int cmd_compare(const CompareArgs& args) {
  mf::Table ta = mf::read_table(args.a);
  mf::Table tb = mf::read_table(args.b);
  mf::CompareOptions opt;
  opt.mode = args.mode == "ordered" ? mf::CompareMode::Ordered
                                    : mf::CompareMode::Multiset;
  opt.rel_tol = args.rel_tol;
  opt.abs_tol = args.abs_tol;
  mf::CompareResult r =
      mf::compare_tables(args.a + " vs " + args.b, ta, tb, opt);
  if (r.equal) {
    std::cout << "equal\n";
    return 0;
  }
  std::cout << "diff: " << r.diff << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miniframes: data-frame DSL compiler and SPMD runtime"};
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "compile and run a program");
  run_cmd->add_option("program", run.program, "program file")->required();
  run_cmd->add_option("--data", run.data_dir, "data directory for sources");
  run_cmd->add_option("--out", run.out_dir, "output directory for sinks");
  run_cmd->add_option("--ranks", run.ranks,
                      "worker count (default: MINIFRAMES_RANKS or 1)");
  run_cmd->add_flag("--oracle", run.oracle,
                    "run the sequential reference interpreter");
  run_cmd->add_flag("--no-pushdown", run.no_pushdown,
                    "disable push-predicate-through-join");
  run_cmd->add_flag("--no-prune", run.no_prune, "disable dead code elimination");
  run_cmd->add_flag("--csv", run.csv, "write sinks as CSV instead of HFB1");
  run_cmd->add_flag("--stats", run.stats, "print execution statistics");
  run_cmd->add_flag("--dump-dist", run.dump_dist,
                    "print array distributions and rebalance points");
  run_cmd->add_option("--dump-ir", run.dump_ir,
                      "print IR stages (parsed, desugared, optimized, "
                      "distributed)")
      ->delimiter(',');

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate uniform random data");
  gen_cmd->add_option("out", gen.out, "output file")->required();
  gen_cmd->add_option("--schema", gen.schema, "e.g. id:i64,x:f64")->required();
  gen_cmd->add_option("--rows", gen.rows, "row count")->required();
  gen_cmd->add_option("--cardinality", gen.cardinality,
                      "Int64 keys are uniform over [0, cardinality)");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--name", gen.name, "table name (informational)");
  gen_cmd->add_flag("--csv", gen.csv, "write CSV instead of HFB1");

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "time a program over generated data");
  bench_cmd->add_option("program", bench.program, "program file")->required();
  bench_cmd->add_option("--rows", bench.rows_list, "row counts")
      ->required()
      ->delimiter(',');
  bench_cmd->add_option("--ranks", bench.ranks_list, "rank counts")
      ->required()
      ->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "repetitions per cell");
  bench_cmd->add_option("--cardinality", bench.cardinality,
                        "key cardinality (default rows/10)");
  bench_cmd->add_option("--seed", bench.seed, "RNG seed");

  CompareArgs cmp;
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "compare two sink files");
  cmp_cmd->add_option("a", cmp.a, "first file")->required();
  cmp_cmd->add_option("b", cmp.b, "second file")->required();
  cmp_cmd->add_option("--mode", cmp.mode, "ordered or multiset");
  cmp_cmd->add_option("--rel-tol", cmp.rel_tol, "relative tolerance");
  cmp_cmd->add_option("--abs-tol", cmp.abs_tol, "absolute tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*gen_cmd) return cmd_gen(gen);
    if (*bench_cmd) return cmd_bench(bench);
    if (*cmp_cmd) return cmd_compare(cmp);
  } catch (const mf::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.stage());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 8;
  }
  return 64;
}
