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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fuzz_support.hpp"
#include "miniframes/compiler.hpp"
#include "miniframes/liveness.hpp"
#include "miniframes/query_tree.hpp"

using namespace mf;

namespace {

// the motivating example: join customer x order, then filter on amount
const char* kPushdownProgram =
    "customer = source \"customer.hfb\" format hfb schema (id:i64, phone:f64)\n"
    "order = source \"order.hfb\" format hfb schema (customerId:i64, amount:f64)\n"
    "cust_ord = join customer order on id == customerId\n"
    "cust_ord2 = filter cust_ord (amount > 100.0)\n"
    "sink \"out\" (cust_ord2)\n";

Program front(const std::string& text) {
  Program p = match_matrix_assembly(desugar(parse(text)));
  require_ok(typecheck(p));
  require_ok(validate(p));
  return p;
}

std::shared_ptr<DataRepo> pushdown_repo(size_t orders = 64) {
  auto repo = std::make_shared<DataRepo>();
  Table customer;
  std::vector<int64_t> ids;
  std::vector<double> phones;
  for (int64_t i = 0; i < 16; i++) {
    ids.push_back(i);
    phones.push_back(1000.0 + static_cast<double>(i));
  }
  customer.columns.push_back({"id", ColumnVec(ids)});
  customer.columns.push_back({"phone", ColumnVec(phones)});
  repo->preload("customer.hfb", customer);

  std::mt19937_64 rng(99);
  Table order;
  std::vector<int64_t> cid(orders);
  std::vector<double> amount(orders);
  for (size_t i = 0; i < orders; i++) {
    cid[i] = static_cast<int64_t>(rng() % 16);
    amount[i] = static_cast<double>(rng() % 2000) / 4.0;  // [0, 500)
  }
  order.columns.push_back({"customerId", ColumnVec(cid)});
  order.columns.push_back({"amount", ColumnVec(amount)});
  repo->preload("order.hfb", order);
  return repo;
}

int count_kind_before(const Program& p, bool (*pred)(const Stmt&),
                      bool (*anchor)(const Stmt&)) {
  int n = 0;
  for (const auto& s : p.stmts) {
    if (anchor(s)) break;
    if (pred(s)) n++;
  }
  return n;
}

}  // namespace

TEST_CASE("query tree: join feeding a filter") {
  Program p = front(kPushdownProgram);
  QueryTree t = build_query_tree(p);
  REQUIRE(t.nodes.size() == 4);  // two sources, join, filter
  const QueryNode* filt = t.producer("cust_ord2");
  REQUIRE(filt != nullptr);
  REQUIRE(filt->inputs.size() == 1);
  const QueryNode* join = t.producer(filt->inputs[0]);
  REQUIRE(join != nullptr);
  CHECK(join->inputs == std::vector<std::string>{"customer", "order"});
  REQUIRE(t.roots.size() == 1);
  CHECK(t.nodes[t.roots[0]].frame == "cust_ord2");
}

TEST_CASE("query tree: non-relational statements form an empty forest") {
  Program p;
  MapExprStmt m;
  m.out = "b";
  m.expr = col_ref("a");
  p.stmts.push_back({1, std::move(m)});
  QueryTree t = build_query_tree(p);
  CHECK(t.nodes.empty());
  CHECK(t.roots.empty());
}

TEST_CASE("query tree: two independent pipelines make a two-root forest") {
  Program p = front(
      "a = source \"a.hfb\" format hfb schema (k:i64)\n"
      "b = source \"b.hfb\" format hfb schema (k:i64)\n"
      "a2 = filter a (k < 5)\n"
      "b2 = filter b (k < 7)\n"
      "sink \"o\" (a2, b2)\n");
  QueryTree t = build_query_tree(p);
  CHECK(t.roots.size() == 2);
}

TEST_CASE("pushdown rewrites the motivating example") {
  Program p = front(kPushdownProgram);
  PushdownReport report;
  Program q = push_filter_through_join(p, &report);
  CHECK(report.fired == 1);

  // shape: the filter now reads `order` and sits before the join
  bool found_side_filter = false;
  size_t join_at = 0, filter_at = 0;
  for (size_t i = 0; i < q.stmts.size(); i++) {
    if (const auto* f = stmt_as<FilterStmt>(q.stmts[i])) {
      CHECK(f->in == "order");
      CHECK(print_expr(f->pred).find("_order_amount > 100.0") !=
            std::string::npos);
      found_side_filter = true;
      filter_at = i;
    }
    if (const auto* j = stmt_as<JoinStmt>(q.stmts[i])) {
      CHECK(j->left == "customer");
      CHECK(j->out == "cust_ord2");  // join now produces the filtered frame
      join_at = i;
    }
  }
  CHECK(found_side_filter);
  CHECK(filter_at + 1 == join_at);
  // output columns unchanged: id, phone, amount
  const Schema& out = q.meta.schema("cust_ord2");
  REQUIRE(out.size() == 3);
  CHECK(out[0].name == "id");
  CHECK(out[1].name == "phone");
  CHECK(out[2].name == "amount");
}

TEST_CASE("pushdown skips predicates touching both sides") {
  Program p = front(
      "customer = source \"customer.hfb\" format hfb schema (id:i64, phone:f64)\n"
      "order = source \"order.hfb\" format hfb schema (customerId:i64, amount:f64)\n"
      "cust_ord = join customer order on id == customerId\n"
      "cust_ord2 = filter cust_ord (phone == 5.0 and amount > 100.0)\n"
      "sink \"out\" (cust_ord2)\n");
  PushdownReport report;
  push_filter_through_join(p, &report);
  CHECK(report.fired == 0);
}

TEST_CASE("pushdown skips predicates with whole-column reductions") {
  Program p = front(
      "customer = source \"customer.hfb\" format hfb schema (id:i64, phone:f64)\n"
      "order = source \"order.hfb\" format hfb schema (customerId:i64, amount:f64)\n"
      "cust_ord = join customer order on id == customerId\n"
      "cust_ord2 = filter cust_ord (amount > mean(amount))\n"
      "sink \"out\" (cust_ord2)\n");
  PushdownReport report;
  push_filter_through_join(p, &report);
  CHECK(report.fired == 0);
}

TEST_CASE("pushdown blocked by intervening uses and redefinitions") {
  struct Case {
    const char* name;
    const char* between;
  };
  // statements placed between the join and the filter that must veto the move
  const Case cases[] = {
      {"use of join output", "z = col cust_ord amount\nzz = map (z + 1.0)\n"},
      {"redefinition inside join output", "set cust_ord amount (amount * 2.0)\n"},
      {"redefinition of the right input", "set order amount (amount * 2.0)\n"},
      {"redefinition of the left input", "set customer phone (phone * 2.0)\n"},
      {"relational use of join output", "other = filter cust_ord (amount < 50.0)\nsink \"x\" (other)\n"},
      {"sink of join output", "sink \"x\" (cust_ord)\n"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    std::string text =
        "customer = source \"customer.hfb\" format hfb schema (id:i64, phone:f64)\n"
        "order = source \"order.hfb\" format hfb schema (customerId:i64, amount:f64)\n"
        "cust_ord = join customer order on id == customerId\n" +
        std::string(c.between) +
        "cust_ord2 = filter cust_ord (amount > 100.0)\n"
        "sink \"out\" (cust_ord2)\n";
    Program p = front(text);
    PushdownReport report;
    Program q = push_filter_through_join(p, &report);
    CHECK(report.fired == 0);
    // and the oracle agrees nothing changed
    auto repo = pushdown_repo();
    SinkOutputs a = interpret(p, *repo);
    SinkOutputs b = interpret(q, *repo);
    CHECK(compare(a, b, {CompareMode::Ordered, 0.0, 0.0}).equal);
  }
}

TEST_CASE("pushdown preserves oracle semantics and reduces join input") {
  auto repo = pushdown_repo(128);
  Program plain = front(kPushdownProgram);
  Program pushed = push_filter_through_join(plain);

  SinkOutputs a = interpret(plain, *repo);
  SinkOutputs b = interpret(pushed, *repo);
  CHECK(compare(a, b, {CompareMode::Ordered, 0.0, 0.0}).equal);

  DistMap d1 = infer_distributions(plain);
  DistMap d2 = infer_distributions(pushed);
  ExecOptions opt;
  opt.ranks = 3;
  ExecResult r1 = execute(insert_rebalance(plain, d1), d1, *repo, opt);
  ExecResult r2 = execute(insert_rebalance(pushed, d2), d2, *repo, opt);
  CHECK(compare(r1.sinks, r2.sinks, {CompareMode::Multiset, 1e-9, 1e-12})
            .equal);
  CHECK(r2.stats.join_rows_in < r1.stats.join_rows_in);
}

TEST_CASE("pushdown never increases join input cardinality (fuzzed)") {
  std::mt19937_64 rng(21);
  int with_joins = 0;
  for (int i = 0; i < 40 || with_joins < 8; i++) {
    if (i > 200) break;
    auto gp = fuzz::random_program(rng);
    Compiled with = compile(gp.text, {true, true});
    Compiled without = compile(gp.text, {false, true});
    bool has_join = false;
    for (const auto& s : with.optimized.stmts)
      if (stmt_is<JoinStmt>(s)) has_join = true;
    if (has_join) with_joins++;
    for (int ranks : {1, 3}) {
      ExecOptions opt;
      opt.ranks = ranks;
      ExecResult a = execute(with.distributed, with.dist, *gp.repo, opt);
      ExecResult b =
          execute(without.distributed, without.dist, *gp.repo, opt);
      CHECK(a.stats.join_rows_in <= b.stats.join_rows_in);
    }
  }
}

TEST_CASE("prune removes source columns that cannot reach a sink") {
  Program p = front(
      "df = source \"d.hfb\" format hfb schema (id:i64, x:f64, y:f64)\n"
      "df2 = filter df (id < 5)\n"
      "a = col df2 x\n"
      "sink \"out\" (a)\n");
  Program q = prune_dead_code(p);
  const auto* src = stmt_as<DataSourceStmt>(q.stmts[0]);
  REQUIRE(src != nullptr);
  // y never reaches the sink; id is needed by the predicate but not copied
  REQUIRE(src->schema.size() == 2);
  CHECK(src->schema[0].name == "id");
  CHECK(src->schema[1].name == "x");
  const auto* f = stmt_as<FilterStmt>(q.stmts[1]);
  REQUIRE(f != nullptr);
  CHECK(f->columns == std::vector<std::string>{"x"});
}

TEST_CASE("prune keeps programs whose sinks use everything") {
  Program p = front(
      "df = source \"d.hfb\" format hfb schema (id:i64, x:f64)\n"
      "df2 = filter df (id < 5)\n"
      "sink \"out\" (df, df2)\n");
  std::string before = print_ir(p);
  CHECK(print_ir(prune_dead_code(p)) == before);
}

TEST_CASE("prune removes dead pipelines transitively") {
  Program p = front(
      "df = source \"d.hfb\" format hfb schema (id:i64, x:f64)\n"
      "dead = source \"e.hfb\" format hfb schema (k:i64, z:f64)\n"
      "dead2 = filter dead (z < 0.5)\n"
      "dead3 = aggregate dead2 by k (c = sum(z))\n"
      "sink \"out\" (df)\n");
  Program q = prune_dead_code(p);
  CHECK(q.stmts.size() == 2);  // the live source and the sink
  CHECK(!q.meta.has("dead"));
  CHECK(!q.meta.has("dead2"));
  CHECK(!q.meta.has("dead3"));
}

TEST_CASE("liveness interval query equals the brute-force union") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 25; t++) {
    auto gp = fuzz::random_program(rng);
    Compiled c = compile(gp.text);
    const Program& p = c.desugared;
    Liveness live(p);
    if (p.stmts.size() < 3) continue;
    for (int q = 0; q < 10; q++) {
      size_t i = rng() % p.stmts.size();
      size_t j = rng() % p.stmts.size();
      if (i > j) std::swap(i, j);
      std::set<std::string> expect;
      for (size_t k = i + 1; k < j; k++) {
        DefUse du = def_use(p.stmts[k]);
        expect.insert(du.uses.begin(), du.uses.end());
        expect.insert(du.defs.begin(), du.defs.end());
      }
      CHECK(live.interval_refs(i, j) == expect);
    }
  }
}

TEST_CASE("optimizer preserves oracle semantics on fuzzed programs") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 120; i++) {
    auto gp = fuzz::random_program(rng);
    Compiled c = compile(gp.text);
    SinkOutputs a = interpret(c.desugared, *gp.repo);
    SinkOutputs b = interpret(c.optimized, *gp.repo);
    CompareResult r = compare(a, b, {CompareMode::Ordered, 0.0, 0.0});
    if (!r.equal) {
      MESSAGE(gp.text);
      MESSAGE(r.diff);
    }
    CHECK(r.equal);
  }
}

TEST_CASE("pushdown is deterministic") {
  Program p1 = front(kPushdownProgram);
  Program p2 = front(kPushdownProgram);
  CHECK(print_ir(push_filter_through_join(p1)) ==
        print_ir(push_filter_through_join(p2)));
}
