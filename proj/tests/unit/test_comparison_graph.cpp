#include <random>

#include "doctest.h"
#include "kara/comparison_graph.hpp"
#include "oracles.hpp"

using namespace kara;

namespace {
ComparisonGraph abc() { return ComparisonGraph({"a", "b", "c", "d"}); }
}  // namespace

TEST_CASE("single relation closure") {
  auto g = add_comparison(abc(), Relation::lt("a", "b"));
  CHECK(g.closure() == std::vector<Relation>{Relation::lt("a", "b")});
  CHECK(g.less("a", "b"));
  CHECK_FALSE(g.less("b", "a"));
}

TEST_CASE("strict cycle is rejected with the witness chain") {
  auto g = add_comparison(add_comparison(abc(), Relation::lt("a", "b")), Relation::lt("b", "c"));
  try {
    (void)add_comparison(g, Relation::lt("c", "a"));
    FAIL("expected contradiction");
  } catch (const ContradictionError& e) {
    const auto w = e.details().at("witness");
    REQUIRE(w.size() == 2);
    CHECK(w[0].get<Relation>() == Relation::lt("a", "b"));
    CHECK(w[1].get<Relation>() == Relation::lt("b", "c"));
  }
  CHECK(g.asserted().size() == 2);
}

TEST_CASE("equality against strict relation is rejected") {
  auto g = add_comparison(add_comparison(abc(), Relation::lt("a", "b")), Relation::eq("b", "c"));
  CHECK_THROWS_AS(add_comparison(g, Relation::eq("a", "c")), ContradictionError);
  CHECK_THROWS_AS(add_comparison(g, Relation::lt("c", "a")), ContradictionError);
}

TEST_CASE("implied relation is a no-op") {
  auto g = add_comparison(add_comparison(abc(), Relation::lt("a", "b")), Relation::lt("b", "c"));
  auto h = add_comparison(g, Relation::lt("a", "c"));
  CHECK(h.asserted() == g.asserted());
  CHECK(h.closure() == g.closure());
}

TEST_CASE("self comparison and unknown nodes are invalid") {
  CHECK_THROWS_AS(add_comparison(abc(), Relation::lt("a", "a")), InvalidArgument);
  CHECK_THROWS_AS(add_comparison(abc(), Relation::lt("a", "z")), InvalidArgument);
}

TEST_CASE("remove recomputes closure") {
  auto g = add_comparison(add_comparison(abc(), Relation::lt("a", "b")), Relation::lt("b", "c"));
  auto h = remove_comparison(g, Relation::lt("b", "c"));
  CHECK(h.closure() == std::vector<Relation>{Relation::lt("a", "b")});
  CHECK_THROWS_AS(remove_comparison(g, Relation::lt("a", "c")), NotFound);
}

TEST_CASE("infer_closure rules") {
  std::vector<Relation> chain{Relation::lt("a", "b"), Relation::lt("b", "c")};
  auto c = infer_closure(chain);
  CHECK(std::find(c.begin(), c.end(), Relation::lt("a", "c")) != c.end());

  std::vector<Relation> eqs{Relation::eq("a", "b"), Relation::eq("b", "c")};
  c = infer_closure(eqs);
  CHECK(std::find(c.begin(), c.end(), Relation::eq("a", "c")) != c.end());

  CHECK(infer_closure(std::vector<Relation>{}).empty());

  // idempotent
  CHECK(infer_closure(infer_closure(chain)) == infer_closure(chain));
}

TEST_CASE("extract_gt_eq") {
  std::vector<Relation> one{Relation::lt("a", "b")};
  auto r = extract_gt_eq(one);
  CHECK(r.gt == std::vector<std::pair<Id, Id>>{{"b", "a"}});
  CHECK(r.eq.empty());

  std::vector<Relation> eq{Relation::eq("a", "b")};
  r = extract_gt_eq(eq);
  CHECK(r.gt.empty());
  CHECK(r.eq == std::vector<std::pair<Id, Id>>{{"a", "b"}});

  std::vector<Relation> mixed{Relation::lt("a", "b"), Relation::eq("b", "c")};
  r = extract_gt_eq(infer_closure(mixed));
  CHECK(r.gt == std::vector<std::pair<Id, Id>>{{"b", "a"}, {"c", "a"}});
  CHECK(r.eq == std::vector<std::pair<Id, Id>>{{"b", "c"}});
}

TEST_CASE("relation json accepts gt") {
  auto r = json{{"a", "x"}, {"b", "y"}, {"relation", "gt"}}.get<Relation>();
  CHECK(r == Relation::lt("y", "x"));
  r = json{{"a", "y"}, {"b", "x"}, {"relation", "eq"}}.get<Relation>();
  CHECK(r == Relation::eq("x", "y"));
  CHECK(json(Relation::lt("a", "b"))["relation"] == "lt");
}

TEST_CASE("closure adjacency points from greater to lesser") {
  auto g = add_comparison(add_comparison(abc(), Relation::lt("a", "b")), Relation::eq("c", "d"));
  const auto adj = closure_adjacency(g);
  CHECK(adj["b"] == json::array({"a"}));
  CHECK(adj["c"] == json::array({"d"}));
  CHECK(adj["d"] == json::array({"c"}));
  CHECK(adj["a"].empty());
}

TEST_CASE("closure agrees with naive saturation on random inputs") {
  std::mt19937 rng(7);
  int inconsistent = 0;
  for (int i = 0; i < 300; ++i) {
    const auto rels = testing::random_relations(rng, 6);
    const auto oracle = testing::naive_saturation(rels);
    if (!oracle.consistent) {
      ++inconsistent;
      CHECK_THROWS_AS(infer_closure(rels), ContradictionError);
      continue;
    }
    CHECK(testing::as_facts(infer_closure(rels)) == oracle.facts);
  }
  CHECK(inconsistent > 0);
}

TEST_CASE("incremental insertion matches batch closure") {
  std::mt19937 rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto rels = testing::random_relations(rng, 6);
    std::set<Id> nodes;
    for (const auto& r : rels) nodes.insert({r.a, r.b});
    ComparisonGraph g(nodes);
    std::vector<Relation> kept;
    for (const auto& r : rels) {
      try {
        g = add_comparison(g, r);
        kept.push_back(r);
      } catch (const ContradictionError& e) {
        // witness relations must all be asserted ones
        for (const auto& w : e.details().at("witness"))
          CHECK(std::find(g.asserted().begin(), g.asserted().end(), w.get<Relation>()) != g.asserted().end());
      }
    }
    CHECK(g.closure() == infer_closure(kept));
  }
}
