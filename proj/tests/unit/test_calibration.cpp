#include <random>

#include "doctest.h"
#include "kara/calibration.hpp"
#include "oracles.hpp"

using namespace kara;

namespace {
CalibrationProblem two(double t = 0.1) {
  CalibrationProblem p;
  p.ids = {"a", "b"};
  p.reference = {{"a", 0.5}, {"b", 0.5}};
  p.gt = {{"a", "b"}};
  p.t = t;
  return p;
}

CalibrationProblem chain(std::size_t len, double t) {
  CalibrationProblem p;
  for (std::size_t i = 0; i <= len; ++i) {
    const Id id = "c" + std::to_string(100 + i);
    p.ids.push_back(id);
    p.reference[id] = 0.5;
    if (i > 0) p.gt.push_back({id, p.ids[i - 1]});
  }
  p.t = t;
  return p;
}
}  // namespace

TEST_CASE("standard form dimensions") {
  auto p = two();
  p.ids.push_back("c");
  p.reference["c"] = 0.2;
  p.eq = {{"b", "c"}};
  const auto lp = to_standard_form(p);
  CHECK(lp.variables.size() == 9);
  CHECK(lp.rows.size() == 3 + 1 + 1 + 3);
}

TEST_CASE("worked instance") {
  const auto s = calibrate(two());
  CHECK(s.objective == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.scores.at("a") == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(s.scores.at("b") == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(satisfies_constraints(two(), s.scores));
}

TEST_CASE("no comparisons keeps the reference") {
  CalibrationProblem p;
  p.ids = {"a", "b", "c"};
  p.reference = {{"a", 0.1}, {"b", 0.7}, {"c", 0.7}};
  const auto s = calibrate(p);
  CHECK(s.objective == 0.0);
  CHECK(s.scores == p.reference);
}

TEST_CASE("eleven strict steps do not fit at t=0.1") {
  auto p = chain(11, 0.1);
  try {
    (void)calibrate(p);
    FAIL("expected infeasible chain");
  } catch (const InfeasibleComparisonChain& e) {
    CHECK(e.details().at("chain").at("length") == 11);
    CHECK(e.details().at("chain").at("path").size() == 12);
  }
  // ten steps fit exactly
  const auto s = calibrate(chain(10, 0.1));
  CHECK(satisfies_constraints(chain(10, 0.1), s.scores));
}

TEST_CASE("longest strict chain") {
  std::vector<std::pair<Id, Id>> gt{{"a", "b"}, {"b", "c"}};
  auto c = longest_strict_chain(gt, {});
  CHECK(c.length == 2);
  CHECK(c.path == std::vector<Id>{"a", "b", "c"});

  std::vector<std::pair<Id, Id>> gt2{{"a", "b"}, {"c", "d"}};
  std::vector<std::pair<Id, Id>> eq{{"b", "c"}};
  CHECK(longest_strict_chain(gt2, eq).length == 2);

  CHECK(longest_strict_chain({}, {}).length == 0);

  std::vector<std::pair<Id, Id>> cyc{{"a", "b"}, {"b", "a"}};
  CHECK_THROWS_AS(longest_strict_chain(cyc, {}), MalformedProblem);
}

TEST_CASE("malformed problems") {
  auto p = two();
  p.reference["a"] = 1.5;
  CHECK_THROWS_AS(calibrate(p), MalformedProblem);
  p = two();
  p.t = 0.0;
  CHECK_THROWS_AS(calibrate(p), MalformedProblem);
  p = two();
  p.gt.push_back({"a", "zz"});
  CHECK_THROWS_AS(calibrate(p), MalformedProblem);
}

TEST_CASE("equality pulls scores together") {
  CalibrationProblem p;
  p.ids = {"a", "b"};
  p.reference = {{"a", 0.2}, {"b", 0.6}};
  p.eq = {{"a", "b"}};
  const auto s = calibrate(p);
  CHECK(s.objective == doctest::Approx(0.4));
  CHECK(s.scores.at("a") == doctest::Approx(s.scores.at("b")));
  // the squared tie-break picks the midpoint
  CHECK(s.scores.at("a") == doctest::Approx(0.4));
}

TEST_CASE("bounds bind near the edges") {
  CalibrationProblem p;
  p.ids = {"a", "b"};
  p.reference = {{"a", 1.0}, {"b", 1.0}};
  p.gt = {{"a", "b"}};
  p.t = 0.2;
  const auto s = calibrate(p);
  CHECK(s.objective == doctest::Approx(0.2));
  CHECK(s.scores.at("a") == doctest::Approx(1.0));
  CHECK(s.scores.at("b") == doctest::Approx(0.8));
}

TEST_CASE("calibration matches the grid optimum on random problems") {
  std::mt19937 rng(3);
  for (int i = 0; i < 60; ++i) {
    const auto p = testing::random_problem(rng, 3);
    const auto grid = testing::grid_calibration_min(p);
    REQUIRE(grid.feasible);
    const auto s = calibrate(p);
    CHECK(satisfies_constraints(p, s.scores));
    CHECK(s.objective <= grid.objective + 1e-9);
    CHECK(s.objective >= grid.objective - 2.0 * p.ids.size() * 0.001 - 1e-9);
    CHECK(total_absolute_deviation(p, s.scores) == doctest::Approx(s.objective));
  }
}

TEST_CASE("problem json round trip") {
  auto p = two();
  p.eq = {};
  json j = p;
  const auto back = j.get<CalibrationProblem>();
  CHECK(back.ids == p.ids);
  CHECK(back.reference == p.reference);
  CHECK(back.gt == p.gt);
  CHECK(back.t == p.t);
  const json scale = calibrate(p);
  CHECK(scale["status"] == "optimal");
  CHECK(scale["kind"] == "reference");
}
