#include <array>

#include "doctest.h"
#include "fixtures.hpp"
#include "kara/core.hpp"

using namespace kara;

TEST_CASE("fully answered row A validates cleanly") {
  const auto q = testing::case_study_questionnaire();
  const auto rows = testing::case_study_rows();
  CHECK(rows.at("A").answers.size() == 7);
  CHECK(validate_characterization(rows.at("A"), q).empty());
}

TEST_CASE("partial and empty answer maps are valid") {
  const auto q = testing::case_study_questionnaire();
  Characterization c{"x", "p", q.risk_factor_id, {}, Status::draft};
  CHECK(validate_characterization(c, q).empty());
  CHECK(validate_characterization(testing::case_study_rows().at("B"), q).empty());
}

TEST_CASE("unknown option and unknown question are reported") {
  const auto q = testing::case_study_questionnaire();
  Characterization c{"x", "p", q.risk_factor_id, {{"visual_quality", "superb"}}, Status::draft};
  auto report = validate_characterization(c, q);
  REQUIRE(report.size() == 1);
  CHECK(report[0].question_id == "visual_quality");
  CHECK(report[0].option_id == "superb");

  c.answers = {{"no_such_question", "yes"}};
  report = validate_characterization(c, q);
  REQUIRE(report.size() == 1);
  CHECK(report[0].question_id == "no_such_question");
}

TEST_CASE("questionnaire structure checks") {
  auto q = testing::case_study_questionnaire();
  CHECK(validate_questionnaire(q).empty());
  CHECK(q.width() == 20);
  q.questions[0].options.pop_back();
  CHECK_FALSE(validate_questionnaire(q).empty());
  q = testing::case_study_questionnaire();
  q.questions.push_back(q.questions[0]);
  CHECK_FALSE(validate_questionnaire(q).empty());
}

TEST_CASE("layout id depends on question order") {
  auto q = testing::case_study_questionnaire();
  const auto before = q.layout_id();
  CHECK(before == testing::case_study_questionnaire().layout_id());
  std::swap(q.questions[0], q.questions[1]);
  CHECK(q.layout_id() != before);
}

TEST_CASE("status lifecycle is forward only") {
  CHECK(can_transition(Status::draft, Status::assessed));
  CHECK(can_transition(Status::assessed, Status::peer_reviewed));
  CHECK(can_transition(Status::draft, Status::peer_reviewed));
  CHECK(can_transition(Status::draft, Status::draft));
  CHECK_FALSE(can_transition(Status::assessed, Status::draft));
  CHECK_FALSE(can_transition(Status::peer_reviewed, Status::assessed));
  CHECK_FALSE(can_transition(Status::peer_reviewed, Status::peer_reviewed));
  CHECK(status_from_string("peer_reviewed") == Status::peer_reviewed);
  CHECK_THROWS_AS(status_from_string("final"), InvalidArgument);
}

TEST_CASE("combine_prospect_pos multiplies factor POS") {
  std::array<double, 2> half{0.5, 0.5};
  CHECK(combine_prospect_pos(half) == doctest::Approx(0.25));
  std::array<double, 2> ident{1.0, 0.37};
  CHECK(combine_prospect_pos(ident) == doctest::Approx(0.37));
  std::array<double, 3> three{0.9, 0.8, 0.5};
  CHECK(combine_prospect_pos(three) == doctest::Approx(0.36));
  CHECK_THROWS_AS(combine_prospect_pos(std::span<const double>{}), InvalidArgument);
  std::array<double, 1> bad{1.5};
  CHECK_THROWS(combine_prospect_pos(bad));
}

TEST_CASE("assessment record validation") {
  AssessmentRecord r;
  r.characterization_id = "A";
  r.expert_lok = {{"e1", 0.4}};
  CHECK(validate_assessment(r).empty());
  r.expert_pos = {{"e1", 1.2}};
  CHECK_FALSE(validate_assessment(r).empty());
  r.expert_pos.clear();
  r.consensus_pos = 0.3;
  CHECK_FALSE(validate_assessment(r).empty());
  r.global_lok = 0.6;
  CHECK(validate_assessment(r).empty());
}

TEST_CASE("json round trips") {
  const auto rows = testing::case_study_rows();
  for (const auto& [id, c] : rows) {
    json j = c;
    CHECK(j.get<Characterization>() == c);
  }
  const auto q = testing::case_study_questionnaire();
  CHECK(json(q).get<Questionnaire>() == q);
  AssessmentRecord r{"A", {{"e1", 0.4}}, 0.5, {{"e1", 0.45}}, 0.47};
  CHECK(json(r).get<AssessmentRecord>() == r);
}

TEST_CASE("stable hash is FNV-1a") {
  CHECK(stable_hash("") == 14695981039346656037ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("errors carry codes") {
  ContradictionError e("x", {{"witness", json::array()}});
  CHECK(e.code() == "contradiction");
  CHECK(e.to_json()["code"] == "contradiction");
  CHECK(e.to_json()["details"].contains("witness"));
}
