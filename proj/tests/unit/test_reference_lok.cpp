#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "kara/reference_lok.hpp"
#include "oracles.hpp"

using namespace kara;

namespace {
OneHotVector vec(std::vector<std::uint8_t> bits, std::string layout = "L") { return {std::move(layout), std::move(bits)}; }
}  // namespace

TEST_CASE("case-study rows encode to the published vectors") {
  const auto q = testing::case_study_questionnaire();
  const auto rows = testing::case_study_rows();
  for (const auto& [id, expected] : testing::published_vectors()) {
    CAPTURE(id);
    const auto v = encode_one_hot(rows.at(id), q);
    CHECK(v.layout_id == q.layout_id());
    CHECK(testing::bits_of(v) == expected);
  }
}

TEST_CASE("empty answers encode to zeros") {
  const auto q = testing::case_study_questionnaire();
  Characterization c{"x", "p", q.risk_factor_id, {}, Status::draft};
  const auto v = encode_one_hot(c, q);
  CHECK(v.bits == std::vector<std::uint8_t>(20, 0));
}

TEST_CASE("encoding rejects foreign risk factors and bad answers") {
  const auto q = testing::case_study_questionnaire();
  Characterization c{"x", "p", "seal", {}, Status::draft};
  CHECK_THROWS_AS(encode_one_hot(c, q), LayoutMismatch);
  c.risk_factor_id = q.risk_factor_id;
  c.answers = {{"visual_quality", "superb"}};
  CHECK_THROWS_AS(encode_one_hot(c, q), ValidationFailed);
}

TEST_CASE("similarity on the case-study rows") {
  const auto q = testing::case_study_questionnaire();
  const auto rows = testing::case_study_rows();
  auto v = [&](const char* id) { return encode_one_hot(rows.at(id), q); };
  CHECK(similarity(v("A"), v("A")) == 1.0);
  CHECK(hamming_distance(v("A"), v("E")) == 5);
  CHECK(similarity(v("A"), v("E")) == doctest::Approx(0.75));
  for (const char* other : {"B", "C", "D"}) CHECK(similarity(v("A"), v(other)) < 0.75);
}

TEST_CASE("all zero against all first options") {
  const auto q = testing::case_study_questionnaire();
  Characterization empty{"x", "p", q.risk_factor_id, {}, Status::draft};
  Characterization first = empty;
  for (const auto& question : q.questions) first.answers[question.id] = question.options.front().id;
  CHECK(similarity(encode_one_hot(empty, q), encode_one_hot(first, q)) == doctest::Approx(0.65));
}

TEST_CASE("similarity across layouts throws") {
  CHECK_THROWS_AS(similarity(vec({1, 0}, "L1"), vec({1, 0}, "L2")), LayoutMismatch);
}

TEST_CASE("knn k=3 uniform averages the three nearest") {
  std::vector<TrainingExample> train{
      {"n1", vec({1, 0, 0, 0}), 0.2},
      {"n2", vec({1, 1, 0, 0}), 0.4},
      {"n3", vec({1, 0, 1, 0}), 0.9},
      {"far", vec({0, 1, 1, 1}), 0.0},
  };
  auto m = fit_model({ModelKind::knn, 3, false, 0.0}, train);
  CHECK(m.predict(vec({1, 0, 0, 0})) == doctest::Approx(0.5));
  CHECK_THROWS_AS(m.predict(vec({1, 0, 0, 0}, "other")), LayoutMismatch);
}

TEST_CASE("knn k=1 reproduces an exact match") {
  std::vector<TrainingExample> train{{"a", vec({1, 0, 1}), 0.7}, {"b", vec({0, 1, 0}), 0.1}};
  auto m = fit_model({ModelKind::knn, 1, false, 0.0}, train);
  CHECK(m.predict(vec({1, 0, 1})) == doctest::Approx(0.7));
}

TEST_CASE("constant targets") {
  std::vector<TrainingExample> dup;
  for (int i = 0; i < 10; ++i) dup.push_back({"d" + std::to_string(i), vec({1, 0, 1}), 0.7});
  auto m = train_reference_model(dup);
  CHECK(m.selected());
  CHECK(m.predict(vec({1, 0, 1})) == doctest::Approx(0.7));

  std::vector<TrainingExample> flat;
  for (int i = 0; i < 12; ++i)
    flat.push_back({"f" + std::to_string(i), vec({std::uint8_t(i & 1), std::uint8_t((i >> 1) & 1), 1}), 0.3});
  auto lin = fit_model({ModelKind::linear, 1, false, 1e-2}, flat);
  CHECK(lin.predict(vec({0, 0, 0})) == doctest::Approx(0.3));
  CHECK(lin.predict(vec({1, 1, 1})) == doctest::Approx(0.3));
}

TEST_CASE("small and empty training sets") {
  CHECK_THROWS_AS(train_reference_model(std::span<const TrainingExample>{}), InvalidArgument);
  std::vector<TrainingExample> few{{"a", vec({1, 0}), 0.2}, {"b", vec({0, 1}), 0.8}};
  auto m = train_reference_model(few);
  CHECK_FALSE(m.selected());
  CHECK(m.candidate().kind == ModelKind::knn);
  CHECK(m.candidate().k == 1);
  CHECK(m.metadata()["selected"] == false);
}

TEST_CASE("fold assignment is balanced and stable") {
  const auto ex = testing::synthetic_training_set();
  const auto folds = fold_assignment(ex);
  CHECK(folds == testing::oracle_folds(ex, 10));
  std::vector<int> count(10, 0);
  for (int f : folds) ++count[f];
  for (int c : count) CHECK(c == 5);
}

TEST_CASE("cross-validation matches direct computation") {
  const auto ex = testing::synthetic_training_set();
  CHECK(cross_validation_mae({ModelKind::knn, 5, false, 0.0}, ex) ==
        doctest::Approx(testing::oracle_cv_knn_uniform(ex, 5)).epsilon(1e-12));
  CHECK(cross_validation_mae({ModelKind::linear, 1, false, 1e-2}, ex) ==
        doctest::Approx(testing::oracle_cv_ridge(ex, 1e-2)).epsilon(1e-9));
}

TEST_CASE("linear target selects a linear model") {
  const auto ex = testing::synthetic_training_set();
  const double knn5 = testing::oracle_cv_knn_uniform(ex, 5);
  double best_linear = 1e9;
  for (double l : {1e-3, 1e-2, 1e-1}) best_linear = std::min(best_linear, testing::oracle_cv_ridge(ex, l));
  CHECK(best_linear < knn5);
  const auto m = train_reference_model(ex);
  CHECK(m.kind() == ModelKind::linear);
  CHECK(m.cv_loss() == doctest::Approx(best_linear).epsilon(1e-9));
}

TEST_CASE("training is deterministic") {
  const auto ex = testing::synthetic_training_set();
  const auto a = train_reference_model(ex);
  const auto b = train_reference_model(ex);
  CHECK(a.metadata() == b.metadata());
  CHECK(a.cv_loss() == b.cv_loss());
}

TEST_CASE("training jsonl round trip") {
  const auto ex = testing::synthetic_training_set(5);
  std::stringstream ss;
  write_training_jsonl(ss, ex);
  const auto back = read_training_jsonl(ss, ex.front().vector.layout_id);
  CHECK(back == ex);
  std::stringstream bad("{\"characterization_id\": \"x\"}\nnot json\n");
  CHECK_THROWS_AS(read_training_jsonl(bad), ParseError);
}
