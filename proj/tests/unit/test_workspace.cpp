#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "fixtures.hpp"
#include "kara/workspace.hpp"

using namespace kara;
using namespace kara::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_store(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("kara-ws-test-" + std::to_string(::getpid()) + "-" + tag);
  fs::remove_all(dir);
  return dir;
}

Workspace with_case_study() {
  Workspace w;
  w.id = "cs";
  w = apply_mutation(w, mutation::PutQuestionnaire{case_study_questionnaire(), "Trap"}).workspace;
  for (const auto& [id, c] : case_study_rows()) w = apply_mutation(w, mutation::PutCharacterization{c}).workspace;
  w = apply_mutation(w, mutation::AddExpert{{"e1", "Expert One"}}).workspace;
  return w;
}

Relation lt(const Id& a, const Id& b) { return Relation::lt(a, b); }

}  // namespace

TEST_CASE("commit bumps the version and rejects stale writers") {
  auto w = with_case_study();
  w.version = 5;
  const auto r = commit(w, mutation::AddComparison{"e1", lt("E", "A")}, 5);
  CHECK(r.workspace.version == 6);
  CHECK(r.workspace.comparisons.size() == 1);
  CHECK(r.workspace.comparisons[0].id == "c1");
  try {
    commit(r.workspace, mutation::AddComparison{"e1", lt("A", "C")}, 5);
    FAIL("expected conflict");
  } catch (const VersionConflict& e) {
    CHECK(e.details().at("expected_version") == 5);
    CHECK(e.details().at("current_version") == 6);
  }
}

TEST_CASE("implied comparisons do not bump the version") {
  auto w = with_case_study();
  w = commit(w, mutation::AddComparison{"e1", lt("E", "A")}, 0).workspace;
  w = commit(w, mutation::AddComparison{"e1", lt("A", "C")}, 1).workspace;
  const auto r = commit(w, mutation::AddComparison{"e1", lt("E", "C")}, 2);
  CHECK_FALSE(r.changed);
  CHECK(r.workspace.version == 2);
  CHECK(r.detail.at("implied") == true);
  CHECK_THROWS_AS(commit(w, mutation::AddComparison{"e1", lt("C", "E")}, 2), ContradictionError);
}

TEST_CASE("comparisons need a registered expert on one risk factor") {
  auto w = with_case_study();
  CHECK_THROWS_AS(apply_mutation(w, mutation::AddComparison{"ghost", lt("A", "B")}), NotFound);
  CHECK_THROWS_AS(apply_mutation(w, mutation::AddComparison{"e1", lt("A", "nope")}), NotFound);
}

TEST_CASE("unknown option is a validation failure") {
  auto w = with_case_study();
  auto c = case_study_rows().at("A");
  c.id = "Z";
  c.answers["seismic_density"] = "galactic";
  try {
    apply_mutation(w, mutation::PutCharacterization{c});
    FAIL("expected validation failure");
  } catch (const ValidationFailed& e) {
    CHECK(e.details().at("violations").size() == 1);
    CHECK(e.details().at("violations")[0].at("question_id") == "seismic_density");
  }
}

TEST_CASE("status moves forward only and peer review needs results") {
  auto w = with_case_study();
  w = apply_mutation(w, mutation::SetStatus{"A", Status::assessed}).workspace;
  CHECK(w.characterization("A").status == Status::assessed);
  CHECK_THROWS_AS(apply_mutation(w, mutation::SetStatus{"A", Status::draft}), ValidationFailed);
  CHECK_THROWS_AS(apply_mutation(w, mutation::SetStatus{"A", Status::peer_reviewed}), ValidationFailed);
  w = apply_mutation(w, mutation::RecordConsensus{"A", 0.3, 0.5}).workspace;
  const auto before = w.training_revision;
  w = apply_mutation(w, mutation::SetStatus{"A", Status::peer_reviewed}).workspace;
  CHECK(w.training_revision == before + 1);
  auto changed = w.characterization("A");
  changed.answers.erase("visual_quality");
  CHECK_THROWS_AS(apply_mutation(w, mutation::PutCharacterization{changed}), ImmutableRecord);
  CHECK_THROWS_AS(apply_mutation(w, mutation::RecordConsensus{"A", 0.4, 0.5}), ImmutableRecord);
}

TEST_CASE("pos entries are checked against the region") {
  auto w = with_case_study();
  PosEntry bad{"e1", "A", 0.5, 1.0, PosScaleKind::expert};
  try {
    apply_mutation(w, mutation::RecordPosEntry{bad});
    FAIL("expected rejection");
  } catch (const PosRejected& e) {
    CHECK(e.details().at("nearest").get<double>() == doctest::Approx(0.05));
  }
  PosEntry ok{"e1", "A", 0.3, 0.4, PosScaleKind::expert};
  w = apply_mutation(w, mutation::RecordPosEntry{ok}).workspace;
  ok.pos = 0.35;
  w = apply_mutation(w, mutation::RecordPosEntry{ok}).workspace;
  CHECK(w.pos_entries.size() == 1);
  CHECK(w.assessments.at("A").expert_pos.at("e1") == 0.35);
}

TEST_CASE("snapshots round-trip") {
  Workspace empty;
  empty.id = "empty";
  CHECK(parse_workspace(snapshot(empty)) == empty);
  auto w = with_case_study();
  w = commit(w, mutation::AddComparison{"e1", lt("E", "A")}, 0).workspace;
  w = commit(w, mutation::AddComparison{"e1", Relation::eq("B", "C")}, 1).workspace;
  w = commit(w, mutation::RecordPosEntry{{"e1", "A", 0.3, 0.4, PosScaleKind::expert}}, 2).workspace;
  const auto text = snapshot(w);
  CHECK(parse_workspace(text) == w);
  CHECK(snapshot(parse_workspace(text)) == text);
}

TEST_CASE("mutations round-trip through json") {
  const std::vector<Mutation> ms = {
      mutation::AddExpert{{"e2", "Two"}},
      mutation::SetStatus{"A", Status::assessed},
      mutation::AddComparison{"e1", lt("A", "B")},
      mutation::RemoveComparison{"e1", "c3"},
      mutation::SetThreshold{0.07},
      mutation::RecordConsensus{"A", 0.4, 0.6},
  };
  for (const auto& m : ms) CHECK(mutation_to_json(mutation_from_json(mutation_to_json(m))) == mutation_to_json(m));
  CHECK_THROWS_AS(mutation_from_json(json{{"op", "explode"}}), InvalidArgument);
}

TEST_CASE("truncated snapshot reports the byte offset") {
  const auto text = snapshot(with_case_study());
  try {
    parse_workspace(text.substr(0, text.size() / 2), "half.json");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.details().at("path") == "half.json");
    CHECK(e.details().at("byte").get<std::size_t>() > 0);
  }
  CHECK_THROWS_AS(parse_workspace(R"({"schema_version": 99})"), ParseError);
}

TEST_CASE("store persists snapshots and an append-only log") {
  const auto root = temp_store("store");
  {
    WorkspaceStore store(root);
    Workspace init;
    init.id = "w1";
    store.create(init);
    CHECK_THROWS_AS(store.create(init), AlreadyExists);
    store.commit("w1", mutation::PutQuestionnaire{case_study_questionnaire(), "Trap"});
    store.commit("w1", mutation::AddExpert{{"e1", "One"}}, 1);
    CHECK_THROWS_AS(store.commit("w1", mutation::AddExpert{{"e2", "Two"}}, 1), VersionConflict);
    CHECK_THROWS_AS(store.get("missing"), NotFound);
  }
  WorkspaceStore reopened(root);
  const auto w = reopened.get("w1");
  CHECK(w->version == 2);
  CHECK(w->experts.contains("e1"));
  CHECK(reopened.list() == std::vector<Id>{"w1"});
  std::ifstream log(reopened.log_path("w1"));
  std::vector<json> lines;
  for (std::string line; std::getline(log, line);) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].at("op") == "create");
  CHECK(lines[2].at("version") == 2);
  CHECK(lines[2].at("mutation").at("op") == "add_expert");
  fs::remove_all(root);
}

TEST_CASE("workspace ids are file-name safe") {
  CHECK(valid_workspace_id("demo-1_a"));
  CHECK_FALSE(valid_workspace_id(""));
  CHECK_FALSE(valid_workspace_id("../etc"));
  CHECK_FALSE(valid_workspace_id("a/b"));
}
