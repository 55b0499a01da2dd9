#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kara/calibration.hpp"
#include "kara/comparison_graph.hpp"
#include "kara/core.hpp"
#include "kara/pos.hpp"

namespace kara {

struct ComparisonRecord {
  Id id;
  Id expert_id;
  Id risk_factor_id;
  Relation relation;

  friend bool operator==(const ComparisonRecord&, const ComparisonRecord&) = default;
};

/// Everything one assessment campaign knows. Values only; every change goes
/// through apply_mutation / commit.
struct Workspace {
  static constexpr int kSchemaVersion = 1;

  Id id;
  std::uint64_t version = 0;
  double t = kDefaultThreshold;
  LikelihoodRegion region = LikelihoodRegion::default_region();
  std::map<Id, RiskFactor> risk_factors;
  std::map<Id, Questionnaire> questionnaires;  // by questionnaire id
  std::map<Id, Characterization> characterizations;
  std::map<Id, Expert> experts;
  std::vector<ComparisonRecord> comparisons;  // insertion order
  std::uint64_t next_comparison = 1;
  std::map<Id, AssessmentRecord> assessments;
  std::vector<PosEntry> pos_entries;
  /// Bumped whenever the set of peer-reviewed examples changes. Reference
  /// models trained at an older revision are stale.
  std::uint64_t training_revision = 0;

  const Questionnaire& questionnaire_for(const Id& risk_factor_id) const;
  const Characterization& characterization(const Id& id) const;
  /// Characterization ids of one risk factor, sorted.
  std::vector<Id> characterizations_of(const Id& risk_factor_id) const;
  /// The only risk factor when rf is empty, otherwise rf after an existence
  /// check.
  Id resolve_risk_factor(const Id& rf) const;
  /// Comparison graph of one expert over all characterizations of a risk
  /// factor.
  ComparisonGraph graph(const Id& expert_id, const Id& risk_factor_id) const;
  /// Experts with at least one comparison on the risk factor, sorted.
  std::vector<Id> experts_of(const Id& risk_factor_id) const;
  /// Characterizations that appear in at least one comparison, sorted.
  std::vector<Id> compared_of(const Id& risk_factor_id) const;

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

namespace mutation {
struct PutQuestionnaire {
  Questionnaire questionnaire;
  std::optional<std::string> risk_factor_name;
};
struct AddExpert {
  Expert expert;
};
/// Insert or update. Updates respect the status lifecycle; peer-reviewed
/// records are immutable.
struct PutCharacterization {
  Characterization characterization;
};
struct SetStatus {
  Id characterization_id;
  Status status;
};
struct AddComparison {
  Id expert_id;
  Relation relation;
};
struct RemoveComparison {
  Id expert_id;
  Id comparison_id;
};
struct RecordPosEntry {
  PosEntry entry;
};
struct RecordConsensus {
  Id characterization_id;
  double global_lok = 0.0;
  double pos = 0.0;
};
struct SetRegion {
  LikelihoodRegion region;
};
struct SetThreshold {
  double t = kDefaultThreshold;
};
/// Bulk load of historical records, validated as a whole.
struct Import {
  std::vector<Questionnaire> questionnaires;
  std::vector<RiskFactor> risk_factors;
  std::vector<Expert> experts;
  std::vector<Characterization> characterizations;
  std::vector<AssessmentRecord> assessments;
};
}  // namespace mutation

using Mutation = std::variant<mutation::PutQuestionnaire, mutation::AddExpert, mutation::PutCharacterization,
                              mutation::SetStatus, mutation::AddComparison, mutation::RemoveComparison,
                              mutation::RecordPosEntry, mutation::RecordConsensus, mutation::SetRegion,
                              mutation::SetThreshold, mutation::Import>;

std::string_view mutation_name(const Mutation& m);

struct ApplyResult {
  Workspace workspace;
  bool changed = true;  // false for no-ops such as an implied comparison
  json detail = json::object();
};

/// Validates and applies m without touching the version.
ApplyResult apply_mutation(const Workspace& ws, const Mutation& m);

/// Optimistic commit: throws VersionConflict unless ws.version equals
/// expected_version, then applies m and bumps the version when something
/// changed.
ApplyResult commit(const Workspace& ws, const Mutation& m, std::uint64_t expected_version);

void to_json(json& j, const ComparisonRecord& c);
void from_json(const json& j, ComparisonRecord& c);
void to_json(json& j, const Workspace& ws);
void from_json(const json& j, Workspace& ws);
/// {"op": "...", ...fields}. Free functions rather than to_json/from_json
/// because argument-dependent lookup does not reach std::variant.
json mutation_to_json(const Mutation& m);
Mutation mutation_from_json(const json& j);

/// Pretty-printed JSON, newline terminated. Round-trips exactly through
/// parse_workspace.
std::string snapshot(const Workspace& ws);
/// Throws ParseError with the byte offset (syntax) or the offending field
/// (schema). `origin` names the source in the error details.
Workspace parse_workspace(const std::string& text, const std::string& origin = "<memory>");
Workspace load_workspace(const std::filesystem::path& path);
void save_workspace(const Workspace& ws, const std::filesystem::path& path);

struct CommitResult {
  std::shared_ptr<const Workspace> workspace;
  bool changed = true;
  json detail = json::object();
};

/// Directory of workspaces: <root>/<id>.json holds the latest snapshot and
/// <root>/<id>.log.jsonl the append-only mutation log.
class WorkspaceStore {
public:
  explicit WorkspaceStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path snapshot_path(const Id& id) const;
  std::filesystem::path log_path(const Id& id) const;

  std::shared_ptr<const Workspace> create(Workspace initial);
  std::shared_ptr<const Workspace> get(const Id& id);
  bool exists(const Id& id);
  std::vector<Id> list();

  /// When expected_version is empty the commit applies to whatever is
  /// current; it is still atomic with respect to other writers.
  CommitResult commit(const Id& id, const Mutation& m, std::optional<std::uint64_t> expected_version = {});

private:
  std::shared_ptr<const Workspace> get_locked(const Id& id);

  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<Id, std::shared_ptr<const Workspace>> cache_;
};

/// Workspace ids end up in file names.
bool valid_workspace_id(const std::string& id);

}  // namespace kara
