#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stop_token>
#include <string>

#include "kara/consensus.hpp"
#include "kara/reference_lok.hpp"
#include "kara/workspace.hpp"

namespace kara {

struct EngineSettings {
  std::size_t exact_bound = 12;
  std::chrono::milliseconds solve_timeout{30000};
  int solver_threads = 2;
  /// Defaults for new workspaces.
  double t = kDefaultThreshold;
  LikelihoodRegion region = LikelihoodRegion::default_region();
};

/// JSON-in, JSON-out workflow operations on top of a WorkspaceStore. Every
/// read is a pure function of the workspace version and the request;
/// derived artifacts are cached per version.
class Engine {
public:
  explicit Engine(WorkspaceStore& store, EngineSettings settings = {});

  const EngineSettings& settings() const noexcept { return settings_; }
  WorkspaceStore& store() noexcept { return store_; }

  json create_workspace(const json& body);
  json get_workspace(const Id& ws);
  json list_workspaces();

  json put_questionnaire(const Id& ws, const json& body);
  json add_characterizations(const Id& ws, const json& body);
  json set_status(const Id& ws, const Id& cid, const json& body);
  json add_expert(const Id& ws, const json& body);
  json import_records(const Id& ws, const json& body);
  json set_region(const Id& ws, const json& body);
  json set_threshold(const Id& ws, const json& body);

  json add_comparison(const Id& ws, const Id& expert, const json& body);
  json remove_comparison(const Id& ws, const Id& expert, const Id& comparison_id, const json& body = json::object());
  json comparisons(const Id& ws, const Id& expert, const Id& rf = {});

  json reference_scale(const Id& ws, const Id& rf = {});
  json expert_scale(const Id& ws, const Id& expert, const Id& rf = {});
  json solve_consensus(const Id& ws, const Id& rf = {}, std::stop_token client = {});
  json global_scale(const Id& ws, const Id& rf = {}, std::stop_token client = {});

  json pos_region(const Id& ws, std::optional<double> lok);
  json add_pos_entry(const Id& ws, const json& body);
  json pos_consensus(const Id& ws, const json& body);
  json similar(const Id& ws, const Id& cid, std::size_t k);

private:
  struct ModelEntry {
    std::uint64_t training_revision = 0;
    std::string layout_id;
    std::shared_ptr<const ReferenceModel> model;  // null: no training data
  };

  json commit(const Id& ws, const Mutation& m, const json& body, std::optional<std::uint64_t> read_version = {});
  std::shared_ptr<const ReferenceModel> model_for(const Workspace& w, const Id& rf);
  std::map<Id, double> reference_scores(const Workspace& w, const Id& rf, json* model_info);
  json consensus_at(const Workspace& w, const Id& rf, std::stop_token client);
  json global_at(const Workspace& w, const Id& rf, std::stop_token client);
  json expert_at(const Workspace& w, const Id& expert, const Id& rf);
  ConsensusRelations run_solver(const PairWeights& weights, SolverStats& stats, std::stop_token client);

  std::optional<json> cached(const Workspace& w, const std::string& key);
  json remember(const Workspace& w, const std::string& key, json value);

  WorkspaceStore& store_;
  EngineSettings settings_;
  std::counting_semaphore<1024> solver_slots_;
  std::mutex cache_mutex_;
  std::map<Id, std::pair<std::uint64_t, std::map<std::string, json>>> cache_;  // ws -> (version, entries)
  std::map<std::pair<Id, Id>, ModelEntry> models_;                             // (ws, rf)
};

}  // namespace kara
