#include "kara/engine.hpp"

#include <future>
#include <set>
#include <thread>

#include "kara/calibration.hpp"
#include "kara/pos.hpp"

namespace kara {

namespace {

std::optional<std::uint64_t> expected_version(const json& body) {
  if (body.is_object() && body.contains("expected_version") && !body["expected_version"].is_null())
    return body["expected_version"].get<std::uint64_t>();
  return std::nullopt;
}

json commit_response(const Id& ws, const CommitResult& r) {
  return json{{"workspace_id", ws}, {"version", r.workspace->version}, {"changed", r.changed}, {"detail", r.detail}};
}

double unit_value(const json& body, const char* key) {
  if (!body.contains(key)) throw InvalidArgument(std::string("missing field ") + key);
  const double v = body[key].get<double>();
  if (!in_unit_interval(v)) throw InvalidArgument(std::string(key) + " outside [0,1]", {{key, v}});
  return v;
}

double score_of(const json& scale, const Id& cid) {
  const auto& scores = scale.at("scores");
  if (!scores.contains(cid)) throw NotFound("characterization has no score on this scale", {{"characterization_id", cid}});
  return scores[cid].get<double>();
}

// Derived writes (POS entries, consensus) read a scale at some version and
// commit against it. Without a client-supplied version a concurrent writer
// triggers a fresh read instead of an error.
template <class F>
json with_retry(const json& body, F&& attempt) {
  const bool pinned = expected_version(body).has_value();
  for (int i = 0;; ++i) {
    try {
      return attempt();
    } catch (const VersionConflict&) {
      if (pinned || i >= 4) throw;
    }
  }
}

}  // namespace

Engine::Engine(WorkspaceStore& store, EngineSettings settings)
    : store_(store), settings_(std::move(settings)), solver_slots_(std::max(1, settings_.solver_threads)) {}

// Cache --------------------------------------------------------------------

std::optional<json> Engine::cached(const Workspace& w, const std::string& key) {
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(w.id);
  if (it == cache_.end() || it->second.first != w.version) return std::nullopt;
  auto e = it->second.second.find(key);
  if (e == it->second.second.end()) return std::nullopt;
  return e->second;
}

json Engine::remember(const Workspace& w, const std::string& key, json value) {
  std::lock_guard lock(cache_mutex_);
  auto& slot = cache_[w.id];
  if (slot.first > w.version) return value;  // an older read finished late
  if (slot.first < w.version) slot = {w.version, {}};
  slot.second[key] = value;
  return value;
}

// Workspace records ----------------------------------------------------------

json Engine::create_workspace(const json& body) {
  Workspace w;
  if (body.contains("id")) {
    w.id = body["id"].get<Id>();
  } else {
    const auto existing = store_.list();
    for (std::size_t n = existing.size() + 1;; ++n) {
      w.id = "ws-" + std::to_string(n);
      if (!store_.exists(w.id)) break;
    }
  }
  w.t = body.value("t", settings_.t);
  w.region = body.contains("region") ? body["region"].get<LikelihoodRegion>() : settings_.region;
  const auto created = store_.create(std::move(w));
  return json{{"workspace_id", created->id}, {"version", created->version}};
}

json Engine::get_workspace(const Id& ws) { return json(*store_.get(ws)); }

json Engine::list_workspaces() { return json{{"workspaces", store_.list()}}; }

json Engine::put_questionnaire(const Id& ws, const json& body) {
  mutation::PutQuestionnaire m;
  if (body.contains("questionnaire")) {
    m.questionnaire = body["questionnaire"].get<Questionnaire>();
    if (body.contains("risk_factor_name")) m.risk_factor_name = body["risk_factor_name"].get<std::string>();
  } else {
    m.questionnaire = body.get<Questionnaire>();
  }
  auto r = store_.commit(ws, m, expected_version(body));
  return commit_response(ws, r);
}

json Engine::add_characterizations(const Id& ws, const json& body) {
  std::vector<Characterization> list;
  if (body.is_array()) list = body.get<std::vector<Characterization>>();
  else if (body.contains("characterizations")) list = body["characterizations"].get<std::vector<Characterization>>();
  else list.push_back(body.get<Characterization>());
  if (list.empty()) throw InvalidArgument("no characterizations given");
  for (const auto& c : list)
    if (c.status == Status::peer_reviewed)
      throw ValidationFailed("new records cannot start peer-reviewed; use import", {{"characterization_id", c.id}});
  Mutation m;
  if (list.size() == 1) {
    m = mutation::PutCharacterization{list.front()};
  } else {
    mutation::Import imp;
    imp.characterizations = list;
    m = std::move(imp);
  }
  auto r = store_.commit(ws, m, body.is_object() ? expected_version(body) : std::nullopt);
  auto out = commit_response(ws, r);
  json ids = json::array();
  for (const auto& c : list) ids.push_back(c.id);
  out["characterization_ids"] = ids;
  return out;
}

json Engine::set_status(const Id& ws, const Id& cid, const json& body) {
  mutation::SetStatus m{cid, status_from_string(body.at("status").get<std::string>())};
  return commit_response(ws, store_.commit(ws, m, expected_version(body)));
}

json Engine::add_expert(const Id& ws, const json& body) {
  return commit_response(ws, store_.commit(ws, mutation::AddExpert{body.get<Expert>()}, expected_version(body)));
}

json Engine::import_records(const Id& ws, const json& body) {
  json op = body;
  op["op"] = "import";
  auto m = mutation_from_json(op);
  std::optional<std::uint64_t> expected = expected_version(body);
  CommitResult last{store_.get(ws), false};
  if (body.contains("t")) {
    last = store_.commit(ws, mutation::SetThreshold{body["t"].get<double>()}, expected);
    expected = expected ? std::optional(last.workspace->version) : std::nullopt;
  }
  if (body.contains("region")) {
    last = store_.commit(ws, mutation::SetRegion{body["region"].get<LikelihoodRegion>()}, expected);
    expected = expected ? std::optional(last.workspace->version) : std::nullopt;
  }
  last = store_.commit(ws, m, expected);
  return commit_response(ws, last);
}

json Engine::set_region(const Id& ws, const json& body) {
  const auto region = body.contains("region") ? body["region"].get<LikelihoodRegion>() : body.get<LikelihoodRegion>();
  return commit_response(ws, store_.commit(ws, mutation::SetRegion{region}, expected_version(body)));
}

json Engine::set_threshold(const Id& ws, const json& body) {
  return commit_response(ws, store_.commit(ws, mutation::SetThreshold{body.at("t").get<double>()}, expected_version(body)));
}

// Comparisons ----------------------------------------------------------------

json Engine::add_comparison(const Id& ws, const Id& expert, const json& body) {
  const auto rel = body.get<Relation>();
  auto r = store_.commit(ws, mutation::AddComparison{expert, rel}, expected_version(body));
  auto out = commit_response(ws, r);
  const auto& rf = r.workspace->characterization(rel.a).risk_factor_id;
  out["closure"] = r.workspace->graph(expert, rf).closure();
  return out;
}

json Engine::remove_comparison(const Id& ws, const Id& expert, const Id& comparison_id, const json& body) {
  auto r = store_.commit(ws, mutation::RemoveComparison{expert, comparison_id}, expected_version(body));
  return commit_response(ws, r);
}

json Engine::comparisons(const Id& ws, const Id& expert, const Id& rf_in) {
  const auto w = store_.get(ws);
  if (!w->experts.contains(expert)) throw NotFound("unknown expert", {{"expert_id", expert}});
  const auto rf = w->resolve_risk_factor(rf_in);
  json asserted = json::array();
  for (const auto& c : w->comparisons)
    if (c.expert_id == expert && c.risk_factor_id == rf) asserted.push_back(c);
  const auto g = w->graph(expert, rf);
  return json{{"workspace_id", ws},
              {"version", w->version},
              {"expert_id", expert},
              {"risk_factor_id", rf},
              {"asserted", asserted},
              {"closure", g.closure()},
              {"adjacency", closure_adjacency(g)}};
}

// Scales ---------------------------------------------------------------------

std::shared_ptr<const ReferenceModel> Engine::model_for(const Workspace& w, const Id& rf) {
  const auto& q = w.questionnaire_for(rf);
  const auto key = std::pair{w.id, rf};
  {
    std::lock_guard lock(cache_mutex_);
    auto it = models_.find(key);
    if (it != models_.end() && it->second.training_revision == w.training_revision &&
        it->second.layout_id == q.layout_id())
      return it->second.model;
  }
  std::vector<TrainingExample> examples;
  for (const auto& cid : w.characterizations_of(rf)) {
    const auto& c = w.characterizations.at(cid);
    if (c.status != Status::peer_reviewed) continue;
    auto a = w.assessments.find(cid);
    if (a == w.assessments.end() || !a->second.global_lok) continue;
    examples.push_back({cid, encode_one_hot(c, q), *a->second.global_lok});
  }
  std::shared_ptr<const ReferenceModel> model;
  if (!examples.empty()) model = std::make_shared<const ReferenceModel>(train_reference_model(examples));
  std::lock_guard lock(cache_mutex_);
  models_[key] = {w.training_revision, q.layout_id(), model};
  return model;
}

std::map<Id, double> Engine::reference_scores(const Workspace& w, const Id& rf, json* model_info) {
  constexpr double kNoData = 0.5;
  const auto model = model_for(w, rf);
  const auto& q = w.questionnaire_for(rf);
  std::map<Id, double> out;
  for (const auto& cid : w.characterizations_of(rf))
    out[cid] = model ? model->predict(encode_one_hot(w.characterizations.at(cid), q)) : kNoData;
  if (model_info) {
    if (model) {
      *model_info = model->metadata();
    } else {
      *model_info = json{{"kind", "constant"}, {"hyperparameters", {{"value", kNoData}}}, {"cv_loss", nullptr},
                         {"selected", false}, {"training_size", 0}, {"layout_id", q.layout_id()}};
    }
    (*model_info)["training_revision"] = w.training_revision;
  }
  return out;
}

json Engine::reference_scale(const Id& ws, const Id& rf_in) {
  const auto w = store_.get(ws);
  const auto rf = w->resolve_risk_factor(rf_in);
  const auto key = "reference|" + rf;
  if (auto hit = cached(*w, key)) return *hit;
  json info;
  LokScale s;
  s.kind = ScaleKind::reference;
  s.scores = reference_scores(*w, rf, &info);
  json out = s;
  out["workspace_id"] = ws;
  out["version"] = w->version;
  out["risk_factor_id"] = rf;
  out["reference_model"] = info;
  return remember(*w, key, out);
}

json Engine::expert_at(const Workspace& w, const Id& expert, const Id& rf) {
  if (!w.experts.contains(expert)) throw NotFound("unknown expert", {{"expert_id", expert}});
  const auto key = "expert|" + rf + "|" + expert;
  if (auto hit = cached(w, key)) return *hit;
  json info;
  const auto reference = reference_scores(w, rf, &info);
  const auto relations = extract_gt_eq(w.graph(expert, rf));
  const auto problem = make_problem(w.characterizations_of(rf), reference, relations, w.t);
  json out = calibrate(problem, ScaleKind::expert, expert);
  out["workspace_id"] = w.id;
  out["version"] = w.version;
  out["risk_factor_id"] = rf;
  out["reference"] = reference;
  out["reference_model"] = info;
  out["relations"] = relations;
  return remember(w, key, out);
}

json Engine::expert_scale(const Id& ws, const Id& expert, const Id& rf) {
  const auto w = store_.get(ws);
  return expert_at(*w, expert, w->resolve_risk_factor(rf));
}

ConsensusRelations Engine::run_solver(const PairWeights& weights, SolverStats& stats, std::stop_token client) {
  if (!solver_slots_.try_acquire_for(settings_.solve_timeout))
    throw Cancelled("no consensus solver became available in time");
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{solver_slots_};

  std::stop_source source;
  std::stop_callback forward(client, [&] { source.request_stop(); });
  std::promise<ConsensusRelations> promise;
  auto result = promise.get_future();
  ConsensusOptions opts{settings_.exact_bound, source.get_token()};
  std::jthread worker([&] {
    try {
      promise.set_value(kara::solve_consensus(weights, opts, &stats));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  });
  if (result.wait_for(settings_.solve_timeout) == std::future_status::timeout) source.request_stop();
  return result.get();
}

json Engine::consensus_at(const Workspace& w, const Id& rf, std::stop_token client) {
  const auto key = "consensus|" + rf;
  if (auto hit = cached(w, key)) return *hit;
  const auto experts = w.experts_of(rf);
  if (experts.empty())
    throw NotFound("no comparisons to aggregate", {{"workspace_id", w.id}, {"risk_factor_id", rf}});
  std::vector<ComparisonGraph> graphs;
  for (const auto& e : experts) graphs.push_back(w.graph(e, rf));
  // Characterizations nobody compared carry no weight; leaving them out keeps
  // the exact solve within bounds without changing the optimum.
  const auto weights = aggregate_weights(graphs, w.compared_of(rf));
  SolverStats stats;
  const auto c = run_solver(weights, stats, client);
  json out = c;
  out["workspace_id"] = w.id;
  out["version"] = w.version;
  out["risk_factor_id"] = rf;
  out["experts"] = experts;
  out["supported"] = supported_gt_eq(c, weights);
  out["nodes"] = stats.nodes;
  return remember(w, key, out);
}

json Engine::solve_consensus(const Id& ws, const Id& rf, std::stop_token client) {
  const auto w = store_.get(ws);
  return consensus_at(*w, w->resolve_risk_factor(rf), client);
}

json Engine::global_at(const Workspace& w, const Id& rf, std::stop_token client) {
  const auto key = "global|" + rf;
  if (auto hit = cached(w, key)) return *hit;
  const auto consensus = consensus_at(w, rf, client);
  json info;
  const auto reference = reference_scores(w, rf, &info);
  const auto relations = consensus.at("supported").get<GtEq>();
  const auto problem = make_problem(w.characterizations_of(rf), reference, relations, w.t);
  json out = calibrate(problem, ScaleKind::global);
  out["workspace_id"] = w.id;
  out["version"] = w.version;
  out["risk_factor_id"] = rf;
  out["reference"] = reference;
  out["reference_model"] = info;
  out["relations"] = relations;
  out["consensus_objective"] = consensus.at("objective");
  return remember(w, key, out);
}

json Engine::global_scale(const Id& ws, const Id& rf, std::stop_token client) {
  const auto w = store_.get(ws);
  return global_at(*w, w->resolve_risk_factor(rf), client);
}

// POS ------------------------------------------------------------------------

json Engine::pos_region(const Id& ws, std::optional<double> lok) {
  const auto w = store_.get(ws);
  json out{{"workspace_id", ws}, {"version", w->version}, {"region", w->region}, {"plot", region_plot_data(w->region)}};
  if (lok) {
    if (!in_unit_interval(*lok)) throw InvalidArgument("lok outside [0,1]", {{"lok", *lok}});
    out["lok"] = *lok;
    out["allowed"] = allowed_intervals(w->region, *lok);
  }
  return out;
}

json Engine::add_pos_entry(const Id& ws, const json& body) {
  const auto expert = body.at("expert_id").get<Id>();
  const auto cid = body.at("characterization_id").get<Id>();
  const double pos = unit_value(body, "pos");
  const auto kind = body.value("scale_kind", std::string("expert"));
  if (kind != "expert" && kind != "global") throw InvalidArgument("scale_kind must be \"expert\" or \"global\"");
  return with_retry(body, [&] {
    const auto w = store_.get(ws);
    const auto& rf = w->characterization(cid).risk_factor_id;
    const auto scale = kind == "expert" ? expert_at(*w, expert, rf) : global_at(*w, rf, {});
    PosEntry e{expert, cid, pos, score_of(scale, cid), kind == "expert" ? PosScaleKind::expert : PosScaleKind::global};
    auto r = store_.commit(ws, mutation::RecordPosEntry{e}, expected_version(body).value_or(w->version));
    auto out = commit_response(ws, r);
    out["entry"] = e;
    out["allowed"] = allowed_intervals(w->region, e.lok_used);
    return out;
  });
}

json Engine::pos_consensus(const Id& ws, const json& body) {
  const auto cid = body.at("characterization_id").get<Id>();
  const bool record = body.contains("pos") || body.value("accept", false);
  return with_retry(body, [&] {
    const auto w = store_.get(ws);
    const auto& rf = w->characterization(cid).risk_factor_id;
    std::vector<PosEntry> entries;
    for (const auto& e : w->pos_entries)
      if (e.characterization_id == cid) entries.push_back(e);
    if (entries.empty()) throw NotFound("no POS entries for this characterization", {{"characterization_id", cid}});
    const double global_lok = score_of(global_at(*w, rf, {}), cid);
    const double suggestion = consensus_pos(entries, w->region, global_lok);
    json out{{"workspace_id", ws},
             {"version", w->version},
             {"characterization_id", cid},
             {"global_lok", global_lok},
             {"entries", entries},
             {"suggestion", suggestion},
             {"allowed", allowed_intervals(w->region, global_lok)},
             {"recorded", false}};
    if (record) {
      const double pos = body.contains("pos") ? unit_value(body, "pos") : suggestion;
      auto r = store_.commit(ws, mutation::RecordConsensus{cid, global_lok, pos},
                             expected_version(body).value_or(w->version));
      out["version"] = r.workspace->version;
      out["recorded"] = true;
      out["pos"] = pos;
      out["changed"] = r.changed;
    }
    return out;
  });
}

json Engine::similar(const Id& ws, const Id& cid, std::size_t k) {
  const auto w = store_.get(ws);
  const auto& target = w->characterization(cid);
  const auto& q = w->questionnaire_for(target.risk_factor_id);
  std::vector<PriorAssessment> priors;
  for (const auto& id : w->characterizations_of(target.risk_factor_id)) {
    const auto& c = w->characterizations.at(id);
    if (c.status != Status::peer_reviewed) continue;
    PriorAssessment p{id, encode_one_hot(c, q), std::nullopt, std::nullopt};
    if (auto a = w->assessments.find(id); a != w->assessments.end()) {
      p.consensus_pos = a->second.consensus_pos;
      p.global_lok = a->second.global_lok;
    }
    priors.push_back(std::move(p));
  }
  const auto top = similar_assessments(cid, encode_one_hot(target, q), priors, k);
  return json{{"workspace_id", ws}, {"version", w->version}, {"characterization_id", cid}, {"k", k}, {"similar", top}};
}

}  // namespace kara
