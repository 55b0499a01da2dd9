#include "kara/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace kara {

namespace fs = std::filesystem;

// Workspace helpers ----------------------------------------------------------

const Questionnaire& Workspace::questionnaire_for(const Id& risk_factor_id) const {
  auto rf = risk_factors.find(risk_factor_id);
  if (rf == risk_factors.end()) throw NotFound("unknown risk factor", {{"risk_factor_id", risk_factor_id}});
  auto q = questionnaires.find(rf->second.questionnaire_id);
  if (q == questionnaires.end())
    throw NotFound("risk factor has no questionnaire", {{"risk_factor_id", risk_factor_id}});
  return q->second;
}

const Characterization& Workspace::characterization(const Id& id) const {
  auto it = characterizations.find(id);
  if (it == characterizations.end()) throw NotFound("unknown characterization", {{"characterization_id", id}});
  return it->second;
}

std::vector<Id> Workspace::characterizations_of(const Id& risk_factor_id) const {
  std::vector<Id> out;
  for (const auto& [id, c] : characterizations)
    if (c.risk_factor_id == risk_factor_id) out.push_back(id);
  return out;
}

Id Workspace::resolve_risk_factor(const Id& rf) const {
  if (!rf.empty()) {
    if (!risk_factors.contains(rf)) throw NotFound("unknown risk factor", {{"risk_factor_id", rf}});
    return rf;
  }
  if (risk_factors.size() == 1) return risk_factors.begin()->first;
  if (risk_factors.empty()) throw NotFound("workspace has no risk factors");
  throw InvalidArgument("several risk factors exist; name one", {{"risk_factors", [&] {
                                                                    std::vector<Id> ids;
                                                                    for (const auto& [id, r] : risk_factors)
                                                                      ids.push_back(id);
                                                                    return ids;
                                                                  }()}});
}

ComparisonGraph Workspace::graph(const Id& expert_id, const Id& risk_factor_id) const {
  const auto ids = characterizations_of(risk_factor_id);
  ComparisonGraph g(std::set<Id>(ids.begin(), ids.end()));
  for (const auto& c : comparisons)
    if (c.expert_id == expert_id && c.risk_factor_id == risk_factor_id) g = add_comparison(g, c.relation);
  return g;
}

std::vector<Id> Workspace::experts_of(const Id& risk_factor_id) const {
  std::set<Id> out;
  for (const auto& c : comparisons)
    if (c.risk_factor_id == risk_factor_id) out.insert(c.expert_id);
  return {out.begin(), out.end()};
}

std::vector<Id> Workspace::compared_of(const Id& risk_factor_id) const {
  std::set<Id> out;
  for (const auto& c : comparisons)
    if (c.risk_factor_id == risk_factor_id) out.insert({c.relation.a, c.relation.b});
  return {out.begin(), out.end()};
}

// Mutations ----------------------------------------------------------------

namespace {

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

json violations_json(const std::vector<Violation>& v) { return json(v); }

void check_characterization(const Workspace& ws, const Characterization& c) {
  if (c.id.empty()) throw ValidationFailed("characterization id is empty");
  if (!ws.risk_factors.contains(c.risk_factor_id))
    throw ValidationFailed("unknown risk factor", {{"risk_factor_id", c.risk_factor_id}});
  const auto& q = ws.questionnaire_for(c.risk_factor_id);
  const auto report = validate_characterization(c, q);
  if (!report.empty())
    throw ValidationFailed("characterization does not match its questionnaire",
                           {{"characterization_id", c.id}, {"violations", violations_json(report)}});
}

void check_mutable(const Workspace& ws, const Id& characterization_id) {
  if (ws.characterization(characterization_id).status == Status::peer_reviewed)
    throw ImmutableRecord("peer-reviewed records cannot change", {{"characterization_id", characterization_id}});
}

void check_unit(double v, const char* what) {
  if (!in_unit_interval(v)) throw ValidationFailed(std::string(what) + " outside [0,1]", {{what, v}});
}

void check_region_pos(const LikelihoodRegion& r, double lok, double pos) {
  const auto v = validate_pos(r, lok, pos);
  if (!v.accepted)
    throw PosRejected("POS outside the allowed region",
                      {{"lok", lok}, {"pos", pos}, {"nearest", v.nearest}, {"allowed", allowed_intervals(r, lok)}});
}

void require_review_ready(const Workspace& ws, const Id& cid) {
  auto a = ws.assessments.find(cid);
  if (a == ws.assessments.end() || !a->second.global_lok || !a->second.consensus_pos)
    throw ValidationFailed("peer review needs a global LOK and a consensus POS", {{"characterization_id", cid}});
}

void put_questionnaire(Workspace& ws, const Questionnaire& q, const std::optional<std::string>& name) {
  const auto problems = validate_questionnaire(q);
  if (!problems.empty()) throw ValidationFailed("malformed questionnaire", {{"problems", problems}});
  if (q.id.empty() || q.risk_factor_id.empty())
    throw ValidationFailed("questionnaire needs an id and a risk factor id");
  auto rf = ws.risk_factors.find(q.risk_factor_id);
  if (rf != ws.risk_factors.end()) {
    auto old = ws.questionnaires.find(rf->second.questionnaire_id);
    const bool used = !ws.characterizations_of(q.risk_factor_id).empty();
    if (old != ws.questionnaires.end() && used && old->second.layout_id() != q.layout_id())
      throw ValidationFailed("questionnaire layout is in use by existing characterizations",
                             {{"risk_factor_id", q.risk_factor_id}, {"layout_id", old->second.layout_id()}});
    if (old != ws.questionnaires.end() && old->first != q.id) ws.questionnaires.erase(old);
    rf->second.questionnaire_id = q.id;
    if (name) rf->second.name = *name;
  } else {
    ws.risk_factors[q.risk_factor_id] = RiskFactor{q.risk_factor_id, name.value_or(q.risk_factor_id), q.id};
  }
  for (const auto& [id, other] : ws.questionnaires)
    if (id == q.id && other.risk_factor_id != q.risk_factor_id)
      throw ValidationFailed("questionnaire id already belongs to another risk factor", {{"questionnaire_id", q.id}});
  ws.questionnaires[q.id] = q;
}

bool put_characterization(Workspace& ws, const Characterization& c, bool allow_reviewed) {
  check_characterization(ws, c);
  auto it = ws.characterizations.find(c.id);
  if (it == ws.characterizations.end()) {
    if (c.status == Status::peer_reviewed && !allow_reviewed)
      throw ValidationFailed("new records cannot start peer-reviewed; use import", {{"characterization_id", c.id}});
    ws.characterizations[c.id] = c;
    return true;
  }
  const auto& old = it->second;
  if (old == c) return false;
  if (old.status == Status::peer_reviewed)
    throw ImmutableRecord("peer-reviewed records cannot change", {{"characterization_id", c.id}});
  if (!can_transition(old.status, c.status))
    throw ValidationFailed("status can only move forward",
                           {{"from", to_string(old.status)}, {"to", to_string(c.status)}});
  if (old.risk_factor_id != c.risk_factor_id) {
    for (const auto& cmp : ws.comparisons)
      if (cmp.relation.a == c.id || cmp.relation.b == c.id)
        throw ValidationFailed("characterization is referenced by comparisons; risk factor is fixed",
                               {{"characterization_id", c.id}});
  }
  if (c.status == Status::peer_reviewed && !allow_reviewed) require_review_ready(ws, c.id);
  it->second = c;
  return true;
}

ApplyResult apply(const Workspace& base, const mutation::PutQuestionnaire& m) {
  ApplyResult r{base};
  put_questionnaire(r.workspace, m.questionnaire, m.risk_factor_name);
  r.changed = !(r.workspace == base);
  r.detail = {{"layout_id", m.questionnaire.layout_id()}};
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::AddExpert& m) {
  if (m.expert.id.empty()) throw ValidationFailed("expert id is empty");
  ApplyResult r{base};
  auto it = base.experts.find(m.expert.id);
  if (it != base.experts.end()) {
    r.changed = !(it->second == m.expert);
    if (r.changed) r.workspace.experts[m.expert.id] = m.expert;
    return r;
  }
  r.workspace.experts[m.expert.id] = m.expert;
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::PutCharacterization& m) {
  ApplyResult r{base};
  r.changed = put_characterization(r.workspace, m.characterization, false);
  if (r.changed && m.characterization.status == Status::peer_reviewed) ++r.workspace.training_revision;
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::SetStatus& m) {
  ApplyResult r{base};
  auto c = base.characterization(m.characterization_id);
  if (c.status == m.status && c.status != Status::peer_reviewed) {
    r.changed = false;
    return r;
  }
  if (c.status == Status::peer_reviewed)
    throw ImmutableRecord("peer-reviewed records cannot change", {{"characterization_id", c.id}});
  if (!can_transition(c.status, m.status))
    throw ValidationFailed("status can only move forward", {{"from", to_string(c.status)}, {"to", to_string(m.status)}});
  if (m.status == Status::peer_reviewed) {
    require_review_ready(base, c.id);
    ++r.workspace.training_revision;
  }
  r.workspace.characterizations[c.id].status = m.status;
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::AddComparison& m) {
  if (!base.experts.contains(m.expert_id)) throw NotFound("unknown expert", {{"expert_id", m.expert_id}});
  const auto& a = base.characterization(m.relation.a);
  const auto& b = base.characterization(m.relation.b);
  if (a.risk_factor_id != b.risk_factor_id)
    throw ValidationFailed("comparisons must stay within one risk factor",
                           {{"a", a.risk_factor_id}, {"b", b.risk_factor_id}});
  const auto g = base.graph(m.expert_id, a.risk_factor_id);
  ApplyResult r{base};
  if (m.relation.a != m.relation.b && g.implies(m.relation)) {
    r.changed = false;
    r.detail = {{"implied", true}, {"relation", m.relation}};
    return r;
  }
  (void)add_comparison(g, m.relation);  // throws on contradiction
  const Id cid = "c" + std::to_string(base.next_comparison);
  r.workspace.comparisons.push_back({cid, m.expert_id, a.risk_factor_id, m.relation});
  ++r.workspace.next_comparison;
  r.detail = {{"implied", false}, {"comparison_id", cid}, {"relation", m.relation}};
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::RemoveComparison& m) {
  ApplyResult r{base};
  auto& cs = r.workspace.comparisons;
  auto it = std::find_if(cs.begin(), cs.end(), [&](const auto& c) {
    return c.id == m.comparison_id && c.expert_id == m.expert_id;
  });
  if (it == cs.end())
    throw NotFound("unknown comparison", {{"comparison_id", m.comparison_id}, {"expert_id", m.expert_id}});
  r.detail = {{"comparison_id", it->id}, {"relation", it->relation}};
  cs.erase(it);
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::RecordPosEntry& m) {
  const auto& e = m.entry;
  if (!base.experts.contains(e.expert_id)) throw NotFound("unknown expert", {{"expert_id", e.expert_id}});
  check_mutable(base, e.characterization_id);
  check_unit(e.pos, "pos");
  check_unit(e.lok_used, "lok_used");
  check_region_pos(base.region, e.lok_used, e.pos);
  ApplyResult r{base};
  auto& entries = r.workspace.pos_entries;
  auto it = std::find_if(entries.begin(), entries.end(), [&](const PosEntry& x) {
    return x.expert_id == e.expert_id && x.characterization_id == e.characterization_id;
  });
  if (it != entries.end()) {
    if (*it == e) {
      r.changed = false;
      return r;
    }
    *it = e;
  } else {
    entries.push_back(e);
  }
  auto& rec = r.workspace.assessments[e.characterization_id];
  rec.characterization_id = e.characterization_id;
  rec.expert_pos[e.expert_id] = e.pos;
  if (e.scale_kind == PosScaleKind::expert) rec.expert_lok[e.expert_id] = e.lok_used;
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::RecordConsensus& m) {
  check_mutable(base, m.characterization_id);
  check_unit(m.global_lok, "global_lok");
  check_unit(m.pos, "pos");
  check_region_pos(base.region, m.global_lok, m.pos);
  ApplyResult r{base};
  auto& rec = r.workspace.assessments[m.characterization_id];
  rec.characterization_id = m.characterization_id;
  rec.global_lok = m.global_lok;
  rec.consensus_pos = m.pos;
  r.changed = !(r.workspace == base);
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::SetRegion& m) {
  validate_region(m.region);
  ApplyResult r{base};
  r.workspace.region = m.region;
  r.changed = !(m.region == base.region);
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::SetThreshold& m) {
  if (!(m.t > 0.0 && m.t <= 1.0)) throw ValidationFailed("threshold t must lie in (0,1]", {{"t", m.t}});
  ApplyResult r{base};
  r.workspace.t = m.t;
  r.changed = m.t != base.t;
  return r;
}

ApplyResult apply(const Workspace& base, const mutation::Import& m) {
  ApplyResult r{base};
  auto& ws = r.workspace;
  for (const auto& q : m.questionnaires) put_questionnaire(ws, q, std::nullopt);
  for (const auto& rf : m.risk_factors) {
    auto it = ws.risk_factors.find(rf.id);
    if (it == ws.risk_factors.end())
      throw ValidationFailed("risk factor has no questionnaire in this import or workspace", {{"risk_factor_id", rf.id}});
    if (!rf.questionnaire_id.empty() && rf.questionnaire_id != it->second.questionnaire_id)
      throw ValidationFailed("risk factor names a different questionnaire", {{"risk_factor_id", rf.id}});
    it->second.name = rf.name;
  }
  for (const auto& e : m.experts) {
    if (e.id.empty()) throw ValidationFailed("expert id is empty");
    ws.experts[e.id] = e;
  }
  std::size_t reviewed = 0;
  for (const auto& c : m.characterizations) {
    const auto old = base.characterizations.find(c.id);
    if (old != base.characterizations.end() && old->second.status == Status::peer_reviewed) {
      if (old->second == c) continue;
      throw ImmutableRecord("peer-reviewed records cannot change", {{"characterization_id", c.id}});
    }
    put_characterization(ws, c, true);
    if (c.status == Status::peer_reviewed) ++reviewed;
  }
  for (const auto& a : m.assessments) {
    const auto& c = ws.characterization(a.characterization_id);
    const auto old = base.characterizations.find(c.id);
    if (old != base.characterizations.end() && old->second.status == Status::peer_reviewed) {
      auto prev = base.assessments.find(c.id);
      if (prev != base.assessments.end() && prev->second == a) continue;
      throw ImmutableRecord("peer-reviewed records cannot change", {{"characterization_id", c.id}});
    }
    const auto problems = validate_assessment(a);
    if (!problems.empty())
      throw ValidationFailed("malformed assessment", {{"characterization_id", c.id}, {"problems", problems}});
    ws.assessments[c.id] = a;
  }
  for (const auto& c : m.characterizations)
    if (c.status == Status::peer_reviewed) require_review_ready(ws, c.id);
  if (reviewed > 0) ++ws.training_revision;
  r.changed = !(ws == base);
  r.detail = {{"characterizations", m.characterizations.size()}, {"peer_reviewed", reviewed}};
  return r;
}

}  // namespace

std::string_view mutation_name(const Mutation& m) {
  return std::visit(Overloaded{
                        [](const mutation::PutQuestionnaire&) { return "put_questionnaire"; },
                        [](const mutation::AddExpert&) { return "add_expert"; },
                        [](const mutation::PutCharacterization&) { return "put_characterization"; },
                        [](const mutation::SetStatus&) { return "set_status"; },
                        [](const mutation::AddComparison&) { return "add_comparison"; },
                        [](const mutation::RemoveComparison&) { return "remove_comparison"; },
                        [](const mutation::RecordPosEntry&) { return "record_pos_entry"; },
                        [](const mutation::RecordConsensus&) { return "record_consensus"; },
                        [](const mutation::SetRegion&) { return "set_region"; },
                        [](const mutation::SetThreshold&) { return "set_threshold"; },
                        [](const mutation::Import&) { return "import"; },
                    },
                    m);
}

ApplyResult apply_mutation(const Workspace& ws, const Mutation& m) {
  return std::visit([&](const auto& x) { return apply(ws, x); }, m);
}

ApplyResult commit(const Workspace& ws, const Mutation& m, std::uint64_t expected_version) {
  if (ws.version != expected_version)
    throw VersionConflict("workspace changed since it was read",
                          {{"expected_version", expected_version}, {"current_version", ws.version}});
  auto r = apply_mutation(ws, m);
  r.workspace.version = ws.version + (r.changed ? 1 : 0);
  return r;
}

// JSON ---------------------------------------------------------------------

void to_json(json& j, const ComparisonRecord& c) {
  j = json(c.relation);
  j["id"] = c.id;
  j["expert_id"] = c.expert_id;
  j["risk_factor_id"] = c.risk_factor_id;
}

void from_json(const json& j, ComparisonRecord& c) {
  j.at("id").get_to(c.id);
  j.at("expert_id").get_to(c.expert_id);
  j.at("risk_factor_id").get_to(c.risk_factor_id);
  c.relation = j.get<Relation>();
}

namespace {
template <class T>
json values(const std::map<Id, T>& m) {
  json out = json::array();
  for (const auto& [id, v] : m) out.push_back(v);
  return out;
}

template <class T, class Key>
std::map<Id, T> keyed(const json& arr, Key key) {
  std::map<Id, T> out;
  for (const auto& item : arr) {
    auto v = item.get<T>();
    out[key(v)] = std::move(v);
  }
  return out;
}
}  // namespace

void to_json(json& j, const Workspace& ws) {
  j = json{{"schema_version", Workspace::kSchemaVersion},
           {"id", ws.id},
           {"version", ws.version},
           {"t", ws.t},
           {"region", ws.region},
           {"risk_factors", values(ws.risk_factors)},
           {"questionnaires", values(ws.questionnaires)},
           {"characterizations", values(ws.characterizations)},
           {"experts", values(ws.experts)},
           {"comparisons", ws.comparisons},
           {"next_comparison", ws.next_comparison},
           {"assessments", values(ws.assessments)},
           {"pos_entries", ws.pos_entries},
           {"training_revision", ws.training_revision}};
}

void from_json(const json& j, Workspace& ws) {
  const int schema = j.at("schema_version").get<int>();
  if (schema != Workspace::kSchemaVersion)
    throw ParseError("unsupported schema_version", {{"schema_version", schema}});
  j.at("id").get_to(ws.id);
  j.at("version").get_to(ws.version);
  ws.t = j.value("t", kDefaultThreshold);
  ws.region = j.contains("region") ? j["region"].get<LikelihoodRegion>() : LikelihoodRegion::default_region();
  ws.risk_factors = keyed<RiskFactor>(j.value("risk_factors", json::array()), [](const auto& v) { return v.id; });
  ws.questionnaires = keyed<Questionnaire>(j.value("questionnaires", json::array()), [](const auto& v) { return v.id; });
  ws.characterizations =
      keyed<Characterization>(j.value("characterizations", json::array()), [](const auto& v) { return v.id; });
  ws.experts = keyed<Expert>(j.value("experts", json::array()), [](const auto& v) { return v.id; });
  ws.comparisons = j.value("comparisons", json::array()).get<std::vector<ComparisonRecord>>();
  ws.next_comparison = j.value("next_comparison", std::uint64_t{1});
  ws.assessments = keyed<AssessmentRecord>(j.value("assessments", json::array()),
                                           [](const auto& v) { return v.characterization_id; });
  ws.pos_entries = j.value("pos_entries", json::array()).get<std::vector<PosEntry>>();
  ws.training_revision = j.value("training_revision", std::uint64_t{0});
}

json mutation_to_json(const Mutation& m) {
  json j = std::visit(Overloaded{
                     [](const mutation::PutQuestionnaire& x) {
                       json o{{"questionnaire", x.questionnaire}};
                       if (x.risk_factor_name) o["risk_factor_name"] = *x.risk_factor_name;
                       return o;
                     },
                     [](const mutation::AddExpert& x) { return json{{"expert", x.expert}}; },
                     [](const mutation::PutCharacterization& x) { return json{{"characterization", x.characterization}}; },
                     [](const mutation::SetStatus& x) {
                       return json{{"characterization_id", x.characterization_id}, {"status", to_string(x.status)}};
                     },
                     [](const mutation::AddComparison& x) {
                       json o = x.relation;
                       o["expert_id"] = x.expert_id;
                       return o;
                     },
                     [](const mutation::RemoveComparison& x) {
                       return json{{"expert_id", x.expert_id}, {"comparison_id", x.comparison_id}};
                     },
                     [](const mutation::RecordPosEntry& x) { return json{{"entry", x.entry}}; },
                     [](const mutation::RecordConsensus& x) {
                       return json{{"characterization_id", x.characterization_id},
                                   {"global_lok", x.global_lok},
                                   {"pos", x.pos}};
                     },
                     [](const mutation::SetRegion& x) { return json{{"region", x.region}}; },
                     [](const mutation::SetThreshold& x) { return json{{"t", x.t}}; },
                     [](const mutation::Import& x) {
                       return json{{"questionnaires", x.questionnaires},
                                   {"risk_factors", x.risk_factors},
                                   {"experts", x.experts},
                                   {"characterizations", x.characterizations},
                                   {"assessments", x.assessments}};
                     },
                 },
                 m);
  j["op"] = mutation_name(m);
  return j;
}

Mutation mutation_from_json(const json& j) {
  Mutation m;
  const auto op = j.at("op").get<std::string>();
  if (op == "put_questionnaire") {
    mutation::PutQuestionnaire x{j.at("questionnaire").get<Questionnaire>(), std::nullopt};
    if (j.contains("risk_factor_name")) x.risk_factor_name = j["risk_factor_name"].get<std::string>();
    m = x;
  } else if (op == "add_expert") {
    m = mutation::AddExpert{j.at("expert").get<Expert>()};
  } else if (op == "put_characterization") {
    m = mutation::PutCharacterization{j.at("characterization").get<Characterization>()};
  } else if (op == "set_status") {
    m = mutation::SetStatus{j.at("characterization_id").get<Id>(), status_from_string(j.at("status").get<std::string>())};
  } else if (op == "add_comparison") {
    m = mutation::AddComparison{j.at("expert_id").get<Id>(), j.get<Relation>()};
  } else if (op == "remove_comparison") {
    m = mutation::RemoveComparison{j.at("expert_id").get<Id>(), j.at("comparison_id").get<Id>()};
  } else if (op == "record_pos_entry") {
    m = mutation::RecordPosEntry{j.at("entry").get<PosEntry>()};
  } else if (op == "record_consensus") {
    m = mutation::RecordConsensus{j.at("characterization_id").get<Id>(), j.at("global_lok").get<double>(),
                                  j.at("pos").get<double>()};
  } else if (op == "set_region") {
    m = mutation::SetRegion{j.at("region").get<LikelihoodRegion>()};
  } else if (op == "set_threshold") {
    m = mutation::SetThreshold{j.at("t").get<double>()};
  } else if (op == "import") {
    mutation::Import x;
    x.questionnaires = j.value("questionnaires", json::array()).get<std::vector<Questionnaire>>();
    x.risk_factors = j.value("risk_factors", json::array()).get<std::vector<RiskFactor>>();
    x.experts = j.value("experts", json::array()).get<std::vector<Expert>>();
    x.characterizations = j.value("characterizations", json::array()).get<std::vector<Characterization>>();
    x.assessments = j.value("assessments", json::array()).get<std::vector<AssessmentRecord>>();
    m = std::move(x);
  } else {
    throw InvalidArgument("unknown mutation op", {{"op", op}});
  }
  return m;
}

// Persistence --------------------------------------------------------------

std::string snapshot(const Workspace& ws) { return json(ws).dump(2) + "\n"; }

Workspace parse_workspace(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("workspace file is not valid JSON", {{"path", origin}, {"byte", e.byte}, {"reason", e.what()}});
  }
  try {
    return j.get<Workspace>();
  } catch (const ParseError& e) {
    auto d = e.details();
    d["path"] = origin;
    throw ParseError(e.what(), d);
  } catch (const json::exception& e) {
    throw ParseError("workspace file does not match the schema", {{"path", origin}, {"reason", e.what()}});
  } catch (const Error& e) {
    throw ParseError("workspace file does not match the schema", {{"path", origin}, {"reason", e.what()}});
  }
}

Workspace load_workspace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("workspace file not found", {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_workspace(ss.str(), path.string());
}

void save_workspace(const Workspace& ws, const fs::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write workspace file", {{"path", tmp.string()}});
    out << snapshot(ws);
    if (!out.flush()) throw IoError("cannot write workspace file", {{"path", tmp.string()}});
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace workspace file", {{"path", path.string()}, {"reason", ec.message()}});
}

bool valid_workspace_id(const std::string& id) {
  if (id.empty() || id.size() > 64 || id.front() == '.' || id.front() == '-') return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  });
}

WorkspaceStore::WorkspaceStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_))
    throw IoError("storage directory is not usable", {{"path", root_.string()}, {"reason", ec.message()}});
  const auto probe = root_ / ".kara-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("storage directory is not writable", {{"path", root_.string()}});
  }
  fs::remove(probe, ec);
}

fs::path WorkspaceStore::snapshot_path(const Id& id) const { return root_ / (id + ".json"); }
fs::path WorkspaceStore::log_path(const Id& id) const { return root_ / (id + ".log.jsonl"); }

namespace {
void append_log(const fs::path& path, const json& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to mutation log", {{"path", path.string()}});
  out << line.dump() << "\n";
}
}  // namespace

std::shared_ptr<const Workspace> WorkspaceStore::create(Workspace initial) {
  if (!valid_workspace_id(initial.id))
    throw InvalidArgument("workspace id may only use letters, digits, '-', '_' and '.'", {{"id", initial.id}});
  validate_region(initial.region);
  if (!(initial.t > 0.0 && initial.t <= 1.0)) throw ValidationFailed("threshold t must lie in (0,1]", {{"t", initial.t}});
  std::lock_guard lock(mutex_);
  if (cache_.contains(initial.id) || fs::exists(snapshot_path(initial.id)))
    throw AlreadyExists("workspace already exists", {{"id", initial.id}});
  initial.version = 0;
  save_workspace(initial, snapshot_path(initial.id));
  append_log(log_path(initial.id), json{{"version", 0}, {"op", "create"}, {"t", initial.t}, {"region", initial.region}});
  auto ptr = std::make_shared<const Workspace>(std::move(initial));
  cache_[ptr->id] = ptr;
  return ptr;
}

std::shared_ptr<const Workspace> WorkspaceStore::get_locked(const Id& id) {
  if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  if (!valid_workspace_id(id) || !fs::exists(snapshot_path(id))) throw NotFound("unknown workspace", {{"id", id}});
  auto ptr = std::make_shared<const Workspace>(load_workspace(snapshot_path(id)));
  cache_[id] = ptr;
  return ptr;
}

std::shared_ptr<const Workspace> WorkspaceStore::get(const Id& id) {
  std::lock_guard lock(mutex_);
  return get_locked(id);
}

bool WorkspaceStore::exists(const Id& id) {
  std::lock_guard lock(mutex_);
  return cache_.contains(id) || (valid_workspace_id(id) && fs::exists(snapshot_path(id)));
}

std::vector<Id> WorkspaceStore::list() {
  std::lock_guard lock(mutex_);
  std::set<Id> ids;
  for (const auto& [id, ws] : cache_) ids.insert(id);
  for (const auto& entry : fs::directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 5 && name.ends_with(".json") && !name.ends_with(".log.jsonl"))
      ids.insert(name.substr(0, name.size() - 5));
  }
  return {ids.begin(), ids.end()};
}

CommitResult WorkspaceStore::commit(const Id& id, const Mutation& m, std::optional<std::uint64_t> expected_version) {
  std::lock_guard lock(mutex_);
  const auto current = get_locked(id);
  auto r = kara::commit(*current, m, expected_version.value_or(current->version));
  if (!r.changed) return {current, false, std::move(r.detail)};
  append_log(log_path(id), json{{"version", r.workspace.version}, {"mutation", mutation_to_json(m)}});
  save_workspace(r.workspace, snapshot_path(id));
  auto ptr = std::make_shared<const Workspace>(std::move(r.workspace));
  cache_[id] = ptr;
  return {ptr, true, std::move(r.detail)};
}

}  // namespace kara
