#include "kara/core.hpp"

#include <cstdio>
#include <set>

namespace kara {

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

const Question* Questionnaire::find_question(std::string_view question_id) const {
  for (const auto& q : questions)
    if (q.id == question_id) return &q;
  return nullptr;
}

std::size_t Questionnaire::width() const {
  std::size_t w = 0;
  for (const auto& q : questions) w += q.options.size();
  return w;
}

std::string Questionnaire::layout_id() const {
  // Unit separators keep ("ab","c") and ("a","bc") apart.
  std::string key = id;
  for (const auto& q : questions) {
    key += '\x1f';
    key += q.id;
    for (const auto& o : q.options) {
      key += '\x1e';
      key += o.id;
    }
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(stable_hash(key)));
  return id + "@" + buf;
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::draft: return "draft";
    case Status::assessed: return "assessed";
    case Status::peer_reviewed: return "peer_reviewed";
  }
  return "draft";
}

Status status_from_string(std::string_view s) {
  if (s == "draft") return Status::draft;
  if (s == "assessed") return Status::assessed;
  if (s == "peer_reviewed") return Status::peer_reviewed;
  throw InvalidArgument("unknown characterization status '" + std::string(s) + "'");
}

bool can_transition(Status from, Status to) noexcept {
  if (from == Status::peer_reviewed) return false;
  return static_cast<int>(to) >= static_cast<int>(from);
}

std::vector<Violation> validate_characterization(const Characterization& c,
                                                 const Questionnaire& q) {
  std::vector<Violation> out;
  for (const auto& [qid, oid] : c.answers) {
    const Question* question = q.find_question(qid);
    if (!question) {
      out.push_back({qid, oid, "unknown question '" + qid + "'"});
      continue;
    }
    bool found = false;
    for (const auto& o : question->options) found = found || o.id == oid;
    if (!found)
      out.push_back({qid, oid, "option '" + oid + "' does not belong to question '" + qid + "'"});
  }
  return out;
}

std::vector<std::string> validate_questionnaire(const Questionnaire& q) {
  std::vector<std::string> out;
  std::set<Id> qids;
  for (const auto& question : q.questions) {
    if (!qids.insert(question.id).second) out.push_back("duplicate question id '" + question.id + "'");
    if (question.options.size() < 2)
      out.push_back("question '" + question.id + "' has fewer than two options");
    std::set<Id> oids;
    for (const auto& o : question.options)
      if (!oids.insert(o.id).second)
        out.push_back("duplicate option id '" + o.id + "' in question '" + question.id + "'");
  }
  return out;
}

std::vector<std::string> validate_assessment(const AssessmentRecord& r) {
  std::vector<std::string> out;
  auto check = [&](double v, const std::string& what) {
    if (!in_unit_interval(v)) out.push_back(what + " outside [0,1]");
  };
  for (const auto& [e, v] : r.expert_lok) check(v, "expert_lok[" + e + "]");
  for (const auto& [e, v] : r.expert_pos) check(v, "expert_pos[" + e + "]");
  if (r.global_lok) check(*r.global_lok, "global_lok");
  if (r.consensus_pos) {
    check(*r.consensus_pos, "consensus_pos");
    if (!r.global_lok) out.push_back("consensus_pos present without global_lok");
  }
  return out;
}

double combine_prospect_pos(std::span<const double> factor_pos) {
  if (factor_pos.empty()) throw InvalidArgument("combine_prospect_pos needs at least one factor");
  double p = 1.0;
  for (double v : factor_pos) {
    if (!in_unit_interval(v)) throw InvalidArgument("factor POS outside [0,1]", {{"value", v}});
    p *= v;
  }
  return p;
}

// JSON ---------------------------------------------------------------------

void to_json(json& j, const RiskFactor& v) {
  j = json{{"id", v.id}, {"name", v.name}, {"questionnaire_id", v.questionnaire_id}};
}
void from_json(const json& j, RiskFactor& v) {
  j.at("id").get_to(v.id);
  v.name = j.value("name", v.id);
  v.questionnaire_id = j.value("questionnaire_id", std::string{});
}

void to_json(json& j, const Option& v) { j = json{{"option_id", v.id}, {"label", v.label}}; }
void from_json(const json& j, Option& v) {
  j.at("option_id").get_to(v.id);
  v.label = j.value("label", v.id);
}

void to_json(json& j, const Question& v) {
  j = json{{"id", v.id}, {"text", v.text}, {"options", v.options}};
}
void from_json(const json& j, Question& v) {
  j.at("id").get_to(v.id);
  v.text = j.value("text", std::string{});
  j.at("options").get_to(v.options);
}

void to_json(json& j, const Questionnaire& v) {
  j = json{{"id", v.id}, {"risk_factor_id", v.risk_factor_id}, {"questions", v.questions}};
}
void from_json(const json& j, Questionnaire& v) {
  j.at("id").get_to(v.id);
  j.at("risk_factor_id").get_to(v.risk_factor_id);
  j.at("questions").get_to(v.questions);
}

void to_json(json& j, const Characterization& v) {
  j = json{{"id", v.id},
           {"prospect_id", v.prospect_id},
           {"risk_factor_id", v.risk_factor_id},
           {"answers", v.answers},
           {"status", to_string(v.status)}};
}
void from_json(const json& j, Characterization& v) {
  j.at("id").get_to(v.id);
  v.prospect_id = j.value("prospect_id", v.id);
  j.at("risk_factor_id").get_to(v.risk_factor_id);
  v.answers = j.value("answers", std::map<Id, Id>{});
  v.status = status_from_string(j.value("status", std::string("draft")));
}

void to_json(json& j, const Expert& v) { j = json{{"id", v.id}, {"display_name", v.display_name}}; }
void from_json(const json& j, Expert& v) {
  j.at("id").get_to(v.id);
  v.display_name = j.value("display_name", v.id);
}

void to_json(json& j, const AssessmentRecord& v) {
  j = json{{"characterization_id", v.characterization_id},
           {"expert_lok", v.expert_lok},
           {"global_lok", v.global_lok ? json(*v.global_lok) : json(nullptr)},
           {"expert_pos", v.expert_pos},
           {"consensus_pos", v.consensus_pos ? json(*v.consensus_pos) : json(nullptr)}};
}
void from_json(const json& j, AssessmentRecord& v) {
  j.at("characterization_id").get_to(v.characterization_id);
  v.expert_lok = j.value("expert_lok", std::map<Id, double>{});
  v.expert_pos = j.value("expert_pos", std::map<Id, double>{});
  v.global_lok.reset();
  v.consensus_pos.reset();
  if (j.contains("global_lok") && !j["global_lok"].is_null()) v.global_lok = j["global_lok"].get<double>();
  if (j.contains("consensus_pos") && !j["consensus_pos"].is_null())
    v.consensus_pos = j["consensus_pos"].get<double>();
}

void to_json(json& j, const Violation& v) {
  j = json{{"question_id", v.question_id}, {"option_id", v.option_id}, {"message", v.message}};
}

}  // namespace kara
