#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kara/errors.hpp"

namespace kara {

using Id = std::string;

/// 64-bit FNV-1a. Used wherever a hash must be identical across runs,
/// platforms and compilers (layout fingerprints, CV fold assignment).
std::uint64_t stable_hash(std::string_view text) noexcept;

struct RiskFactor {
  Id id;
  std::string name;
  Id questionnaire_id;

  friend bool operator==(const RiskFactor&, const RiskFactor&) = default;
};

struct Option {
  Id id;
  std::string label;

  friend bool operator==(const Option&, const Option&) = default;
};

struct Question {
  Id id;
  std::string text;
  std::vector<Option> options;

  friend bool operator==(const Question&, const Question&) = default;
};

/// Ordered questions. The order defines the one-hot layout, so it is part
/// of the questionnaire identity (see layout_id()).
struct Questionnaire {
  Id id;
  Id risk_factor_id;
  std::vector<Question> questions;

  const Question* find_question(std::string_view question_id) const;
  std::size_t width() const;  // total option count
  std::string layout_id() const;

  friend bool operator==(const Questionnaire&, const Questionnaire&) = default;
};

enum class Status { draft, assessed, peer_reviewed };

std::string_view to_string(Status s) noexcept;
Status status_from_string(std::string_view s);

/// Lifecycle is linear and forward-only: draft -> assessed -> peer_reviewed.
/// Staying in the same state is allowed except for peer_reviewed records,
/// which are frozen.
bool can_transition(Status from, Status to) noexcept;

struct Characterization {
  Id id;
  Id prospect_id;
  Id risk_factor_id;
  std::map<Id, Id> answers;  // question id -> option id, possibly partial
  Status status = Status::draft;

  friend bool operator==(const Characterization&, const Characterization&) = default;
};

struct Expert {
  Id id;
  std::string display_name;

  friend bool operator==(const Expert&, const Expert&) = default;
};

struct AssessmentRecord {
  Id characterization_id;
  std::map<Id, double> expert_lok;
  std::optional<double> global_lok;
  std::map<Id, double> expert_pos;
  std::optional<double> consensus_pos;

  friend bool operator==(const AssessmentRecord&, const AssessmentRecord&) = default;
};

struct Violation {
  Id question_id;
  Id option_id;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Report-style check of a characterization against its questionnaire.
/// Empty result iff every answered question exists and every chosen option
/// belongs to its question.
std::vector<Violation> validate_characterization(const Characterization& c,
                                                 const Questionnaire& q);

/// Structural problems of a questionnaire (fewer than two options,
/// duplicate question or option ids). Empty when well formed.
std::vector<std::string> validate_questionnaire(const Questionnaire& q);

/// Problems with an assessment record (scores outside [0,1], consensus
/// without a global LOK). Empty when well formed.
std::vector<std::string> validate_assessment(const AssessmentRecord& r);

/// Prospect POS under independent risk factors: the product of factor POS.
double combine_prospect_pos(std::span<const double> factor_pos);

inline bool in_unit_interval(double v) noexcept { return v >= 0.0 && v <= 1.0; }

void to_json(json& j, const RiskFactor& v);
void from_json(const json& j, RiskFactor& v);
void to_json(json& j, const Option& v);
void from_json(const json& j, Option& v);
void to_json(json& j, const Question& v);
void from_json(const json& j, Question& v);
void to_json(json& j, const Questionnaire& v);
void from_json(const json& j, Questionnaire& v);
void to_json(json& j, const Characterization& v);
void from_json(const json& j, Characterization& v);
void to_json(json& j, const Expert& v);
void from_json(const json& j, Expert& v);
void to_json(json& j, const AssessmentRecord& v);
void from_json(const json& j, AssessmentRecord& v);
void to_json(json& j, const Violation& v);

}  // namespace kara
