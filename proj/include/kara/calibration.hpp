#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kara/comparison_graph.hpp"
#include "kara/core.hpp"
#include "kara/simplex.hpp"

namespace kara {

inline constexpr double kDefaultThreshold = 0.05;
inline constexpr double kScoreTolerance = 1e-9;

/// Adjust reference LOK estimates minimally (total absolute deviation)
/// subject to L_i - L_j >= t for (i,j) in gt, L_i = L_j for eq pairs, and
/// 0 <= L <= 1.
struct CalibrationProblem {
  std::vector<Id> ids;
  std::map<Id, double> reference;
  std::vector<std::pair<Id, Id>> gt;
  std::vector<std::pair<Id, Id>> eq;
  double t = kDefaultThreshold;
};

enum class ScaleKind { reference, expert, global };

std::string_view to_string(ScaleKind k) noexcept;

struct LokScale {
  ScaleKind kind = ScaleKind::reference;
  Id expert_id;  // only for expert scales
  std::map<Id, double> scores;
  double objective = 0.0;  // sum |L_i - L_Ri|
};

/// Verbatim LP: variables L_i, u_i, v_i for every id (in that order, 3n
/// total) with L_i - u_i + v_i = L_Ri, one row per gt pair, one per eq pair
/// and one upper bound L_i <= 1 per id. Objective sum(u_i + v_i).
lp::LinearProgram to_standard_form(const CalibrationProblem& p);

struct StrictChain {
  std::size_t length = 0;
  std::vector<std::pair<Id, Id>> edges;  // gt pairs along the chain, greatest first
  std::vector<Id> path;                  // ids visited, including equality hops
};

/// Longest path in the gt DAG after contracting equality classes. Throws
/// MalformedProblem on a cycle or a gt pair inside an equality class.
StrictChain longest_strict_chain(std::span<const std::pair<Id, Id>> gt,
                                 std::span<const std::pair<Id, Id>> eq);

/// Structural validation (ids, reference values, t, consistency). Throws
/// MalformedProblem.
void validate_problem(const CalibrationProblem& p);

/// Optimal calibrated scale. Among LP optima the one closest to the
/// reference in squared deviation (over the face picked out by the LP dual)
/// is returned. Throws InfeasibleComparisonChain when the longest strict
/// chain needs more than the unit interval, MalformedProblem otherwise.
LokScale calibrate(const CalibrationProblem& p, ScaleKind kind = ScaleKind::reference,
                   const Id& expert_id = {});

/// Builds a problem from a closed comparison set.
CalibrationProblem make_problem(std::vector<Id> ids, std::map<Id, double> reference,
                                const GtEq& relations, double t);

/// True when scores satisfy every constraint within kScoreTolerance.
bool satisfies_constraints(const CalibrationProblem& p, const std::map<Id, double>& scores,
                           double tol = kScoreTolerance);

double total_absolute_deviation(const CalibrationProblem& p, const std::map<Id, double>& scores);

void to_json(json& j, const CalibrationProblem& p);
void from_json(const json& j, CalibrationProblem& p);
void to_json(json& j, const LokScale& s);
void to_json(json& j, const StrictChain& c);

}  // namespace kara
