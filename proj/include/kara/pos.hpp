#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kara/core.hpp"
#include "kara/reference_lok.hpp"

namespace kara {

/// Piecewise-linear curve over lok in [0,1] given by sorted breakpoints.
struct Curve {
  std::vector<std::pair<double, double>> points;  // (lok, value)

  double operator()(double lok) const;
  friend bool operator==(const Curve&, const Curve&) = default;
};

/// Allowed (LOK, POS) pairs: inner(lok) <= |pos - 0.5| <= outer(lok).
struct LikelihoodRegion {
  Curve inner;
  Curve outer;

  /// Middle POS at low LOK, extreme POS at high LOK.
  static LikelihoodRegion default_region();
  /// inner == 0, outer == 0.5: every pair allowed.
  static LikelihoodRegion unconstrained();

  friend bool operator==(const LikelihoodRegion&, const LikelihoodRegion&) = default;
};

/// Throws ValidationFailed listing every broken region invariant.
void validate_region(const LikelihoodRegion& r);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 1e-12) const { return v >= lo - tol && v <= hi + tol; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// One interval when inner(lok) == 0, otherwise the two symmetric ones.
std::vector<Interval> allowed_intervals(const LikelihoodRegion& r, double lok);

/// Closest allowed POS; ties go toward 0.5, then to the lower value.
double project_pos(const LikelihoodRegion& r, double lok, double pos);

struct PosValidation {
  bool accepted = false;
  double nearest = 0.0;  // pos itself when accepted
};

PosValidation validate_pos(const LikelihoodRegion& r, double lok, double pos);

enum class PosScaleKind { expert, global };

struct PosEntry {
  Id expert_id;
  Id characterization_id;
  double pos = 0.0;
  double lok_used = 0.0;
  PosScaleKind scale_kind = PosScaleKind::expert;

  friend bool operator==(const PosEntry&, const PosEntry&) = default;
};

/// Median of the entries' POS projected into the region at global_lok.
double consensus_pos(std::span<const PosEntry> entries, const LikelihoodRegion& r, double global_lok);

/// A previously assessed characterization available for comparison.
struct PriorAssessment {
  Id characterization_id;
  OneHotVector vector;
  std::optional<double> consensus_pos;
  std::optional<double> global_lok;
};

struct SimilarAssessment {
  Id characterization_id;
  double similarity = 0.0;
  std::optional<double> consensus_pos;
  std::optional<double> global_lok;

  friend bool operator==(const SimilarAssessment&, const SimilarAssessment&) = default;
};

/// Top-k by one-hot similarity, descending, ties by id. The target itself
/// is skipped.
std::vector<SimilarAssessment> similar_assessments(const Id& target_id, const OneHotVector& target,
                                                   std::span<const PriorAssessment> priors,
                                                   std::size_t k);

/// Region outline for plotting: polygons in (pos, lok) coordinates.
json region_plot_data(const LikelihoodRegion& r);

void to_json(json& j, const Curve& c);
void from_json(const json& j, Curve& c);
void to_json(json& j, const LikelihoodRegion& r);
void from_json(const json& j, LikelihoodRegion& r);
void to_json(json& j, const Interval& i);
void to_json(json& j, const PosEntry& e);
void from_json(const json& j, PosEntry& e);
void to_json(json& j, const SimilarAssessment& s);

}  // namespace kara
