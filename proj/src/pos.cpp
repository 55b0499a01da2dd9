#include "kara/pos.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kara {

double Curve::operator()(double lok) const {
  if (points.empty()) return 0.0;
  if (lok <= points.front().first) return points.front().second;
  if (lok >= points.back().first) return points.back().second;
  auto hi = std::upper_bound(points.begin(), points.end(), lok,
                             [](double v, const auto& p) { return v < p.first; });
  auto lo = hi - 1;
  if (hi->first == lo->first) return hi->second;
  const double f = (lok - lo->first) / (hi->first - lo->first);
  return lo->second + f * (hi->second - lo->second);
}

LikelihoodRegion LikelihoodRegion::default_region() {
  return {Curve{{{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.45}}}, Curve{{{0.0, 0.05}, {1.0, 0.5}}}};
}

LikelihoodRegion LikelihoodRegion::unconstrained() {
  return {Curve{{{0.0, 0.0}, {1.0, 0.0}}}, Curve{{{0.0, 0.5}, {1.0, 0.5}}}};
}

void validate_region(const LikelihoodRegion& r) {
  std::vector<std::string> problems;
  auto check_curve = [&](const Curve& c, const char* name) {
    if (c.points.size() < 2) {
      problems.push_back(std::string(name) + " needs at least two breakpoints");
      return;
    }
    if (c.points.front().first != 0.0) problems.push_back(std::string(name) + " must start at lok 0");
    if (c.points.back().first != 1.0) problems.push_back(std::string(name) + " must end at lok 1");
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto& [l, v] = c.points[i];
      if (v < 0.0 || v > 0.5) problems.push_back(std::string(name) + " value outside [0,0.5]");
      if (i > 0 && l < c.points[i - 1].first) problems.push_back(std::string(name) + " breakpoints not sorted");
      if (i > 0 && v < c.points[i - 1].second) problems.push_back(std::string(name) + " is decreasing");
    }
  };
  check_curve(r.inner, "inner");
  check_curve(r.outer, "outer");
  if (problems.empty()) {
    // Piecewise linear: comparing at the union of breakpoints is enough.
    std::set<double> at;
    for (const auto& p : r.inner.points) at.insert(p.first);
    for (const auto& p : r.outer.points) at.insert(p.first);
    for (double l : at)
      if (r.inner(l) > r.outer(l) + 1e-12) problems.push_back("inner exceeds outer at lok " + std::to_string(l));
  }
  if (!problems.empty()) throw ValidationFailed("invalid likelihood region", {{"problems", problems}});
}

std::vector<Interval> allowed_intervals(const LikelihoodRegion& r, double lok) {
  const double inner = r.inner(lok);
  const double outer = r.outer(lok);
  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  if (inner <= 0.0) return {{clip(0.5 - outer), clip(0.5 + outer)}};
  return {{clip(0.5 - outer), clip(0.5 - inner)}, {clip(0.5 + inner), clip(0.5 + outer)}};
}

double project_pos(const LikelihoodRegion& r, double lok, double pos) {
  constexpr double kTie = 1e-12;
  const auto intervals = allowed_intervals(r, lok);
  double best = std::clamp(pos, intervals.front().lo, intervals.front().hi);
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    const double cand = std::clamp(pos, intervals[i].lo, intervals[i].hi);
    const double d_best = std::abs(best - pos), d_cand = std::abs(cand - pos);
    if (d_cand < d_best - kTie) {
      best = cand;
    } else if (std::abs(d_cand - d_best) <= kTie) {
      const double m_best = std::abs(best - 0.5), m_cand = std::abs(cand - 0.5);
      if (m_cand < m_best - kTie || (std::abs(m_cand - m_best) <= kTie && cand < best)) best = cand;
    }
  }
  return best;
}

PosValidation validate_pos(const LikelihoodRegion& r, double lok, double pos) {
  for (const auto& iv : allowed_intervals(r, lok))
    if (iv.contains(pos)) return {true, pos};
  return {false, project_pos(r, lok, pos)};
}

double consensus_pos(std::span<const PosEntry> entries, const LikelihoodRegion& r, double global_lok) {
  if (entries.empty()) throw InvalidArgument("consensus POS needs at least one expert entry");
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.pos);
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  const double median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return validate_pos(r, global_lok, median).nearest;
}

std::vector<SimilarAssessment> similar_assessments(const Id& target_id, const OneHotVector& target,
                                                   std::span<const PriorAssessment> priors,
                                                   std::size_t k) {
  std::vector<SimilarAssessment> out;
  for (const auto& p : priors) {
    if (p.characterization_id == target_id) continue;
    out.push_back({p.characterization_id, similarity(target, p.vector), p.consensus_pos, p.global_lok});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.characterization_id < b.characterization_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

json region_plot_data(const LikelihoodRegion& r) {
  std::set<double> at;
  for (const auto& p : r.inner.points) at.insert(p.first);
  for (const auto& p : r.outer.points) at.insert(p.first);
  json left = json::array(), right = json::array();
  for (double l : at) left.push_back({0.5 - r.outer(l), l});
  for (auto it = at.rbegin(); it != at.rend(); ++it) left.push_back({0.5 - r.inner(*it), *it});
  for (double l : at) right.push_back({0.5 + r.inner(l), l});
  for (auto it = at.rbegin(); it != at.rend(); ++it) right.push_back({0.5 + r.outer(*it), *it});
  return json{{"axes", {{"x", "pos"}, {"y", "lok"}}},
              {"polygons", {left, right}},
              {"breakpoints", std::vector<double>(at.begin(), at.end())}};
}

void to_json(json& j, const Curve& c) {
  j = json::array();
  for (const auto& [l, v] : c.points) j.push_back({l, v});
}

void from_json(const json& j, Curve& c) {
  c.points.clear();
  for (const auto& p : j) c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
}

void to_json(json& j, const LikelihoodRegion& r) { j = json{{"inner", r.inner}, {"outer", r.outer}}; }

void from_json(const json& j, LikelihoodRegion& r) {
  j.at("inner").get_to(r.inner);
  j.at("outer").get_to(r.outer);
}

void to_json(json& j, const Interval& i) { j = json::array({i.lo, i.hi}); }

void to_json(json& j, const PosEntry& e) {
  j = json{{"expert_id", e.expert_id},
           {"characterization_id", e.characterization_id},
           {"pos", e.pos},
           {"lok_used", e.lok_used},
           {"scale_kind", e.scale_kind == PosScaleKind::expert ? "expert" : "global"}};
}

void from_json(const json& j, PosEntry& e) {
  j.at("expert_id").get_to(e.expert_id);
  j.at("characterization_id").get_to(e.characterization_id);
  j.at("pos").get_to(e.pos);
  e.lok_used = j.value("lok_used", 0.0);
  const auto kind = j.value("scale_kind", std::string("expert"));
  if (kind == "expert") e.scale_kind = PosScaleKind::expert;
  else if (kind == "global") e.scale_kind = PosScaleKind::global;
  else throw InvalidArgument("scale_kind must be \"expert\" or \"global\"");
}

void to_json(json& j, const SimilarAssessment& s) {
  j = json{{"characterization_id", s.characterization_id},
           {"similarity", s.similarity},
           {"consensus_pos", s.consensus_pos ? json(*s.consensus_pos) : json(nullptr)},
           {"global_lok", s.global_lok ? json(*s.global_lok) : json(nullptr)}};
}

}  // namespace kara
