#include "kara/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kara/qp.hpp"

namespace kara {

std::string_view to_string(ScaleKind k) noexcept {
  switch (k) {
    case ScaleKind::reference: return "reference";
    case ScaleKind::expert: return "expert";
    case ScaleKind::global: return "global";
  }
  return "reference";
}

lp::LinearProgram to_standard_form(const CalibrationProblem& p) {
  const std::size_t n = p.ids.size();
  std::map<Id, std::size_t> pos;
  lp::LinearProgram out;
  for (std::size_t i = 0; i < n; ++i) {
    pos[p.ids[i]] = i;
    out.add_variable("L[" + p.ids[i] + "]", 0.0);
  }
  for (const auto& id : p.ids) out.add_variable("u[" + id + "]", 1.0);
  for (const auto& id : p.ids) out.add_variable("v[" + id + "]", 1.0);

  for (std::size_t i = 0; i < n; ++i)
    out.rows.push_back({{{i, 1.0}, {n + i, -1.0}, {2 * n + i, 1.0}},
                        lp::Sense::eq,
                        p.reference.at(p.ids[i]),
                        "dev[" + p.ids[i] + "]"});
  for (const auto& [i, j] : p.gt)
    out.rows.push_back({{{pos.at(i), 1.0}, {pos.at(j), -1.0}}, lp::Sense::ge, p.t, "gt[" + i + "," + j + "]"});
  for (const auto& [i, j] : p.eq)
    out.rows.push_back({{{pos.at(i), 1.0}, {pos.at(j), -1.0}}, lp::Sense::eq, 0.0, "eq[" + i + "," + j + "]"});
  for (std::size_t i = 0; i < n; ++i)
    out.rows.push_back({{{i, 1.0}}, lp::Sense::le, 1.0, "ub[" + p.ids[i] + "]"});
  return out;
}

namespace {

struct Contraction {
  std::vector<Id> nodes;                 // sorted
  std::map<Id, std::size_t> class_of;    // id -> class
  std::vector<std::vector<Id>> members;  // class -> ids
};

Contraction contract(std::set<Id> node_set, std::span<const std::pair<Id, Id>> eq) {
  Contraction c;
  c.nodes.assign(node_set.begin(), node_set.end());
  std::map<Id, std::size_t> pos;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) pos[c.nodes[i]] = i;
  std::vector<std::size_t> parent(c.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : eq) {
    auto x = find(pos.at(a)), y = find(pos.at(b));
    if (x != y) parent[std::max(x, y)] = std::min(x, y);
  }
  std::map<std::size_t, std::size_t> root_class;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    auto [it, fresh] = root_class.try_emplace(find(i), c.members.size());
    if (fresh) c.members.emplace_back();
    c.members[it->second].push_back(c.nodes[i]);
    c.class_of[c.nodes[i]] = it->second;
  }
  return c;
}

}  // namespace

StrictChain longest_strict_chain(std::span<const std::pair<Id, Id>> gt,
                                 std::span<const std::pair<Id, Id>> eq) {
  std::set<Id> nodes;
  for (const auto& [a, b] : gt) nodes.insert({a, b});
  for (const auto& [a, b] : eq) nodes.insert({a, b});
  const auto c = contract(nodes, eq);
  const std::size_t n = c.members.size();

  // For each class edge keep the smallest gt pair realizing it.
  std::vector<std::map<std::size_t, std::pair<Id, Id>>> succ(n);
  for (const auto& [hi, lo] : gt) {
    auto x = c.class_of.at(hi), y = c.class_of.at(lo);
    if (x == y)
      throw MalformedProblem("strict comparison inside an equality class",
                             {{"gt", {hi, lo}}});
    auto [it, fresh] = succ[x].try_emplace(y, std::pair{hi, lo});
    if (!fresh && std::pair{hi, lo} < it->second) it->second = {hi, lo};
  }

  // Longest path starting at each class, memoized DFS with cycle detection.
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> best(n, 0), next(n, n);
  auto visit = [&](auto&& self, std::size_t x) -> void {
    state[x] = 1;
    for (const auto& [y, edge] : succ[x]) {
      if (state[y] == 1) throw MalformedProblem("strict comparisons contain a cycle", {{"at", edge.first}});
      if (state[y] == 0) self(self, y);
      if (best[y] + 1 > best[x]) {
        best[x] = best[y] + 1;
        next[x] = y;
      }
    }
    state[x] = 2;
  };
  for (std::size_t x = 0; x < n; ++x)
    if (state[x] == 0) visit(visit, x);

  StrictChain chain;
  std::size_t start = n;
  for (std::size_t x = 0; x < n; ++x)
    if (start == n || best[x] > best[start]) start = x;
  if (start == n || best[start] == 0) return chain;

  chain.length = best[start];
  for (std::size_t x = start; next[x] != n; x = next[x]) {
    const auto& edge = succ[x].at(next[x]);
    chain.edges.push_back(edge);
    if (chain.path.empty() || chain.path.back() != edge.first) chain.path.push_back(edge.first);
    chain.path.push_back(edge.second);
  }
  return chain;
}

void validate_problem(const CalibrationProblem& p) {
  if (!(p.t > 0.0 && p.t <= 1.0)) throw MalformedProblem("threshold t must lie in (0, 1]", {{"t", p.t}});
  std::set<Id> ids;
  for (const auto& id : p.ids) {
    if (!ids.insert(id).second) throw MalformedProblem("duplicate id '" + id + "'");
    auto it = p.reference.find(id);
    if (it == p.reference.end()) throw MalformedProblem("missing reference LOK for '" + id + "'");
    if (!in_unit_interval(it->second))
      throw MalformedProblem("reference LOK outside [0,1]", {{"id", id}, {"value", it->second}});
  }
  std::vector<Relation> rels;
  auto known = [&](const std::pair<Id, Id>& pr, const char* what) {
    for (const auto* id : {&pr.first, &pr.second})
      if (!ids.contains(*id))
        throw MalformedProblem(std::string(what) + " pair references unknown id '" + *id + "'");
    if (pr.first == pr.second) throw MalformedProblem(std::string(what) + " pair compares '" + pr.first + "' with itself");
  };
  for (const auto& pr : p.gt) {
    known(pr, "gt");
    rels.push_back(Relation::lt(pr.second, pr.first));
  }
  for (const auto& pr : p.eq) {
    known(pr, "eq");
    rels.push_back(Relation::eq(pr.first, pr.second));
  }
  try {
    infer_closure(rels);
  } catch (const ContradictionError& e) {
    throw MalformedProblem("gt/eq comparisons are inconsistent", e.details());
  }
}

double total_absolute_deviation(const CalibrationProblem& p, const std::map<Id, double>& scores) {
  double s = 0.0;
  for (const auto& id : p.ids) s += std::abs(scores.at(id) - p.reference.at(id));
  return s;
}

bool satisfies_constraints(const CalibrationProblem& p, const std::map<Id, double>& scores, double tol) {
  for (const auto& id : p.ids) {
    auto it = scores.find(id);
    if (it == scores.end() || it->second < -tol || it->second > 1.0 + tol) return false;
  }
  for (const auto& [i, j] : p.gt)
    if (scores.at(i) - scores.at(j) < p.t - tol) return false;
  for (const auto& [i, j] : p.eq)
    if (std::abs(scores.at(i) - scores.at(j)) > tol) return false;
  return true;
}

LokScale calibrate(const CalibrationProblem& p, ScaleKind kind, const Id& expert_id) {
  validate_problem(p);
  const auto chain = longest_strict_chain(p.gt, p.eq);
  if (static_cast<double>(chain.length) * p.t > 1.0 + 1e-12)
    throw InfeasibleComparisonChain(
        "strict comparison chain of length " + std::to_string(chain.length) +
            " needs a span of " + std::to_string(static_cast<double>(chain.length) * p.t) +
            " which exceeds [0,1]",
        {{"chain", chain}, {"t", p.t}});

  // One LP variable per equality class.
  const auto c = contract(std::set<Id>(p.ids.begin(), p.ids.end()), p.eq);
  const std::size_t k = c.members.size();
  const std::size_t n = c.nodes.size();

  lp::LinearProgram lp;
  for (std::size_t x = 0; x < k; ++x) lp.add_variable("L[" + c.members[x].front() + "]", 0.0);
  for (const auto& id : c.nodes) lp.add_variable("u[" + id + "]", 1.0);
  for (const auto& id : c.nodes) lp.add_variable("v[" + id + "]", 1.0);
  for (std::size_t i = 0; i < n; ++i)
    lp.rows.push_back({{{c.class_of.at(c.nodes[i]), 1.0}, {k + i, -1.0}, {k + n + i, 1.0}},
                       lp::Sense::eq, p.reference.at(c.nodes[i]), ""});
  std::set<std::pair<std::size_t, std::size_t>> class_gt;
  for (const auto& [hi, lo] : p.gt) class_gt.insert({c.class_of.at(hi), c.class_of.at(lo)});
  const std::size_t gt_row0 = lp.rows.size();
  for (const auto& [x, y] : class_gt) lp.rows.push_back({{{x, 1.0}, {y, -1.0}}, lp::Sense::ge, p.t, ""});
  const std::size_t ub_row0 = lp.rows.size();
  for (std::size_t x = 0; x < k; ++x) lp.rows.push_back({{{x, 1.0}}, lp::Sense::le, 1.0, ""});

  const auto sol = lp::solve(lp);
  if (sol.status != lp::Status::optimal)
    throw MalformedProblem("calibration LP has no optimal solution");

  // Second stage: among LP optima complementary to the dual found, pick the
  // one with least squared deviation. Positive reduced costs pin variables,
  // non-zero duals make their rows tight.
  constexpr double kDualTol = 1e-9;
  std::vector<qp::Constraint> cons;
  for (std::size_t x = 0; x < k; ++x) {
    const bool pin_zero = sol.reduced_costs[x] > kDualTol;
    cons.push_back({{{x, 1.0}}, 0.0, pin_zero});
    const bool pin_one = std::abs(sol.duals[ub_row0 + x]) > kDualTol;
    cons.push_back({{{x, -1.0}}, -1.0, pin_one});
  }
  {
    std::size_t r = gt_row0;
    for (const auto& [x, y] : class_gt) {
      cons.push_back({{{x, 1.0}, {y, -1.0}}, p.t, std::abs(sol.duals[r]) > kDualTol});
      ++r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = c.class_of.at(c.nodes[i]);
    const double ref = p.reference.at(c.nodes[i]);
    if (sol.reduced_costs[k + i] > kDualTol) cons.push_back({{{x, -1.0}}, -ref, false});  // u = 0
    if (sol.reduced_costs[k + n + i] > kDualTol) cons.push_back({{{x, 1.0}}, ref, false});  // v = 0
  }
  std::vector<double> h(k, 0.0), g(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = c.class_of.at(c.nodes[i]);
    h[x] += 2.0;
    g[x] -= 2.0 * p.reference.at(c.nodes[i]);
  }
  std::vector<double> lp_x(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(k));

  auto scores_from = [&](const std::vector<double>& xs) {
    std::map<Id, double> s;
    for (const auto& id : p.ids) {
      double v = xs[c.class_of.at(id)];
      if (v < 0.0 && v > -1e-12) v = 0.0;
      if (v > 1.0 && v < 1.0 + 1e-12) v = 1.0;
      s[id] = v;
    }
    return s;
  };

  LokScale scale;
  scale.kind = kind;
  scale.expert_id = expert_id;
  scale.scores = scores_from(lp_x);
  if (auto refined = qp::solve_diagonal(h, g, cons, lp_x)) {
    auto candidate = scores_from(*refined);
    if (satisfies_constraints(p, candidate) &&
        total_absolute_deviation(p, candidate) <= sol.objective + 1e-9)
      scale.scores = std::move(candidate);
  }
  // Reported at 1e-12 resolution so that decimal optima such as 0.1 come out
  // exact instead of carrying summation noise.
  scale.objective = std::round(total_absolute_deviation(p, scale.scores) * 1e12) / 1e12;
  return scale;
}

CalibrationProblem make_problem(std::vector<Id> ids, std::map<Id, double> reference,
                                const GtEq& relations, double t) {
  return CalibrationProblem{std::move(ids), std::move(reference), relations.gt, relations.eq, t};
}

void to_json(json& j, const CalibrationProblem& p) {
  GtEq rel{p.gt, p.eq};
  j = json{{"ids", p.ids}, {"reference", p.reference}, {"t", p.t}};
  json r = rel;
  j["gt"] = r["gt"];
  j["eq"] = r["eq"];
}

void from_json(const json& j, CalibrationProblem& p) {
  j.at("ids").get_to(p.ids);
  j.at("reference").get_to(p.reference);
  const auto rel = j.get<GtEq>();
  p.gt = rel.gt;
  p.eq = rel.eq;
  p.t = j.value("t", kDefaultThreshold);
}

void to_json(json& j, const LokScale& s) {
  j = json{{"kind", to_string(s.kind)}, {"scores", s.scores}, {"objective", s.objective}, {"status", "optimal"}};
  if (s.kind == ScaleKind::expert) j["expert_id"] = s.expert_id;
}

void to_json(json& j, const StrictChain& c) {
  j = json::object();
  j["length"] = c.length;
  j["path"] = c.path;
  j["edges"] = json::array();
  for (const auto& [a, b] : c.edges) j["edges"].push_back({a, b});
}

}  // namespace kara
