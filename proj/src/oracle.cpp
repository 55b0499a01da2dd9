#include "kara/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace kara::oracle {

namespace {

struct GridProblem {
  std::size_t n = 0;                                // equality classes
  std::vector<std::vector<double>> refs;            // references per class
  std::vector<std::pair<std::size_t, std::size_t>> gap;  // (hi, lo): x_hi - x_lo >= d
  int d = 0;
  int steps = 0;
};

GridProblem contract(const CalibrationProblem& p, double step) {
  validate_problem(p);
  std::map<Id, std::size_t> index;
  for (std::size_t i = 0; i < p.ids.size(); ++i) index[p.ids[i]] = i;
  std::vector<std::size_t> parent(p.ids.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : p.eq) parent[find(index.at(a))] = find(index.at(b));
  std::map<std::size_t, std::size_t> cls;
  GridProblem g;
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    const auto r = find(i);
    if (!cls.contains(r)) {
      cls[r] = g.n++;
      g.refs.emplace_back();
    }
    g.refs[cls[r]].push_back(p.reference.at(p.ids[i]));
  }
  std::vector<std::vector<bool>> reach(g.n, std::vector<bool>(g.n, false));
  for (const auto& [hi, lo] : p.gt) reach[cls[find(index.at(hi))]][cls[find(index.at(lo))]] = true;
  for (std::size_t m = 0; m < g.n; ++m)
    for (std::size_t a = 0; a < g.n; ++a)
      for (std::size_t b = 0; b < g.n; ++b)
        if (reach[a][m] && reach[m][b]) reach[a][b] = true;
  // Only the covering relations matter: a constraint implied by a two-step
  // path adds nothing to the feasible set.
  for (std::size_t a = 0; a < g.n; ++a)
    for (std::size_t b = 0; b < g.n; ++b) {
      if (!reach[a][b]) continue;
      bool implied = false;
      for (std::size_t m = 0; m < g.n && !implied; ++m) implied = reach[a][m] && reach[m][b];
      if (!implied || a == b) g.gap.push_back({a, b});
    }
  g.steps = static_cast<int>(std::lround(1.0 / step));
  g.d = static_cast<int>(std::ceil(p.t / step - 1e-9));
  return g;
}

double cost(const GridProblem& g, std::size_t c, int x, double step) {
  double s = 0.0;
  for (double r : g.refs[c]) s += std::abs(x * step - r);
  return s;
}

// Convex piecewise linear: optimum over an integer range is at an endpoint
// or next to a reference value.
double best_in_range(const GridProblem& g, std::size_t c, int lo, int hi, double step) {
  double best = std::min(cost(g, c, lo, step), cost(g, c, hi, step));
  for (double r : g.refs[c])
    for (int x : {static_cast<int>(std::floor(r / step)), static_cast<int>(std::ceil(r / step))})
      if (x >= lo && x <= hi) best = std::min(best, cost(g, c, x, step));
  return best;
}

}  // namespace

double grid_minimum(const CalibrationProblem& p, double step) {
  if (p.ids.size() > 8) throw InvalidArgument("grid oracle handles at most eight ids", {{"ids", p.ids.size()}});
  const auto g = contract(p, step);
  for (const auto& [hi, lo] : g.gap)
    if (hi == lo) throw MalformedProblem("strict comparison inside an equality class");

  std::vector<std::vector<std::size_t>> adj(g.n);
  for (const auto& [hi, lo] : g.gap) {
    adj[hi].push_back(lo);
    adj[lo].push_back(hi);
  }
  std::vector<int> comp(g.n, -1);
  int comps = 0;
  for (std::size_t s = 0; s < g.n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> todo{s};
    comp[s] = comps;
    while (!todo.empty()) {
      const auto x = todo.back();
      todo.pop_back();
      for (auto y : adj[x])
        if (comp[y] < 0) comp[y] = comps, todo.push_back(y);
    }
    ++comps;
  }

  double total = 0.0;
  for (int ci = 0; ci < comps; ++ci) {
    std::vector<std::size_t> members;
    for (std::size_t x = 0; x < g.n; ++x)
      if (comp[x] == ci) members.push_back(x);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : g.gap)
      if (comp[e.first] == ci) edges.push_back(e);

    std::vector<std::size_t> cover;
    if (!edges.empty()) {
      std::size_t best_size = members.size() + 1;
      for (std::uint32_t mask = 1; mask < (1u << members.size()); ++mask) {
        const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
        if (size >= best_size) continue;
        auto in = [&](std::size_t x) {
          auto pos = std::find(members.begin(), members.end(), x) - members.begin();
          return (mask >> pos) & 1u;
        };
        if (std::all_of(edges.begin(), edges.end(), [&](const auto& e) { return in(e.first) || in(e.second); })) {
          best_size = size;
          cover.clear();
          for (std::size_t i = 0; i < members.size(); ++i)
            if ((mask >> i) & 1u) cover.push_back(members[i]);
        }
      }
    }
    std::vector<std::size_t> rest;
    for (auto x : members)
      if (std::find(cover.begin(), cover.end(), x) == cover.end()) rest.push_back(x);

    std::vector<int> value(g.n, -1);
    auto bounds = [&](std::size_t x) {
      int lo = 0, hi = g.steps;
      for (const auto& [a, b] : edges) {
        if (a == x && value[b] >= 0) lo = std::max(lo, value[b] + g.d);
        if (b == x && value[a] >= 0) hi = std::min(hi, value[a] - g.d);
      }
      return std::pair{lo, hi};
    };
    double best = std::numeric_limits<double>::infinity();
    auto search = [&](auto&& self, std::size_t depth, double acc) -> void {
      if (acc >= best) return;
      if (depth == cover.size()) {
        double sum = acc;
        for (auto x : rest) {
          const auto [lo, hi] = bounds(x);
          if (lo > hi) return;
          sum += best_in_range(g, x, lo, hi, step);
        }
        best = std::min(best, sum);
        return;
      }
      const auto x = cover[depth];
      const auto [lo, hi] = bounds(x);
      for (int v = lo; v <= hi; ++v) {
        value[x] = v;
        self(self, depth + 1, acc + cost(g, x, v, step));
      }
      value[x] = -1;
    };
    search(search, 0, 0.0);
    if (!std::isfinite(best)) throw InfeasibleComparisonChain("no grid point satisfies the comparisons", json::object());
    total += best;
  }
  return total;
}

json check_calibration(const CalibrationProblem& p, double step) {
  const auto scale = calibrate(p);
  const double grid = grid_minimum(p, step);
  const double slack = 2.0 * static_cast<double>(p.ids.size()) * step;
  const bool upper = scale.objective <= grid + 1e-9;
  const bool lower = scale.objective >= grid - slack - 1e-9;
  const bool feasible = satisfies_constraints(p, scale.scores);
  return json{{"lp_objective", scale.objective},
              {"grid_objective", grid},
              {"slack", slack},
              {"constraints_satisfied", feasible},
              {"agree", upper && lower && feasible},
              {"scores", scale.scores}};
}

json check_consensus(const PairWeights& w) {
  SolverStats stats;
  const auto solved = solve_consensus(w, {}, &stats);
  std::size_t enumerated = 0;
  const auto brute = brute_force_consensus(w, &enumerated);
  return json{{"solver_objective", solved.objective()},
              {"oracle_objective", brute.objective()},
              {"enumerated", enumerated},
              {"solver_nodes", stats.nodes},
              {"constraints_satisfied", satisfies_ip_constraints(solved)},
              {"agree", solved.objective() == brute.objective() && satisfies_ip_constraints(solved)},
              {"solver", solved},
              {"oracle", brute}};
}

PairWeights random_weights(std::uint64_t seed, std::size_t max_ids, int max_experts) {
  std::mt19937_64 rng(seed);
  const auto n = std::uniform_int_distribution<std::size_t>(2, std::max<std::size_t>(2, max_ids))(rng);
  const int experts = std::uniform_int_distribution<int>(1, std::max(1, max_experts))(rng);
  std::vector<Id> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('a' + i)));
  PairWeights w(ids);
  std::bernoulli_distribution opinion(0.7);
  for (int e = 0; e < experts; ++e) {
    std::vector<int> rank(n);
    for (auto& r : rank) r = std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!opinion(rng)) continue;
        if (rank[i] < rank[j]) w.add(ids[i], ids[j], 1, 0, 0);
        else if (rank[i] > rank[j]) w.add(ids[i], ids[j], 0, 1, 0);
        else w.add(ids[i], ids[j], 1, 1, 1);
      }
  }
  return w;
}

CalibrationProblem random_problem(std::uint64_t seed, std::size_t max_ids) {
  std::mt19937_64 rng(seed);
  const auto n = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, max_ids))(rng);
  static const double thresholds[] = {0.05, 0.1, 0.15, 0.2, 0.25};
  CalibrationProblem p;
  p.t = thresholds[std::uniform_int_distribution<int>(0, 4)(rng)];
  for (std::size_t i = 0; i < n; ++i) {
    const Id id = std::string(1, static_cast<char>('a' + i));
    p.ids.push_back(id);
    p.reference[id] = std::uniform_int_distribution<int>(0, 1000)(rng) / 1000.0;
  }
  // A random weak order restricted to random pairs is always consistent.
  std::vector<int> rank(n);
  for (auto& r : rank) r = std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng);
  std::bernoulli_distribution keep(0.6);
  std::vector<Relation> rels;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!keep(rng)) continue;
      if (rank[i] < rank[j]) rels.push_back(Relation::lt(p.ids[i], p.ids[j]));
      else if (rank[i] > rank[j]) rels.push_back(Relation::lt(p.ids[j], p.ids[i]));
      else rels.push_back(Relation::eq(p.ids[i], p.ids[j]));
    }
  const auto r = extract_gt_eq(infer_closure(rels));
  p.gt = r.gt;
  p.eq = r.eq;
  return p;
}

}  // namespace kara::oracle
