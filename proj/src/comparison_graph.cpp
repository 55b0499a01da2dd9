#include "kara/comparison_graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>

namespace kara {

Relation Relation::eq(Id a, Id b) {
  if (b < a) std::swap(a, b);
  return {RelationKind::eq, std::move(a), std::move(b)};
}

std::string to_string(const Relation& r) {
  return r.a + (r.kind == RelationKind::lt ? " < " : " = ") + r.b;
}

void to_json(json& j, const Relation& r) {
  j = json{{"a", r.a}, {"b", r.b}, {"relation", r.kind == RelationKind::lt ? "lt" : "eq"}};
}

void from_json(const json& j, Relation& r) {
  const auto kind = j.at("relation").get<std::string>();
  auto a = j.at("a").get<Id>();
  auto b = j.at("b").get<Id>();
  if (kind == "lt") r = Relation::lt(std::move(a), std::move(b));
  else if (kind == "gt") r = Relation::lt(std::move(b), std::move(a));
  else if (kind == "eq") r = Relation::eq(std::move(a), std::move(b));
  else throw InvalidArgument("relation must be \"lt\", \"gt\" or \"eq\"", {{"relation", kind}});
}

void to_json(json& j, const GtEq& v) {
  j = json::object();
  j["gt"] = json::array();
  j["eq"] = json::array();
  for (const auto& [i, k] : v.gt) j["gt"].push_back({i, k});
  for (const auto& [i, k] : v.eq) j["eq"].push_back({i, k});
}

void from_json(const json& j, GtEq& v) {
  v = {};
  for (const auto& p : j.value("gt", json::array()))
    v.gt.emplace_back(p.at(0).get<Id>(), p.at(1).get<Id>());
  for (const auto& p : j.value("eq", json::array()))
    v.eq.emplace_back(p.at(0).get<Id>(), p.at(1).get<Id>());
}

namespace {

struct ClosureIndex {
  std::map<Id, std::size_t> class_of;
  std::vector<std::vector<Id>> members;
  std::vector<std::vector<bool>> less;
};

// Contracts equality classes, then computes reachability over the class DAG.
// Returns nullopt when the relations are inconsistent.
std::optional<ClosureIndex> build_index(const std::set<Id>& nodes,
                                        std::span<const Relation> rels) {
  std::vector<Id> ids(nodes.begin(), nodes.end());
  std::map<Id, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;

  std::vector<std::size_t> parent(ids.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& r : rels)
    if (r.kind == RelationKind::eq) {
      auto x = find(pos.at(r.a)), y = find(pos.at(r.b));
      if (x != y) parent[std::max(x, y)] = std::min(x, y);
    }

  ClosureIndex idx;
  std::vector<std::size_t> cls(ids.size());
  std::map<std::size_t, std::size_t> root_class;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto root = find(i);
    auto [it, fresh] = root_class.try_emplace(root, idx.members.size());
    if (fresh) idx.members.emplace_back();
    cls[i] = it->second;
    idx.members[it->second].push_back(ids[i]);
    idx.class_of[ids[i]] = it->second;
  }

  const std::size_t n = idx.members.size();
  std::vector<std::set<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& r : rels) {
    if (r.kind != RelationKind::lt) continue;
    auto x = cls[pos.at(r.a)], y = cls[pos.at(r.b)];
    if (x == y) return std::nullopt;
    if (succ[x].insert(y).second) ++indeg[y];
  }

  std::vector<std::size_t> order;
  std::deque<std::size_t> ready;
  for (std::size_t c = 0; c < n; ++c)
    if (indeg[c] == 0) ready.push_back(c);
  while (!ready.empty()) {
    auto c = ready.front();
    ready.pop_front();
    order.push_back(c);
    for (auto y : succ[c])
      if (--indeg[y] == 0) ready.push_back(y);
  }
  if (order.size() != n) return std::nullopt;

  idx.less.assign(n, std::vector<bool>(n, false));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto x = *it;
    for (auto y : succ[x]) {
      idx.less[x][y] = true;
      for (std::size_t z = 0; z < n; ++z)
        if (idx.less[y][z]) idx.less[x][z] = true;
    }
  }
  return idx;
}

std::vector<Relation> emit_closure(const ClosureIndex& idx) {
  std::vector<Relation> out;
  const std::size_t n = idx.members.size();
  for (std::size_t x = 0; x < n; ++x) {
    const auto& m = idx.members[x];
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t k = i + 1; k < m.size(); ++k) out.push_back(Relation::eq(m[i], m[k]));
    for (std::size_t y = 0; y < n; ++y)
      if (idx.less[x][y])
        for (const auto& a : m)
          for (const auto& b : idx.members[y]) out.push_back(Relation::lt(a, b));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool conflicts(const ClosureIndex& idx, const Relation& r) {
  auto x = idx.class_of.at(r.a), y = idx.class_of.at(r.b);
  if (r.kind == RelationKind::lt) return x == y || idx.less[y][x];
  return idx.less[x][y] || idx.less[y][x];
}

// Shortest chain of asserted relations showing a <= b (need_strict: a < b).
std::vector<Relation> shortest_chain(std::span<const Relation> asserted, const Id& from,
                                     const Id& to, bool need_strict) {
  struct Edge {
    Id to;
    bool strict;
    std::size_t rel;
  };
  std::map<Id, std::vector<Edge>> adj;
  for (std::size_t i = 0; i < asserted.size(); ++i) {
    const auto& r = asserted[i];
    if (r.kind == RelationKind::lt) {
      adj[r.a].push_back({r.b, true, i});
    } else {
      adj[r.a].push_back({r.b, false, i});
      adj[r.b].push_back({r.a, false, i});
    }
  }
  using State = std::pair<Id, bool>;
  std::map<State, std::pair<State, std::size_t>> prev;
  std::deque<State> queue{{from, false}};
  prev[{from, false}] = {{from, false}, asserted.size()};
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    if (s.first == to && (s.second || !need_strict)) {
      std::vector<Relation> chain;
      for (State cur = s; prev[cur].second != asserted.size(); cur = prev[cur].first)
        chain.push_back(asserted[prev[cur].second]);
      std::reverse(chain.begin(), chain.end());
      return chain;
    }
    for (const auto& e : adj[s.first]) {
      State next{e.to, s.second || e.strict};
      if (prev.contains(next)) continue;
      prev[next] = {s, e.rel};
      queue.push_back(next);
    }
  }
  return {};
}

std::vector<Relation> witness_for(std::span<const Relation> asserted, const Relation& r) {
  if (r.kind == RelationKind::lt) return shortest_chain(asserted, r.b, r.a, false);
  auto ab = shortest_chain(asserted, r.a, r.b, true);
  auto ba = shortest_chain(asserted, r.b, r.a, true);
  if (ab.empty()) return ba;
  if (ba.empty() || ab.size() <= ba.size()) return ab;
  return ba;
}

[[noreturn]] void throw_contradiction(const Relation& r, const std::vector<Relation>& witness) {
  throw ContradictionError("comparison " + to_string(r) + " contradicts earlier comparisons",
                           {{"relation", r}, {"witness", witness}});
}

void require_distinct(const Relation& r) {
  if (r.a == r.b)
    throw InvalidArgument("self comparison is not allowed", {{"relation", r}});
}

}  // namespace

ComparisonGraph::ComparisonGraph(std::set<Id> nodes) : nodes_(std::move(nodes)) { rebuild(); }

ComparisonGraph ComparisonGraph::with_node(const Id& id) const {
  if (nodes_.contains(id)) return *this;
  ComparisonGraph g = *this;
  g.nodes_.insert(id);
  g.rebuild();
  return g;
}

void ComparisonGraph::rebuild() {
  auto idx = build_index(nodes_, asserted_);
  if (!idx) throw MalformedProblem("asserted comparisons are inconsistent");
  closure_ = emit_closure(*idx);
  class_of_ = std::move(idx->class_of);
  class_less_ = std::move(idx->less);
}

bool ComparisonGraph::less(const Id& a, const Id& b) const {
  auto x = class_of_.find(a), y = class_of_.find(b);
  if (x == class_of_.end() || y == class_of_.end()) return false;
  return class_less_[x->second][y->second];
}

bool ComparisonGraph::equal(const Id& a, const Id& b) const {
  if (a == b) return false;
  auto x = class_of_.find(a), y = class_of_.find(b);
  if (x == class_of_.end() || y == class_of_.end()) return false;
  return x->second == y->second;
}

bool ComparisonGraph::implies(const Relation& r) const {
  return r.kind == RelationKind::lt ? less(r.a, r.b) : equal(r.a, r.b);
}

ComparisonGraph add_comparison(const ComparisonGraph& g, const Relation& r) {
  require_distinct(r);
  for (const auto* id : {&r.a, &r.b})
    if (!g.nodes_.contains(*id)) throw InvalidArgument("unknown node '" + *id + "'", {{"relation", r}});
  if (g.implies(r)) return g;

  const bool conflict = r.kind == RelationKind::lt
                            ? (g.less(r.b, r.a) || g.equal(r.a, r.b))
                            : (g.less(r.a, r.b) || g.less(r.b, r.a));
  if (conflict) throw_contradiction(r, witness_for(g.asserted_, r));

  ComparisonGraph next = g;
  next.asserted_.push_back(r.kind == RelationKind::eq ? Relation::eq(r.a, r.b) : r);
  next.rebuild();
  return next;
}

ComparisonGraph remove_comparison(const ComparisonGraph& g, const Relation& r) {
  const Relation key = r.kind == RelationKind::eq ? Relation::eq(r.a, r.b) : r;
  auto it = std::find(g.asserted_.begin(), g.asserted_.end(), key);
  if (it == g.asserted_.end()) throw NotFound("comparison " + to_string(r) + " was never asserted");
  ComparisonGraph next = g;
  next.asserted_.erase(next.asserted_.begin() + (it - g.asserted_.begin()));
  next.rebuild();
  return next;
}

std::vector<Relation> infer_closure(std::span<const Relation> asserted) {
  std::set<Id> nodes;
  std::vector<Relation> rels;
  rels.reserve(asserted.size());
  for (const auto& r : asserted) {
    require_distinct(r);
    nodes.insert(r.a);
    nodes.insert(r.b);
    rels.push_back(r.kind == RelationKind::eq ? Relation::eq(r.a, r.b) : r);
  }
  if (auto idx = build_index(nodes, rels)) return emit_closure(*idx);

  // Replay in order to find the first relation that breaks consistency.
  for (std::size_t i = 0; i < rels.size(); ++i) {
    std::span<const Relation> before(rels.data(), i);
    auto idx = build_index(nodes, before);
    if (conflicts(*idx, rels[i])) {
      throw_contradiction(rels[i], witness_for(before, rels[i]));
    }
  }
  throw MalformedProblem("inconsistent comparisons");  // unreachable
}

GtEq extract_gt_eq(std::span<const Relation> closure) {
  GtEq out;
  for (const auto& r : closure) {
    if (r.kind == RelationKind::lt) out.gt.emplace_back(r.b, r.a);
    else out.eq.emplace_back(std::min(r.a, r.b), std::max(r.a, r.b));
  }
  std::sort(out.gt.begin(), out.gt.end());
  std::sort(out.eq.begin(), out.eq.end());
  out.eq.erase(std::unique(out.eq.begin(), out.eq.end()), out.eq.end());
  return out;
}

json closure_adjacency(const ComparisonGraph& g) {
  std::map<Id, std::set<Id>> adj;
  for (const auto& n : g.nodes()) adj[n];
  for (const auto& r : g.closure()) {
    if (r.kind == RelationKind::lt) {
      adj[r.b].insert(r.a);
    } else {
      adj[r.a].insert(r.b);
      adj[r.b].insert(r.a);
    }
  }
  json out = json::object();
  for (const auto& [n, targets] : adj) out[n] = std::vector<Id>(targets.begin(), targets.end());
  return out;
}

}  // namespace kara
