#include "kara/consensus.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <set>

namespace kara {

PairWeights::PairWeights(std::vector<Id> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

namespace {

std::pair<Id, Id> key(const Id& a, const Id& b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

int PairWeights::w_le(const Id& a, const Id& b) const {
  auto it = pairs_.find(key(a, b));
  if (it == pairs_.end()) return 0;
  return a < b ? it->second.le_ab : it->second.le_ba;
}

int PairWeights::w_eq(const Id& a, const Id& b) const {
  auto it = pairs_.find(key(a, b));
  return it == pairs_.end() ? 0 : it->second.eq;
}

void PairWeights::add(const Id& a, const Id& b, int le_first, int le_second, int eq) {
  if (a == b) throw InvalidArgument("pair weights need two distinct ids");
  for (const auto* id : {&a, &b})
    if (!std::binary_search(ids_.begin(), ids_.end(), *id)) {
      ids_.insert(std::upper_bound(ids_.begin(), ids_.end(), *id), *id);
    }
  auto& pw = pairs_[key(a, b)];
  if (a < b) {
    pw.le_ab += le_first;
    pw.le_ba += le_second;
  } else {
    pw.le_ab += le_second;
    pw.le_ba += le_first;
  }
  pw.eq += eq;
  if (pw.le_ab < 0 || pw.le_ba < 0 || pw.eq < 0) throw InvalidArgument("pair weights must be non-negative");
}

bool PairWeights::all_zero() const {
  return std::all_of(pairs_.begin(), pairs_.end(), [](const auto& kv) {
    return kv.second.le_ab == 0 && kv.second.le_ba == 0 && kv.second.eq == 0;
  });
}

bool PairWeights::has_opinion(const Id& a, const Id& b) const {
  auto it = pairs_.find(key(a, b));
  return it != pairs_.end() && (it->second.le_ab || it->second.le_ba || it->second.eq);
}

PairWeights aggregate_weights(std::span<const ComparisonGraph> graphs, std::vector<Id> ids) {
  PairWeights w(std::move(ids));
  const auto& p = w.ids();
  std::vector<Id> sorted(p.begin(), p.end());
  for (const auto& g : graphs)
    for (std::size_t i = 0; i < sorted.size(); ++i)
      for (std::size_t k = i + 1; k < sorted.size(); ++k) {
        const auto& a = sorted[i];
        const auto& b = sorted[k];
        if (g.less(a, b)) w.add(a, b, 1, 0, 0);
        else if (g.less(b, a)) w.add(a, b, 0, 1, 0);
        else if (g.equal(a, b)) w.add(a, b, 1, 1, 1);
      }
  return w;
}

ConsensusRelations::ConsensusRelations(std::vector<Id> ids, std::vector<int> rank, std::int64_t objective)
    : ids_(std::move(ids)), rank_(std::move(rank)), objective_(objective) {
  if (ids_.size() != rank_.size()) throw InvalidArgument("one rank per id is required");
}

int ConsensusRelations::rank_of(const Id& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) throw NotFound("id '" + id + "' is not part of the consensus");
  return rank_[static_cast<std::size_t>(it - ids_.begin())];
}

bool ConsensusRelations::x_le(const Id& a, const Id& b) const { return rank_of(a) <= rank_of(b); }
bool ConsensusRelations::x_eq(const Id& a, const Id& b) const { return rank_of(a) == rank_of(b); }

std::vector<std::vector<Id>> ConsensusRelations::tiers() const {
  int top = -1;
  for (int r : rank_) top = std::max(top, r);
  std::vector<std::vector<Id>> out(static_cast<std::size_t>(top + 1));
  for (std::size_t i = 0; i < ids_.size(); ++i) out[static_cast<std::size_t>(rank_[i])].push_back(ids_[i]);
  return out;
}

std::int64_t consensus_objective(const PairWeights& w, const ConsensusRelations& c) {
  std::int64_t total = 0;
  const auto& ids = c.ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t k = i + 1; k < ids.size(); ++k) {
      const auto& a = ids[i];
      const auto& b = ids[k];
      total += std::int64_t{w.w_le(a, b)} * c.x_le(b, a) + std::int64_t{w.w_le(b, a)} * c.x_le(a, b) -
               2 * std::int64_t{w.w_eq(a, b)} * c.x_eq(a, b);
    }
  return total;
}

namespace {

// Relation codes of pair (i, j), i < j, in tie-break preference order.
enum Rel : int { kEq = 0, kLt = 1, kGt = 2 };

int relation(int rank_i, int rank_j) {
  if (rank_i == rank_j) return kEq;
  return rank_i < rank_j ? kLt : kGt;
}

class BranchAndBound {
public:
  BranchAndBound(const PairWeights& w, std::stop_token stop) : n_(w.ids().size()), stop_(std::move(stop)) {
    cost_.assign(n_ * n_ * 3, 0);
    fixed_.assign(n_ * n_, -1);
    const auto& ids = w.ids();
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        const std::int64_t ab = w.w_le(ids[i], ids[j]), ba = w.w_le(ids[j], ids[i]), eq = w.w_eq(ids[i], ids[j]);
        cost(i, j, kLt) = ba;
        cost(i, j, kGt) = ab;
        cost(i, j, kEq) = ab + ba - 2 * eq;
      }
  }

  std::uint64_t nodes() const noexcept { return nodes_; }

  // Minimum objective; leaves the minimizer in best_.
  std::int64_t optimize() {
    mode_ = Mode::optimize;
    best_cost_ = std::numeric_limits<std::int64_t>::max();
    run();
    return best_cost_;
  }

  // Any ordering with objective <= target under the current fixings.
  bool decide(std::int64_t target) {
    mode_ = Mode::decide;
    target_ = target;
    found_ = false;
    run();
    return found_;
  }

  void fix(std::size_t i, std::size_t j, int rel) { fixed_[i * n_ + j] = rel; }
  void unfix(std::size_t i, std::size_t j) { fixed_[i * n_ + j] = -1; }
  const std::vector<int>& best() const { return best_; }

private:
  enum class Mode { optimize, decide };

  std::int64_t& cost(std::size_t i, std::size_t j, int r) { return cost_[(i * n_ + j) * 3 + static_cast<std::size_t>(r)]; }
  std::int64_t pair_cost(std::size_t i, std::size_t j, int r) const {
    return cost_[(i * n_ + j) * 3 + static_cast<std::size_t>(r)];
  }
  int fixed(std::size_t i, std::size_t j) const { return fixed_[i * n_ + j]; }

  void run() {
    // Lower bound contribution of pairs among not-yet-placed items, suffix by first index.
    pending_lb_.assign(n_ + 1, 0);
    for (std::size_t e = n_; e-- > 0;) {
      std::int64_t s = 0;
      for (std::size_t j = e + 1; j < n_; ++j) s += cheapest(e, j);
      pending_lb_[e] = pending_lb_[e + 1] + s;
    }
    std::vector<int> rank;
    rank.reserve(n_);
    dfs(0, rank, 0, 0);
  }

  std::int64_t cheapest(std::size_t i, std::size_t j) const {
    if (int f = fixed(i, j); f >= 0) return pair_cost(i, j, f);
    return std::min({pair_cost(i, j, kEq), pair_cost(i, j, kLt), pair_cost(i, j, kGt)});
  }

  // Placement options for item e among `tiers` tiers: even 2s = new tier
  // below tier s, odd 2s+1 = join tier s. Returns false when fixings forbid it.
  bool delta(std::size_t e, const std::vector<int>& rank, int tiers, int option, std::int64_t& out) const {
    const int s = option / 2;
    const bool join = option % 2 == 1;
    std::int64_t d = 0;
    for (std::size_t p = 0; p < rank.size(); ++p) {
      int rel;
      if (join) rel = relation(rank[p], s);
      else rel = rank[p] < s ? kLt : kGt;
      if (int f = fixed(p, e); f >= 0 && f != rel) return false;
      d += pair_cost(p, e, rel);
    }
    (void)tiers;
    out = d;
    return true;
  }

  // Items after e are bounded by their best placement against the current
  // partial order plus the cheapest relation among themselves.
  bool lower_bound(std::size_t next, const std::vector<int>& rank, int tiers, std::int64_t& out) const {
    std::int64_t lb = pending_lb_[next];
    for (std::size_t q = next; q < n_; ++q) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (int opt = 0; opt <= 2 * tiers; ++opt) {
        std::int64_t d;
        if (delta(q, rank, tiers, opt, d)) best = std::min(best, d);
      }
      if (best == std::numeric_limits<std::int64_t>::max()) return false;
      lb += best;
    }
    out = lb;
    return true;
  }

  void dfs(std::size_t e, std::vector<int>& rank, int tiers, std::int64_t so_far) {
    if ((++nodes_ & 1023) == 0 && stop_.stop_requested()) throw Cancelled("consensus solve cancelled");
    if (e == n_) {
      if (mode_ == Mode::optimize) {
        if (so_far < best_cost_) {
          best_cost_ = so_far;
          best_ = rank;
        }
      } else if (so_far <= target_) {
        found_ = true;
        best_ = rank;
      }
      return;
    }

    struct Choice {
      std::int64_t bound;
      std::int64_t delta;
      int option;
    };
    std::vector<Choice> choices;
    for (int opt = 0; opt <= 2 * tiers; ++opt) {
      std::int64_t d;
      if (!delta(e, rank, tiers, opt, d)) continue;
      auto next_rank = place(rank, opt);
      std::int64_t lb;
      if (!lower_bound(e + 1, next_rank, opt % 2 ? tiers : tiers + 1, lb)) continue;
      choices.push_back({so_far + d + lb, d, opt});
    }
    std::sort(choices.begin(), choices.end(), [](const Choice& a, const Choice& b) {
      return a.bound != b.bound ? a.bound < b.bound : a.option < b.option;
    });
    for (const auto& c : choices) {
      if (mode_ == Mode::optimize ? c.bound >= best_cost_ : c.bound > target_) continue;
      auto next_rank = place(rank, c.option);
      dfs(e + 1, next_rank, c.option % 2 ? tiers : tiers + 1, so_far + c.delta);
      if (mode_ == Mode::decide && found_) return;
    }
  }

  static std::vector<int> place(const std::vector<int>& rank, int option) {
    const int s = option / 2;
    std::vector<int> out = rank;
    if (option % 2 == 0)
      for (auto& r : out)
        if (r >= s) ++r;
    out.push_back(s);
    return out;
  }

  std::size_t n_;
  std::stop_token stop_;
  std::vector<std::int64_t> cost_;
  std::vector<int> fixed_;
  std::vector<std::int64_t> pending_lb_;
  Mode mode_ = Mode::optimize;
  std::int64_t best_cost_ = 0;
  std::int64_t target_ = 0;
  bool found_ = false;
  std::vector<int> best_;
  std::uint64_t nodes_ = 0;
};

}  // namespace

ConsensusRelations solve_consensus(const PairWeights& w, const ConsensusOptions& opts, SolverStats* stats) {
  const auto started = std::chrono::steady_clock::now();
  const auto& ids = w.ids();
  const std::size_t n = ids.size();
  if (n > opts.exact_bound)
    throw SizeLimitExceeded("consensus over " + std::to_string(n) + " characterizations exceeds the exact bound",
                            {{"size", n}, {"bound", opts.exact_bound}});

  auto finish = [&](ConsensusRelations c, std::uint64_t nodes) {
    if (stats) {
      stats->nodes = nodes;
      stats->runtime_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    return c;
  };

  if (w.all_zero()) return finish(ConsensusRelations(ids, std::vector<int>(n, 0), 0), 0);

  if (opts.stop.stop_requested()) throw Cancelled("consensus solve cancelled");
  BranchAndBound bb(w, opts.stop);
  const auto opt = bb.optimize();
  std::vector<int> incumbent = bb.best();

  // Lexicographic refinement over pairs in sorted order.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int current = relation(incumbent[i], incumbent[j]);
      for (int rel = kEq; rel < current; ++rel) {
        bb.fix(i, j, rel);
        if (bb.decide(opt)) {
          incumbent = bb.best();
          break;
        }
        bb.unfix(i, j);
      }
      bb.fix(i, j, relation(incumbent[i], incumbent[j]));
    }

  ConsensusRelations out(ids, incumbent, opt);
  return finish(std::move(out), bb.nodes());
}

std::vector<std::vector<int>> enumerate_weak_orderings(std::size_t n) {
  std::vector<std::vector<int>> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  // Rank vectors whose used ranks are exactly {0..m-1}.
  std::vector<int> rank(n, 0);
  for (;;) {
    std::vector<bool> used(n, false);
    for (int r : rank) used[static_cast<std::size_t>(r)] = true;
    std::size_t m = 0;
    while (m < n && used[m]) ++m;
    bool surjective = true;
    for (std::size_t r = m; r < n; ++r) surjective = surjective && !used[r];
    if (surjective) out.push_back(rank);

    std::size_t pos = 0;
    while (pos < n && rank[pos] == static_cast<int>(n) - 1) rank[pos++] = 0;
    if (pos == n) break;
    ++rank[pos];
  }
  return out;
}

ConsensusRelations brute_force_consensus(const PairWeights& w, std::size_t* enumerated) {
  const auto& ids = w.ids();
  const std::size_t n = ids.size();
  if (n > 5) throw SizeLimitExceeded("brute force consensus is limited to five ids", {{"size", n}});

  const auto orderings = enumerate_weak_orderings(n);
  if (enumerated) *enumerated = orderings.size();

  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  std::vector<int> best_key;
  std::vector<int> best_rank;
  for (const auto& rank : orderings) {
    // Materialize x_le / x_eq and evaluate the objective term by term.
    std::int64_t obj = 0;
    std::vector<int> key;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const int x_ab = rank[a] <= rank[b];
        const int x_ba = rank[b] <= rank[a];
        const int x_eq = x_ab && x_ba;
        obj += std::int64_t{w.w_le(ids[a], ids[b])} * x_ba + std::int64_t{w.w_le(ids[b], ids[a])} * x_ab -
               2 * std::int64_t{w.w_eq(ids[a], ids[b])} * x_eq;
        key.push_back(x_eq ? 0 : (x_ab ? 1 : 2));
      }
    if (obj < best || (obj == best && key < best_key)) {
      best = obj;
      best_key = std::move(key);
      best_rank = rank;
    }
  }
  return ConsensusRelations(ids, best_rank, best);
}

bool satisfies_ip_constraints(const ConsensusRelations& c) {
  const auto& ids = c.ids();
  const std::size_t n = ids.size();
  std::vector<std::vector<int>> le(n, std::vector<int>(n)), eq(n, std::vector<int>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      le[a][b] = c.x_le(ids[a], ids[b]);
      eq[a][b] = c.x_eq(ids[a], ids[b]);
    }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (-le[a][b] - le[b][a] > -1) return false;
      if (2 * eq[a][b] - le[a][b] - le[b][a] > 0) return false;
      if (le[a][b] + le[b][a] - eq[a][b] > 1) return false;
      if (eq[a][b] != eq[b][a]) return false;
      for (std::size_t m = 0; m < n; ++m)
        if (le[a][m] + le[m][b] - le[a][b] > 1) return false;
    }
  return true;
}

GtEq consensus_to_gt_eq(const ConsensusRelations& c) {
  GtEq out;
  const auto& ids = c.ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (i == k) continue;
      const auto& a = ids[i];
      const auto& b = ids[k];
      if (c.x_le(b, a) && !c.x_eq(a, b)) out.gt.emplace_back(a, b);
      if (i < k && c.x_eq(a, b)) out.eq.emplace_back(a, b);
    }
  std::sort(out.gt.begin(), out.gt.end());
  std::sort(out.eq.begin(), out.eq.end());
  return out;
}

GtEq supported_gt_eq(const ConsensusRelations& c, const PairWeights& w) {
  std::vector<Relation> rels;
  const auto full = consensus_to_gt_eq(c);
  for (const auto& [hi, lo] : full.gt)
    if (w.has_opinion(hi, lo)) rels.push_back(Relation::lt(lo, hi));
  for (const auto& [a, b] : full.eq)
    if (w.has_opinion(a, b)) rels.push_back(Relation::eq(a, b));
  return extract_gt_eq(infer_closure(rels));
}

void to_json(json& j, const PairWeights& w) {
  j = json::object();
  j["ids"] = w.ids();
  j["pairs"] = json::array();
  for (const auto& [k, pw] : w.pairs())
    j["pairs"].push_back(
        {{"a", k.first}, {"b", k.second}, {"w_le_ab", pw.le_ab}, {"w_le_ba", pw.le_ba}, {"w_eq", pw.eq}});
}

void from_json(const json& j, PairWeights& w) {
  w = PairWeights(j.value("ids", std::vector<Id>{}));
  for (const auto& p : j.at("pairs")) {
    const auto a = p.at("a").get<Id>();
    const auto b = p.at("b").get<Id>();
    w.add(a, b, p.value("w_le_ab", 0), p.value("w_le_ba", 0), p.value("w_eq", 0));
  }
}

void to_json(json& j, const ConsensusRelations& c) {
  j = json::object();
  j["ids"] = c.ids();
  j["tiers"] = c.tiers();
  j["objective"] = c.objective();
  j["relations"] = json::array();
  const auto& ids = c.ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t k = i + 1; k < ids.size(); ++k) {
      const auto& a = ids[i];
      const auto& b = ids[k];
      Relation r = c.x_eq(a, b) ? Relation::eq(a, b) : (c.x_le(a, b) ? Relation::lt(a, b) : Relation::lt(b, a));
      j["relations"].push_back(r);
    }
}

void to_json(json& j, const SolverStats& s) { j = json{{"nodes", s.nodes}, {"runtime_ms", s.runtime_ms}}; }

}  // namespace kara
