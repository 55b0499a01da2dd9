#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stop_token>
#include <utility>
#include <vector>

#include "kara/comparison_graph.hpp"
#include "kara/core.hpp"

namespace kara {

/// Counts for one unordered pair, a < b by id.
struct PairWeight {
  int le_ab = 0;  // experts with L_a <= L_b
  int le_ba = 0;  // experts with L_b <= L_a
  int eq = 0;     // experts with L_a = L_b

  friend bool operator==(const PairWeight&, const PairWeight&) = default;
};

class PairWeights {
public:
  PairWeights() = default;
  explicit PairWeights(std::vector<Id> ids);

  const std::vector<Id>& ids() const noexcept { return ids_; }
  const std::map<std::pair<Id, Id>, PairWeight>& pairs() const noexcept { return pairs_; }

  /// w_{a<=b} and w_{a=b} for any ordered pair of known ids.
  int w_le(const Id& a, const Id& b) const;
  int w_eq(const Id& a, const Id& b) const;
  /// Adds counts to the pair {a,b}; le_first counts L_a <= L_b.
  void add(const Id& a, const Id& b, int le_first, int le_second, int eq);
  bool all_zero() const;
  bool has_opinion(const Id& a, const Id& b) const;

  friend bool operator==(const PairWeights&, const PairWeights&) = default;

private:
  std::vector<Id> ids_;
  std::map<std::pair<Id, Id>, PairWeight> pairs_;
};

/// Strict a<b counts once toward w_le(a,b); equality counts toward both
/// directions and w_eq. Pairs an expert did not relate contribute nothing.
PairWeights aggregate_weights(std::span<const ComparisonGraph> graphs, std::vector<Id> ids);

/// A total weak ordering of ids, stored as tier ranks (0 = lowest LOK).
class ConsensusRelations {
public:
  ConsensusRelations() = default;
  ConsensusRelations(std::vector<Id> ids, std::vector<int> rank, std::int64_t objective);

  const std::vector<Id>& ids() const noexcept { return ids_; }
  const std::vector<int>& ranks() const noexcept { return rank_; }
  std::int64_t objective() const noexcept { return objective_; }

  bool x_le(const Id& a, const Id& b) const;
  bool x_eq(const Id& a, const Id& b) const;
  /// Ids grouped by tier, lowest LOK first.
  std::vector<std::vector<Id>> tiers() const;

  friend bool operator==(const ConsensusRelations&, const ConsensusRelations&) = default;

private:
  int rank_of(const Id& id) const;

  std::vector<Id> ids_;
  std::vector<int> rank_;
  std::int64_t objective_ = 0;
};

/// Conflict objective of a weak ordering, summed over unordered pairs:
/// w_le(a,b) x_le(b,a) + w_le(b,a) x_le(a,b) - 2 w_eq(a,b) x_eq(a,b).
std::int64_t consensus_objective(const PairWeights& w, const ConsensusRelations& c);

struct SolverStats {
  std::uint64_t nodes = 0;
  double runtime_ms = 0.0;
};

struct ConsensusOptions {
  std::size_t exact_bound = 12;
  std::stop_token stop;
};

/// Proven-optimal weak ordering by branch and bound. Among optima the
/// lexicographically preferred one is returned: pairs in sorted id order,
/// each preferring equality, then a < b, then b < a. Throws
/// SizeLimitExceeded above the bound and Cancelled when stop is requested.
ConsensusRelations solve_consensus(const PairWeights& w, const ConsensusOptions& opts = {},
                                   SolverStats* stats = nullptr);

/// All weak orderings of n items as rank vectors (Fubini number many).
std::vector<std::vector<int>> enumerate_weak_orderings(std::size_t n);

/// Exhaustive reference solver for up to five ids, same tie rule.
ConsensusRelations brute_force_consensus(const PairWeights& w, std::size_t* enumerated = nullptr);

/// Checks the 0/1 program constraints literally on the materialized
/// x_le / x_eq matrices (completeness, equality linkage, transitivity).
bool satisfies_ip_constraints(const ConsensusRelations& c);

/// GT = {(a,b) : b strictly below a}, EQ = tied pairs.
GtEq consensus_to_gt_eq(const ConsensusRelations& c);

/// Same, restricted to pairs some expert related and then re-closed. This
/// is what calibrates the global scale: pairs nobody compared only enter
/// through transitivity.
GtEq supported_gt_eq(const ConsensusRelations& c, const PairWeights& w);

void to_json(json& j, const PairWeights& w);
void from_json(const json& j, PairWeights& w);
void to_json(json& j, const ConsensusRelations& c);
void to_json(json& j, const SolverStats& s);

}  // namespace kara
