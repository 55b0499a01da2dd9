#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kara/core.hpp"

namespace kara {

enum class RelationKind { lt, eq };

/// A pairwise LOK relation. lt(a,b) reads L_a < L_b. Equalities are kept
/// normalized with a < b (by id) so that EQ(a,b) and EQ(b,a) compare equal.
struct Relation {
  RelationKind kind = RelationKind::lt;
  Id a;
  Id b;

  static Relation lt(Id a, Id b) { return {RelationKind::lt, std::move(a), std::move(b)}; }
  static Relation eq(Id a, Id b);

  friend auto operator<=>(const Relation&, const Relation&) = default;
  friend bool operator==(const Relation&, const Relation&) = default;
};

std::string to_string(const Relation& r);
void to_json(json& j, const Relation& r);
void from_json(const json& j, Relation& r);

/// Ordered (greater, lesser) pairs plus unordered equal pairs, the input
/// format of the calibration LP.
struct GtEq {
  std::vector<std::pair<Id, Id>> gt;
  std::vector<std::pair<Id, Id>> eq;

  friend bool operator==(const GtEq&, const GtEq&) = default;
};

void to_json(json& j, const GtEq& v);
void from_json(const json& j, GtEq& v);

/// Per-expert, per-risk-factor comparisons. Immutable: every mutation
/// returns a new graph whose closure has been recomputed. The closure is
/// always consistent; contradicting insertions are rejected.
class ComparisonGraph {
public:
  ComparisonGraph() = default;
  explicit ComparisonGraph(std::set<Id> nodes);

  ComparisonGraph with_node(const Id& id) const;

  const std::set<Id>& nodes() const noexcept { return nodes_; }
  const std::vector<Relation>& asserted() const noexcept { return asserted_; }
  /// Sorted, normalized; excludes the trivial self-equalities.
  const std::vector<Relation>& closure() const noexcept { return closure_; }

  bool less(const Id& a, const Id& b) const;
  bool equal(const Id& a, const Id& b) const;
  bool implies(const Relation& r) const;

  friend ComparisonGraph add_comparison(const ComparisonGraph& g, const Relation& r);
  friend ComparisonGraph remove_comparison(const ComparisonGraph& g, const Relation& r);

private:
  void rebuild();

  std::set<Id> nodes_;
  std::vector<Relation> asserted_;
  std::vector<Relation> closure_;
  std::map<Id, std::size_t> class_of_;
  std::vector<std::vector<bool>> class_less_;  // [x][y]: class x < class y
};

/// Inserts r. No-op when r is already implied. Throws ContradictionError
/// with the shortest chain of asserted relations that conflicts with r,
/// InvalidArgument for self comparisons or unknown nodes.
ComparisonGraph add_comparison(const ComparisonGraph& g, const Relation& r);

/// Drops an asserted relation and recomputes the closure from the rest.
/// Throws NotFound when r was never asserted.
ComparisonGraph remove_comparison(const ComparisonGraph& g, const Relation& r);

/// Least fixed point of the consistency rules over the endpoints of
/// `asserted`. Throws ContradictionError (with witness) when inconsistent.
std::vector<Relation> infer_closure(std::span<const Relation> asserted);

GtEq extract_gt_eq(std::span<const Relation> closure);
inline GtEq extract_gt_eq(const ComparisonGraph& g) { return extract_gt_eq(g.closure()); }

/// Adjacency list of the closure: an edge j -> i for L_j > L_i, edges both
/// ways for equalities.
json closure_adjacency(const ComparisonGraph& g);

}  // namespace kara
