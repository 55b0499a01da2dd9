#pragma once

#include <cstdint>

#include "kara/calibration.hpp"
#include "kara/consensus.hpp"

namespace kara::oracle {

inline constexpr double kGridStep = 0.001;

/// Exact minimum of the calibration objective over scores restricted to
/// multiples of `step`. Components of the comparison graph are solved
/// independently; inside a component a vertex cover is enumerated and the
/// remaining scores are set in closed form. Intended for small problems
/// (at most eight ids). Throws InfeasibleComparisonChain when no grid point
/// is feasible.
double grid_minimum(const CalibrationProblem& p, double step = kGridStep);

/// LP versus grid: the LP must not exceed the grid optimum and may beat it
/// by at most the rounding slack 2 * |P| * step.
json check_calibration(const CalibrationProblem& p, double step = kGridStep);

/// Branch and bound versus exhaustive enumeration (at most five ids).
json check_consensus(const PairWeights& w);

/// Random weights from up to max_experts random weak orderings over
/// max_ids ids. Deterministic in seed.
PairWeights random_weights(std::uint64_t seed, std::size_t max_ids = 5, int max_experts = 4);

/// Random consistent calibration problem over up to max_ids ids with
/// reference scores on the grid.
CalibrationProblem random_problem(std::uint64_t seed, std::size_t max_ids = 4);

}  // namespace kara::oracle
