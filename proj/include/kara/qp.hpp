#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace kara::qp {

struct Constraint {
  std::vector<std::pair<std::size_t, double>> terms;
  double rhs = 0.0;
  bool equality = false;  // otherwise terms . x >= rhs
};

/// min sum_i (0.5 * h_i * x_i^2 + g_i * x_i) subject to the constraints,
/// by the primal active-set method started from the feasible point x0.
/// Returns nullopt when x0 is infeasible or the iteration cap is reached.
std::optional<std::vector<double>> solve_diagonal(const std::vector<double>& h,
                                                  const std::vector<double>& g,
                                                  const std::vector<Constraint>& constraints,
                                                  std::vector<double> x0,
                                                  double tol = 1e-10);

}  // namespace kara::qp
