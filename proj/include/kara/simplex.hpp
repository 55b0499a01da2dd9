#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kara::lp {

enum class Sense { le, ge, eq };

struct Row {
  std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
  Sense sense = Sense::le;
  double rhs = 0.0;
  std::string name;
};

/// min c'x  s.t.  rows,  x >= 0.
struct LinearProgram {
  std::vector<std::string> variables;
  std::vector<double> cost;
  std::vector<Row> rows;

  std::size_t add_variable(std::string name, double c) {
    variables.push_back(std::move(name));
    cost.push_back(c);
    return variables.size() - 1;
  }
};

enum class Status { optimal, infeasible, unbounded };

struct Solution {
  Status status = Status::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  /// One per row, in the convention reduced_cost = c - sum_i dual_i * A_i.
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  std::size_t pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's rule. Deterministic for a
/// given input; intended for the small programs of the calibration step.
Solution solve(const LinearProgram& lp, double tolerance = 1e-11);

}  // namespace kara::lp
