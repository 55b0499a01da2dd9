#include "kara/simplex.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kara::lp {

namespace {

class Tableau {
public:
  Tableau(std::size_t rows, std::size_t cols)
      : cols_(cols), t_(rows, std::vector<double>(cols + 1, 0.0)), obj_(cols + 1, 0.0), basis_(rows) {}

  double& at(std::size_t r, std::size_t c) { return t_[r][c]; }
  double& rhs(std::size_t r) { return t_[r][cols_]; }
  std::size_t& basis(std::size_t r) { return basis_[r]; }
  std::size_t rows() const { return t_.size(); }
  std::size_t cols() const { return cols_; }
  double reduced(std::size_t c) const { return obj_[c]; }
  double objective() const { return -obj_[cols_]; }

  void set_objective(const std::vector<double>& c) {
    std::fill(obj_.begin(), obj_.end(), 0.0);
    for (std::size_t j = 0; j < cols_; ++j) obj_[j] = c[j];
    for (std::size_t r = 0; r < rows(); ++r) {
      const double cb = c[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) obj_[j] -= cb * t_[r][j];
    }
  }

  void pivot(std::size_t pr, std::size_t pc) {
    auto& prow = t_[pr];
    const double inv = 1.0 / prow[pc];
    for (auto& v : prow) v *= inv;
    prow[pc] = 1.0;
    auto eliminate = [&](std::vector<double>& row) {
      const double f = row[pc];
      if (f == 0.0) return;
      for (std::size_t j = 0; j <= cols_; ++j) row[j] -= f * prow[j];
      row[pc] = 0.0;
    };
    for (std::size_t r = 0; r < rows(); ++r)
      if (r != pr) eliminate(t_[r]);
    eliminate(obj_);
    basis_[pr] = pc;
    ++pivots;
  }

  // Bland's rule: lowest-index improving column, lowest basis index on ratio ties.
  Status run(const std::vector<bool>& allowed, double eps) {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_; ++j)
        if (allowed[j] && obj_[j] < -eps) {
          enter = j;
          break;
        }
      if (enter == cols_) return Status::optimal;

      std::size_t leave = rows();
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows(); ++r) {
        const double a = t_[r][enter];
        if (a <= eps) continue;
        const double ratio = t_[r][cols_] / a;
        if (ratio < best - eps || (std::abs(ratio - best) <= eps && basis_[r] < basis_[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave == rows()) return Status::unbounded;
      pivot(leave, enter);
    }
  }

  std::size_t pivots = 0;

private:
  std::size_t cols_;
  std::vector<std::vector<double>> t_;
  std::vector<double> obj_;
  std::vector<std::size_t> basis_;
};

}  // namespace

Solution solve(const LinearProgram& lp, double eps) {
  const std::size_t n = lp.variables.size();
  const std::size_t m = lp.rows.size();
  if (lp.cost.size() != n) throw std::invalid_argument("cost vector size mismatch");

  // Column layout: structural | slack/surplus | artificial.
  std::vector<double> sign(m, 1.0);
  std::vector<Sense> sense(m);
  std::size_t slacks = 0, artificials = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sense[i] = lp.rows[i].sense;
    if (lp.rows[i].rhs < 0) {
      sign[i] = -1.0;
      if (sense[i] == Sense::le) sense[i] = Sense::ge;
      else if (sense[i] == Sense::ge) sense[i] = Sense::le;
    }
    if (sense[i] != Sense::eq) ++slacks;
    if (sense[i] != Sense::le) ++artificials;
  }
  const std::size_t cols = n + slacks + artificials;
  Tableau tab(m, cols);
  std::vector<std::size_t> init_col(m);
  std::vector<bool> is_artificial(cols, false);
  std::size_t next_slack = n, next_art = n + slacks;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    for (const auto& [var, coef] : row.terms) {
      if (var >= n) throw std::invalid_argument("row references unknown variable");
      tab.at(i, var) += sign[i] * coef;
    }
    tab.rhs(i) = sign[i] * row.rhs;
    if (sense[i] == Sense::le) {
      tab.at(i, next_slack) = 1.0;
      init_col[i] = next_slack++;
    } else {
      if (sense[i] == Sense::ge) tab.at(i, next_slack++) = -1.0;
      tab.at(i, next_art) = 1.0;
      is_artificial[next_art] = true;
      init_col[i] = next_art++;
    }
    tab.basis(i) = init_col[i];
  }

  Solution sol;
  std::vector<bool> allowed(cols, true);
  if (artificials > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j)
      if (is_artificial[j]) phase1[j] = 1.0;
    tab.set_objective(phase1);
    tab.run(allowed, eps);
    if (tab.objective() > 1e-9) {
      sol.status = Status::infeasible;
      sol.pivots = tab.pivots;
      return sol;
    }
    // Drive zero-level artificials out; rows where that is impossible are
    // redundant and keep their artificial basic at zero.
    for (std::size_t r = 0; r < m; ++r) {
      if (!is_artificial[tab.basis(r)]) continue;
      for (std::size_t j = 0; j < cols; ++j)
        if (!is_artificial[j] && std::abs(tab.at(r, j)) > 1e-9) {
          tab.pivot(r, j);
          break;
        }
    }
    for (std::size_t j = 0; j < cols; ++j)
      if (is_artificial[j]) allowed[j] = false;
  }

  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.cost[j];
  tab.set_objective(phase2);
  const auto status = tab.run(allowed, eps);
  sol.pivots = tab.pivots;
  if (status == Status::unbounded) {
    sol.status = Status::unbounded;
    return sol;
  }

  sol.status = Status::optimal;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    if (tab.basis(r) < n) sol.x[tab.basis(r)] = tab.rhs(r);
  for (std::size_t j = 0; j < n; ++j) sol.objective += lp.cost[j] * sol.x[j];

  // y' = c_B' B^-1; B^-1 sits in the columns of the initial identity basis.
  sol.duals.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double y = 0.0;
    for (std::size_t r = 0; r < m; ++r) y += phase2[tab.basis(r)] * tab.at(r, init_col[i]);
    sol.duals[i] = sign[i] * y;
  }
  sol.reduced_costs.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) sol.reduced_costs[j] = tab.reduced(j);
  return sol;
}

}  // namespace kara::lp
