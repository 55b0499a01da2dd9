#include "kara/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace kara::qp {

namespace {

double dot(const Constraint& c, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& [i, a] : c.terms) s += a * x[i];
  return s;
}

double dot(const Constraint& c, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (const auto& [i, a] : c.terms) s += a * x(static_cast<Eigen::Index>(i));
  return s;
}

Eigen::RowVectorXd dense(const Constraint& c, std::size_t n) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& [i, a] : c.terms) row(static_cast<Eigen::Index>(i)) += a;
  return row;
}

}  // namespace

std::optional<std::vector<double>> solve_diagonal(const std::vector<double>& h,
                                                  const std::vector<double>& g,
                                                  const std::vector<Constraint>& constraints,
                                                  std::vector<double> x0, double tol) {
  const std::size_t n = h.size();
  for (const auto& c : constraints) {
    const double r = dot(c, x0) - c.rhs;
    if (c.equality ? std::abs(r) > 1e-8 : r < -1e-8) return std::nullopt;
  }

  // Working set starts with a linearly independent subset of the equalities.
  std::vector<std::size_t> working;
  Eigen::MatrixXd basis(0, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (!constraints[i].equality) continue;
    Eigen::MatrixXd trial(basis.rows() + 1, basis.cols());
    trial << basis, dense(constraints[i], n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      basis = std::move(trial);
      working.push_back(i);
    }
  }

  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(n));
  const auto ni = static_cast<Eigen::Index>(n);

  for (int iter = 0; iter < 10000; ++iter) {
    const auto w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(ni + w, ni + w);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni + w);
    for (Eigen::Index i = 0; i < ni; ++i) {
      kkt(i, i) = h[static_cast<std::size_t>(i)];
      rhs(i) = -(h[static_cast<std::size_t>(i)] * x(i) + g[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index k = 0; k < w; ++k) {
      const auto row = dense(constraints[working[static_cast<std::size_t>(k)]], n);
      kkt.block(ni + k, 0, 1, ni) = row;
      kkt.block(0, ni + k, ni, 1) = -row.transpose();
    }
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(ni);

    if (p.lpNorm<Eigen::Infinity>() <= tol) {
      // Multipliers of inequalities in the working set must be non-negative.
      std::size_t drop = working.size();
      double most_negative = -tol;
      for (std::size_t k = 0; k < working.size(); ++k) {
        if (constraints[working[k]].equality) continue;
        const double lambda = sol(ni + static_cast<Eigen::Index>(k));
        if (lambda < most_negative) {
          most_negative = lambda;
          drop = k;
        }
      }
      if (drop == working.size()) {
        std::vector<double> out(x.data(), x.data() + x.size());
        // Constraints in the working set hold exactly for single-variable rows.
        for (auto idx : working) {
          const auto& c = constraints[idx];
          if (c.terms.size() == 1) out[c.terms[0].first] = c.rhs / c.terms[0].second;
        }
        return out;
      }
      working.erase(working.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    double alpha = 1.0;
    std::size_t blocking = constraints.size();
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const auto& c = constraints[i];
      if (c.equality || std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double ap = dot(c, p);
      if (ap >= -tol) continue;
      const double step = std::max(0.0, (c.rhs - dot(c, x)) / ap);
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    x += alpha * p;
    if (blocking != constraints.size()) working.push_back(blocking);
  }
  return std::nullopt;
}

}  // namespace kara::qp
