#pragma once

#include <Eigen/Dense>
#include <utility>

#include "vc/core_model.hpp"

namespace vc {

/// Dense convex QP:
///   minimize    1/2 x' P x + q' x
///   subject to  lo <= A x <= hi   (rowwise; lo_i == hi_i makes an equality,
///                                  +-inf disables a side)
///
/// Dual convention: stationarity is P x + q + A' y = 0 with y_i >= 0 on an
/// active upper bound and y_i <= 0 on an active lower bound.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int n() const { return static_cast<int>(q.size()); }
  int m() const { return static_cast<int>(lo.size()); }

  /// Structural checks plus a symmetry and minimum-eigenvalue estimate on P
  /// (tolerance 1e-8, relative to the largest entry). The spectral part costs
  /// up to a factorization, so solve() runs only the structural subset.
  void validate() const;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

struct QpSolution {
  QpStatus status = QpStatus::MaxIterations;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double objective = 0;
  int iterations = 0;
  double primal_residual = 0;  // scaled, see kkt_residuals
  double dual_residual = 0;
  bool polished = false;
};

/// Operator-splitting solve with Ruiz equilibration and over-relaxation.
/// Residuals are checked periodically against the original (unscaled) data;
/// once they are small an active-set polish tightens the iterate to machine
/// precision. Optimal is returned only with both scaled residuals <= eps.
/// warm, when given, seeds primal and dual iterates (same dimensions).
QpSolution solve(const QpProblem& p, const QpSettings& settings,
                 const QpSolution* warm = nullptr);

/// (primal, dual) KKT residuals of (x, y), each divided by 1 + the inf-norm of
/// the participating data, matching the solver's termination test.
std::pair<double, double> kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y);

}  // namespace vc
