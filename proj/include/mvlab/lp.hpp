#pragma once

// Dense two-phase simplex for the small linear programs of this library
// (matrix games, concave envelopes on lattices, recursive game values).

#include <vector>

#include <Eigen/Dense>

namespace mvlab {

/// maximize c'x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
/// Empty matrices (zero rows) are allowed for either constraint block.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
};

struct LpSolution {
  double value = 0.0;
  Eigen::VectorXd x;
  /// Optimal duals: value = b_ub'y_ub + b_eq'y_eq, and the sensitivity of
  /// the optimum to each right-hand side.
  Eigen::VectorXd dual_ub;
  Eigen::VectorXd dual_eq;
};

/// Bland's rule throughout, so degenerate problems terminate. Throws
/// LpFailure when the program is infeasible or unbounded.
LpSolution solve_lp(const LinearProgram& lp);

struct MatrixGameSolution {
  double value = 0.0;
  Eigen::VectorXd row_mix;  ///< maximizer
  Eigen::VectorXd col_mix;  ///< minimizer
};

/// Zero-sum game with the row player maximizing payoff(r, c).
MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff);

}  // namespace mvlab
