#include <cmath>
#include <limits>

#include "mvlab/errors.hpp"
#include "mvlab/lp.hpp"

namespace mvlab {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr int kMaxIterations = 200000;

class Tableau {
 public:
  Tableau(int rows, int cols) : T_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows), m_(rows), n_(cols) {}

  double& at(int i, int j) { return T_(i, j); }
  double& rhs(int i) { return T_(i, n_); }
  std::vector<int>& basis() { return basis_; }

  // Objective row holds reduced costs c_j - c_B B^{-1} A_j.
  void set_objective(const Eigen::VectorXd& cost) {
    T_.row(m_).setZero();
    T_.row(m_).head(n_) = cost.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) T_.row(m_) -= cb * T_.row(i);
    }
  }

  // Runs Bland's rule over columns allowed by `enterable`. Returns false when
  // the objective is unbounded.
  bool optimize(const std::vector<bool>& enterable) {
    for (int it = 0; it < kMaxIterations; ++it) {
      int enter = -1;
      for (int j = 0; j < n_; ++j)
        if (enterable[j] && T_(m_, j) > 1e-10) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        const double a = T_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = T_(i, n_) / a;
        if (leave < 0 || ratio < best - 1e-13 || (ratio <= best + 1e-13 && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw LpFailure("simplex iteration limit reached");
  }

  void pivot(int r, int c) {
    T_.row(r) /= T_(r, c);
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = T_(i, c);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    basis_[r] = c;
  }

  double objective_value() const { return -T_(m_, n_); }

 private:
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
  int m_, n_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const int n = static_cast<int>(lp.c.size());
  const int m1 = static_cast<int>(lp.A_ub.rows());
  const int m2 = static_cast<int>(lp.A_eq.rows());
  const int m = m1 + m2;
  if ((m1 && lp.A_ub.cols() != n) || (m2 && lp.A_eq.cols() != n) || lp.b_ub.size() != m1 || lp.b_eq.size() != m2)
    throw InvalidArgument("linear program dimensions disagree");

  // Row signs make every right-hand side nonnegative; rows whose slack
  // cannot start basic receive an artificial column.
  Eigen::VectorXd sign = Eigen::VectorXd::Ones(m);
  std::vector<int> art_col(m, -1);
  int cols = n + m1;
  for (int i = 0; i < m; ++i) {
    const double b = i < m1 ? lp.b_ub(i) : lp.b_eq(i - m1);
    if (b < 0.0) sign(i) = -1.0;
    if (i >= m1 || b < 0.0) art_col[i] = cols++;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, cols);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    if (i < m1) {
      A.row(i).head(n) = lp.A_ub.row(i);
      A(i, n + i) = 1.0;
      b(i) = lp.b_ub(i);
    } else {
      A.row(i).head(n) = lp.A_eq.row(i - m1);
      b(i) = lp.b_eq(i - m1);
    }
    A.row(i) *= sign(i);
    b(i) *= sign(i);
    if (art_col[i] >= 0) A(i, art_col[i]) = 1.0;
  }

  Tableau T(m, cols);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < cols; ++j) T.at(i, j) = A(i, j);
    T.rhs(i) = b(i);
    T.basis()[i] = art_col[i] >= 0 ? art_col[i] : n + i;
  }
  std::vector<bool> is_art(cols, false);
  for (int i = 0; i < m; ++i)
    if (art_col[i] >= 0) is_art[art_col[i]] = true;

  std::vector<bool> enterable(cols, true);
  bool any_art = false;
  for (int i = 0; i < m; ++i) any_art = any_art || art_col[i] >= 0;
  if (any_art) {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(cols);
    for (int j = 0; j < cols; ++j)
      if (is_art[j]) c1(j) = -1.0;
    T.set_objective(c1);
    T.optimize(enterable);
    if (T.objective_value() < -1e-9 * (1.0 + b.cwiseAbs().sum())) throw LpFailure("linear program is infeasible");
    // Drive remaining artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (!is_art[T.basis()[i]]) continue;
      for (int j = 0; j < cols; ++j)
        if (!is_art[j] && std::abs(T.at(i, j)) > 1e-9) {
          T.pivot(i, j);
          break;
        }
    }
    for (int j = 0; j < cols; ++j)
      if (is_art[j]) enterable[j] = false;
  }
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(cols);
  c2.head(n) = lp.c;
  T.set_objective(c2);
  if (!T.optimize(enterable)) throw LpFailure("linear program is unbounded");

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (T.basis()[i] < n) sol.x(T.basis()[i]) = std::max(0.0, T.rhs(i));
  sol.value = lp.c.dot(sol.x);

  // Duals from the final basis: B'y = c_B on the sign-adjusted system.
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cB(m);
  for (int i = 0; i < m; ++i) {
    B.col(i) = A.col(T.basis()[i]);
    cB(i) = c2(T.basis()[i]);
  }
  Eigen::VectorXd y = m ? Eigen::VectorXd(B.transpose().fullPivLu().solve(cB)) : Eigen::VectorXd();
  y = y.cwiseProduct(sign);
  sol.dual_ub = y.head(m1);
  sol.dual_eq = y.tail(m2);
  return sol;
}

MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& payoff) {
  const int R = static_cast<int>(payoff.rows()), C = static_cast<int>(payoff.cols());
  if (R == 0 || C == 0) throw InvalidArgument("empty matrix game");
  const double shift = 1.0 - payoff.minCoeff();
  // Variables (x_1..x_R, v); maximize v with v <= x'A_c for all columns c.
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Zero(R + 1);
  lp.c(R) = 1.0;
  lp.A_ub = Eigen::MatrixXd::Zero(C, R + 1);
  lp.A_ub.leftCols(R) = -(payoff.array() + shift).matrix().transpose();
  lp.A_ub.col(R).setOnes();
  lp.b_ub = Eigen::VectorXd::Zero(C);
  lp.A_eq = Eigen::MatrixXd::Zero(1, R + 1);
  lp.A_eq.leftCols(R).setOnes();
  lp.b_eq = Eigen::VectorXd::Ones(1);
  const LpSolution s = solve_lp(lp);
  MatrixGameSolution out;
  out.value = s.value - shift;
  out.row_mix = s.x.head(R);
  out.row_mix /= out.row_mix.sum();
  out.col_mix = s.dual_ub.cwiseMax(0.0);
  const double t = out.col_mix.sum();
  if (t > 0.0) out.col_mix /= t;
  return out;
}

}  // namespace mvlab
