#pragma once

// Repeated zero-sum games with incomplete information on one side: stage
// games, the Mertens-Zamir pair, the composite game built on it, and exact
// solvers for tiny instances.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvlab/martingale.hpp"
#include "mvlab/measures.hpp"
#include "mvlab/strategy.hpp"

namespace mvlab {

/// Payoff matrices g_k (P1 actions x P2 actions), one per state. P1 maximizes.
class StageGame {
 public:
  StageGame(std::vector<Eigen::MatrixXd> payoffs, std::vector<std::string> p1_labels = {},
            std::vector<std::string> p2_labels = {});

  int num_states() const { return static_cast<int>(g_.size()); }
  int num_p1_actions() const { return static_cast<int>(g_.front().rows()); }
  int num_p2_actions() const { return static_cast<int>(g_.front().cols()); }
  const Eigen::MatrixXd& payoff(int k) const { return g_[static_cast<std::size_t>(k)]; }
  double operator()(int k, int s, int t) const { return g_[static_cast<std::size_t>(k)](s, t); }
  /// sup |g_k(s, t)|.
  double payoff_sup() const { return sup_; }
  const std::vector<std::string>& p1_labels() const { return p1_labels_; }
  const std::vector<std::string>& p2_labels() const { return p2_labels_; }

  StageGame negated() const;

 private:
  std::vector<Eigen::MatrixXd> g_;
  std::vector<std::string> p1_labels_, p2_labels_;
  double sup_ = 0.0;
};

/// The two 2x2 matrices of the anomalous-growth construction; rows are P1's
/// bit h, columns P2's bit f.
struct MZStagePair {
  Eigen::Matrix2d g0;
  Eigen::Matrix2d g1;

  static MZStagePair standard();
};

struct GameSpec {
  StageGame stage;
  Prior prior;
  int horizon = 1;
  /// Set for composite games: number of states the subsets X, Y range over.
  std::optional<int> composite_states;
};

/// Horizon-N game on two states where state k plays g_k directly.
GameSpec mz_game(const Prior& prior, const MZStagePair& pair, int N);

/// Composite game: P1 plays (X, h) with X a subset of K, P2 plays (Y, f) with
/// f assigning a bit to every subset of Y, and state k pays
/// g_{[k in X]}(h, f(X & Y)). P1 action index = 2 X + h.
GameSpec build_big_game(const Prior& prior, const MZStagePair& pair, int N);

/// P2 action decoding for composite games: f is a bit mask indexed by the
/// position of a submask of Y among Y's submasks in increasing order.
struct CompositeP2Action {
  std::uint32_t Y;
  std::uint64_t f;
};
std::vector<CompositeP2Action> composite_p2_actions(int K);
int composite_p1_action(std::uint32_t X, int h);

template <typename Scalar>
struct MatrixValue2x2 {
  Scalar value;
  Eigen::Matrix<Scalar, 2, 1> p1_mix;
  Eigen::Matrix<Scalar, 2, 1> p2_mix;
};

/// Minimax value of a 2x2 zero-sum game (row player maximizes): pure saddle
/// point first, then the equalizing mixtures.
template <typename Scalar>
MatrixValue2x2<Scalar> matrix_value_2x2(const Eigen::Matrix<Scalar, 2, 2>& m) {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  auto unit = [](int i) {
    Vec v = Vec::Zero();
    v(i) = Scalar(1);
    return v;
  };
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const bool row_min = m(r, c) <= m(r, 1 - c);
      const bool col_max = m(r, c) >= m(1 - r, c);
      if (row_min && col_max) return {m(r, c), unit(r), unit(c)};
    }
  // No saddle: both players equalize.
  const Scalar den = m(0, 0) - m(0, 1) - m(1, 0) + m(1, 1);
  const Scalar x = (m(1, 1) - m(1, 0)) / den;
  const Scalar y = (m(1, 1) - m(0, 1)) / den;
  const Scalar v = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / den;
  Vec p1, p2;
  p1 << x, Scalar(1) - x;
  p2 << y, Scalar(1) - y;
  return {v, p1, p2};
}

/// Value of the one-stage game p g1 + (1 - p) g0 where P1 ignores the state.
double nr_value(const MZStagePair& pair, double p);

struct PayoffOptions {
  /// Cap on enumerated (state, action path) leaves before Monte Carlo.
  std::uint64_t enumeration_budget = 20'000'000;
  std::uint64_t samples = 200'000;
  std::uint64_t seed = 20240607;
};

struct PayoffEstimate {
  double value = 0.0;
  double std_error = 0.0;  ///< 0 for exact enumeration
  bool exact = true;
  std::uint64_t seed = 0;  ///< Monte Carlo seed when not exact
};

/// E sum_n g_k(s_n, t_n) under the prior and both behavior strategies.
/// Throws HistoryGap when a strategy is undefined at a reachable history.
PayoffEstimate expected_payoff(const GameSpec& spec, const P1Strategy& sigma, const P2Strategy& tau,
                               const PayoffOptions& opts = {});

struct BestResponse {
  double value = 0.0;
  P2Strategy tau_star;  ///< pure, lowest action index on ties
};

/// min over P2 strategies by backward induction over public histories.
BestResponse best_response_value(const GameSpec& spec, const P1Strategy& sigma,
                                 std::uint64_t budget = 50'000'000);

struct ExactValue {
  double value = 0.0;
  /// An optimal P1 strategy keyed on P1's own actions.
  P1Strategy sigma;
  /// Lines (intercept, slope) whose minimum is v_N on the state-1 mass,
  /// two-state games only.
  std::vector<std::pair<double, double>> value_lines;
};

/// Exact value for one or two states. Two states: the recursion
/// v_n(q) = max_x [min_t stage + sum_s xbar(s) v_{n-1}(q(s))] solved as a
/// linear program per point, with v_n assembled as a concave piecewise-linear
/// function by tangent sandwiching.
ExactValue exact_value_small(const GameSpec& spec, int max_horizon = 8);

/// P1 strategy for a composite two-branch martingale: at a node with
/// children mu_A (probability q_A <= q_B) and mu_B, the announced set is
/// X = {k : mu_A(k) > mu_B(k)}; (X, 1) leads to mu_A, every other action to
/// mu_B. Stages beyond the tree, or at nodes with one child, are
/// non-revealing. Throws InvalidTree when the tree is not a two-branch
/// martingale on the prior's atoms.
P1Strategy splitting_strategy(const GameSpec& spec, const MartingaleTree& tree);

}  // namespace mvlab
