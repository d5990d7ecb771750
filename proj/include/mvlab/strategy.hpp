#pragma once

// Behavior strategies of a repeated game with incomplete information on one
// side. Histories are sequences of (P1 action, P2 action) pairs.

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mvlab {

using History = std::vector<std::pair<int, int>>;

/// sigma: (state, history) -> distribution over P1 actions, stored as one
/// (states x actions) row-stochastic matrix per history key. When P1 ignores
/// P2's moves the key is P1's own action sequence.
class P1Strategy {
 public:
  P1Strategy() = default;
  P1Strategy(int num_states, int num_actions, bool observes_opponent = false);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  bool observes_opponent() const { return observes_opponent_; }

  /// Rows must be distributions within 1e-12 (InvalidArgument).
  void set(const History& h, const Eigen::MatrixXd& dist);
  void set_own(const std::vector<int>& own_actions, const Eigen::MatrixXd& dist);
  /// Throws HistoryGap when no entry covers `h`.
  const Eigen::MatrixXd& at(const History& h) const;
  bool defined_at(const History& h) const;

  const std::map<std::vector<int>, Eigen::MatrixXd>& table() const { return table_; }

 private:
  std::vector<int> key(const History& h) const;
  int num_states_ = 0;
  int num_actions_ = 0;
  bool observes_opponent_ = false;
  std::map<std::vector<int>, Eigen::MatrixXd> table_;
};

/// tau: history -> distribution over P2 actions.
class P2Strategy {
 public:
  P2Strategy() = default;
  explicit P2Strategy(int num_actions);

  int num_actions() const { return num_actions_; }
  void set(const History& h, const Eigen::VectorXd& dist);
  /// Same mixed action at every history.
  static P2Strategy stationary(const Eigen::VectorXd& dist);
  const Eigen::VectorXd& at(const History& h) const;
  bool defined_at(const History& h) const;

 private:
  static std::vector<int> key(const History& h);
  int num_actions_ = 0;
  std::map<std::vector<int>, Eigen::VectorXd> table_;
  std::optional<Eigen::VectorXd> stationary_;
};

/// P1's behavior strategy together with a realized public history.
struct PlayRecord {
  P1Strategy sigma;
  History history;
};

}  // namespace mvlab
