#include <cmath>

#include "mvlab/errors.hpp"
#include "mvlab/strategy.hpp"

namespace mvlab {
namespace {

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if ((v.array() < 0.0).any() || !v.allFinite()) throw InvalidArgument("negative or non-finite probability");
  if (std::abs(v.sum() - 1.0) > 1e-12) throw InvalidArgument("probabilities must sum to 1");
}

}  // namespace

P1Strategy::P1Strategy(int num_states, int num_actions, bool observes_opponent)
    : num_states_(num_states), num_actions_(num_actions), observes_opponent_(observes_opponent) {
  if (num_states < 1 || num_actions < 1) throw InvalidArgument("empty strategy dimensions");
}

std::vector<int> P1Strategy::key(const History& h) const {
  std::vector<int> k;
  k.reserve(h.size() * (observes_opponent_ ? 2 : 1));
  for (const auto& [s, t] : h) {
    k.push_back(s);
    if (observes_opponent_) k.push_back(t);
  }
  return k;
}

void P1Strategy::set(const History& h, const Eigen::MatrixXd& dist) {
  if (dist.rows() != num_states_ || dist.cols() != num_actions_)
    throw InvalidArgument("strategy entry has the wrong shape");
  for (int k = 0; k < num_states_; ++k) check_distribution(dist.row(k).transpose());
  table_[key(h)] = dist;
}

void P1Strategy::set_own(const std::vector<int>& own_actions, const Eigen::MatrixXd& dist) {
  if (observes_opponent_) throw InvalidArgument("set_own needs a strategy that ignores P2");
  History h;
  for (int s : own_actions) h.emplace_back(s, 0);
  set(h, dist);
}

const Eigen::MatrixXd& P1Strategy::at(const History& h) const {
  auto it = table_.find(key(h));
  if (it == table_.end()) throw HistoryGap("P1 strategy undefined after " + std::to_string(h.size()) + " stages");
  return it->second;
}

bool P1Strategy::defined_at(const History& h) const { return table_.count(key(h)) > 0; }

P2Strategy::P2Strategy(int num_actions) : num_actions_(num_actions) {
  if (num_actions < 1) throw InvalidArgument("empty action set");
}

std::vector<int> P2Strategy::key(const History& h) {
  std::vector<int> k;
  k.reserve(2 * h.size());
  for (const auto& [s, t] : h) {
    k.push_back(s);
    k.push_back(t);
  }
  return k;
}

void P2Strategy::set(const History& h, const Eigen::VectorXd& dist) {
  if (dist.size() != num_actions_) throw InvalidArgument("strategy entry has the wrong shape");
  check_distribution(dist);
  table_[key(h)] = dist;
}

P2Strategy P2Strategy::stationary(const Eigen::VectorXd& dist) {
  P2Strategy s(static_cast<int>(dist.size()));
  check_distribution(dist);
  s.stationary_ = dist;
  return s;
}

const Eigen::VectorXd& P2Strategy::at(const History& h) const {
  auto it = table_.find(key(h));
  if (it != table_.end()) return it->second;
  if (stationary_) return *stationary_;
  throw HistoryGap("P2 strategy undefined after " + std::to_string(h.size()) + " stages");
}

bool P2Strategy::defined_at(const History& h) const { return stationary_ || table_.count(key(h)) > 0; }

}  // namespace mvlab
