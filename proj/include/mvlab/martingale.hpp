#pragma once

// Finite-depth measure-valued martingales stored as immutable DAGs. A branch
// may place its child inside a continuous sub-cell through an embedding
// prefix, so congruent subtrees are stored once.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvlab/cell_measure.hpp"
#include "mvlab/measures.hpp"
#include "mvlab/strategy.hpp"

namespace mvlab {

struct MartingaleNode;
using NodePtr = std::shared_ptr<const MartingaleNode>;

struct Branch {
  double prob;
  NodePtr child;
  CellPath embed;  ///< prepended to the child's continuous cells
};

struct MartingaleNode {
  CellMeasure measure;
  std::vector<Branch> branches;
};

NodePtr make_node(CellMeasure measure, std::vector<Branch> branches = {});

class MartingaleTree {
 public:
  explicit MartingaleTree(NodePtr root);

  const MartingaleNode& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  /// Number of measure levels along the longest path.
  int depth() const { return depth_; }
  std::size_t distinct_nodes() const;

 private:
  NodePtr root_;
  int depth_;
};

/// Branching cap D of the class M^D (at most D children per node), or none.
class BranchCap {
 public:
  static BranchCap unbounded() { return BranchCap(); }
  explicit BranchCap(int d);

  bool bounded() const { return d_ > 0; }
  /// Requires bounded().
  int value() const;
  bool admits(std::size_t branches) const { return !bounded() || branches <= static_cast<std::size_t>(d_); }
  /// 1 - 1/D, or 1 when unbounded.
  double continuous_factor() const { return bounded() ? 1.0 - 1.0 / d_ : 1.0; }
  std::string to_string() const { return bounded() ? std::to_string(d_) : "inf"; }
  friend bool operator==(BranchCap a, BranchCap b) { return a.d_ == b.d_; }

 private:
  BranchCap() = default;
  int d_ = 0;
};

struct ValidationReport {
  bool probabilities_ok = true;
  bool martingale_ok = true;
  bool branching_ok = true;
  bool measures_ok = true;
  bool comparable_ok = true;
  double max_probability_error = 0.0;
  double max_martingale_error = 0.0;
  std::size_t max_branching = 0;
  std::vector<std::string> issues;

  bool ok() const {
    return probabilities_ok && martingale_ok && branching_ok && measures_ok && comparable_ok;
  }
};

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kMartingaleTolerance = 1e-10;
inline constexpr double kMinBranchProbability = 1e-15;

/// Never throws; every failure is recorded in the report.
ValidationReport validate(const MartingaleTree& tree, BranchCap D);

/// E sum_n |mu_{n+1} - mu_n| over the whole tree.
double variation(const MartingaleTree& tree);

/// The same martingale truncated to `depth` measure levels.
MartingaleTree prune(const MartingaleTree& tree, int depth);

/// Bayes-updated posteriors rho_1 = rho, ..., rho_{n+1} along the record's
/// history. Requires a purely atomic prior with finite support.
std::vector<CellMeasure> posterior_process(const PlayRecord& record, const Prior& p);

/// Posterior martingale generated by a P1 strategy that ignores P2's moves,
/// over `horizon` stages. Branches of probability below 1e-15 are dropped.
MartingaleTree induced_martingale(const P1Strategy& sigma, const Prior& p, int horizon);

}  // namespace mvlab
