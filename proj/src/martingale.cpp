#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mvlab/errors.hpp"
#include "mvlab/martingale.hpp"

namespace mvlab {

NodePtr make_node(CellMeasure measure, std::vector<Branch> branches) {
  return std::make_shared<const MartingaleNode>(MartingaleNode{std::move(measure), std::move(branches)});
}

namespace {

int depth_of(const MartingaleNode* n, std::unordered_map<const MartingaleNode*, int>& memo) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  int d = 0;
  for (const auto& b : n->branches) d = std::max(d, depth_of(b.child.get(), memo));
  return memo[n] = d + 1;
}

void collect(const MartingaleNode* n, std::unordered_set<const MartingaleNode*>& seen) {
  if (!seen.insert(n).second) return;
  for (const auto& b : n->branches) collect(b.child.get(), seen);
}

}  // namespace

MartingaleTree::MartingaleTree(NodePtr root) : root_(std::move(root)) {
  if (!root_) throw InvalidTree("tree needs a root");
  std::unordered_map<const MartingaleNode*, int> memo;
  depth_ = depth_of(root_.get(), memo);
}

std::size_t MartingaleTree::distinct_nodes() const {
  std::unordered_set<const MartingaleNode*> seen;
  collect(root_.get(), seen);
  return seen.size();
}

BranchCap::BranchCap(int d) : d_(d) {
  if (d < 2) throw InvalidArgument("branching cap must be at least 2");
}

int BranchCap::value() const {
  if (!bounded()) throw InvalidArgument("unbounded branching cap has no value");
  return d_;
}

namespace {

class Validator {
 public:
  Validator(BranchCap D, ValidationReport& r) : D_(D), r_(r) {}

  void visit(const MartingaleNode* n) {
    if (!seen_.insert(n).second) return;
    ++index_;
    if (!n->measure.normalized()) {
      r_.measures_ok = false;
      note("node " + std::to_string(index_) + ": measure sums to " + std::to_string(n->measure.total()));
    }
    if (n->branches.empty()) return;
    r_.max_branching = std::max(r_.max_branching, n->branches.size());
    if (!D_.admits(n->branches.size())) {
      r_.branching_ok = false;
      note("node " + std::to_string(index_) + ": " + std::to_string(n->branches.size()) +
           " children exceed D = " + D_.to_string());
    }
    double sum = 0.0;
    bool finite = true;
    for (const auto& b : n->branches) {
      if (!std::isfinite(b.prob) || b.prob < kMinBranchProbability) {
        finite = false;
        note("node " + std::to_string(index_) + ": branch probability " + std::to_string(b.prob));
      }
      sum += b.prob;
    }
    const double perr = std::abs(sum - 1.0);
    r_.max_probability_error = std::max(r_.max_probability_error, perr);
    if (!finite || perr > kProbabilityTolerance) {
      r_.probabilities_ok = false;
      if (finite) note("node " + std::to_string(index_) + ": branch probabilities sum to " + std::to_string(sum));
    }
    std::vector<PlacedMeasure> placed{{&n->measure, nullptr}};
    for (const auto& b : n->branches) placed.push_back({&b.child->measure, &b.embed});
    try {
      const Eigen::MatrixXd R = common_refinement(placed);
      Eigen::VectorXd mix = Eigen::VectorXd::Zero(R.rows());
      for (std::size_t i = 0; i < n->branches.size(); ++i)
        mix += n->branches[i].prob * R.col(static_cast<Eigen::Index>(i + 1));
      const double err = R.rows() ? (mix - R.col(0)).cwiseAbs().maxCoeff() : 0.0;
      r_.max_martingale_error = std::max(r_.max_martingale_error, err);
      if (err > kMartingaleTolerance) {
        r_.martingale_ok = false;
        std::ostringstream os;
        os << "node " << index_ << ": expected child measure misses parent by " << err;
        note(os.str());
      }
    } catch (const IncomparableCells& e) {
      r_.comparable_ok = false;
      note("node " + std::to_string(index_) + ": " + e.what());
    }
    for (const auto& b : n->branches)
      if (b.child) visit(b.child.get());
  }

 private:
  void note(std::string s) {
    if (r_.issues.size() < 32) r_.issues.push_back(std::move(s));
  }
  BranchCap D_;
  ValidationReport& r_;
  std::unordered_set<const MartingaleNode*> seen_;
  std::size_t index_ = 0;
};

double variation_of(const MartingaleNode* n, std::unordered_map<const MartingaleNode*, double>& memo) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  long double v = 0.0L;
  for (const auto& b : n->branches)
    v += b.prob * (tv_distance(n->measure, b.child->measure, b.embed) + variation_of(b.child.get(), memo));
  return memo[n] = static_cast<double>(v);
}

NodePtr pruned(const NodePtr& n, int levels, std::map<std::pair<const MartingaleNode*, int>, NodePtr>& memo) {
  if (levels <= 1 || n->branches.empty()) {
    if (n->branches.empty()) return n;
    return make_node(n->measure);
  }
  const auto key = std::make_pair(n.get(), levels);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  std::vector<Branch> br;
  br.reserve(n->branches.size());
  for (const auto& b : n->branches) br.push_back({b.prob, pruned(b.child, levels - 1, memo), b.embed});
  return memo[key] = make_node(n->measure, std::move(br));
}

CellMeasure atom_measure(const Eigen::VectorXd& w) {
  std::vector<CellId> cells;
  for (Eigen::Index k = 0; k < w.size(); ++k) cells.push_back(CellId::atom_cell(k));
  return CellMeasure(std::move(cells), w);
}

Eigen::VectorXd finite_weights(const Prior& p) {
  if (p.theta() != 0.0 || p.has_tail()) throw InvalidPrior("needs a finite purely atomic prior");
  return p.atom_weights();
}

NodePtr induced_node(const P1Strategy& sigma, const Eigen::VectorXd& mu, std::vector<int>& own, int remaining) {
  std::vector<Branch> br;
  if (remaining > 0) {
    History h;
    for (int s : own) h.emplace_back(s, 0);
    const Eigen::MatrixXd& dist = sigma.at(h);
    for (int s = 0; s < sigma.num_actions(); ++s) {
      const Eigen::VectorXd joint = mu.cwiseProduct(dist.col(s));
      const double q = joint.sum();
      if (q < kMinBranchProbability) continue;
      own.push_back(s);
      br.push_back({q, induced_node(sigma, joint / q, own, remaining - 1), {}});
      own.pop_back();
    }
    double total = 0.0;
    for (const auto& b : br) total += b.prob;
    for (auto& b : br) b.prob /= total;
  }
  return make_node(atom_measure(mu), std::move(br));
}

}  // namespace

ValidationReport validate(const MartingaleTree& tree, BranchCap D) {
  ValidationReport r;
  Validator v(D, r);
  try {
    v.visit(&tree.root());
  } catch (const std::exception& e) {
    r.comparable_ok = false;
    r.issues.push_back(std::string("validation aborted: ") + e.what());
  }
  return r;
}

double variation(const MartingaleTree& tree) {
  std::unordered_map<const MartingaleNode*, double> memo;
  return variation_of(&tree.root(), memo);
}

MartingaleTree prune(const MartingaleTree& tree, int depth) {
  if (depth < 1) throw InvalidArgument("depth must be at least 1");
  std::map<std::pair<const MartingaleNode*, int>, NodePtr> memo;
  return MartingaleTree(pruned(tree.root_ptr(), depth, memo));
}

std::vector<CellMeasure> posterior_process(const PlayRecord& record, const Prior& p) {
  Eigen::VectorXd mu = finite_weights(p);
  if (record.sigma.num_states() != mu.size()) throw InvalidArgument("strategy and prior disagree on #K");
  std::vector<CellMeasure> out{atom_measure(mu)};
  History prefix;
  for (const auto& step : record.history) {
    const Eigen::MatrixXd& dist = record.sigma.at(prefix);
    if (step.first < 0 || step.first >= dist.cols()) throw InvalidArgument("action out of range");
    const Eigen::VectorXd joint = mu.cwiseProduct(dist.col(step.first));
    const double q = joint.sum();
    if (!(q > 0.0)) throw ZeroProbabilityHistory("observed action has probability 0 after " +
                                                 std::to_string(prefix.size()) + " stages");
    mu = joint / q;
    out.push_back(atom_measure(mu));
    prefix.push_back(step);
  }
  return out;
}

MartingaleTree induced_martingale(const P1Strategy& sigma, const Prior& p, int horizon) {
  if (sigma.observes_opponent())
    throw InvalidArgument("posterior martingale of a P2-dependent strategy needs P2's strategy too");
  const Eigen::VectorXd mu = finite_weights(p);
  if (sigma.num_states() != mu.size()) throw InvalidArgument("strategy and prior disagree on #K");
  std::vector<int> own;
  return MartingaleTree(induced_node(sigma, mu, own, horizon));
}

}  // namespace mvlab
