#include <algorithm>
#include <cmath>
#include <functional>

#include "mvlab/errors.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {
namespace {

// A finite cell algebra for the search: atoms of the prior plus equal pieces
// of the continuous component.
struct CellSet {
  std::vector<CellId> ids;
  std::vector<double> mass;
};

CellSet atoms_and_pieces(const Prior& p, const std::vector<CellPath>& pieces) {
  CellSet s;
  for (std::size_t i = 0; i < p.atoms().size(); ++i) {
    s.ids.push_back(CellId::atom_cell(static_cast<std::int64_t>(i)));
    s.mass.push_back(p.absolute_atom_mass(i));
  }
  if (p.theta() > 0.0) {
    for (const auto& path : pieces) {
      s.ids.push_back(CellId{-1, path});
      s.mass.push_back(p.theta() * CellId{-1, path}.base_fraction());
    }
  }
  return s;
}

std::vector<CellPath> pieces(std::uint32_t arity) {
  std::vector<CellPath> out;
  for (std::uint32_t d = 0; d < arity; ++d) out.push_back({{arity, d}});
  return out;
}

CellMeasure measure_of(const std::vector<CellId>& ids, const std::vector<double>& mass, double scale) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(mass.size()));
  for (std::size_t i = 0; i < mass.size(); ++i) m(static_cast<Eigen::Index>(i)) = mass[i] / scale;
  return CellMeasure(ids, m);
}

// Best assignment of cells to at most D groups for one step; the value of a
// partition with group masses q_d is 2 (1 - sum q_d^2).
struct PartitionChoice {
  double value = 0.0;
  std::vector<int> label;
};

PartitionChoice best_partition(const std::vector<double>& mass, int D) {
  const int n = static_cast<int>(mass.size());
  double total = 0.0;
  for (double m : mass) total += m;
  PartitionChoice best;
  best.label.assign(n, 0);
  std::vector<int> label(n, 0);
  std::vector<double> q(D, 0.0);
  // Restricted growth strings enumerate each partition once.
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      double s = 0.0;
      for (int d = 0; d < used; ++d) s += (q[d] / total) * (q[d] / total);
      const double v = 2.0 * (1.0 - s);
      if (v > best.value + 1e-15) {
        best.value = v;
        best.label = label;
      }
      return;
    }
    for (int d = 0; d < std::min(used + 1, D); ++d) {
      label[i] = d;
      q[d] += mass[i];
      rec(i + 1, std::max(used, d + 1));
      q[d] -= mass[i];
    }
  };
  rec(0, 0);
  return best;
}

// Node for a one-step partition of `cells` (masses relative to `scale`):
// children are the conditioned measures, each a leaf.
NodePtr partition_node(const std::vector<CellId>& ids, const std::vector<double>& mass, double scale,
                       const std::vector<int>& label, int D) {
  const CellMeasure here = measure_of(ids, mass, scale);
  std::vector<Branch> br;
  for (int d = 0; d < D; ++d) {
    std::vector<CellId> ci;
    std::vector<double> cm;
    double q = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (label[i] == d && mass[i] > 0.0) {
        ci.push_back(ids[i]);
        cm.push_back(mass[i]);
        q += mass[i];
      }
    if (q <= 0.0) continue;
    br.push_back({q / scale, make_node(measure_of(ci, cm, q)), {}});
  }
  double t = 0.0;
  for (const auto& b : br) t += b.prob;
  for (auto& b : br) b.prob /= t;
  if (br.size() == 1) br[0].child = make_node(here);
  return make_node(here, std::move(br));
}

// Refines a cell list by splitting every continuous cell into two halves.
void halve(const std::vector<CellId>& ids, const std::vector<double>& mass, std::vector<CellId>& out_ids,
           std::vector<double>& out_mass) {
  out_ids.clear();
  out_mass.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].is_atom()) {
      out_ids.push_back(ids[i]);
      out_mass.push_back(mass[i]);
    } else {
      for (std::uint32_t h = 0; h < 2; ++h) {
        out_ids.push_back(ids[i].child(2, h));
        out_mass.push_back(mass[i] / 2.0);
      }
    }
  }
}

struct OneStep {
  double value = 0.0;
  unsigned subset = 0;
};

// max over subsets S of 4 a (1 - a), a = nu(S) / total.
OneStep best_binary(const std::vector<double>& mass, double total) {
  const int n = static_cast<int>(mass.size());
  OneStep best;
  for (unsigned S = 1; S + 1 < (1u << n); ++S) {
    double a = 0.0;
    for (int i = 0; i < n; ++i)
      if (S >> i & 1u) a += mass[i];
    a /= total;
    const double v = 4.0 * a * (1.0 - a);
    if (v > best.value + 1e-15) {
      best.value = v;
      best.subset = S;
    }
  }
  return best;
}

std::vector<int> subset_labels(unsigned S, int n) {
  std::vector<int> l(n);
  for (int i = 0; i < n; ++i) l[i] = (S >> i & 1u) ? 0 : 1;
  return l;
}

}  // namespace

MaxVarResult mixed_maxvar(const Prior& p, int N, BranchCap D, int likelihood_lattice, bool build_witness,
                          std::uint64_t budget) {
  if (p.has_tail()) throw InstanceTooLarge("cell search needs finitely many atoms");
  if (!D.bounded()) throw InstanceTooLarge("cell search needs a bounded branching cap");
  if (p.theta() == 1.0) throw InvalidArgument("purely continuous prior: use the partition martingale");
  const int Dv = D.value();
  MaxVarResult res;
  res.method = MaxVarMethod::kExhaustive;
  res.resolution = likelihood_lattice;
  const CellMeasure root = CellMeasure::from_prior(p);
  if (N == 0) {
    if (build_witness) res.witness = MartingaleTree(make_node(root));
    return res;
  }
  if (N == 1) {
    const CellSet cs = atoms_and_pieces(p, pieces(static_cast<std::uint32_t>(Dv)));
    const double work = std::pow(static_cast<double>(Dv), static_cast<double>(cs.mass.size()));
    if (work > static_cast<double>(budget)) throw InstanceTooLarge("too many one-step partitions");
    const PartitionChoice c = best_partition(cs.mass, Dv);
    res.value = c.value;
    if (build_witness) {
      NodePtr n = partition_node(cs.ids, cs.mass, 1.0, c.label, Dv);
      // Root measure is stated on the coarse cells; the first split refines it.
      std::vector<Branch> br = n->branches;
      res.witness = MartingaleTree(make_node(root, std::move(br)));
    }
    return res;
  }
  if (N > 2 || Dv != 2)
    throw InstanceTooLarge("cell search covers N = 1 for any D and N = 2 for D = 2");

  // N = 2, D = 2: fractional first split on atoms and continuous halves,
  // exact binary last step on atoms and quarters.
  const CellSet cs = atoms_and_pieces(p, pieces(2));
  const int n1 = static_cast<int>(cs.mass.size());
  const int M = likelihood_lattice;
  if (M < 1) throw InvalidArgument("likelihood lattice must be positive");
  const double combos = std::pow(M + 1.0, n1);
  const int nf = n1 + (p.theta() > 0.0 ? 2 : 0);
  if (combos * std::pow(2.0, nf + 1) > static_cast<double>(budget))
    throw InstanceTooLarge("first-split likelihood lattice exceeds the budget");

  std::vector<CellId> fine_ids;
  std::vector<double> fine_mass;
  halve(cs.ids, cs.mass, fine_ids, fine_mass);
  // Stay first, then one exact binary step on the fine cells.
  const OneStep stay = best_binary(fine_mass, 1.0);
  double best = stay.value;
  std::vector<int> best_lambda;  // empty: stay

  std::vector<int> lam(n1, 0);
  std::vector<double> mA(n1), mB(n1), fA, fB;
  std::vector<CellId> tmp_ids;
  for (double it = 0; it < combos; ++it) {
    double qA = 0.0;
    for (int c = 0; c < n1; ++c) {
      mA[c] = cs.mass[c] * lam[c] / M;
      mB[c] = cs.mass[c] - mA[c];
      qA += mA[c];
    }
    if (qA > 1e-15 && qA < 1.0 - 1e-15) {
      const double qB = 1.0 - qA;
      double tvA = 0.0, tvB = 0.0;
      for (int c = 0; c < n1; ++c) {
        tvA += std::abs(mA[c] / qA - cs.mass[c]);
        tvB += std::abs(mB[c] / qB - cs.mass[c]);
      }
      halve(cs.ids, mA, tmp_ids, fA);
      halve(cs.ids, mB, tmp_ids, fB);
      const double v = qA * (tvA + best_binary(fA, qA).value) + qB * (tvB + best_binary(fB, qB).value);
      if (v > best + 1e-15) {
        best = v;
        best_lambda = lam;
      }
    }
    for (int c = 0; c < n1; ++c) {
      if (++lam[c] <= M) break;
      lam[c] = 0;
    }
  }
  res.value = best;
  if (build_witness) {
    std::vector<Branch> br;
    if (best_lambda.empty()) {
      NodePtr child = partition_node(fine_ids, fine_mass, 1.0, subset_labels(stay.subset, nf), 2);
      br.push_back({1.0, child, {}});
    } else {
      double qA = 0.0;
      for (int c = 0; c < n1; ++c) {
        mA[c] = cs.mass[c] * best_lambda[c] / M;
        mB[c] = cs.mass[c] - mA[c];
        qA += mA[c];
      }
      const double qB = 1.0 - qA;
      for (int side = 0; side < 2; ++side) {
        const std::vector<double>& ms = side == 0 ? mA : mB;
        const double q = side == 0 ? qA : qB;
        std::vector<double> f;
        halve(cs.ids, ms, tmp_ids, f);
        const OneStep s = best_binary(f, q);
        br.push_back({q, partition_node(tmp_ids, f, q, subset_labels(s.subset, nf), 2), {}});
      }
    }
    res.witness = MartingaleTree(make_node(root, std::move(br)));
  }
  return res;
}

}  // namespace mvlab
