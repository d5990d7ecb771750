#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mvlab/errors.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {

std::string to_string(MaxVarMethod m) {
  switch (m) {
    case MaxVarMethod::kExhaustive: return "exhaustive";
    case MaxVarMethod::kGridDp: return "grid-dp";
    case MaxVarMethod::kConstructive: return "constructive";
  }
  return "unknown";
}

PartitionPlan greedy_partition(const CellMeasure& m, int D) {
  if (D < 2) throw InvalidArgument("greedy_partition needs D >= 2");
  std::vector<std::pair<double, std::int64_t>> items;
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.cells()[i].is_atom()) continue;
    const double w = m.masses()(static_cast<Eigen::Index>(i));
    items.emplace_back(w, m.cells()[i].atom);
    total += w;
  }
  if (items.empty()) throw InvalidArgument("greedy_partition needs at least one atom");
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  PartitionPlan plan;
  plan.bins.assign(D, {});
  std::vector<double> load(D, 0.0);
  const double tol = 1e-12 * total;
  for (const auto& [w, atom] : items) {
    int best = 0;
    for (int d = 1; d < D; ++d)
      if (load[d] < load[best] - tol) best = d;
    plan.bins[best].push_back(atom);
    load[best] += w;
  }
  for (int d = 0; d < D; ++d) {
    plan.masses.push_back(load[d] / total);
    plan.imbalance = std::max(plan.imbalance, std::abs(plan.masses.back() - 1.0 / D));
  }
  return plan;
}

namespace {

// Builds the D-ary conditioning martingale; nodes are keyed by the atoms
// still present and the level (which fixes the remaining continuous mass).
class PartitionBuilder {
 public:
  PartitionBuilder(const Prior& p, int N, int D) : N_(N), D_(D), theta_(p.theta()) {
    for (std::size_t i = 0; i < p.atoms().size(); ++i) mass_.push_back(p.absolute_atom_mass(i));
  }

  NodePtr node(const std::vector<std::int64_t>& S, int n) {
    const auto key = std::make_pair(S, n);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const double cont = theta_ > 0.0 ? theta_ * std::pow(static_cast<double>(D_), -n) : 0.0;
    double T = cont;
    for (auto a : S) T += mass_[a];
    std::vector<CellId> ids;
    Eigen::VectorXd w(static_cast<Eigen::Index>(S.size() + (cont > 0.0 ? 1 : 0)));
    Eigen::Index j = 0;
    for (auto a : S) {
      ids.push_back(CellId::atom_cell(a));
      w(j++) = mass_[a] / T;
    }
    if (cont > 0.0) {
      ids.push_back(CellId::continuous_root());
      w(j++) = cont / T;
    }
    CellMeasure here(std::move(ids), w);
    std::vector<Branch> br;
    if (n < N_) {
      std::vector<std::vector<std::int64_t>> bins(D_);
      if (!S.empty()) {
        std::vector<CellId> ai;
        Eigen::VectorXd aw(static_cast<Eigen::Index>(S.size()));
        for (std::size_t i = 0; i < S.size(); ++i) {
          ai.push_back(CellId::atom_cell(S[i]));
          aw(static_cast<Eigen::Index>(i)) = mass_[S[i]];
        }
        bins = greedy_partition(CellMeasure::unchecked(std::move(ai), aw), D_).bins;
      }
      const double piece = cont / D_;
      double qsum = 0.0;
      for (int d = 0; d < D_; ++d) {
        double q = piece;
        for (auto a : bins[d]) q += mass_[a];
        if (q <= 0.0) continue;
        std::sort(bins[d].begin(), bins[d].end());
        CellPath embed;
        if (cont > 0.0) embed = {{static_cast<std::uint32_t>(D_), static_cast<std::uint32_t>(d)}};
        br.push_back({q / T, node(bins[d], n + 1), std::move(embed)});
        qsum += q / T;
      }
      for (auto& b : br) b.prob /= qsum;
    }
    return memo_[key] = make_node(std::move(here), std::move(br));
  }

 private:
  int N_, D_;
  double theta_;
  std::vector<double> mass_;
  std::map<std::pair<std::vector<std::int64_t>, int>, NodePtr> memo_;
};

MartingaleTree constant_chain(const CellMeasure& m, int N) {
  NodePtr n = make_node(m);
  for (int i = 0; i < N; ++i) n = make_node(m, {{1.0, n, {}}});
  return MartingaleTree(n);
}

// Smallest q <= 24 with every weight a multiple of 1/q (0 when none).
int base_denominator(const Eigen::VectorXd& w) {
  for (int q = 1; q <= 24; ++q) {
    bool ok = true;
    for (Eigen::Index i = 0; i < w.size() && ok; ++i) ok = std::abs(w(i) * q - std::round(w(i) * q)) < 1e-9;
    if (ok) return q;
  }
  return 0;
}

int auto_lattice(const Eigen::VectorXd& w, int N, BranchCap D, std::uint64_t budget) {
  const int k = static_cast<int>(w.size());
  const int cap = k == 3 ? 24 : 12;
  const int q = base_denominator(w);
  const int step = q > 0 ? std::lcm(q, 2) : 2;
  for (int m = cap - cap % step; m >= step; m -= step)
    if (lattice_cost(k, m, N, D) <= budget) return m;
  for (int m = cap; m >= 1; --m)
    if (lattice_cost(k, m, N, D) <= budget) return m;
  throw InstanceTooLarge("no lattice resolution fits the budget");
}

MaxVarResult constructive_result(const Prior& p, int N, int D, bool build_witness) {
  MaxVarResult r;
  r.method = MaxVarMethod::kConstructive;
  MartingaleTree t = partition_martingale(p, N, D);
  r.value = variation(t);
  if (build_witness) r.witness = std::move(t);
  return r;
}

MaxVarResult discrete_maxvar(const Prior& p, int N, BranchCap D, const MaxVarOptions& opts) {
  if (p.has_tail()) throw InstanceTooLarge("exact solvers need a finite support; materialize the tail first");
  const std::size_t k = p.atoms().size();
  const Eigen::VectorXd w = p.atom_weights();
  const auto forced = opts.method;
  if (forced == MaxVarMethod::kConstructive)
    return constructive_result(p, N, D.bounded() ? D.value() : std::max<int>(2, static_cast<int>(k)),
                               opts.build_witness);
  if (k == 1) {
    MaxVarResult r;
    r.method = forced.value_or(MaxVarMethod::kExhaustive);
    if (opts.build_witness) r.witness = constant_chain(CellMeasure::from_prior(p), N);
    return r;
  }
  if (k == 2) {
    if (forced == MaxVarMethod::kExhaustive)
      return lattice_maxvar(w, N, D, opts.lattice > 0 ? opts.lattice : opts.grid, opts.build_witness, opts.budget);
    MaxVarResult r = grid_dp_maxvar(w(1), N, opts.grid, opts.build_witness);
    if (opts.refinement_check && opts.grid >= 4) {
      const MaxVarResult coarse = grid_dp_maxvar(w(1), N, opts.grid / 2, false);
      r.coarse_value = coarse.value;
      r.refinement_ok = std::abs(r.value - coarse.value) <= 2.0 * r.gap_bound + 1e-12;
    }
    return r;
  }
  if (forced == MaxVarMethod::kGridDp) throw InvalidArgument("grid-dp needs a two-atom prior");
  if (k > 4) throw InstanceTooLarge("exact solvers support at most four atoms");
  const int m = opts.lattice > 0 ? opts.lattice : auto_lattice(w, N, D, opts.budget);
  MaxVarResult best = lattice_maxvar(w, N, D, m, opts.build_witness, opts.budget);
  auto consider = [&](MaxVarResult r) {
    if (r.value > best.value + 1e-13) {
      r.method = MaxVarMethod::kExhaustive;
      r.resolution = best.resolution;
      best = std::move(r);
    }
  };
  const bool cells = N == 1 || (N == 2 && D.bounded() && D.value() == 2);
  if (cells && D.bounded()) {
    try {
      consider(mixed_maxvar(p, N, D, opts.mixed_lattice, opts.build_witness, opts.budget));
    } catch (const InstanceTooLarge&) {
    }
  }
  consider(constructive_result(p, N, D.bounded() ? D.value() : static_cast<int>(k), opts.build_witness));
  return best;
}

}  // namespace

MartingaleTree partition_martingale(const Prior& psrc, int N, int D) {
  if (N < 0) throw InvalidArgument("N must be nonnegative");
  if (D < 2) throw InvalidArgument("partition martingale needs D >= 2");
  const Prior p = psrc.has_tail() ? psrc.materialized() : psrc;
  std::vector<std::int64_t> all(p.atoms().size());
  std::iota(all.begin(), all.end(), 0);
  PartitionBuilder b(p, N, D);
  return MartingaleTree(b.node(all, 0));
}

MaxVarResult exact_maxvar(const Prior& p, int N, BranchCap D, const MaxVarOptions& opts) {
  if (N < 0) throw InvalidArgument("N must be nonnegative");
  if (p.theta() == 1.0) {
    if (!D.bounded()) throw InvalidArgument("purely continuous prior with unbounded D: xi = 2N is not attained");
    MaxVarResult r = constructive_result(p, N, D.value(), opts.build_witness);
    // The D-ary partition attains xi for non-atomic priors.
    r.method = MaxVarMethod::kExhaustive;
    r.value = 2.0 * N * D.continuous_factor();
    return r;
  }
  if (p.theta() > 0.0) {
    if (opts.method == MaxVarMethod::kConstructive) {
      if (!D.bounded()) throw InvalidArgument("constructive bound needs a bounded D");
      return constructive_result(p, N, D.value(), opts.build_witness);
    }
    if (p.has_tail()) throw InstanceTooLarge("mixed priors with tails are beyond the exhaustive oracle");
    return mixed_maxvar(p, N, D, opts.mixed_lattice, opts.build_witness, opts.budget);
  }
  return discrete_maxvar(p, N, D, opts);
}

namespace {

double xi_or_zero(const Prior& p, int N, BranchCap D, const MaxVarOptions& opts, double& gap) {
  MaxVarOptions o = opts;
  o.build_witness = false;
  o.method.reset();
  const MaxVarResult r = exact_maxvar(p, N, D, o);
  gap += r.gap_bound;
  return r.value;
}

}  // namespace

TheoremBoundReport check_theorem_bounds(const Prior& p, int N, BranchCap D, double beta, const MaxVarOptions& opts) {
  constexpr double kTol = 1e-9;
  if (beta < 0.0 || beta > 0.5) throw InvalidDelta("beta must lie in [0, 1/2]");
  TheoremBoundReport rep;
  rep.beta = beta;
  const double theta = p.theta();
  {
    MaxVarOptions o = opts;
    o.build_witness = false;
    const MaxVarResult r = exact_maxvar(p, N, D, o);
    rep.xi = r.value;
    rep.xi_method = r.method;
    rep.xi_gap = r.gap_bound;
  }
  const double cont = 2.0 * N * D.continuous_factor();
  if (theta > 0.0) rep.xi_continuous = cont;
  double unused = 0.0;
  double xd = 0.0;
  if (theta < 1.0) {
    const Prior pd = p.discrete_part();
    xd = xi_or_zero(pd, N, D, opts, unused);
    rep.xi_discrete = xd;
    rep.z_bound = z_bound(pd, N, beta);
    rep.pass_z = rep.z_bound.is_infinite() || xd <= rep.z_bound.to_double() + kTol;
  } else {
    rep.pass_z = true;
  }
  rep.lower_composite = theta * cont + (1.0 - theta) * xd;

  // rho_d^+ = theta * (fresh atom) + (1 - theta) * rho_d; b_theta on {0, 1}.
  double gap = 0.0;
  double xplus = 0.0;
  if (theta > 0.0 && theta < 1.0) {
    std::vector<Atom> atoms;
    for (const auto& a : p.atoms()) atoms.push_back({a.label, (1.0 - theta) * a.weight});
    std::string fresh = "fresh";
    while (std::any_of(atoms.begin(), atoms.end(), [&](const Atom& a) { return a.label == fresh; })) fresh += "'";
    atoms.push_back({fresh, theta});
    xplus = xi_or_zero(Prior(0.0, std::move(atoms)), N, D, opts, gap);
  } else if (theta == 0.0) {
    xplus = xd;
  }
  rep.xi_discrete_plus = xplus;
  const double xb = xi_or_zero(Prior::bernoulli(theta), N, D, opts, gap);
  rep.xi_bernoulli_theta = xb;
  rep.upper_composite = theta * cont + xplus + xb;
  rep.upper_gap = gap;
  rep.pass_lower = rep.xi + rep.xi_gap + kTol >= rep.lower_composite;
  rep.pass_upper = rep.xi <= rep.upper_composite + rep.upper_gap + kTol;
  return rep;
}

ExtendedReal min_z_bound(const Prior& p, int N, const std::vector<double>& betas) {
  if (betas.empty()) throw InvalidArgument("empty beta grid");
  ExtendedReal best = ExtendedReal::infinity();
  for (double b : betas) {
    const ExtendedReal z = z_bound(p, N, b);
    if (z < best) best = z;
  }
  return best;
}

std::vector<double> default_beta_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(0.05 * i);
  return g;
}

}  // namespace mvlab
