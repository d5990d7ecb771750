#include <algorithm>
#include <cmath>
#include <map>

#include "mvlab/errors.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {
namespace {

// Expected one-step variation of a split into pieces of conditional mass q_d.
double split_variation(const std::vector<double>& q) {
  double s = 0.0;
  for (double x : q) s += x * x;
  return 2.0 * (1.0 - s);
}

std::vector<double> sweep_profile(const Prior& p, int N_max, int D) {
  const double theta = p.theta();
  std::vector<double> mass;
  for (std::size_t i = 0; i < p.atoms().size(); ++i) mass.push_back(p.absolute_atom_mass(i));
  std::vector<std::int64_t> all(mass.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);

  std::map<std::vector<std::int64_t>, double> states{{all, 1.0}};
  std::vector<double> out;
  double V = 0.0;
  const double pure = 2.0 * (1.0 - 1.0 / D);
  for (int n = 0; n < N_max; ++n) {
    const double cont = theta > 0.0 ? theta * std::pow(static_cast<double>(D), -n) : 0.0;
    std::map<std::vector<std::int64_t>, double> next;
    for (const auto& [S, prob] : states) {
      if (S.empty()) {
        V += prob * pure;
        next[S] += prob;
        continue;
      }
      std::vector<CellId> ids;
      Eigen::VectorXd w(static_cast<Eigen::Index>(S.size()));
      double T = cont;
      for (std::size_t i = 0; i < S.size(); ++i) {
        ids.push_back(CellId::atom_cell(S[i]));
        w(static_cast<Eigen::Index>(i)) = mass[S[i]];
        T += mass[S[i]];
      }
      auto bins = greedy_partition(CellMeasure::unchecked(std::move(ids), w), D).bins;
      std::vector<double> q;
      for (int d = 0; d < D; ++d) {
        double m = cont / D;
        for (auto a : bins[d]) m += mass[a];
        if (m <= 0.0) continue;
        q.push_back(m / T);
        std::sort(bins[d].begin(), bins[d].end());
        next[bins[d]] += prob * m / T;
      }
      V += prob * split_variation(q);
    }
    states = std::move(next);
    out.push_back(V);
  }
  return out;
}

// Halvable mass (scaled by 2^n) of blocks j > n, and block masses M_j.
struct BlockFamily {
  TailSpec tail;
  std::optional<int> J;
  long double Z = 1.0L;

  BlockFamily(double c, std::optional<int> blocks) : tail(TailSpec::dyadic_power_log(c)), J(blocks) {
    if (J) Z = 1.0L - static_cast<long double>(tail.blocks_from(static_cast<std::uint64_t>(*J)));
  }
  long double M(int j) const { return static_cast<long double>(tail.block_mass(static_cast<std::uint64_t>(j))) / Z; }
  bool exists(int j) const { return !J || j < *J; }
  long double halvable(int n) const {
    if (!J) return static_cast<long double>(tail.blocks_from(static_cast<std::uint64_t>(n + 1)));
    long double s = 0.0L;
    for (int j = n + 1; j < *J; ++j) s += M(j);
    return s;
  }
};

// Greedy placement of singleton blocks (ascending j = descending mass) onto
// two loads that start level with the halvable part.
std::pair<std::vector<int>, std::vector<int>> place(const std::vector<int>& P, const std::vector<long double>& m,
                                                    long double H, long double T, long double load[2]) {
  std::pair<std::vector<int>, std::vector<int>> bins;
  load[0] = load[1] = H / 2.0L;
  const long double tol = 1e-12L * T;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const int d = load[1] < load[0] - tol ? 1 : 0;
    (d == 0 ? bins.first : bins.second).push_back(P[i]);
    load[d] += m[i];
  }
  return bins;
}

}  // namespace

std::vector<double> dyadic_block_profile(double c, std::optional<int> J, int N_max) {
  if (J && *J < 1) throw InvalidArgument("need at least one block");
  const BlockFamily fam(c, J);
  std::map<std::vector<int>, long double> states{{{0}, 1.0L}};
  std::vector<double> out;
  long double V = 0.0L;
  for (int n = 0; n < N_max; ++n) {
    const long double H = fam.halvable(n);
    std::map<std::vector<int>, long double> next;
    for (const auto& [P, prob] : states) {
      // Masses scaled by 2^n: a singleton of block j weighs 2^(n-j) M_j.
      std::vector<long double> m(P.size());
      long double T = H;
      for (std::size_t i = 0; i < P.size(); ++i) {
        m[i] = std::ldexp(fam.M(P[i]), n - P[i]);
        T += m[i];
      }
      long double load[2];
      auto bins = place(P, m, H, T, load);
      long double split = 0.0L;
      for (int d = 0; d < 2; ++d) {
        if (load[d] <= 0.0L) continue;
        const long double q = load[d] / T;
        split += q * q;
        std::vector<int> child = d == 0 ? bins.first : bins.second;
        if (fam.exists(n + 1)) child.push_back(n + 1);
        next[std::move(child)] += prob * q;
      }
      V += prob * 2.0L * (1.0L - split);
    }
    states = std::move(next);
    out.push_back(static_cast<double>(V));
  }
  return out;
}

std::vector<double> constructive_profile(const Prior& p, int N_max, int D) {
  if (N_max < 0) throw InvalidArgument("N_max must be nonnegative");
  if (D < 2) throw InvalidArgument("partition martingale needs D >= 2");
  if (p.theta() == 1.0) {
    std::vector<double> out;
    for (int n = 1; n <= N_max; ++n) out.push_back(2.0 * n * (1.0 - 1.0 / D));
    return out;
  }
  if (p.has_tail() && p.tail()->family() == TailFamily::kDyadicPowerLog && D == 2 && p.atoms().empty() &&
      p.theta() == 0.0)
    return dyadic_block_profile(p.tail()->parameter(), std::nullopt, N_max);
  return sweep_profile(p.has_tail() ? p.materialized() : p, N_max, D);
}

Prior dyadic_blocks_prior(double c, int J) {
  if (J < 1 || J > 24) throw InvalidArgument("block count must lie in [1, 24]");
  const BlockFamily fam(c, J);
  std::vector<Atom> atoms;
  for (int j = 0; j < J; ++j) {
    const double w = static_cast<double>(fam.M(j)) / static_cast<double>(1u << j);
    for (std::uint32_t i = 0; i < (1u << j); ++i) atoms.push_back({"b" + std::to_string(j) + "." + std::to_string(i), w});
  }
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  for (auto& a : atoms) a.weight /= s;
  return Prior(0.0, std::move(atoms));
}

namespace {

class BlockedBuilder {
 public:
  BlockedBuilder(const Prior& p, int N) : N_(N) {
    const std::size_t K = p.atoms().size();
    J_ = 0;
    while ((std::size_t{1} << (J_ + 1)) - 1 < K) ++J_;
    ++J_;
    if ((std::size_t{1} << J_) - 1 != K) throw InvalidPrior("blocked prior needs 2^J - 1 atoms");
    w_ = p.atom_weights();
  }

  NodePtr node(int n, std::uint64_t path, const std::vector<std::int64_t>& P) {
    // Halvable atoms of blocks j > n in this node: indices [path * 2^(j-n), (path + 1) * 2^(j-n)).
    std::vector<std::int64_t> halv[2];
    double H = 0.0;
    for (int j = n + 1; j < J_; ++j) {
      const std::uint64_t len = std::uint64_t{1} << (j - n);
      for (std::uint64_t i = 0; i < len; ++i) {
        const std::int64_t g = static_cast<std::int64_t>((std::uint64_t{1} << j) - 1 + path * len + i);
        halv[i < len / 2 ? 0 : 1].push_back(g);
        H += w_(g);
      }
    }
    double T = H;
    for (auto a : P) T += w_(a);
    std::vector<CellId> ids;
    std::vector<double> ms;
    for (auto a : P) {
      ids.push_back(CellId::atom_cell(a));
      ms.push_back(w_(a) / T);
    }
    for (int d = 0; d < 2; ++d)
      for (auto a : halv[d]) {
        ids.push_back(CellId::atom_cell(a));
        ms.push_back(w_(a) / T);
      }
    CellMeasure here(std::move(ids), Eigen::Map<const Eigen::VectorXd>(ms.data(), static_cast<Eigen::Index>(ms.size())));
    std::vector<Branch> br;
    if (n < N_) {
      std::vector<std::int64_t> bins[2];
      double load[2] = {H / 2.0, H / 2.0};
      const double tol = 1e-12 * T;
      for (auto a : P) {
        const int d = load[1] < load[0] - tol ? 1 : 0;
        bins[d].push_back(a);
        load[d] += w_(a);
      }
      for (int d = 0; d < 2; ++d) {
        if (load[d] <= 0.0) continue;
        std::vector<std::int64_t> child = bins[d];
        const std::uint64_t cpath = path * 2 + static_cast<std::uint64_t>(d);
        if (n + 1 < J_) child.push_back(static_cast<std::int64_t>((std::uint64_t{1} << (n + 1)) - 1 + cpath));
        br.push_back({load[d] / T, node(n + 1, cpath, child), {}});
      }
    }
    return make_node(std::move(here), std::move(br));
  }

 private:
  int N_;
  int J_;
  Eigen::VectorXd w_;
};

}  // namespace

MartingaleTree blocked_partition_martingale(const Prior& finite_blocked, int N) {
  if (N < 0) throw InvalidArgument("N must be nonnegative");
  if (N > 16) throw InstanceTooLarge("explicit blocked tree limited to 16 levels");
  BlockedBuilder b(finite_blocked, N);
  return MartingaleTree(b.node(0, 0, {0}));
}

std::pair<double, double> log_log_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("log-log fit needs matching samples");
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DegenerateRegression("log-log fit needs positive samples");
    A(i, 0) = 1.0;
    A(i, 1) = std::log(x[i]);
    b(i) = std::log(y[i]);
  }
  const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  const double rms = std::sqrt((A * coef - b).squaredNorm() / static_cast<double>(n));
  return {coef(1), rms};
}

GrowthEstimate growth_exponent(const Prior& p, int D, const std::vector<int>& N_list) {
  if (N_list.size() < 3) throw InvalidArgument("growth fit needs at least three N values");
  if (!std::is_sorted(N_list.begin(), N_list.end()) || N_list.front() < 1 ||
      std::adjacent_find(N_list.begin(), N_list.end()) != N_list.end())
    throw InvalidArgument("N list must be strictly increasing and positive");
  const std::vector<double> prof = constructive_profile(p, N_list.back(), D);
  GrowthEstimate g;
  g.N = N_list;
  for (int N : N_list) g.xi.push_back(prof[static_cast<std::size_t>(N - 1)]);
  const auto [lo, hi] = std::minmax_element(g.xi.begin(), g.xi.end());
  if (*hi - *lo <= 1e-15 * std::max(1.0, std::abs(*hi))) throw DegenerateRegression("all lower bounds coincide");
  if (*lo <= 0.0) throw DegenerateRegression("non-positive lower bound in the sequence");
  std::vector<double> xs(N_list.begin(), N_list.end());
  const auto [slope, rms] = log_log_fit(xs, g.xi);
  g.exponent = slope - 0.5;
  g.residual = rms;
  if (p.has_tail()) g.alpha = alpha_threshold(*p.tail());
  return g;
}

}  // namespace mvlab
