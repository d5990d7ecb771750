#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <unordered_map>

#include "mvlab/errors.hpp"
#include "mvlab/lp.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {
namespace {

constexpr int kMaxAtoms = 4;
using Coord = std::array<int, kMaxAtoms>;

// A split of one lattice point: `count` children (1 = stay) with weights.
struct Split {
  int count = 1;
  std::array<int, kMaxAtoms> idx{};
  std::array<double, kMaxAtoms> w{};
};

struct Lattice {
  int k = 0, m = 0;
  std::vector<Coord> pts;
  std::unordered_map<std::uint64_t, int> index;

  std::uint64_t key(const Coord& c) const {
    std::uint64_t h = 0;
    for (int i = 0; i < k; ++i) h = h * static_cast<std::uint64_t>(m + 1) + static_cast<std::uint64_t>(c[i]);
    return h;
  }
  int find(const Coord& c) const {
    auto it = index.find(key(c));
    return it == index.end() ? -1 : it->second;
  }
};

void enumerate(Lattice& L, Coord& c, int pos, int left) {
  if (pos == L.k - 1) {
    c[pos] = left;
    L.index.emplace(L.key(c), static_cast<int>(L.pts.size()));
    L.pts.push_back(c);
    return;
  }
  for (int v = left; v >= 0; --v) {
    c[pos] = v;
    enumerate(L, c, pos + 1, left - v);
  }
}

std::uint64_t binom(int n, int r) {
  if (r < 0 || r > n) return 0;
  std::uint64_t b = 1;
  for (int i = 1; i <= r; ++i) b = b * static_cast<std::uint64_t>(n - r + i) / static_cast<std::uint64_t>(i);
  return b;
}

// Effective cap: more than k points never help in dimension k - 1.
int effective_cap(int k, BranchCap D) { return D.bounded() ? std::min(D.value(), k) : k; }

struct LatticeLevel {
  std::vector<double> V;
  std::vector<Split> split;
};

class LatticeSolver {
 public:
  LatticeSolver(int k, int m, int cap) : cap_(cap) {
    L_.k = k;
    L_.m = m;
    Coord c{};
    enumerate(L_, c, 0, m);
  }

  const Lattice& lattice() const { return L_; }

  // Best split at a point with coordinates x / m (possibly non-integer),
  // given continuation values `prev` on the lattice and `stay_value`.
  Split best_split(const std::array<double, kMaxAtoms>& x, int on_lattice, const std::vector<double>& prev,
                   double stay_value, double& value) const {
    const int k = L_.k, m = L_.m;
    const int P = static_cast<int>(L_.pts.size());
    std::vector<double> F(P);
    for (int j = 0; j < P; ++j) {
      double tv = 0.0;
      for (int c = 0; c < k; ++c) tv += std::abs(L_.pts[j][c] - x[c]);
      F[j] = tv / m + prev[j];
    }
    Split best;
    best.count = 1;
    value = stay_value;
    auto offer = [&](double v, int n, const int* idx, const double* w) {
      if (v > value + 1e-15) {
        value = v;
        best.count = n;
        for (int i = 0; i < n; ++i) {
          best.idx[i] = idx[i];
          best.w[i] = w[i];
        }
      }
    };
    if (cap_ >= k) {
      lp_split(x, F, offer);
      return best;
    }
    if (on_lattice >= 0) {
      const Coord& p = L_.pts[on_lattice];
      for (int a = 0; a < P; ++a) {
        if (a == on_lattice) continue;
        Coord v{};
        int g = 0;
        for (int c = 0; c < k; ++c) {
          v[c] = p[c] - L_.pts[a][c];
          g = std::gcd(g, std::abs(v[c]));
        }
        for (int c = 0; c < k; ++c) v[c] /= g;
        Coord b = p;
        for (int t = 1;; ++t) {
          bool inside = true;
          for (int c = 0; c < k; ++c) {
            b[c] += v[c];
            inside = inside && b[c] >= 0;
          }
          if (!inside) break;
          const int bi = L_.find(b);
          const double wa = static_cast<double>(t) / (g + t), wb = static_cast<double>(g) / (g + t);
          const int idx[2] = {a, bi};
          const double w[2] = {wa, wb};
          offer(wa * F[a] + wb * F[bi], 2, idx, w);
        }
      }
      if (cap_ >= 3) triples_on_lattice(p, F, offer);
      return best;
    }
    // Off-lattice point: pairs and triples through explicit collinearity.
    for (int a = 0; a < P; ++a)
      for (int b = a + 1; b < P; ++b) {
        double s;
        if (!on_segment(x, a, b, s)) continue;
        const int idx[2] = {a, b};
        const double w[2] = {1.0 - s, s};
        offer((1.0 - s) * F[a] + s * F[b], 2, idx, w);
      }
    if (cap_ >= 3) triples_off_lattice(x, F, offer);
    return best;
  }

 private:
  // x = (1 - s) a + s b with s in (0, 1).
  bool on_segment(const std::array<double, kMaxAtoms>& x, int a, int b, double& s) const {
    double num = 0.0, den = 0.0;
    for (int c = 0; c < L_.k; ++c) {
      const double d = L_.pts[b][c] - L_.pts[a][c];
      num += (x[c] - L_.pts[a][c]) * d;
      den += d * d;
    }
    s = num / den;
    if (!(s > 1e-12 && s < 1.0 - 1e-12)) return false;
    for (int c = 0; c < L_.k; ++c) {
      const double r = x[c] - (L_.pts[a][c] + s * (L_.pts[b][c] - L_.pts[a][c]));
      if (std::abs(r) > 1e-9) return false;
    }
    return true;
  }

  template <class Offer>
  void triples_on_lattice(const Coord& p, const std::vector<double>& F, Offer& offer) const {
    const int P = static_cast<int>(L_.pts.size());
    const int k = L_.k;
    for (int a = 0; a < P; ++a)
      for (int b = a + 1; b < P; ++b)
        for (int c = b + 1; c < P; ++c) {
          // p - A = s (B - A) + t (C - A), exactly, with s, t > 0, s + t < 1.
          long long uu = 0, uw = 0, ww = 0, ud = 0, wd = 0;
          for (int i = 0; i < k; ++i) {
            const long long u = L_.pts[b][i] - L_.pts[a][i];
            const long long w = L_.pts[c][i] - L_.pts[a][i];
            const long long d = p[i] - L_.pts[a][i];
            uu += u * u;
            uw += u * w;
            ww += w * w;
            ud += u * d;
            wd += w * d;
          }
          const long long det = uu * ww - uw * uw;
          if (det == 0) continue;
          const long long sn = ud * ww - wd * uw, tn = wd * uu - ud * uw;
          if (sn <= 0 || tn <= 0 || sn + tn >= det) continue;
          bool exact = true;
          for (int i = 0; i < k && exact; ++i) {
            const long long u = L_.pts[b][i] - L_.pts[a][i];
            const long long w = L_.pts[c][i] - L_.pts[a][i];
            const long long d = p[i] - L_.pts[a][i];
            exact = det * d == sn * u + tn * w;
          }
          if (!exact) continue;
          const double s = static_cast<double>(sn) / det, t = static_cast<double>(tn) / det;
          const int idx[3] = {a, b, c};
          const double w[3] = {1.0 - s - t, s, t};
          offer(w[0] * F[a] + w[1] * F[b] + w[2] * F[c], 3, idx, w);
        }
  }

  template <class Offer>
  void triples_off_lattice(const std::array<double, kMaxAtoms>& x, const std::vector<double>& F, Offer& offer) const {
    const int P = static_cast<int>(L_.pts.size());
    const int k = L_.k;
    for (int a = 0; a < P; ++a)
      for (int b = a + 1; b < P; ++b)
        for (int c = b + 1; c < P; ++c) {
          double uu = 0, uw = 0, ww = 0, ud = 0, wd = 0;
          for (int i = 0; i < k; ++i) {
            const double u = L_.pts[b][i] - L_.pts[a][i];
            const double w = L_.pts[c][i] - L_.pts[a][i];
            const double d = x[i] - L_.pts[a][i];
            uu += u * u;
            uw += u * w;
            ww += w * w;
            ud += u * d;
            wd += w * d;
          }
          const double det = uu * ww - uw * uw;
          if (std::abs(det) < 1e-9) continue;
          const double s = (ud * ww - wd * uw) / det, t = (wd * uu - ud * uw) / det;
          if (!(s > 1e-12 && t > 1e-12 && s + t < 1.0 - 1e-12)) continue;
          bool fits = true;
          for (int i = 0; i < k && fits; ++i) {
            const double r = x[i] - L_.pts[a][i] - s * (L_.pts[b][i] - L_.pts[a][i]) -
                             t * (L_.pts[c][i] - L_.pts[a][i]);
            fits = std::abs(r) < 1e-9;
          }
          if (!fits) continue;
          const int idx[3] = {a, b, c};
          const double w[3] = {1.0 - s - t, s, t};
          offer(w[0] * F[a] + w[1] * F[b] + w[2] * F[c], 3, idx, w);
        }
  }

  // Concave envelope at x over all lattice points: max sum l_j F_j subject
  // to sum l_j pts_j = x, l >= 0. A basic optimum uses at most k points.
  template <class Offer>
  void lp_split(const std::array<double, kMaxAtoms>& x, const std::vector<double>& F, Offer& offer) const {
    const int P = static_cast<int>(L_.pts.size());
    const int k = L_.k;
    LinearProgram lp;
    lp.c = Eigen::Map<const Eigen::VectorXd>(F.data(), P);
    lp.A_ub.resize(0, P);
    lp.b_ub.resize(0);
    lp.A_eq.resize(k, P);
    lp.b_eq.resize(k);
    for (int j = 0; j < P; ++j)
      for (int c = 0; c < k; ++c) lp.A_eq(c, j) = L_.pts[j][c];
    for (int c = 0; c < k; ++c) lp.b_eq(c) = x[c];
    const LpSolution s = solve_lp(lp);
    int idx[kMaxAtoms];
    double w[kMaxAtoms];
    int n = 0;
    double total = 0.0;
    for (int j = 0; j < P && n < kMaxAtoms; ++j)
      if (s.x(j) > 1e-13) {
        idx[n] = j;
        w[n] = s.x(j);
        total += s.x(j);
        ++n;
      }
    if (n == 0) return;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] /= total;
      v += w[i] * F[idx[i]];
    }
    if (n == 1) return;  // a single point is the stay option
    offer(v, n, idx, w);
  }

  Lattice L_;
  int cap_;
};

class LatticeCache {
 public:
  struct Entry {
    std::shared_ptr<LatticeSolver> solver;
    std::vector<std::shared_ptr<const LatticeLevel>> levels;
  };

  // Returns the solver and levels 0..count.
  Entry get(int k, int m, int cap, int count) {
    std::lock_guard<std::mutex> lock(mu_);
    Entry& e = tables_[{k, m, cap}];
    if (!e.solver) {
      e.solver = std::make_shared<LatticeSolver>(k, m, cap);
      auto zero = std::make_shared<LatticeLevel>();
      zero->V.assign(e.solver->lattice().pts.size(), 0.0);
      zero->split.assign(e.solver->lattice().pts.size(), Split{});
      e.levels.push_back(zero);
    }
    const Lattice& L = e.solver->lattice();
    const int P = static_cast<int>(L.pts.size());
    while (static_cast<int>(e.levels.size()) <= count) {
      const auto& prev = e.levels.back()->V;
      auto lvl = std::make_shared<LatticeLevel>();
      lvl->V.resize(P);
      lvl->split.resize(P);
      for (int i = 0; i < P; ++i) {
        std::array<double, kMaxAtoms> x{};
        for (int c = 0; c < k; ++c) x[c] = L.pts[i][c];
        double v;
        lvl->split[i] = e.solver->best_split(x, i, prev, prev[i], v);
        lvl->V[i] = v;
      }
      e.levels.push_back(std::move(lvl));
    }
    Entry out;
    out.solver = e.solver;
    out.levels.assign(e.levels.begin(), e.levels.begin() + count + 1);
    return out;
  }

 private:
  std::mutex mu_;
  std::map<std::array<int, 3>, Entry> tables_;
};

LatticeCache& lattice_cache() {
  static LatticeCache cache;
  return cache;
}

CellMeasure lattice_measure(const Coord& c, int k, int m) {
  std::vector<CellId> cells;
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) {
    cells.push_back(CellId::atom_cell(i));
    w(i) = static_cast<double>(c[i]) / m;
  }
  return CellMeasure(std::move(cells), w);
}

class LatticeWitness {
 public:
  LatticeWitness(const LatticeCache::Entry& e) : e_(e) {}

  NodePtr node(int n, int i) {
    const auto key = std::make_pair(n, i);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const Lattice& L = e_.solver->lattice();
    std::vector<Branch> br;
    if (n > 0) {
      const Split& s = e_.levels[n]->split[i];
      if (s.count == 1) {
        br.push_back({1.0, node(n - 1, i), {}});
      } else {
        for (int c = 0; c < s.count; ++c) br.push_back({s.w[c], node(n - 1, s.idx[c]), {}});
      }
    }
    return memo_[key] = make_node(lattice_measure(L.pts[i], L.k, L.m), std::move(br));
  }

 private:
  const LatticeCache::Entry& e_;
  std::map<std::pair<int, int>, NodePtr> memo_;
};

// Work for the brute-force two-atom enumeration: sum_i i (m - i) ~ m^3 / 6.
std::uint64_t pair_line_cost(int m, int levels) {
  const std::uint64_t M = static_cast<std::uint64_t>(m);
  return static_cast<std::uint64_t>(levels) * (M * M * M / 6 + M) + M * M;
}

// Two-atom exhaustive enumeration over every pair straddling each grid point.
MaxVarResult two_atom_exhaustive(double x, int N, int m, bool build_witness) {
  std::vector<std::vector<double>> V(N, std::vector<double>(m + 1, 0.0));
  std::vector<std::vector<std::pair<int, int>>> S(N, std::vector<std::pair<int, int>>(m + 1));
  for (int n = 1; n < N; ++n) {
    for (int i = 0; i <= m; ++i) {
      double best = V[n - 1][i];
      std::pair<int, int> arg{i, i};
      for (int a = 0; a < i; ++a)
        for (int b = i + 1; b <= m; ++b) {
          const double v = ((b - i) * (2.0 * (i - a) / m + V[n - 1][a]) + (i - a) * (2.0 * (b - i) / m + V[n - 1][b])) /
                           (b - a);
          if (v > best + 1e-15) {
            best = v;
            arg = {a, b};
          }
        }
      V[n][i] = best;
      S[n][i] = arg;
    }
  }
  // Root at x with r_n = max(r_{n-1}, best pair around x).
  std::vector<double> r(N + 1, 0.0);
  std::vector<std::pair<int, int>> choice(N + 1, {-1, -1});
  for (int n = 1; n <= N; ++n) {
    r[n] = r[n - 1];
    for (int a = 0; a <= m; ++a) {
      const double xa = static_cast<double>(a) / m;
      if (xa >= x) break;
      for (int b = m; b > a; --b) {
        const double xb = static_cast<double>(b) / m;
        if (xb <= x) break;
        const double qa = (xb - x) / (xb - xa);
        const double v = qa * (2.0 * (x - xa) + V[n - 1][a]) + (1.0 - qa) * (2.0 * (xb - x) + V[n - 1][b]);
        if (v > r[n] + 1e-15) {
          r[n] = v;
          choice[n] = {a, b};
        }
      }
    }
    // x itself on the grid: splitting around it is covered above, staying by r_{n-1}.
  }
  MaxVarResult res;
  res.method = MaxVarMethod::kExhaustive;
  res.value = r[N];
  res.resolution = m;
  if (build_witness) {
    std::map<std::pair<int, int>, NodePtr> memo;
    std::function<NodePtr(int, int)> node = [&](int n, int i) -> NodePtr {
      const auto key = std::make_pair(n, i);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      std::vector<Branch> br;
      if (n > 0) {
        const auto [a, b] = S[n][i];
        if (a == b) br.push_back({1.0, node(n - 1, i), {}});
        else {
          br.push_back({static_cast<double>(b - i) / (b - a), node(n - 1, a), {}});
          br.push_back({static_cast<double>(i - a) / (b - a), node(n - 1, b), {}});
        }
      }
      return memo[key] = make_node(CellMeasure::two_point(static_cast<double>(i) / m), std::move(br));
    };
    std::vector<NodePtr> chain(N + 1);
    chain[0] = make_node(CellMeasure::two_point(x));
    for (int n = 1; n <= N; ++n) {
      std::vector<Branch> br;
      if (choice[n].first < 0) {
        br.push_back({1.0, chain[n - 1], {}});
      } else {
        const auto [a, b] = choice[n];
        const double xa = static_cast<double>(a) / m, xb = static_cast<double>(b) / m;
        br.push_back({(xb - x) / (xb - xa), node(n - 1, a), {}});
        br.push_back({(x - xa) / (xb - xa), node(n - 1, b), {}});
      }
      chain[n] = make_node(CellMeasure::two_point(x), std::move(br));
    }
    res.witness = MartingaleTree(chain[N]);
  }
  return res;
}

}  // namespace

std::uint64_t lattice_cost(int atoms, int m, int N, BranchCap D) {
  if (atoms <= 1 || N <= 0) return 0;
  if (atoms == 2) return pair_line_cost(m, N - 1);
  const std::uint64_t P = binom(m + atoms - 1, atoms - 1);
  const int cap = effective_cap(atoms, D);
  std::uint64_t per_point;
  if (cap >= atoms) {
    per_point = P * static_cast<std::uint64_t>(atoms) * 40;
  } else {
    per_point = P * static_cast<std::uint64_t>(m);
    if (cap >= 3) per_point += 8 * binom(static_cast<int>(P), 3);
  }
  return static_cast<std::uint64_t>(N) * P * per_point;
}

MaxVarResult lattice_maxvar(const Eigen::VectorXd& weights, int N, BranchCap D, int m, bool build_witness,
                            std::uint64_t budget) {
  const int k = static_cast<int>(weights.size());
  if (k < 2 || k > kMaxAtoms) throw InstanceTooLarge("lattice enumeration supports 2 to 4 atoms");
  if (m < 1) throw InvalidArgument("lattice resolution must be positive");
  if (N < 0) throw InvalidArgument("N must be nonnegative");
  const std::uint64_t cost = lattice_cost(k, m, N, D);
  if (cost > budget)
    throw InstanceTooLarge("lattice enumeration needs ~" + std::to_string(cost) + " work units, budget " +
                           std::to_string(budget));
  if (k == 2) return two_atom_exhaustive(weights(1), N, m, build_witness);

  MaxVarResult res;
  res.method = MaxVarMethod::kExhaustive;
  res.resolution = m;
  std::array<double, kMaxAtoms> x{};
  Coord xc{};
  bool on = true;
  for (int c = 0; c < k; ++c) {
    x[c] = weights(c) * m;
    xc[c] = static_cast<int>(std::lround(x[c]));
    on = on && std::abs(x[c] - xc[c]) < 1e-9;
  }
  if (N == 0) {
    res.value = 0.0;
    if (build_witness) {
      std::vector<CellId> cells;
      for (int c = 0; c < k; ++c) cells.push_back(CellId::atom_cell(c));
      res.witness = MartingaleTree(make_node(CellMeasure(std::move(cells), weights / weights.sum())));
    }
    return res;
  }
  const int cap = effective_cap(k, D);
  if (on) {
    const auto e = lattice_cache().get(k, m, cap, N);
    const int i = e.solver->lattice().find(xc);
    res.value = e.levels[N]->V[i];
    if (build_witness) {
      LatticeWitness w(e);
      res.witness = MartingaleTree(w.node(N, i));
    }
    return res;
  }
  const auto e = lattice_cache().get(k, m, cap, N - 1);
  std::vector<double> r(N + 1, 0.0);
  std::vector<Split> choice(N + 1);
  for (int n = 1; n <= N; ++n) {
    double v;
    choice[n] = e.solver->best_split(x, -1, e.levels[n - 1]->V, r[n - 1], v);
    r[n] = v;
  }
  res.value = r[N];
  if (build_witness) {
    LatticeWitness w(e);
    std::vector<CellId> cells;
    for (int c = 0; c < k; ++c) cells.push_back(CellId::atom_cell(c));
    const CellMeasure root(cells, weights);
    std::vector<NodePtr> chain(N + 1);
    chain[0] = make_node(root);
    for (int n = 1; n <= N; ++n) {
      std::vector<Branch> br;
      if (choice[n].count == 1) br.push_back({1.0, chain[n - 1], {}});
      else
        for (int c = 0; c < choice[n].count; ++c) br.push_back({choice[n].w[c], w.node(n - 1, choice[n].idx[c]), {}});
      chain[n] = make_node(root, std::move(br));
    }
    res.witness = MartingaleTree(chain[N]);
  }
  return res;
}

}  // namespace mvlab
