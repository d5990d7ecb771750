#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "mvlab/errors.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {
namespace {

// One level of the scalar dynamic program: V[i] = xi_n(i / G) restricted to
// grid splits, and the split (a, b) realizing it (a == b means stay).
struct GridLevel {
  std::vector<double> V;
  std::vector<int> a, b;
  double interpolation_error = 0.0;  // bound on sup (T I V_{n-1} - I V_n)
};

double cross(double x0, double y0, double x1, double y1, double x2, double y2) {
  return (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
}

// Upper concave envelope of F at abscissa t (in grid units) over points
// xs[j] = j. Returns (value, left vertex, right vertex).
struct Envelope {
  double value;
  int a, b;
};

Envelope envelope_at(const std::vector<double>& F, double t, std::vector<int>& hull) {
  const int n = static_cast<int>(F.size());
  hull.clear();
  for (int j = 0; j < n; ++j) {
    while (hull.size() >= 2) {
      const int p = hull[hull.size() - 2], q = hull.back();
      if (cross(p, F[p], q, F[q], j, F[j]) >= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(j);
  }
  auto it = std::lower_bound(hull.begin(), hull.end(), t, [](int v, double x) { return v < x; });
  if (it != hull.end() && *it == t) return {F[*it], *it, *it};
  const int b = *it;
  const int a = *(it - 1);
  const double value = ((b - t) * F[a] + (t - a) * F[b]) / (b - a);
  return {value, a, b};
}

double level_error(const std::vector<double>& V, int n) {
  const int G = static_cast<int>(V.size()) - 1;
  const double h = 1.0 / G;
  const double edge = 4.0 * n;
  std::vector<double> s(G);
  for (int j = 0; j < G; ++j) s[j] = (V[j + 1] - V[j]) * G;
  double worst = 0.0;
  for (int j = 0; j < G; ++j) {
    const double sa = j > 0 ? s[j - 1] : edge;
    const double sb = j + 1 < G ? s[j + 1] : -edge;
    const double sc = s[j];
    const double tol = 1e-9 * (1.0 + std::abs(sc));
    double e;
    if (sa + tol >= sc && sc + tol >= sb) {
      const double l = std::max(sa - sc, 0.0), r = std::max(sc - sb, 0.0);
      e = l + r > 0.0 ? h * l * r / (l + r) : 0.0;
    } else {
      e = h * 2.0 * n;
    }
    worst = std::max(worst, e);
  }
  return worst;
}

class GridCache {
 public:
  std::vector<std::shared_ptr<const GridLevel>> levels(int G, int count) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& ls = tables_[G];
    if (ls.empty()) {
      auto zero = std::make_shared<GridLevel>();
      zero->V.assign(G + 1, 0.0);
      ls.push_back(zero);
    }
    std::vector<double> F(G + 1);
    std::vector<int> hull;
    hull.reserve(G + 1);
    while (static_cast<int>(ls.size()) <= count) {
      const int n = static_cast<int>(ls.size());
      const auto& prev = ls.back()->V;
      auto L = std::make_shared<GridLevel>();
      L->V.resize(G + 1);
      L->a.resize(G + 1);
      L->b.resize(G + 1);
      for (int i = 0; i <= G; ++i) {
        for (int j = 0; j <= G; ++j) F[j] = 2.0 * std::abs(j - i) / G + prev[j];
        const Envelope e = envelope_at(F, i, hull);
        L->V[i] = e.value;
        L->a[i] = e.a;
        L->b[i] = e.b;
      }
      L->interpolation_error = level_error(L->V, n);
      ls.push_back(std::move(L));
    }
    return {ls.begin(), ls.begin() + count + 1};
  }

 private:
  std::mutex mu_;
  std::map<int, std::vector<std::shared_ptr<const GridLevel>>> tables_;
};

GridCache& grid_cache() {
  static GridCache cache;
  return cache;
}

class GridWitness {
 public:
  GridWitness(const std::vector<std::shared_ptr<const GridLevel>>& levels, int G) : L_(levels), G_(G) {}

  NodePtr node(int n, int i) {
    const auto key = std::make_pair(n, i);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const CellMeasure m = CellMeasure::two_point(static_cast<double>(i) / G_);
    std::vector<Branch> br;
    if (n > 0) {
      const int a = L_[n]->a[i], b = L_[n]->b[i];
      if (a == b) {
        br.push_back({1.0, node(n - 1, i), {}});
      } else {
        br.push_back({static_cast<double>(b - i) / (b - a), node(n - 1, a), {}});
        br.push_back({static_cast<double>(i - a) / (b - a), node(n - 1, b), {}});
      }
    }
    return memo_[key] = make_node(m, std::move(br));
  }

 private:
  const std::vector<std::shared_ptr<const GridLevel>>& L_;
  int G_;
  std::map<std::pair<int, int>, NodePtr> memo_;
};

}  // namespace

MaxVarResult grid_dp_maxvar(double x, int N, int grid, bool build_witness) {
  if (N < 0) throw InvalidArgument("N must be nonnegative");
  if (grid < 2) throw InvalidArgument("grid resolution must be at least 2");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("posterior must lie in [0,1]");
  const int G = grid;
  MaxVarResult res;
  res.method = MaxVarMethod::kGridDp;
  res.resolution = G;
  if (N == 0) {
    res.value = 0.0;
    if (build_witness) res.witness = MartingaleTree(make_node(CellMeasure::two_point(x)));
    return res;
  }
  const auto levels = grid_cache().levels(G, N - 1);

  // Root chain at the (possibly off-grid) prior: r_n = max(r_{n-1}, env_n(x)).
  const double t = x * G;
  std::vector<double> r(N + 1, 0.0);
  std::vector<Envelope> choice(N + 1);
  std::vector<bool> stay(N + 1, false);
  std::vector<double> F(G + 1);
  std::vector<int> hull;
  double top_envelope = 0.0;
  for (int n = 1; n <= N; ++n) {
    const auto& prev = levels[n - 1]->V;
    for (int j = 0; j <= G; ++j) F[j] = 2.0 * std::abs(static_cast<double>(j) / G - x) + prev[j];
    choice[n] = envelope_at(F, t, hull);
    stay[n] = choice[n].a == choice[n].b || r[n - 1] >= choice[n].value;
    r[n] = std::max(r[n - 1], choice[n].value);
    if (n == N) top_envelope = choice[n].value;
  }
  res.value = r[N];

  // xi_N(x) <= max(envelope, I V_{N-1}(x)) + sum of lower-level interpolation errors.
  const auto& prevN = levels[N - 1]->V;
  const int lo = std::min(static_cast<int>(std::floor(t)), G - 1);
  const double w = t - lo;
  const double interp = (1.0 - w) * prevN[lo] + w * prevN[lo + 1];
  double gap = std::max(0.0, std::max(top_envelope, interp) - res.value);
  for (int n = 1; n <= N - 1; ++n) gap += levels[n]->interpolation_error;
  res.gap_bound = gap;

  if (build_witness) {
    GridWitness gw(levels, G);
    std::vector<NodePtr> chain(N + 1);
    chain[0] = make_node(CellMeasure::two_point(x));
    for (int n = 1; n <= N; ++n) {
      std::vector<Branch> br;
      const Envelope& e = choice[n];
      if (stay[n]) {
        br.push_back({1.0, chain[n - 1], {}});
      } else {
        const double xa = static_cast<double>(e.a) / G, xb = static_cast<double>(e.b) / G;
        br.push_back({(xb - x) / (xb - xa), gw.node(n - 1, e.a), {}});
        br.push_back({(x - xa) / (xb - xa), gw.node(n - 1, e.b), {}});
      }
      chain[n] = make_node(CellMeasure::two_point(x), std::move(br));
    }
    res.witness = MartingaleTree(chain[N]);
  }
  return res;
}

}  // namespace mvlab
