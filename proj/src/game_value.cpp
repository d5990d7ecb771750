#include <algorithm>
#include <cmath>
#include <functional>

#include "mvlab/errors.hpp"
#include "mvlab/game.hpp"
#include "mvlab/lp.hpp"

namespace mvlab {
namespace {

using Line = std::pair<double, double>;  // intercept, slope

struct StageSolution {
  double value = 0.0;
  double slope = 0.0;
  Eigen::VectorXd y0, y1;  // joint masses of (state, action)
};

// One step of the two-state recursion at state-1 mass q, with the
// continuation v_{n-1} = min over `lines`. Variables: z', u'_s, y0_s, y1_s.
StageSolution stage_lp(const StageGame& g, const std::vector<Line>& lines, double q, double floor) {
  const int S = g.num_p1_actions(), T = g.num_p2_actions(), L = static_cast<int>(lines.size());
  const double sup = g.payoff_sup();
  const int nv = 1 + 3 * S;
  auto U = [](int s) { return 1 + s; };
  auto Y0 = [S](int s) { return 1 + S + s; };
  auto Y1 = [S](int s) { return 1 + 2 * S + s; };
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Zero(nv);
  lp.c(0) = 1.0;
  for (int s = 0; s < S; ++s) lp.c(U(s)) = 1.0;
  lp.A_ub = Eigen::MatrixXd::Zero(T + S * L, nv);
  lp.b_ub = Eigen::VectorXd::Zero(T + S * L);
  // z = z' - sup  <=  sum_s y0_s g0(s,t) + y1_s g1(s,t)
  for (int t = 0; t < T; ++t) {
    lp.A_ub(t, 0) = 1.0;
    for (int s = 0; s < S; ++s) {
      lp.A_ub(t, Y0(s)) = -g(0, s, t);
      lp.A_ub(t, Y1(s)) = -g(1, s, t);
    }
    lp.b_ub(t) = sup;
  }
  // u_s = u'_s - floor m_s  <=  a_i m_s + b_i y1_s
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < L; ++i) {
      const int r = T + s * L + i;
      lp.A_ub(r, U(s)) = 1.0;
      lp.A_ub(r, Y0(s)) = -(lines[i].first + floor);
      lp.A_ub(r, Y1(s)) = -(lines[i].first + lines[i].second + floor);
    }
  lp.A_eq = Eigen::MatrixXd::Zero(2, nv);
  for (int s = 0; s < S; ++s) {
    lp.A_eq(0, Y0(s)) = 1.0;
    lp.A_eq(1, Y1(s)) = 1.0;
  }
  lp.b_eq = Eigen::Vector2d(1.0 - q, q);
  const LpSolution sol = solve_lp(lp);
  StageSolution out;
  out.value = sol.value - sup - floor;
  out.slope = sol.dual_eq(1) - sol.dual_eq(0);
  out.y0 = Eigen::VectorXd(S);
  out.y1 = Eigen::VectorXd(S);
  for (int s = 0; s < S; ++s) {
    out.y0(s) = sol.x(Y0(s));
    out.y1(s) = sol.x(Y1(s));
  }
  return out;
}

// Concave piecewise-linear v_n on [0,1] by tangent sandwiching.
std::vector<Line> next_lines(const StageGame& g, const std::vector<Line>& prev, double floor) {
  struct Pt {
    double q, v;
    Line tangent;
  };
  auto eval = [&](double q) {
    const StageSolution s = stage_lp(g, prev, q, floor);
    return Pt{q, s.value, {s.value - s.slope * q, s.slope}};
  };
  std::vector<Pt> pts{eval(0.0), eval(1.0)};
  for (int it = 0; it < 4000; ++it) {
    bool refined = false;
    std::vector<Pt> out{pts.front()};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Pt& a = pts[i];
      const Pt& b = pts[i + 1];
      const double ds = a.tangent.second - b.tangent.second;
      double qs = 0.5 * (a.q + b.q);
      if (ds > 1e-12) qs = std::clamp((b.tangent.first - a.tangent.first) / ds, a.q, b.q);
      const double upper = std::min(a.tangent.first + a.tangent.second * qs, b.tangent.first + b.tangent.second * qs);
      const double chord = a.v + (b.v - a.v) * (qs - a.q) / (b.q - a.q);
      if (upper - chord > 1e-11 && b.q - a.q > 1e-9 && qs > a.q && qs < b.q) {
        out.push_back(eval(qs));
        refined = true;
      }
      out.push_back(b);
    }
    pts = std::move(out);
    if (!refined) break;
  }
  // Chords between consecutive points are exact pieces once the sandwich
  // closes; endpoint tangents may carry an arbitrary supergradient.
  std::vector<Line> chords;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double b = (pts[i + 1].v - pts[i].v) / (pts[i + 1].q - pts[i].q);
    chords.push_back({pts[i].v - b * pts[i].q, b});
  }
  return chords;
}

P1Strategy single_state_strategy(const StageGame& g, const Eigen::VectorXd& mix, int N) {
  const int S = g.num_p1_actions();
  P1Strategy sigma(1, S, false);
  Eigen::MatrixXd row = mix.transpose();
  std::vector<int> own;
  std::function<void()> fill = [&] {
    sigma.set_own(own, row);
    if (static_cast<int>(own.size()) + 1 == N) return;
    for (int s = 0; s < S; ++s) {
      if (mix(s) <= 0.0) continue;
      own.push_back(s);
      fill();
      own.pop_back();
    }
  };
  fill();
  return sigma;
}

}  // namespace

ExactValue exact_value_small(const GameSpec& spec, int max_horizon) {
  if (spec.prior.theta() != 0.0 || spec.prior.has_tail()) throw InvalidPrior("exact value needs a finite atomic prior");
  const StageGame& g = spec.stage;
  const int K = g.num_states();
  if (K != static_cast<int>(spec.prior.atoms().size())) throw InvalidArgument("prior and game disagree on #K");
  if (K > 2) throw InstanceTooLarge("exact value is implemented for at most two states");
  if (spec.horizon > max_horizon) throw InstanceTooLarge("horizon beyond the exact solver's limit");
  const int N = spec.horizon;
  const int S = g.num_p1_actions();
  ExactValue ev;
  if (K == 1) {
    const MatrixGameSolution m = solve_matrix_game(g.payoff(0));
    ev.value = N * m.value;
    Eigen::VectorXd mix = m.row_mix.cwiseMax(0.0);
    mix /= mix.sum();
    ev.sigma = single_state_strategy(g, mix, N);
    return ev;
  }
  // levels[n] = lines of v_n.
  std::vector<std::vector<Line>> levels{{{0.0, 0.0}}};
  for (int n = 1; n < N; ++n) levels.push_back(next_lines(g, levels.back(), (n - 1) * g.payoff_sup() + 1.0));
  const double q0 = spec.prior.atom_weights()(1);
  ev.sigma = P1Strategy(2, S, false);
  std::vector<int> own;
  std::function<double(double, int)> forward = [&](double q, int remaining) -> double {
    const StageSolution st = stage_lp(g, levels[remaining - 1], q, (remaining - 1) * g.payoff_sup() + 1.0);
    Eigen::MatrixXd dist(2, S);
    for (int s = 0; s < S; ++s) {
      dist(0, s) = std::max(0.0, st.y0(s));
      dist(1, s) = std::max(0.0, st.y1(s));
    }
    for (int k = 0; k < 2; ++k) {
      const double r = dist.row(k).sum();
      if (r > 1e-14) dist.row(k) /= r;
    }
    for (int k = 0; k < 2; ++k)
      if (dist.row(k).sum() <= 0.5) dist.row(k) = dist.row(1 - k);
    ev.sigma.set_own(own, dist);
    if (remaining > 1) {
      for (int s = 0; s < S; ++s) {
        const double m = st.y0(s) + st.y1(s);
        if (m <= 1e-15) continue;
        own.push_back(s);
        forward(std::clamp(st.y1(s) / m, 0.0, 1.0), remaining - 1);
        own.pop_back();
      }
    }
    return st.value;
  };
  ev.value = forward(q0, N);
  ev.value_lines = next_lines(g, levels.back(), (N - 1) * g.payoff_sup() + 1.0);
  return ev;
}

P1Strategy splitting_strategy(const GameSpec& spec, const MartingaleTree& tree) {
  if (!spec.composite_states) throw InvalidArgument("splitting strategy needs a composite game");
  const int K = *spec.composite_states;
  const int S = 2 << K;
  const int N = spec.horizon;
  P1Strategy sigma(K, S, false);
  Eigen::MatrixXd nr = Eigen::MatrixXd::Zero(K, S);
  nr.col(composite_p1_action(0, 0)).setConstant(0.5);
  nr.col(composite_p1_action(0, 1)).setConstant(0.5);

  auto masses = [K](const CellMeasure& m) {
    if (!m.atoms_only()) throw InvalidTree("splitting needs measures on the prior's atoms");
    Eigen::VectorXd v(K);
    for (int k = 0; k < K; ++k) v(k) = m.mass_of(CellId::atom_cell(k));
    if (std::abs(v.sum() - 1.0) > 1e-9) throw InvalidTree("node measure lives outside the prior's atoms");
    return v;
  };
  {
    const Eigen::VectorXd root = masses(tree.root().measure);
    const Eigen::VectorXd rho = spec.prior.atom_weights();
    if ((root - rho).cwiseAbs().maxCoeff() > 1e-9) throw InvalidTree("tree root differs from the prior");
  }

  std::vector<int> own;
  std::function<void(const MartingaleNode*)> walk = [&](const MartingaleNode* node) {
    const int n = static_cast<int>(own.size());
    if (n == N) return;
    const MartingaleNode* next_a = nullptr;
    const MartingaleNode* next_b = nullptr;
    Eigen::MatrixXd dist = nr;
    int split_action = -1;
    if (node && node->branches.size() > 2) throw InvalidTree("splitting strategy needs at most two branches");
    if (node && node->branches.size() == 2) {
      for (const auto& b : node->branches)
        if (!b.embed.empty()) throw InvalidTree("embedded continuous cells cannot be split by actions");
      const Eigen::VectorXd mu = masses(node->measure);
      int ia = node->branches[0].prob <= node->branches[1].prob ? 0 : 1;
      const Branch& A = node->branches[static_cast<std::size_t>(ia)];
      const Branch& B = node->branches[static_cast<std::size_t>(1 - ia)];
      const Eigen::VectorXd ma = masses(A.child->measure), mb = masses(B.child->measure);
      std::uint32_t X = 0;
      for (int k = 0; k < K; ++k)
        if (ma(k) > mb(k) + 1e-15) X |= 1u << k;
      if (X != 0) {
        const double qa = A.prob, qb = B.prob;
        split_action = composite_p1_action(X, 1);
        for (int k = 0; k < K; ++k) {
          dist.row(k).setZero();
          if (mu(k) <= 0.0) {
            dist.row(k) = nr.row(k);
            continue;
          }
          dist(k, composite_p1_action(X, 1)) = qa * ma(k) / mu(k);
          dist(k, composite_p1_action(X, 0)) = qa * mb(k) / mu(k);
          dist(k, composite_p1_action(0, 0)) = (qb - qa) * mb(k) / (2.0 * mu(k));
          dist(k, composite_p1_action(0, 1)) = (qb - qa) * mb(k) / (2.0 * mu(k));
          const double r = dist.row(k).sum();
          if (std::abs(r - 1.0) > 1e-9 || dist.row(k).minCoeff() < -1e-12)
            throw InvalidTree("branch posteriors are not Bayes-consistent with the node");
          dist.row(k) = dist.row(k).cwiseMax(0.0) / dist.row(k).cwiseMax(0.0).sum();
        }
        next_a = A.child.get();
        next_b = B.child.get();
      } else {
        next_a = next_b = B.child.get();
      }
    } else if (node && node->branches.size() == 1) {
      next_a = next_b = node->branches[0].child.get();
    }
    sigma.set_own(own, dist);
    for (int s = 0; s < S; ++s) {
      if (dist.col(s).maxCoeff() <= 0.0) continue;
      own.push_back(s);
      walk(s == split_action ? next_a : next_b);
      own.pop_back();
    }
  };
  walk(&tree.root());
  return sigma;
}

}  // namespace mvlab
