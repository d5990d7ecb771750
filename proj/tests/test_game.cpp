#include <cmath>
#include <functional>

#include <doctest.h>

#include "mvlab/errors.hpp"
#include "mvlab/game.hpp"
#include "mvlab/maxvar.hpp"

using namespace mvlab;

namespace {

// Every own-action history of length < N gets the same state-contingent mix.
P1Strategy stationary_p1(const Eigen::MatrixXd& mix, int N) {
  P1Strategy s(static_cast<int>(mix.rows()), static_cast<int>(mix.cols()));
  std::function<void(std::vector<int>&)> fill = [&](std::vector<int>& own) {
    s.set_own(own, mix);
    if (static_cast<int>(own.size()) + 1 >= N) return;
    for (int a = 0; a < mix.cols(); ++a) {
      own.push_back(a);
      fill(own);
      own.pop_back();
    }
  };
  std::vector<int> own;
  fill(own);
  return s;
}

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  int i = 0;
  for (const auto& row : r) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matrix_value_2x2 examples") {
  Eigen::Matrix2d pm;
  const double a = 3.0, b = 1.0;
  pm << a, -b, -a, b;
  const auto v = matrix_value_2x2<double>(pm);
  CHECK(v.value == doctest::Approx(0.0));
  CHECK(v.p2_mix(0) == doctest::Approx(b / (a + b)));
  CHECK(v.p2_mix(1) == doctest::Approx(a / (a + b)));

  const auto id = matrix_value_2x2<double>(Eigen::Matrix2d::Identity());
  CHECK(id.value == doctest::Approx(0.5));
  CHECK(id.p1_mix(0) == doctest::Approx(0.5));

  const auto c = matrix_value_2x2<double>(Eigen::Matrix2d::Constant(1.75));
  CHECK(c.value == doctest::Approx(1.75));

  Eigen::Matrix2d saddle;
  saddle << 4, 2, 1, 0;
  CHECK(matrix_value_2x2<double>(saddle).value == doctest::Approx(2.0));
}

TEST_CASE("nr_value examples") {
  const MZStagePair pair = MZStagePair::standard();
  CHECK(std::abs(nr_value(pair, 0.0)) < 1e-12);
  CHECK(std::abs(nr_value(pair, 1.0)) < 1e-12);
  CHECK(std::abs(nr_value(pair, 0.5)) < 1e-12);
  CHECK(pair.g0(0, 0) == 3.0);
  CHECK(pair.g1(1, 0) == -2.0);
}

TEST_CASE("build_big_game structure") {
  const MZStagePair pair = MZStagePair::standard();
  const GameSpec g2 = build_big_game(Prior::bernoulli(0.5), pair, 1);
  CHECK(g2.stage.num_p1_actions() == 8);
  CHECK(g2.stage.num_p2_actions() == 26);
  CHECK(g2.stage.payoff_sup() == doctest::Approx(3.0));
  const GameSpec g3 = build_big_game(Prior::uniform(3), pair, 1);
  CHECK(g3.stage.num_p1_actions() == 16);
  CHECK(g3.stage.num_p2_actions() == 318);
  CHECK(g3.stage.payoff_sup() <= 3.0);
  CHECK_THROWS_AS(build_big_game(Prior::uniform(4), pair, 1), InstanceTooLarge);

  // Payoff formula spot check: state 1, X = {1}, h = 0, Y = {1}, f(X & Y) = 1.
  const auto acts = composite_p2_actions(2);
  int t = -1;
  for (std::size_t i = 0; i < acts.size(); ++i)
    if (acts[i].Y == 2u && acts[i].f == 2u) t = static_cast<int>(i);
  REQUIRE(t >= 0);
  CHECK(g2.stage(1, composite_p1_action(2u, 0), t) == pair.g1(0, 1));
  CHECK(g2.stage(0, composite_p1_action(2u, 0), t) == pair.g0(0, 1));
}

TEST_CASE("one-state composite game has value zero") {
  for (int N : {1, 2})
    CHECK(exact_value_small(build_big_game(Prior::point_mass(), MZStagePair::standard(), N)).value ==
          doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("expected_payoff examples") {
  // Antisymmetric per-state matrices against uniform play.
  const StageGame stage({rows({{1, -1}, {-1, 1}}), rows({{0, 2}, {-2, 0}})});
  const GameSpec spec{stage, Prior::bernoulli(0.3), 2, std::nullopt};
  const P1Strategy sigma = stationary_p1(Eigen::MatrixXd::Constant(2, 2, 0.5), 2);
  const P2Strategy tau = P2Strategy::stationary(Eigen::Vector2d(0.5, 0.5));
  const PayoffEstimate e = expected_payoff(spec, sigma, tau);
  CHECK(e.exact);
  CHECK(e.value == doctest::Approx(0.0));

  // Fully revealing P1 against a pointwise best-responding P2, one stage.
  const GameSpec mz = mz_game(Prior::bernoulli(0.5), MZStagePair::standard(), 1);
  const P1Strategy reveal = stationary_p1(rows({{1, 0}, {0, 1}}), 1);
  const BestResponse br = best_response_value(mz, reveal);
  // State 0 plays row 0 of g0, state 1 row 1 of g1. P2 moves before seeing
  // h, so the reply minimizes the prior-weighted pair of rows.
  double oracle = 1e300;
  for (int t = 0; t < 2; ++t)
    oracle = std::min(oracle, 0.5 * MZStagePair::standard().g0(0, t) + 0.5 * MZStagePair::standard().g1(1, t));
  CHECK(br.value == doctest::Approx(oracle));
  CHECK(expected_payoff(mz, reveal, br.tau_star).value == doctest::Approx(br.value));
  for (double y : {0.0, 0.3, 1.0}) {
    const P2Strategy any = P2Strategy::stationary(Eigen::Vector2d(y, 1.0 - y));
    const double v = expected_payoff(mz, reveal, any).value;
    CHECK(br.value <= v + 1e-12);
    CHECK(std::abs(v) <= mz.stage.payoff_sup() * mz.horizon);
  }
}

TEST_CASE("expected_payoff zero-sum consistency and Monte Carlo fallback") {
  const GameSpec mz = mz_game(Prior::bernoulli(0.4), MZStagePair::standard(), 3);
  const P1Strategy sigma = stationary_p1(rows({{0.7, 0.3}, {0.2, 0.8}}), 3);
  const P2Strategy tau = P2Strategy::stationary(Eigen::Vector2d(0.6, 0.4));
  const PayoffEstimate exact = expected_payoff(mz, sigma, tau);
  GameSpec neg = mz;
  neg.stage = mz.stage.negated();
  CHECK(expected_payoff(neg, sigma, tau).value == doctest::Approx(-exact.value));

  PayoffOptions mc;
  mc.enumeration_budget = 4;
  mc.samples = 100000;
  const PayoffEstimate est = expected_payoff(mz, sigma, tau, mc);
  CHECK_FALSE(est.exact);
  CHECK(est.seed == mc.seed);
  CHECK(est.std_error > 0.0);
  CHECK(std::abs(est.value - exact.value) <= 5.0 * est.std_error);
  CHECK(expected_payoff(mz, sigma, tau, mc).value == est.value);

  P1Strategy partial(2, 2);
  partial.set_own({}, rows({{1, 0}, {0, 1}}));
  CHECK_THROWS_AS(expected_payoff(mz, partial, tau), HistoryGap);
}

TEST_CASE("best response to a non-revealing strategy is zero") {
  for (int N : {1, 2, 3}) {
    const GameSpec mz = mz_game(Prior::bernoulli(0.5), MZStagePair::standard(), N);
    const P1Strategy nr = stationary_p1(rows({{0.25, 0.75}, {0.25, 0.75}}), N);
    CHECK(best_response_value(mz, nr).value <= 1e-12);
  }
}

TEST_CASE("exact_value_small examples") {
  const MZStagePair pair = MZStagePair::standard();
  CHECK(exact_value_small(mz_game(Prior::point_mass(), pair, 2)).value == doctest::Approx(0.0).epsilon(1e-9));

  // One stage at p = 1/2 against a dense grid of state-contingent mixes.
  const GameSpec one = mz_game(Prior::bernoulli(0.5), pair, 1);
  const double v = exact_value_small(one).value;
  double brute = -1e300;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      const double x0 = i / 200.0, x1 = j / 200.0;
      double worst = 1e300;
      for (int t = 0; t < 2; ++t)
        worst = std::min(worst, 0.5 * (x0 * pair.g0(0, t) + (1 - x0) * pair.g0(1, t)) +
                                    0.5 * (x1 * pair.g1(0, t) + (1 - x1) * pair.g1(1, t)));
      brute = std::max(brute, worst);
    }
  CHECK(v >= brute - 1e-12);
  CHECK(v <= brute + 1e-2);

  double prev = 0.0;
  for (int N = 1; N <= 4; ++N) {
    const double vN = exact_value_small(mz_game(Prior::bernoulli(0.3), pair, N)).value;
    CHECK(vN >= prev - 1e-9);
    prev = vN;
  }
}

TEST_CASE("exact value sits between the guarantee and the variation bound") {
  const MZStagePair pair = MZStagePair::standard();
  for (double p : {0.2, 0.5})
    for (int N : {1, 2}) {
      const GameSpec spec = build_big_game(Prior::bernoulli(p), pair, N);
      const ExactValue ev = exact_value_small(spec);
      const MaxVarResult xi = exact_maxvar(spec.prior, N, BranchCap(2));
      const BestResponse br = best_response_value(spec, splitting_strategy(spec, *xi.witness));
      CHECK(br.value <= ev.value + 1e-9);
      CHECK(best_response_value(spec, ev.sigma).value == doctest::Approx(ev.value).epsilon(1e-7));
      CHECK(ev.value <= spec.stage.payoff_sup() * variation(induced_martingale(ev.sigma, spec.prior, N)) + 1e-9);
    }
}

TEST_CASE("posterior_process examples") {
  const Prior p = Prior::bernoulli(0.5);
  const P1Strategy nr = stationary_p1(rows({{0.3, 0.7}, {0.3, 0.7}}), 2);
  for (const auto& post : posterior_process({nr, {{1, 0}, {0, 1}}}, p))
    CHECK(post.mass_of(CellId::atom_cell(1)) == doctest::Approx(0.5));

  const P1Strategy reveal = stationary_p1(rows({{1, 0}, {0, 1}}), 1);
  const auto r = posterior_process({reveal, {{1, 0}}}, p);
  REQUIRE(r.size() == 2);
  CHECK(r[1].mass_of(CellId::atom_cell(1)) == doctest::Approx(1.0));

  const P1Strategy split = stationary_p1(rows({{0.75, 0.25}, {0.25, 0.75}}), 1);
  CHECK(posterior_process({split, {{0, 0}}}, p)[1].mass_of(CellId::atom_cell(1)) == doctest::Approx(0.25));
  CHECK(posterior_process({split, {{1, 0}}}, p)[1].mass_of(CellId::atom_cell(1)) == doctest::Approx(0.75));
  const P1Strategy pure = stationary_p1(rows({{1, 0}, {1, 0}}), 1);
  CHECK_THROWS_AS(posterior_process({pure, {{1, 0}}}, p), ZeroProbabilityHistory);
}

TEST_CASE("splitting_strategy examples") {
  const MZStagePair pair = MZStagePair::standard();
  const Prior p = Prior::bernoulli(0.5);
  const GameSpec spec = build_big_game(p, pair, 2);

  // A constant tree gives a non-revealing strategy.
  NodePtr n = make_node(CellMeasure::from_prior(p));
  for (int d = 0; d < 2; ++d) n = make_node(CellMeasure::from_prior(p), {{1.0, n, {}}});
  const P1Strategy flat = splitting_strategy(spec, MartingaleTree(n));
  CHECK(std::abs(best_response_value(spec, flat).value) <= 1e-12);
  CHECK(variation(induced_martingale(flat, p, 2)) == doctest::Approx(0.0));

  // The full split makes the posterior degenerate after one stage.
  const GameSpec one = build_big_game(p, pair, 1);
  const MartingaleTree full(make_node(CellMeasure::from_prior(p), {{0.5, make_node(CellMeasure::atom_point(0)), {}},
                                                                   {0.5, make_node(CellMeasure::atom_point(1)), {}}}));
  const P1Strategy sigma = splitting_strategy(one, full);
  for (int s = 0; s < one.stage.num_p1_actions(); ++s) {
    bool reachable = false;
    for (int k = 0; k < 2; ++k) reachable = reachable || sigma.at({})(k, s) > 0.0;
    if (!reachable) continue;
    const double m1 = posterior_process({sigma, {{s, 0}}}, p)[1].mass_of(CellId::atom_cell(1));
    CHECK((m1 == doctest::Approx(0.0) || m1 == doctest::Approx(1.0)));
  }
  CHECK(best_response_value(one, sigma).value >= 1.0 / 4.0 - 1e-9);

  // The induced martingale has the input tree's variation.
  const MaxVarResult xi = exact_maxvar(p, 2, BranchCap(2));
  const P1Strategy opt = splitting_strategy(spec, *xi.witness);
  CHECK(variation(induced_martingale(opt, p, 2)) == doctest::Approx(xi.value).epsilon(1e-9));
  CHECK(best_response_value(spec, opt).value >= xi.value / 4.0 - 1e-6);

  const MartingaleTree wrong(make_node(CellMeasure::from_prior(Prior::uniform(3))));
  CHECK_THROWS_AS(splitting_strategy(spec, wrong), InvalidTree);
}
