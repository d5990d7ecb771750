#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "mvlab/errors.hpp"
#include "mvlab/game.hpp"

namespace mvlab {

StageGame::StageGame(std::vector<Eigen::MatrixXd> payoffs, std::vector<std::string> p1_labels,
                     std::vector<std::string> p2_labels)
    : g_(std::move(payoffs)), p1_labels_(std::move(p1_labels)), p2_labels_(std::move(p2_labels)) {
  if (g_.empty()) throw InvalidArgument("stage game needs at least one state");
  for (const auto& m : g_) {
    if (m.rows() != g_.front().rows() || m.cols() != g_.front().cols() || m.size() == 0)
      throw InvalidArgument("payoff matrices must share one nonempty shape");
    sup_ = std::max(sup_, m.cwiseAbs().maxCoeff());
  }
}

StageGame StageGame::negated() const {
  std::vector<Eigen::MatrixXd> n;
  for (const auto& m : g_) n.push_back(-m);
  return StageGame(std::move(n), p1_labels_, p2_labels_);
}

MZStagePair MZStagePair::standard() {
  MZStagePair p;
  p.g0 << 3, -1, -3, 1;
  p.g1 << 2, -2, -2, 2;
  return p;
}

namespace {

void require_finite_discrete(const Prior& p) {
  if (p.theta() != 0.0 || p.has_tail()) throw InvalidPrior("games need a finite purely atomic prior");
}

}  // namespace

GameSpec mz_game(const Prior& prior, const MZStagePair& pair, int N) {
  require_finite_discrete(prior);
  if (N < 1) throw InvalidArgument("horizon must be positive");
  const std::size_t K = prior.atoms().size();
  if (K > 2) throw InvalidArgument("the plain pair game has two states");
  std::vector<Eigen::MatrixXd> g{pair.g0};
  if (K == 2) g.push_back(pair.g1);
  return GameSpec{StageGame(std::move(g), {"h=0", "h=1"}, {"f=0", "f=1"}), prior, N, std::nullopt};
}

std::vector<CompositeP2Action> composite_p2_actions(int K) {
  std::vector<CompositeP2Action> out;
  for (std::uint32_t Y = 0; Y < (1u << K); ++Y) {
    const int sub = 1 << std::popcount(Y);
    for (std::uint64_t f = 0; f < (std::uint64_t{1} << sub); ++f) out.push_back({Y, f});
  }
  return out;
}

int composite_p1_action(std::uint32_t X, int h) { return static_cast<int>(X) * 2 + h; }

namespace {

// Position of submask Z among the submasks of Y in increasing order: the bits
// of Z at Y's positions, packed.
int submask_index(std::uint32_t Y, std::uint32_t Z) {
  int idx = 0, bit = 0;
  for (std::uint32_t b = 0; b < 32; ++b) {
    if (!(Y >> b & 1u)) continue;
    if (Z >> b & 1u) idx |= 1 << bit;
    ++bit;
  }
  return idx;
}

std::string subset_label(std::uint32_t X, int K) {
  std::string s = "{";
  for (int k = 0; k < K; ++k)
    if (X >> k & 1u) s += (s.size() > 1 ? "," : "") + std::to_string(k);
  return s + "}";
}

}  // namespace

GameSpec build_big_game(const Prior& prior, const MZStagePair& pair, int N) {
  require_finite_discrete(prior);
  if (N < 1) throw InvalidArgument("horizon must be positive");
  const int K = static_cast<int>(prior.atoms().size());
  if (K > 3) throw InstanceTooLarge("composite action sets are enumerated for at most three states");
  const auto p2 = composite_p2_actions(K);
  const int S = 2 << K;
  const int T = static_cast<int>(p2.size());
  std::vector<Eigen::MatrixXd> g(static_cast<std::size_t>(K), Eigen::MatrixXd(S, T));
  std::vector<std::string> l1, l2;
  for (std::uint32_t X = 0; X < (1u << K); ++X)
    for (int h = 0; h < 2; ++h) l1.push_back("(" + subset_label(X, K) + "," + std::to_string(h) + ")");
  for (const auto& a : p2) l2.push_back("(" + subset_label(a.Y, K) + ",f" + std::to_string(a.f) + ")");
  for (int k = 0; k < K; ++k)
    for (std::uint32_t X = 0; X < (1u << K); ++X)
      for (int h = 0; h < 2; ++h)
        for (int t = 0; t < T; ++t) {
          const int bit = static_cast<int>(p2[t].f >> submask_index(p2[t].Y, X & p2[t].Y) & 1u);
          const Eigen::Matrix2d& m = (X >> k & 1u) ? pair.g1 : pair.g0;
          g[static_cast<std::size_t>(k)](composite_p1_action(X, h), t) = m(h, bit);
        }
  return GameSpec{StageGame(std::move(g), std::move(l1), std::move(l2)), prior, N, K};
}

double nr_value(const MZStagePair& pair, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in [0, 1]");
  const Eigen::Matrix2d m = p * pair.g1 + (1.0 - p) * pair.g0;
  return matrix_value_2x2<double>(m).value;
}

namespace {

void check_spec(const GameSpec& spec) {
  require_finite_discrete(spec.prior);
  if (static_cast<int>(spec.prior.atoms().size()) != spec.stage.num_states())
    throw InvalidArgument("prior and stage game disagree on the number of states");
  if (spec.horizon < 1) throw InvalidArgument("horizon must be positive");
}

double saturating_pow(double b, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

PayoffEstimate expected_payoff(const GameSpec& spec, const P1Strategy& sigma, const P2Strategy& tau,
                               const PayoffOptions& opts) {
  check_spec(spec);
  const StageGame& g = spec.stage;
  const int K = g.num_states(), S = g.num_p1_actions(), T = g.num_p2_actions();
  if (sigma.num_states() != K || sigma.num_actions() != S || tau.num_actions() != T)
    throw InvalidArgument("strategy dimensions do not match the game");
  const Eigen::VectorXd rho = spec.prior.atom_weights();
  const double leaves = K * saturating_pow(static_cast<double>(S) * T, spec.horizon);
  PayoffEstimate est;
  if (leaves <= static_cast<double>(opts.enumeration_budget)) {
    History h;
    std::function<double(int, int)> walk = [&](int k, int n) -> double {
      if (n == spec.horizon) return 0.0;
      const Eigen::MatrixXd& x = sigma.at(h);
      const Eigen::VectorXd& y = tau.at(h);
      double v = 0.0;
      for (int s = 0; s < S; ++s) {
        if (x(k, s) <= 0.0) continue;
        for (int t = 0; t < T; ++t) {
          if (y(t) <= 0.0) continue;
          h.emplace_back(s, t);
          v += x(k, s) * y(t) * (g(k, s, t) + walk(k, n + 1));
          h.pop_back();
        }
      }
      return v;
    };
    for (int k = 0; k < K; ++k) est.value += rho(k) * walk(k, 0);
    return est;
  }
  est.exact = false;
  est.seed = opts.seed;
  std::mt19937_64 rng(opts.seed);
  std::discrete_distribution<int> state(rho.data(), rho.data() + rho.size());
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t i = 0; i < opts.samples; ++i) {
    const int k = state(rng);
    History h;
    double total = 0.0;
    for (int n = 0; n < spec.horizon; ++n) {
      const Eigen::VectorXd x = sigma.at(h).row(k).transpose();
      const Eigen::VectorXd& y = tau.at(h);
      std::discrete_distribution<int> ds(x.data(), x.data() + x.size());
      std::discrete_distribution<int> dt(y.data(), y.data() + y.size());
      const int s = ds(rng), t = dt(rng);
      total += g(k, s, t);
      h.emplace_back(s, t);
    }
    sum += total;
    sum2 += total * total;
  }
  const double n = static_cast<double>(opts.samples);
  est.value = sum / n;
  est.std_error = std::sqrt(std::max(0.0, sum2 / n - est.value * est.value) / n);
  return est;
}

BestResponse best_response_value(const GameSpec& spec, const P1Strategy& sigma, std::uint64_t budget) {
  check_spec(spec);
  const StageGame& g = spec.stage;
  const int K = g.num_states(), S = g.num_p1_actions(), T = g.num_p2_actions();
  if (sigma.num_states() != K || sigma.num_actions() != S) throw InvalidArgument("strategy does not match the game");
  const Eigen::VectorXd rho = spec.prior.atom_weights();
  const bool own_only = !sigma.observes_opponent();
  const double work = own_only ? saturating_pow(S, spec.horizon) * T * K
                               : saturating_pow(static_cast<double>(S) * T, spec.horizon) * K;
  if (work > static_cast<double>(budget)) throw InstanceTooLarge("best response enumeration exceeds the budget");

  BestResponse br;
  br.tau_star = P2Strategy(T);
  auto unit = [T](int t) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(T);
    e(t) = 1.0;
    return e;
  };

  if (own_only) {
    // P2's continuation depends only on P1's past actions.
    std::map<std::vector<int>, int> choice;
    std::vector<int> own;
    std::function<double(const Eigen::VectorXd&)> solve = [&](const Eigen::VectorXd& w) -> double {
      if (static_cast<int>(own.size()) == spec.horizon) return 0.0;
      History h;
      for (int s : own) h.emplace_back(s, 0);
      const Eigen::MatrixXd& x = sigma.at(h);
      Eigen::VectorXd stage = Eigen::VectorXd::Zero(T);
      double cont = 0.0;
      for (int s = 0; s < S; ++s) {
        const Eigen::VectorXd ws = w.cwiseProduct(x.col(s));
        if (ws.sum() <= 0.0) continue;
        for (int k = 0; k < K; ++k) stage += ws(k) * g.payoff(k).row(s).transpose();
        own.push_back(s);
        cont += solve(ws);
        own.pop_back();
      }
      int best = 0;
      for (int t = 1; t < T; ++t)
        if (stage(t) < stage(best)) best = t;
      choice[own] = best;
      return stage(best) + cont;
    };
    br.value = solve(rho);
    // Record tau* along the histories it actually produces.
    History h;
    std::vector<int> path;
    std::function<void(const Eigen::VectorXd&)> record = [&](const Eigen::VectorXd& w) {
      if (static_cast<int>(path.size()) == spec.horizon) return;
      const int t = choice.at(path);
      br.tau_star.set(h, unit(t));
      History hp;
      for (int s : path) hp.emplace_back(s, 0);
      const Eigen::MatrixXd& x = sigma.at(hp);
      for (int s = 0; s < S; ++s) {
        const Eigen::VectorXd ws = w.cwiseProduct(x.col(s));
        if (ws.sum() <= 0.0) continue;
        h.emplace_back(s, t);
        path.push_back(s);
        record(ws);
        path.pop_back();
        h.pop_back();
      }
    };
    record(rho);
    return br;
  }

  History h;
  std::function<double(const Eigen::VectorXd&)> solve = [&](const Eigen::VectorXd& w) -> double {
    if (static_cast<int>(h.size()) == spec.horizon) return 0.0;
    const Eigen::MatrixXd& x = sigma.at(h);
    int best = 0;
    double best_v = 0.0;
    for (int t = 0; t < T; ++t) {
      double v = 0.0;
      for (int s = 0; s < S; ++s) {
        const Eigen::VectorXd ws = w.cwiseProduct(x.col(s));
        if (ws.sum() <= 0.0) continue;
        for (int k = 0; k < K; ++k) v += ws(k) * g(k, s, t);
        h.emplace_back(s, t);
        v += solve(ws);
        h.pop_back();
      }
      if (t == 0 || v < best_v) {
        best = t;
        best_v = v;
      }
    }
    br.tau_star.set(h, unit(best));
    return best_v;
  };
  br.value = solve(rho);
  return br;
}

}  // namespace mvlab
