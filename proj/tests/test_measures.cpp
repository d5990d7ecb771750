#include <cmath>
#include <random>

#include <doctest.h>

#include "mvlab/cell_measure.hpp"
#include "mvlab/errors.hpp"
#include "mvlab/measures.hpp"

using namespace mvlab;

namespace {

CellMeasure on_atoms(const std::vector<double>& w) {
  std::vector<CellId> ids;
  for (std::size_t i = 0; i < w.size(); ++i) ids.push_back(CellId::atom_cell(static_cast<std::int64_t>(i)));
  return CellMeasure(ids, Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
}

}  // namespace

TEST_CASE("tv_distance examples") {
  const CellMeasure a = on_atoms({0.5, 0.5});
  CHECK(tv_distance(a, a) == doctest::Approx(0.0));
  CHECK(tv_distance(CellMeasure::atom_point(0), CellMeasure::atom_point(1)) == doctest::Approx(2.0));
  CHECK(tv_distance(a, CellMeasure::atom_point(0)) == doctest::Approx(1.0));
}

TEST_CASE("tv_distance across continuous refinements") {
  const CellId root = CellId::continuous_root();
  const CellMeasure whole({root}, Eigen::VectorXd::Ones(1));
  const CellMeasure left({root.child(2, 0), root.child(2, 1)}, Eigen::Vector2d(1.0, 0.0));
  // Uniform on [0,1] versus uniform on [0,1/2]: |1/2 - 1| + 1/2.
  CHECK(tv_distance(whole, left) == doctest::Approx(1.0));
  const CellMeasure thirds({root.child(3, 0), root.child(3, 1), root.child(3, 2)},
                           Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3));
  CHECK_THROWS_AS(tv_distance(left, thirds), IncomparableCells);
}

TEST_CASE("tv_distance is a metric on random triples") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_measure = [&] {
    std::vector<double> w(5);
    double s = 0.0;
    for (auto& x : w) s += x = u(rng);
    for (auto& x : w) x /= s;
    return on_atoms(w);
  };
  for (int i = 0; i < 200; ++i) {
    const auto a = random_measure(), b = random_measure(), c = random_measure();
    const double ab = tv_distance(a, b), ba = tv_distance(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab >= 0.0);
    CHECK(ab <= 2.0 + 1e-12);
    CHECK(tv_distance(a, c) <= ab + tv_distance(b, c) + 1e-12);
    CHECK(tv_distance(a, a) < 1e-12);
  }
}

TEST_CASE("z_delta examples") {
  for (int M : {2, 3, 7})
    for (double d : {-0.5, 0.0, 0.25})
      CHECK(z_delta(Prior::uniform(M), d).to_double() == doctest::Approx(std::pow(std::log(M), 0.5 - d)));
  CHECK(z_delta(Prior::point_mass(), 0.0).to_double() == 0.0);
  const Prior p = Prior::discrete({0.5, 0.2, 0.2, 0.1});
  CHECK(z_delta(p, -0.5).to_double() == doctest::Approx(shannon_entropy(p).to_double()).epsilon(1e-12));
  CHECK_THROWS_AS(z_delta(p, 0.6), InvalidDelta);
  CHECK_THROWS_AS(z_delta(Prior::mixed(0.5, {1.0}), 0.0), InvalidPrior);
}

TEST_CASE("z_delta properties on finite supports") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(8);
    double s = 0.0;
    for (auto& x : w) s += x = u(rng);
    for (auto& x : w) x /= s;
    const Prior p = Prior::discrete(w);
    CHECK(z_delta(p, 0.5).to_double() == doctest::Approx(1.0));
    // all masses are below 1/e here, so the bases are >= 1
    double prev = z_delta(p, -0.5).to_double();
    for (double d = -0.4; d <= 0.5 + 1e-9; d += 0.1) {
      const double z = z_delta(p, d).to_double();
      CHECK(z <= prev + 1e-12);
      prev = z;
    }
  }
}

TEST_CASE("z_delta on tails") {
  CHECK(z_delta(Prior::from_tail(TailSpec::geometric(0.5)), 0.0).is_finite());
  const Prior pl = Prior::from_tail(TailSpec::power_log(1.2));
  CHECK(z_delta(pl, 0.2).is_infinite());
  CHECK(z_delta(pl, 0.4).is_finite());
  const Prior dy = Prior::from_tail(TailSpec::dyadic_power_log(1.2));
  CHECK(z_delta(dy, 0.25).is_infinite());
  CHECK(z_delta(dy, 0.35).is_finite());
}

TEST_CASE("shannon_entropy examples") {
  CHECK(shannon_entropy(Prior::uniform(4)).to_double() == doctest::Approx(std::log(4.0)));
  CHECK(shannon_entropy(Prior::point_mass()).to_double() == 0.0);
  CHECK(shannon_entropy(Prior::discrete({0.5, 0.25, 0.25})).to_double() == doctest::Approx(1.5 * std::log(2.0)));
  CHECK(shannon_entropy(Prior::discrete({0.9, 0.1})).to_double() > 0.0);
}

TEST_CASE("classical_bounds examples") {
  const ClassicalBounds b = classical_bounds(Prior::bernoulli(0.5), 1);
  CHECK(b.sqrt_bound.to_double() == doctest::Approx(1.0));
  for (int N : {1, 4, 9}) {
    const auto m = classical_bounds(Prior::bernoulli(0.5), N).mz_asymptote;
    REQUIRE(m.has_value());
    CHECK(*m == doctest::Approx(2.0 * std::sqrt(double(N)) / std::sqrt(2.0 * M_PI)));
  }
  const ClassicalBounds pm = classical_bounds(Prior::point_mass(), 10);
  CHECK(pm.sqrt_bound.to_double() == 0.0);
  CHECK(pm.neyman_bound.to_double() == 0.0);
  CHECK_FALSE(classical_bounds(Prior::uniform(3), 2).mz_asymptote.has_value());
}

TEST_CASE("classical bounds are nondecreasing in N") {
  const Prior p = Prior::discrete({0.6, 0.3, 0.1});
  double s = 0.0, n = 0.0;
  for (int N = 1; N <= 20; ++N) {
    const ClassicalBounds b = classical_bounds(p, N);
    CHECK(b.sqrt_bound.to_double() >= s);
    CHECK(b.neyman_bound.to_double() >= n);
    s = b.sqrt_bound.to_double();
    n = b.neyman_bound.to_double();
  }
}

TEST_CASE("z_bound examples") {
  const double k = 2.0 * std::sqrt(6.0);
  CHECK(z_bound(Prior::uniform(2), 1, 0.0).to_double() == doctest::Approx(k * std::sqrt(std::log(2.0))));
  CHECK(z_bound(Prior::uniform(2), 1, 0.0).to_double() == doctest::Approx(4.078).epsilon(1e-3));
  CHECK(z_bound(Prior::point_mass(), 5, 0.25).to_double() == 0.0);
  for (int N : {1, 3, 10}) CHECK(z_bound(Prior::uniform(5), N, 0.5).to_double() == doctest::Approx(k * N));
  CHECK_THROWS_AS(z_bound(Prior::uniform(2), 1, 0.7), InvalidDelta);
}

TEST_CASE("alpha_threshold examples") {
  CHECK(alpha_threshold(TailSpec::geometric(0.5)) == 0.0);
  CHECK(alpha_threshold(TailSpec::power_log(1.2)) == doctest::Approx(0.3));
  CHECK(alpha_threshold(TailSpec::power_log(1.5)) == 0.0);
  CHECK(alpha_threshold(TailSpec::power_log(2.5)) == 0.0);
  CHECK(alpha_threshold(TailSpec::dyadic_power_log(1.2)) == doctest::Approx(0.3));
  CHECK(alpha_threshold("power-log", 1.1) == doctest::Approx(0.4));
  CHECK_THROWS_AS(alpha_threshold("zipf", 2.0), UnsupportedFamily);
}

TEST_CASE("prior invariants") {
  CHECK_THROWS_AS(Prior(0.5, {}), InvalidPrior);
  CHECK_THROWS_AS(Prior(1.5, {}), InvalidPrior);
  CHECK_THROWS_AS(Prior(0.0, {{"a", 0.5}, {"a", 0.5}}), InvalidPrior);
  CHECK_THROWS_AS(Prior(0.0, {{"a", 0.4}, {"b", 0.4}}), InvalidPrior);
  const Prior m = Prior::mixed(0.25, {0.5, 0.5});
  CHECK(m.absolute_atom_mass(0) == doctest::Approx(0.375));
  CHECK(m.discrete_part().theta() == 0.0);
  const Prior t = Prior::from_tail(TailSpec::geometric(0.5, 20));
  CHECK_THROWS_AS(t.support_size(), InvalidPrior);
  CHECK(t.materialized().support_size() == 20);
}
