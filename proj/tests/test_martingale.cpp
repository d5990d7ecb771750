#include <algorithm>
#include <random>

#include <doctest.h>

#include "mvlab/errors.hpp"
#include "mvlab/io.hpp"
#include "mvlab/martingale.hpp"
#include "mvlab/maxvar.hpp"

using namespace mvlab;

namespace {

NodePtr leaf(double x) { return make_node(CellMeasure::two_point(x)); }

NodePtr constant_chain(double x, int depth) {
  NodePtr n = leaf(x);
  for (int d = 1; d < depth; ++d) n = make_node(CellMeasure::two_point(x), {{1.0, n, {}}});
  return n;
}

// Random two-atom martingale: each node splits x into D points whose
// weighted mean is x.
NodePtr random_node(double x, int levels, int D, std::mt19937_64& rng) {
  if (levels == 1) return leaf(x);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = 1 + static_cast<int>(u(rng) * D);
  if (k == 1) return make_node(CellMeasure::two_point(x), {{1.0, random_node(x, levels - 1, D, rng), {}}});
  std::vector<double> q(k), y(k);
  double s = 0.0;
  for (auto& v : q) s += v = 0.1 + u(rng);
  for (auto& v : q) v /= s;
  // Move the children toward one side by a random direction, then shrink so
  // all points stay inside [0, 1].
  std::vector<double> dir(k);
  double mean = 0.0;
  for (int i = 0; i < k; ++i) mean += q[i] * (dir[i] = u(rng) - 0.5);
  double scale = 1e300;
  for (int i = 0; i < k; ++i) {
    dir[i] -= mean;
    if (dir[i] > 0) scale = std::min(scale, (1.0 - x) / dir[i]);
    if (dir[i] < 0) scale = std::min(scale, x / -dir[i]);
  }
  scale *= u(rng);
  std::vector<Branch> br;
  for (int i = 0; i < k; ++i) {
    y[i] = std::clamp(x + scale * dir[i], 0.0, 1.0);
    br.push_back({q[i], random_node(y[i], levels - 1, D, rng), {}});
  }
  // Absorb the clamp error into the root measure.
  double m = 0.0;
  for (int i = 0; i < k; ++i) m += q[i] * y[i];
  return make_node(CellMeasure::two_point(m), std::move(br));
}

}  // namespace

TEST_CASE("validate examples") {
  const MartingaleTree c(constant_chain(0.3, 4));
  for (int D = 2; D <= 5; ++D) CHECK(validate(c, BranchCap(D)).ok());
  CHECK(validate(c, BranchCap::unbounded()).ok());

  const MartingaleTree split(make_node(CellMeasure::two_point(0.5), {{0.5, leaf(0.0), {}}, {0.5, leaf(1.0), {}}}));
  CHECK(validate(split, BranchCap(2)).ok());

  const MartingaleTree bad(make_node(CellMeasure::two_point(0.5), {{1.0, leaf(0.0), {}}}));
  const ValidationReport r = validate(bad, BranchCap(2));
  CHECK_FALSE(r.martingale_ok);
  CHECK_FALSE(r.ok());
}

TEST_CASE("validate detects branching and probability errors") {
  const MartingaleTree three(make_node(CellMeasure::two_point(0.5),
                                       {{1.0 / 3, leaf(0.0), {}}, {1.0 / 3, leaf(0.5), {}}, {1.0 / 3, leaf(1.0), {}}}));
  CHECK(validate(three, BranchCap(3)).ok());
  CHECK_FALSE(validate(three, BranchCap(2)).branching_ok);

  const MartingaleTree unnormalized(make_node(CellMeasure::two_point(0.5), {{0.6, leaf(0.5), {}}}));
  CHECK_FALSE(validate(unnormalized, BranchCap(2)).probabilities_ok);

  const MartingaleTree tiny(
      make_node(CellMeasure::two_point(0.5), {{1e-16, leaf(0.5), {}}, {1.0 - 1e-16, leaf(0.5), {}}}));
  CHECK_FALSE(validate(tiny, BranchCap(2)).probabilities_ok);
}

TEST_CASE("variation examples") {
  for (int depth : {1, 2, 6}) CHECK(variation(MartingaleTree(constant_chain(0.4, depth))) == 0.0);
  const MartingaleTree split(make_node(CellMeasure::two_point(0.5), {{0.5, leaf(0.0), {}}, {0.5, leaf(1.0), {}}}));
  CHECK(variation(split) == doctest::Approx(1.0));
  for (int N : {1, 3, 8})
    for (int D : {2, 3, 5})
      CHECK(variation(partition_martingale(Prior::continuous(), N, D)) == doctest::Approx(2.0 * N * (1.0 - 1.0 / D)));
}

TEST_CASE("random martingales respect the variation cap") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int D = 2 + trial % 3, levels = 2 + trial % 4;
    const MartingaleTree t(random_node(0.1 + 0.8 * (trial % 7) / 6.0, levels, D, rng));
    REQUIRE(validate(t, BranchCap(D)).ok());
    const double v = variation(t);
    CHECK(v <= 2.0 * (t.depth() - 1) * (1.0 - 1.0 / D) + 1e-12);

    // Child order does not matter.
    auto root = t.root();
    std::reverse(root.branches.begin(), root.branches.end());
    CHECK(variation(MartingaleTree(make_node(root.measure, root.branches))) == doctest::Approx(v));

    // Truncation never adds variation, and deeper truncations add some back.
    double prev = 0.0;
    for (int d = 1; d <= t.depth(); ++d) {
      const double vd = variation(prune(t, d));
      CHECK(vd >= prev - 1e-12);
      CHECK(vd <= v + 1e-12);
      prev = vd;
    }
  }
}

TEST_CASE("tree JSON round trip") {
  const MartingaleTree t = partition_martingale(Prior::mixed(0.5, {0.7, 0.3}), 3, 2);
  const Json j = tree_to_json(t);
  const MartingaleTree back = tree_from_json(j);
  CHECK(variation(back) == doctest::Approx(variation(t)));
  CHECK(validate(back, BranchCap(2)).ok());
  // Node-table form for shared subtrees.
  const Json table = tree_to_json(t, 1);
  REQUIRE(table.contains("nodes"));
  CHECK(variation(tree_from_json(table)) == doctest::Approx(variation(t)));
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"branches": []})")), InvalidTree);
}
