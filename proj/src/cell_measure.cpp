#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mvlab/cell_measure.hpp"
#include "mvlab/errors.hpp"

namespace mvlab {

double CellId::base_fraction() const {
  if (is_atom()) return 1.0;
  double f = 1.0;
  for (const auto& s : path) f /= s.arity;
  return f;
}

CellId CellId::child(std::uint32_t arity, std::uint32_t index) const {
  if (is_atom()) throw InvalidArgument("atoms cannot be subdivided");
  if (arity < 2 || index >= arity) throw InvalidArgument("invalid subdivision step");
  CellId c = *this;
  c.path.push_back({arity, index});
  return c;
}

CellId CellId::embedded(const CellPath& prefix) const {
  if (is_atom() || prefix.empty()) return *this;
  CellId c{-1, prefix};
  c.path.insert(c.path.end(), path.begin(), path.end());
  return c;
}

namespace {

void sort_and_check(std::vector<CellId>& cells, Eigen::VectorXd& masses) {
  if (static_cast<Eigen::Index>(cells.size()) != masses.size())
    throw InvalidArgument("cell and mass counts differ");
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });
  std::vector<CellId> c;
  std::vector<double> m;
  for (std::size_t i : order) {
    const double v = masses(static_cast<Eigen::Index>(i));
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("cell masses must be nonnegative");
    if (v == 0.0) continue;
    if (!c.empty() && c.back() == cells[i]) throw InvalidArgument("duplicate cell id");
    c.push_back(cells[i]);
    m.push_back(v);
  }
  cells = std::move(c);
  masses = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
}

}  // namespace

CellMeasure::CellMeasure(std::vector<CellId> cells, const Eigen::VectorXd& masses)
    : cells_(std::move(cells)), masses_(masses) {
  sort_and_check(cells_, masses_);
  if (!normalized()) throw InvalidArgument("cell masses must sum to 1");
}

CellMeasure CellMeasure::unchecked(std::vector<CellId> cells, const Eigen::VectorXd& masses) {
  CellMeasure m;
  m.cells_ = std::move(cells);
  m.masses_ = masses;
  sort_and_check(m.cells_, m.masses_);
  return m;
}

CellMeasure CellMeasure::from_prior(const Prior& p) {
  if (p.has_tail()) throw InvalidPrior("materialize the tail before building cell measures");
  std::vector<CellId> cells;
  Eigen::VectorXd m(static_cast<Eigen::Index>(p.atoms().size() + 1));
  for (std::size_t i = 0; i < p.atoms().size(); ++i) {
    cells.push_back(CellId::atom_cell(static_cast<std::int64_t>(i)));
    m(static_cast<Eigen::Index>(i)) = p.absolute_atom_mass(i);
  }
  cells.push_back(CellId::continuous_root());
  m(static_cast<Eigen::Index>(p.atoms().size())) = p.theta();
  return CellMeasure(std::move(cells), m);
}

CellMeasure CellMeasure::atom_point(std::int64_t index) {
  return CellMeasure({CellId::atom_cell(index)}, Eigen::VectorXd::Ones(1));
}

CellMeasure CellMeasure::two_point(double x) {
  return CellMeasure({CellId::atom_cell(0), CellId::atom_cell(1)}, Eigen::Vector2d(1.0 - x, x));
}

bool CellMeasure::normalized() const { return std::abs(masses_.sum() - 1.0) <= 1e-12; }

bool CellMeasure::atoms_only() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const CellId& c) { return c.is_atom(); });
}

double CellMeasure::mass_of(const CellId& c) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), c);
  if (it == cells_.end() || !(*it == c)) return 0.0;
  return masses_(it - cells_.begin());
}

CellMeasure CellMeasure::embedded(const CellPath& prefix) const {
  CellMeasure m = *this;
  for (auto& c : m.cells_) c = c.embedded(prefix);
  return m;
}

namespace {

struct TrieNode {
  std::uint32_t arity = 0;
  std::map<std::uint32_t, int> children;
  std::vector<std::pair<int, double>> owners;  // (measure column, mass)
};

class Refinement {
 public:
  explicit Refinement(int columns) : cols_(columns) { nodes_.emplace_back(); }

  void add(int col, const CellPath* prefix, const CellPath& path, double mass) {
    int node = 0;
    auto step = [&](const CellStep& s) {
      TrieNode& n = nodes_[node];
      if (n.arity == 0) {
        n.arity = s.arity;
      } else if (n.arity != s.arity) {
        throw IncomparableCells("a cell is split with arities " + std::to_string(n.arity) + " and " +
                                std::to_string(s.arity));
      }
      auto it = n.children.find(s.index);
      if (it != n.children.end()) {
        node = it->second;
      } else {
        const int id = static_cast<int>(nodes_.size());
        nodes_[node].children.emplace(s.index, id);
        nodes_.emplace_back();
        node = id;
      }
    };
    if (prefix)
      for (const auto& s : *prefix) step(s);
    for (const auto& s : path) step(s);
    nodes_[node].owners.emplace_back(col, mass);
  }

  void emit(std::vector<Eigen::VectorXd>& rows) {
    Eigen::VectorXd dens = Eigen::VectorXd::Zero(cols_);
    std::vector<bool> held(cols_, false);
    walk(0, 1.0, dens, held, rows);
  }

 private:
  void walk(int id, double frac, Eigen::VectorXd& dens, std::vector<bool>& held,
            std::vector<Eigen::VectorXd>& rows) {
    const TrieNode& n = nodes_[id];
    std::vector<int> set_here;
    for (const auto& [col, mass] : n.owners) {
      if (held[col]) throw IncomparableCells("a measure holds nested cells");
      held[col] = true;
      dens(col) = mass / frac;
      set_here.push_back(col);
    }
    if (n.children.empty()) {
      if (dens.any()) rows.push_back(dens * frac);
    } else {
      const std::size_t k = n.children.size();
      if (k < n.arity && dens.any()) rows.push_back(dens * (frac * double(n.arity - k) / n.arity));
      for (const auto& [idx, child] : n.children) walk(child, frac / n.arity, dens, held, rows);
    }
    for (int col : set_here) {
      held[col] = false;
      dens(col) = 0.0;
    }
  }

  int cols_;
  std::vector<TrieNode> nodes_;
};

}  // namespace

Eigen::MatrixXd common_refinement(const std::vector<PlacedMeasure>& measures) {
  const int M = static_cast<int>(measures.size());
  std::map<std::int64_t, Eigen::VectorXd> atom_rows;
  Refinement trie(M);
  bool any_continuous = false;
  for (int j = 0; j < M; ++j) {
    const CellMeasure& m = *measures[j].measure;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const CellId& c = m.cells()[i];
      const double v = m.masses()(static_cast<Eigen::Index>(i));
      if (c.is_atom()) {
        auto [it, fresh] = atom_rows.try_emplace(c.atom, Eigen::VectorXd::Zero(M));
        it->second(j) += v;
      } else {
        any_continuous = true;
        trie.add(j, measures[j].prefix, c.path, v);
      }
    }
  }
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(atom_rows.size());
  for (auto& [a, r] : atom_rows) rows.push_back(std::move(r));
  if (any_continuous) trie.emit(rows);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), M);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

double tv_distance(const CellMeasure& a, const CellMeasure& b) {
  if (a.atoms_only() && b.atoms_only()) {
    // Both cell lists are sorted by atom index: merge directly.
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size() || (i < a.size() && a.cells()[i].atom < b.cells()[j].atom)) {
        s += a.masses()(static_cast<Eigen::Index>(i++));
      } else if (i == a.size() || b.cells()[j].atom < a.cells()[i].atom) {
        s += b.masses()(static_cast<Eigen::Index>(j++));
      } else {
        s += std::abs(a.masses()(static_cast<Eigen::Index>(i++)) - b.masses()(static_cast<Eigen::Index>(j++)));
      }
    }
    return s;
  }
  const Eigen::MatrixXd r = common_refinement({{&a, nullptr}, {&b, nullptr}});
  return (r.col(0) - r.col(1)).cwiseAbs().sum();
}

double tv_distance(const CellMeasure& a, const CellMeasure& b, const CellPath& b_prefix) {
  if (b_prefix.empty()) return tv_distance(a, b);
  const Eigen::MatrixXd r = common_refinement({{&a, nullptr}, {&b, &b_prefix}});
  return (r.col(0) - r.col(1)).cwiseAbs().sum();
}

}  // namespace mvlab
