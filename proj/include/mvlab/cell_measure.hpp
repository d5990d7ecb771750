#pragma once

// Measures over a finite algebra of cells. A cell is either an atom of the
// prior or a piece of the non-atomic component obtained by repeated equal
// subdivision; within a continuous cell the density is uniform relative to
// the base measure, so total variation is an exact finite sum.

#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvlab/measures.hpp"

namespace mvlab {

/// One subdivision step: the parent is cut into `arity` equal pieces and the
/// cell keeps piece `index`.
struct CellStep {
  std::uint32_t arity;
  std::uint32_t index;
  auto operator<=>(const CellStep&) const = default;
};
using CellPath = std::vector<CellStep>;

struct CellId {
  /// Atom index (>= 0), or -1 for a continuous cell described by `path`.
  std::int64_t atom = -1;
  CellPath path;

  static CellId atom_cell(std::int64_t index) { return CellId{index, {}}; }
  static CellId continuous_root() { return CellId{-1, {}}; }

  bool is_atom() const { return atom >= 0; }
  /// Base-measure fraction of the continuous component covered (1 for atoms).
  double base_fraction() const;
  CellId child(std::uint32_t arity, std::uint32_t index) const;
  /// `prefix` followed by this cell's path (atoms are unchanged).
  CellId embedded(const CellPath& prefix) const;

  auto operator<=>(const CellId&) const = default;
};

class CellMeasure {
 public:
  CellMeasure() = default;
  /// Masses must be nonnegative and sum to 1 within 1e-12 (InvalidArgument).
  /// Zero-mass cells are dropped and entries are sorted by cell id.
  CellMeasure(std::vector<CellId> cells, const Eigen::VectorXd& masses);
  /// No normalization check; used when a measure is deliberately malformed
  /// (deserialization, validation tests).
  static CellMeasure unchecked(std::vector<CellId> cells, const Eigen::VectorXd& masses);

  /// rho itself: one cell per atom plus the whole continuous component.
  static CellMeasure from_prior(const Prior& p);
  /// Point mass on atom `index`.
  static CellMeasure atom_point(std::int64_t index);
  /// Two atoms 0 and 1 with mass 1 - x and x.
  static CellMeasure two_point(double x);

  const std::vector<CellId>& cells() const { return cells_; }
  const Eigen::VectorXd& masses() const { return masses_; }
  std::size_t size() const { return cells_.size(); }
  double total() const { return masses_.sum(); }
  bool normalized() const;
  bool atoms_only() const;
  /// Mass of an exact cell id (0 if absent).
  double mass_of(const CellId& c) const;

  CellMeasure embedded(const CellPath& prefix) const;

 private:
  std::vector<CellId> cells_;
  Eigen::VectorXd masses_;
};

/// A measure placed inside a larger cell tree by prefixing its continuous
/// paths. Lets one stored measure stand for many congruent copies.
struct PlacedMeasure {
  const CellMeasure* measure;
  const CellPath* prefix;  // may be null
};

/// Masses of each measure over the regions of their common refinement
/// (rows = regions, columns = measures). Throws IncomparableCells when two
/// cells split a common parent with different arities, or when one measure
/// holds nested cells.
Eigen::MatrixXd common_refinement(const std::vector<PlacedMeasure>& measures);

double tv_distance(const CellMeasure& a, const CellMeasure& b);
double tv_distance(const CellMeasure& a, const CellMeasure& b, const CellPath& b_prefix);

}  // namespace mvlab
