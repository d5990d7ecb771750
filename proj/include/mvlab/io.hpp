#pragma once

// JSON documents for priors and martingale trees, and the textual prior
// sources accepted on the command line.

#include <string>
#include <vector>

#include <json.hpp>

#include "mvlab/martingale.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {

using Json = nlohmann::ordered_json;

/// {"theta": t, "atoms": {"label": w, ...}, "tail": {"family", "c", "head_terms"}}.
/// Explicit weights are renormalized (with a warning) when they miss their
/// target sum by more than 1e-9.
Prior prior_from_json(const Json& j, std::vector<std::string>* warnings = nullptr);
Json prior_to_json(const Prior& p);

/// Nested {"measure", "branches": [{"prob", "embed", "child"}]} objects. Trees
/// whose expansion exceeds `nested_limit` nodes are written as a node table
/// {"root": id, "nodes": [...]} with integer child references instead.
Json tree_to_json(const MartingaleTree& t, std::size_t nested_limit = 100000);
MartingaleTree tree_from_json(const Json& j);

Json cell_measure_to_json(const CellMeasure& m);
CellMeasure cell_measure_from_json(const Json& j);

struct PriorSource {
  Prior prior;
  std::string id;
  std::vector<std::string> warnings;
};

/// A file path, an inline JSON document, or a catalog name:
/// bernoulli:p, uniform:m, point-mass, continuous, atoms:w1,w2,...,
/// mixed:theta:w1,w2,..., geometric:r, power-log:c, dyadic-power-log:c.
PriorSource parse_prior_source(const std::string& text);

}  // namespace mvlab
