#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mvlab/errors.hpp"
#include "mvlab/io.hpp"

namespace mvlab {
namespace {

constexpr double kLoadTolerance = 1e-9;

double number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw InvalidPrior(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

std::vector<double> split_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InvalidArgument("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty number list");
  return out;
}

double one_number(const std::string& s) {
  const auto v = split_numbers(s);
  if (v.size() != 1) throw InvalidArgument("expected one number, got '" + s + "'");
  return v.front();
}

}  // namespace

Prior prior_from_json(const Json& j, std::vector<std::string>* warnings) {
  if (!j.is_object()) throw InvalidPrior("prior document must be a JSON object");
  const double theta = j.contains("theta") ? number(j, "theta") : 0.0;
  std::vector<Atom> atoms;
  if (j.contains("atoms")) {
    const Json& a = j.at("atoms");
    if (!a.is_object()) throw InvalidPrior("'atoms' must map labels to weights");
    for (const auto& [label, w] : a.items()) {
      if (!w.is_number()) throw InvalidPrior("weight of '" + label + "' is not a number");
      atoms.push_back({label, w.get<double>()});
    }
  }
  std::optional<TailSpec> tail;
  if (j.contains("tail") && !j.at("tail").is_null()) {
    const Json& t = j.at("tail");
    if (!t.is_object() || !t.contains("family") || !t.at("family").is_string())
      throw InvalidPrior("'tail' needs a string 'family'");
    const TailFamily fam = tail_family_from_string(t.at("family").get<std::string>());
    const std::size_t head = t.contains("head_terms") ? t.at("head_terms").get<std::size_t>() : 1000;
    const char* key = fam == TailFamily::kGeometric ? (t.contains("ratio") ? "ratio" : "c") : "c";
    const double param = number(t, key);
    switch (fam) {
      case TailFamily::kGeometric: tail = TailSpec::geometric(param, head); break;
      case TailFamily::kPowerLog: tail = TailSpec::power_log(param, head); break;
      case TailFamily::kDyadicPowerLog: tail = TailSpec::dyadic_power_log(param, head); break;
    }
  }
  if (!tail && theta < 1.0 && !atoms.empty()) {
    double sum = 0.0;
    for (const auto& a : atoms) sum += a.weight;
    if (sum > 0.0) {
      if (std::abs(sum - 1.0) > kLoadTolerance && warnings)
        warnings->push_back("atom weights summed to " + std::to_string(sum) + "; renormalized");
      for (auto& a : atoms) a.weight /= sum;
    }
  }
  return Prior(theta, std::move(atoms), std::move(tail));
}

Json prior_to_json(const Prior& p) {
  Json j;
  j["theta"] = p.theta();
  Json atoms = Json::object();
  for (const auto& a : p.atoms()) atoms[a.label] = a.weight;
  j["atoms"] = std::move(atoms);
  if (p.tail()) {
    Json t;
    t["family"] = to_string(p.tail()->family());
    t["c"] = p.tail()->parameter();
    t["head_terms"] = p.tail()->head_terms();
    j["tail"] = std::move(t);
  }
  return j;
}

namespace {

Json path_to_json(const CellPath& path) {
  Json a = Json::array();
  for (const auto& s : path) a.push_back({s.arity, s.index});
  return a;
}

CellPath path_from_json(const Json& j) {
  CellPath p;
  if (!j.is_array()) throw InvalidTree("cell path must be an array of [arity, index] pairs");
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2) throw InvalidTree("cell path step must be [arity, index]");
    const auto arity = s[0].get<std::uint32_t>(), index = s[1].get<std::uint32_t>();
    if (arity < 2 || index >= arity) throw InvalidTree("cell path step out of range");
    p.push_back({arity, index});
  }
  return p;
}

}  // namespace

Json cell_measure_to_json(const CellMeasure& m) {
  Json cells = Json::array();
  for (const auto& c : m.cells()) {
    Json e;
    if (c.is_atom()) e["atom"] = c.atom;
    else e["path"] = path_to_json(c.path);
    cells.push_back(std::move(e));
  }
  Json j;
  j["cells"] = std::move(cells);
  j["masses"] = std::vector<double>(m.masses().data(), m.masses().data() + m.masses().size());
  return j;
}

CellMeasure cell_measure_from_json(const Json& j) {
  if (!j.contains("cells") || !j.contains("masses")) throw InvalidTree("measure needs 'cells' and 'masses'");
  const Json& cells = j.at("cells");
  const auto masses = j.at("masses").get<std::vector<double>>();
  if (cells.size() != masses.size()) throw InvalidTree("cells and masses differ in length");
  std::vector<CellId> ids;
  for (const auto& c : cells) {
    if (c.contains("atom")) ids.push_back(CellId::atom_cell(c.at("atom").get<std::int64_t>()));
    else ids.push_back(CellId{-1, path_from_json(c.value("path", Json::array()))});
  }
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  return CellMeasure::unchecked(std::move(ids), w);
}

namespace {

std::size_t expanded(const MartingaleNode* n, std::unordered_map<const MartingaleNode*, std::size_t>& memo,
                     std::size_t limit) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  std::size_t c = 1;
  for (const auto& b : n->branches) c = std::min(limit + 1, c + expanded(b.child.get(), memo, limit));
  return memo[n] = c;
}

Json nested(const MartingaleNode* n) {
  Json j;
  j["measure"] = cell_measure_to_json(n->measure);
  Json br = Json::array();
  for (const auto& b : n->branches) {
    Json e;
    e["prob"] = b.prob;
    if (!b.embed.empty()) e["embed"] = path_to_json(b.embed);
    e["child"] = nested(b.child.get());
    br.push_back(std::move(e));
  }
  j["branches"] = std::move(br);
  return j;
}

int table_id(const MartingaleNode* n, std::unordered_map<const MartingaleNode*, int>& ids, Json& nodes) {
  if (auto it = ids.find(n); it != ids.end()) return it->second;
  Json br = Json::array();
  for (const auto& b : n->branches) {
    Json e;
    e["prob"] = b.prob;
    if (!b.embed.empty()) e["embed"] = path_to_json(b.embed);
    e["child"] = table_id(b.child.get(), ids, nodes);
    br.push_back(std::move(e));
  }
  const int id = static_cast<int>(nodes.size());
  ids[n] = id;
  Json j;
  j["id"] = id;
  j["measure"] = cell_measure_to_json(n->measure);
  j["branches"] = std::move(br);
  nodes.push_back(std::move(j));
  return id;
}

NodePtr node_from_json(const Json& j, const Json* table, std::unordered_map<int, NodePtr>& built, int depth);

NodePtr resolve_child(const Json& c, const Json* table, std::unordered_map<int, NodePtr>& built, int depth) {
  if (c.is_number_integer()) {
    if (!table) throw InvalidTree("integer child reference outside a node table");
    const int id = c.get<int>();
    if (auto it = built.find(id); it != built.end()) return it->second;
    if (id < 0 || static_cast<std::size_t>(id) >= table->size()) throw InvalidTree("child id out of range");
    return built[id] = node_from_json((*table)[static_cast<std::size_t>(id)], table, built, depth + 1);
  }
  return node_from_json(c, table, built, depth + 1);
}

NodePtr node_from_json(const Json& j, const Json* table, std::unordered_map<int, NodePtr>& built, int depth) {
  if (depth > 10000) throw InvalidTree("tree nesting too deep or cyclic");
  if (!j.is_object() || !j.contains("measure")) throw InvalidTree("node needs a 'measure'");
  std::vector<Branch> br;
  for (const auto& b : j.value("branches", Json::array())) {
    if (!b.contains("prob") || !b.contains("child")) throw InvalidTree("branch needs 'prob' and 'child'");
    br.push_back({b.at("prob").get<double>(), resolve_child(b.at("child"), table, built, depth),
                  b.contains("embed") ? path_from_json(b.at("embed")) : CellPath{}});
  }
  return make_node(cell_measure_from_json(j.at("measure")), std::move(br));
}

}  // namespace

Json tree_to_json(const MartingaleTree& t, std::size_t nested_limit) {
  std::unordered_map<const MartingaleNode*, std::size_t> memo;
  if (expanded(&t.root(), memo, nested_limit) <= nested_limit) return nested(&t.root());
  std::unordered_map<const MartingaleNode*, int> ids;
  Json nodes = Json::array();
  const int root = table_id(&t.root(), ids, nodes);
  Json j;
  j["root"] = root;
  j["nodes"] = std::move(nodes);
  return j;
}

MartingaleTree tree_from_json(const Json& j) {
  std::unordered_map<int, NodePtr> built;
  if (j.contains("nodes")) {
    const Json& table = j.at("nodes");
    const int root = j.at("root").get<int>();
    return MartingaleTree(resolve_child(Json(root), &table, built, 0));
  }
  return MartingaleTree(node_from_json(j, nullptr, built, 0));
}

PriorSource parse_prior_source(const std::string& text) {
  PriorSource src{Prior::point_mass(), text, {}};
  auto weights = [&](const std::string& list) {
    auto w = split_numbers(list);
    double sum = 0.0;
    for (double x : w) sum += x;
    if (sum > 0.0 && std::abs(sum - 1.0) > kLoadTolerance) {
      src.warnings.push_back("atom weights summed to " + std::to_string(sum) + "; renormalized");
      for (double& x : w) x /= sum;
    }
    return w;
  };
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto parsed_json = [&](const Json& j) {
    src.prior = prior_from_json(j, &src.warnings);
    return src;
  };
  if (!text.empty() && (text.front() == '{' || text.front() == '[')) {
    src.id = "inline";
    try {
      return parsed_json(Json::parse(text));
    } catch (const Json::parse_error& e) {
      throw InvalidArgument(std::string("inline prior is not valid JSON: ") + e.what());
    }
  }
  if (head == "bernoulli") src.prior = Prior::bernoulli(one_number(rest));
  else if (head == "uniform") src.prior = Prior::uniform(static_cast<int>(one_number(rest)));
  else if (head == "point-mass" || head == "point") src.prior = Prior::point_mass();
  else if (head == "continuous") src.prior = Prior::continuous();
  else if (head == "atoms") src.prior = Prior::discrete(weights(rest));
  else if (head == "mixed") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw InvalidArgument("mixed prior needs mixed:theta:w1,w2,...");
    src.prior = Prior::mixed(one_number(rest.substr(0, c2)), weights(rest.substr(c2 + 1)));
  } else if (head == "geometric") src.prior = Prior::from_tail(TailSpec::geometric(one_number(rest)));
  else if (head == "power-log") src.prior = Prior::from_tail(TailSpec::power_log(one_number(rest)));
  else if (head == "dyadic-power-log") src.prior = Prior::from_tail(TailSpec::dyadic_power_log(one_number(rest)));
  else {
    std::ifstream in(text);
    if (!in) throw InvalidArgument("prior '" + text + "' is neither a catalog name nor a readable file");
    const auto slash = text.find_last_of('/');
    std::string stem = slash == std::string::npos ? text : text.substr(slash + 1);
    if (const auto dot = stem.rfind('.'); dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
    src.id = stem;
    try {
      return parsed_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
      throw InvalidArgument("prior file '" + text + "' is not valid JSON: " + e.what());
    }
  }
  return src;
}

}  // namespace mvlab
