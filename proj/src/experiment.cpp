#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mvlab/errors.hpp"
#include "mvlab/experiment.hpp"
#include "mvlab/game.hpp"
#include "mvlab/io.hpp"

namespace mvlab {

Command command_from_string(const std::string& name) {
  if (name == "maxvar") return Command::kMaxVar;
  if (name == "bounds") return Command::kBounds;
  if (name == "growth") return Command::kGrowth;
  if (name == "certify-game") return Command::kCertifyGame;
  if (name == "nr-check") return Command::kNrCheck;
  throw InvalidArgument("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::kMaxVar: return "maxvar";
    case Command::kBounds: return "bounds";
    case Command::kGrowth: return "growth";
    case Command::kCertifyGame: return "certify-game";
    case Command::kNrCheck: return "nr-check";
  }
  return "unknown";
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw InvalidArgument("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidArgument("cannot move output into place: " + ec.message());
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.N && *cfg.N < 1) throw InvalidArgument("--n must be positive");
  for (std::size_t i = 0; i < cfg.N_list.size(); ++i) {
    if (cfg.N_list[i] < 1) throw InvalidArgument("--n-list entries must be positive");
    if (i && cfg.N_list[i] <= cfg.N_list[i - 1]) throw InvalidArgument("--n-list must be strictly increasing");
  }
  if (cfg.grid < 2) throw InvalidArgument("--grid must be at least 2");
  if (cfg.betas.empty()) throw InvalidArgument("--beta grid is empty");
  for (double b : cfg.betas)
    if (!(b >= 0.0 && b <= 0.5)) throw InvalidDelta("beta values must lie in [0, 1/2]");
  if (cfg.command == Command::kGrowth && !cfg.N_list.empty() && cfg.N_list.size() < 3)
    throw InvalidArgument("growth needs at least three N values");
  if (cfg.command == Command::kCertifyGame && cfg.N && *cfg.N > 4)
    throw InstanceTooLarge("game certification is enumerated for N <= 4");
}

namespace {

const char* kHeader = "prior_id,N,D,method,xi_value,gap_bound,bound_sqrt,bound_neyman,bound_z_beta,construct_lb,pass";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

struct Row {
  std::string prior_id;
  int N;
  std::string D;
  std::string method;
  double xi;
  std::optional<double> gap;
  std::optional<double> sqrt_b, neyman_b, z_b, construct;
  bool pass;
};

std::string csv_row(const Row& r) {
  std::ostringstream os;
  os << csv_field(r.prior_id) << ',' << r.N << ',' << r.D << ',' << r.method << ',' << format_number(r.xi) << ','
     << opt_number(r.gap) << ',' << opt_number(r.sqrt_b) << ',' << opt_number(r.neyman_b) << ','
     << opt_number(r.z_b) << ',' << opt_number(r.construct) << ',' << (r.pass ? "true" : "false");
  return os.str();
}

Json json_row(const Row& r) {
  Json j;
  j["prior_id"] = r.prior_id;
  j["N"] = r.N;
  j["D"] = r.D;
  j["method"] = r.method;
  j["xi_value"] = r.xi;
  j["gap_bound"] = opt_json(r.gap);
  j["bound_sqrt"] = opt_json(r.sqrt_b);
  j["bound_neyman"] = opt_json(r.neyman_b);
  j["bound_z_beta"] = opt_json(r.z_b);
  j["construct_lb"] = opt_json(r.construct);
  j["pass"] = r.pass;
  return j;
}

std::optional<double> finite(const ExtendedReal& x) {
  if (x.is_infinite()) return std::numeric_limits<double>::infinity();
  return x.to_double();
}

int constructive_D(const Prior& p, BranchCap D) {
  if (D.bounded()) return D.value();
  if (p.has_tail() || p.theta() > 0.0) return 0;
  return std::max<int>(2, static_cast<int>(p.atoms().size()));
}

Row bound_row(const PriorSource& src, int N, const ExperimentConfig& cfg, std::optional<MartingaleTree>* witness) {
  const Prior& p = src.prior;
  Row r{src.id, N, cfg.D.to_string(), "", 0.0, std::nullopt, {}, {}, {}, {}, true};
  const int cd = constructive_D(p, cfg.D);
  if (cd >= 2) r.construct = constructive_profile(p, N, cd).back();
  MaxVarOptions opts;
  opts.grid = cfg.grid;
  opts.budget = cfg.budget;
  opts.build_witness = witness != nullptr;
  try {
    MaxVarResult res = exact_maxvar(p, N, cfg.D, opts);
    r.method = to_string(res.method);
    r.xi = res.value;
    r.gap = res.gap_bound;
    if (witness) *witness = std::move(res.witness);
  } catch (const InstanceTooLarge&) {
    if (!r.construct) throw;
    // Beyond the exact solvers only the constructive lower bound is known.
    r.method = to_string(MaxVarMethod::kConstructive);
    r.xi = *r.construct;
    if (witness && p.theta() == 0.0 && !p.has_tail()) *witness = partition_martingale(p, N, cd);
  }
  if (p.theta() == 0.0) {
    const ClassicalBounds cb = classical_bounds(p, N);
    r.sqrt_b = finite(cb.sqrt_bound);
    r.neyman_b = finite(cb.neyman_bound);
    r.z_b = finite(min_z_bound(p, N, cfg.betas));
  }
  constexpr double kTol = 1e-9;
  const double slack = r.gap ? *r.gap : 0.0;
  const double cap = 2.0 * N * cfg.D.continuous_factor();
  r.pass = r.xi <= cap + kTol;
  for (const auto& b : {r.sqrt_b, r.neyman_b, r.z_b})
    if (b) r.pass = r.pass && r.xi <= *b + kTol;
  if (r.construct) r.pass = r.pass && *r.construct <= r.xi + slack + kTol;
  return r;
}

std::string emit_rows(const std::vector<Row>& rows, OutputFormat f, const std::string& trailer_csv, const Json& extra) {
  if (f == OutputFormat::kJson) {
    Json j;
    j["schema"] = 1;
    Json arr = Json::array();
    for (const auto& r : rows) arr.push_back(json_row(r));
    j["rows"] = std::move(arr);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    return j.dump(2) + "\n";
  }
  std::string out = "#schema=1\n";
  out += kHeader;
  out += "\n";
  for (const auto& r : rows) out += csv_row(r) + "\n";
  out += trailer_csv;
  return out;
}

std::vector<int> n_values(const ExperimentConfig& cfg, std::vector<int> fallback) {
  if (!cfg.N_list.empty()) return cfg.N_list;
  if (cfg.N) return {*cfg.N};
  return fallback;
}

ExperimentOutput run_bounds(const ExperimentConfig& cfg, const PriorSource& src, bool single) {
  ExperimentOutput out;
  std::vector<Row> rows;
  const auto Ns = single ? std::vector<int>{cfg.N.value_or(1)} : n_values(cfg, {1, 2, 3, 4});
  std::optional<MartingaleTree> witness;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    const bool want = cfg.witness_out && i + 1 == Ns.size();
    rows.push_back(bound_row(src, Ns[i], cfg, want ? &witness : nullptr));
    out.all_pass = out.all_pass && rows.back().pass;
  }
  if (cfg.witness_out) {
    if (!witness) throw InvalidArgument("no witness martingale is available for this prior");
    write_atomically(*cfg.witness_out, tree_to_json(*witness).dump(1) + "\n");
  }
  out.text = emit_rows(rows, cfg.format, "", Json::object());
  return out;
}

ExperimentOutput run_growth(const ExperimentConfig& cfg, const PriorSource& src) {
  const int cd = constructive_D(src.prior, cfg.D);
  if (cd < 2) throw InvalidArgument("growth needs a bounded --d");
  std::vector<int> Ns = cfg.N_list;
  if (Ns.empty())
    for (int n = 4; n <= 1024; n *= 2) Ns.push_back(n);
  const GrowthEstimate g = growth_exponent(src.prior, cd, Ns);
  ExperimentOutput out;
  std::vector<Row> rows;
  for (std::size_t i = 0; i < Ns.size(); ++i)
    rows.push_back({src.id, Ns[i], cfg.D.to_string(), to_string(MaxVarMethod::kConstructive), g.xi[i], std::nullopt,
                    {}, {}, {}, g.xi[i], g.xi[i] > 0.0});
  out.all_pass = g.exponent > 0.0;
  std::string trailer = "#fit exponent=" + format_number(g.exponent) + " residual=" + format_number(g.residual) +
                        " alpha_threshold=" + (g.alpha ? format_number(*g.alpha) : std::string("none")) +
                        " pass=" + (out.all_pass ? "true" : "false") + "\n";
  Json extra;
  extra["fit"] = {{"exponent", g.exponent}, {"residual", g.residual}, {"alpha_threshold", opt_json(g.alpha)},
                  {"pass", out.all_pass}};
  out.text = emit_rows(rows, cfg.format, trailer, extra);
  return out;
}

ExperimentOutput run_certify(const ExperimentConfig& cfg, const PriorSource& src) {
  const int N = cfg.N.value_or(1);
  const Prior& p = src.prior;
  if (p.theta() != 0.0 || p.has_tail()) throw InvalidPrior("game certification needs a finite atomic prior");
  MaxVarOptions opts;
  opts.grid = cfg.grid;
  opts.budget = cfg.budget;
  const MaxVarResult xi = exact_maxvar(p, N, BranchCap(2), opts);
  const GameSpec spec = build_big_game(p, MZStagePair::standard(), N);
  const P1Strategy sigma = splitting_strategy(spec, *xi.witness);
  const BestResponse br = best_response_value(spec, sigma, cfg.budget);
  constexpr double kTol = 1e-6;
  const double lb = xi.value / 4.0;
  Json j;
  j["schema"] = 1;
  j["prior_id"] = src.id;
  j["prior"] = prior_to_json(p);
  j["N"] = N;
  j["xi"] = xi.value;
  j["xi_method"] = to_string(xi.method);
  j["xi_half_lb"] = lb;
  j["guaranteed"] = br.value;
  bool pass = br.value >= lb - kTol;
  if (p.atoms().size() <= 2) {
    const ExactValue ev = exact_value_small(spec);
    const double am = spec.stage.payoff_sup() * variation(induced_martingale(ev.sigma, p, N));
    j["value"] = ev.value;
    j["am_bound"] = am;
    pass = pass && ev.value >= lb - kTol && ev.value <= am + kTol && br.value <= ev.value + kTol;
  } else {
    j["value"] = nullptr;
    j["am_bound"] = nullptr;
  }
  j["pass"] = pass;
  ExperimentOutput out;
  out.all_pass = pass;
  out.text = j.dump(2) + "\n";
  return out;
}

ExperimentOutput run_nr_check(const ExperimentConfig& cfg) {
  const MZStagePair pair = MZStagePair::standard();
  ExperimentOutput out;
  Json rows = Json::array();
  std::string csv = "#schema=1\np,nr_value,pass\n";
  for (int i = 0; i <= 100; ++i) {
    const double p = i / 100.0;
    const double v = nr_value(pair, p);
    const bool ok = std::abs(v) < 1e-10;
    out.all_pass = out.all_pass && ok;
    csv += format_number(p) + "," + format_number(v) + "," + (ok ? "true" : "false") + "\n";
    rows.push_back({{"p", p}, {"nr_value", v}, {"pass", ok}});
  }
  if (cfg.format == OutputFormat::kJson) {
    Json j;
    j["schema"] = 1;
    j["rows"] = std::move(rows);
    out.text = j.dump(2) + "\n";
  } else {
    out.text = std::move(csv);
  }
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.command == Command::kNrCheck) return run_nr_check(cfg);
  const PriorSource src = parse_prior_source(cfg.prior);
  ExperimentOutput out;
  switch (cfg.command) {
    case Command::kMaxVar: out = run_bounds(cfg, src, true); break;
    case Command::kBounds: out = run_bounds(cfg, src, false); break;
    case Command::kGrowth: out = run_growth(cfg, src); break;
    case Command::kCertifyGame: out = run_certify(cfg, src); break;
    case Command::kNrCheck: break;
  }
  out.warnings.insert(out.warnings.begin(), src.warnings.begin(), src.warnings.end());
  return out;
}

}  // namespace mvlab
