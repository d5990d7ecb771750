// mvlab: bound tables, growth scans and game certification from the shell.
//
//   mvlab bounds --prior bernoulli:0.5 --n-list 1,2,3,4 --d 2
//   mvlab maxvar --prior '{"theta":1}' --n 7 --d 3
//   mvlab nr-check --out nr.csv

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvlab/errors.hpp"
#include "mvlab/experiment.hpp"

namespace {

int fail(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  return 2;
}

mvlab::BranchCap parse_cap(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "unbounded") return mvlab::BranchCap::unbounded();
  std::size_t used = 0;
  int d = 0;
  try {
    d = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || d < 2) throw mvlab::InvalidArgument("--d must be an integer >= 2 or 'inf'");
  return mvlab::BranchCap(d);
}

std::uint64_t budget_from_env() {
  const char* env = std::getenv("MAXVAR_BUDGET");
  if (!env || !*env) return mvlab::kDefaultBudget;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || v == 0) throw mvlab::InvalidArgument("MAXVAR_BUDGET must be a positive integer");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximal variation of measure-valued martingales and the associated repeated games"};
  std::string command, prior = "bernoulli:0.5", d_text = "2", format = "csv", out, witness;
  std::optional<int> n;
  std::vector<int> n_list;
  std::vector<double> betas;
  int grid = 1024;
  std::uint64_t seed = 1;

  app.add_option("command", command, "maxvar | bounds | growth | certify-game | nr-check")->required();
  app.add_option("--prior", prior, "prior file, inline JSON, or catalog name (e.g. bernoulli:0.25)");
  app.add_option("--n", n, "horizon N");
  app.add_option("--n-list", n_list, "comma-separated horizons")->delimiter(',');
  app.add_option("--d", d_text, "branching cap D (integer >= 2 or inf)");
  app.add_option("--beta", betas, "comma-separated beta grid for the Z bound")->delimiter(',');
  app.add_option("--grid", grid, "grid resolution of the two-atom solver");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", out, "output file (stdout when absent)");
  app.add_option("--witness", witness, "write the extremal martingale of the last row as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("InvalidArgument", e.what());
  }

  try {
    mvlab::ExperimentConfig cfg;
    cfg.command = mvlab::command_from_string(command);
    cfg.prior = prior;
    cfg.N = n;
    cfg.N_list = n_list;
    cfg.D = parse_cap(d_text);
    if (!betas.empty()) cfg.betas = betas;
    cfg.grid = grid;
    cfg.seed = seed;
    cfg.budget = budget_from_env();
    cfg.format = format == "json" ? mvlab::OutputFormat::kJson : mvlab::OutputFormat::kCsv;
    if (!witness.empty()) cfg.witness_out = witness;

    const mvlab::ExperimentOutput result = mvlab::run_experiment(cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (out.empty()) std::cout << result.text;
    else mvlab::write_atomically(out, result.text);
    return result.all_pass ? 0 : 1;
  } catch (const mvlab::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
}
