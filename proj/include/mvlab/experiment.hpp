#pragma once

// Experiment runner shared by the command-line tool and the tests: each
// command turns a validated configuration into CSV or JSON text.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvlab/martingale.hpp"
#include "mvlab/maxvar.hpp"

namespace mvlab {

enum class Command { kMaxVar, kBounds, kGrowth, kCertifyGame, kNrCheck };
Command command_from_string(const std::string& name);
std::string to_string(Command c);

enum class OutputFormat { kCsv, kJson };

struct ExperimentConfig {
  Command command = Command::kMaxVar;
  std::string prior = "bernoulli:0.5";
  std::optional<int> N;
  std::vector<int> N_list;
  BranchCap D = BranchCap(2);
  std::vector<double> betas = default_beta_grid();
  int grid = 1024;
  std::uint64_t seed = 1;
  std::uint64_t budget = kDefaultBudget;
  OutputFormat format = OutputFormat::kCsv;
  /// Optional path for the witness martingale of a maxvar run.
  std::optional<std::string> witness_out;
};

/// InvalidArgument when a field violates the owning operation's preconditions.
void validate_config(const ExperimentConfig& cfg);

struct ExperimentOutput {
  std::string text;
  std::vector<std::string> warnings;
  bool all_pass = true;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Shortest round-trip text is not byte-stable across platforms; results use
/// a fixed 17 significant digits instead.
std::string format_number(double x);

/// Writes through a temporary file in the same directory, then renames.
void write_atomically(const std::string& path, const std::string& contents);

}  // namespace mvlab
