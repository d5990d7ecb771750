#pragma once

// Maximal variation xi_N^D: lattice and grid solvers, the partition
// martingale lower bound, and checks of the two-sided estimates.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvlab/martingale.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {

enum class MaxVarMethod { kExhaustive, kGridDp, kConstructive };
std::string to_string(MaxVarMethod m);

/// Work-unit cap (candidate splits evaluated) used when none is given.
inline constexpr std::uint64_t kDefaultBudget = 2'000'000'000ULL;

struct MaxVarOptions {
  /// Forces a method; chosen from the prior's shape when absent.
  std::optional<MaxVarMethod> method;
  /// Grid resolution for the scalar (two-atom) solvers.
  int grid = 1024;
  /// Simplex-lattice resolution for 3- and 4-atom priors (0: automatic).
  int lattice = 0;
  /// Likelihood-lattice resolution of the first split for mixed priors.
  int mixed_lattice = 16;
  bool build_witness = true;
  /// Also solve at half the grid resolution and record the change.
  bool refinement_check = false;
  std::uint64_t budget = kDefaultBudget;
};

struct MaxVarResult {
  double value = 0.0;
  std::optional<MartingaleTree> witness;
  MaxVarMethod method = MaxVarMethod::kExhaustive;
  /// Certified distance from value to xi (0 for exhaustive: exact over the
  /// searched lattice class).
  double gap_bound = 0.0;
  /// Resolution actually searched (grid or lattice), 0 when not applicable.
  int resolution = 0;
  std::optional<double> coarse_value;  ///< value at half resolution
  std::optional<bool> refinement_ok;   ///< |value - coarse_value| < 2 gap_bound
};

/// Dispatches on the prior: theta = 1 uses the partition martingale (exact,
/// bounded D only); two atoms use grid-dp; three or four atoms the simplex
/// lattice; mixed priors the dyadic-cell enumeration (N <= 2).
MaxVarResult exact_maxvar(const Prior& p, int N, BranchCap D, const MaxVarOptions& opts = {});

/// Concave-envelope dynamic program on the grid {i / grid} for a two-atom
/// prior with scalar posterior x = mass of the second atom.
MaxVarResult grid_dp_maxvar(double x, int N, int grid, bool build_witness = true);

/// Brute-force enumeration of all splits among points of the simplex
/// lattice with resolution m (plus the root), for 2 to 4 atoms.
MaxVarResult lattice_maxvar(const Eigen::VectorXd& weights, int N, BranchCap D, int m,
                            bool build_witness = true, std::uint64_t budget = kDefaultBudget);

/// Exhaustive search over splits of atoms and dyadic continuous cells for
/// 0 < theta < 1: N = 1 with any bounded D, N = 2 with D = 2.
MaxVarResult mixed_maxvar(const Prior& p, int N, BranchCap D, int likelihood_lattice = 16,
                          bool build_witness = true, std::uint64_t budget = kDefaultBudget);

/// Estimated work for lattice_maxvar, used to pick a resolution.
std::uint64_t lattice_cost(int atoms, int m, int N, BranchCap D);

struct PartitionPlan {
  std::vector<std::vector<std::int64_t>> bins;  ///< atom indices per bin
  std::vector<double> masses;
  double imbalance = 0.0;  ///< max_d |mass_d - 1/D|
};

/// Longest-first greedy: atoms by descending mass (index breaks ties), each
/// into the currently lightest bin (lowest index among near-ties).
PartitionPlan greedy_partition(const CellMeasure& m, int D);

/// The D-ary conditioning martingale: continuous mass is cut into D equal
/// cells per step, atoms are split by greedy_partition. Depth N + 1.
MartingaleTree partition_martingale(const Prior& p, int N, int D);

/// Variations V_1..V_{N_max} of the partition martingale without building
/// the tree. Tails: the dyadic family with D = 2 is evaluated exactly by a
/// block recursion; other tails are materialized to head_terms atoms.
std::vector<double> constructive_profile(const Prior& p, int N_max, int D);

/// Explicit-tree counterpart of the block recursion for a finite dyadic
/// prior (blocks 0..J-1): equal-mass groups are halved, leftovers placed
/// greedily. Used as the oracle for constructive_profile.
MartingaleTree blocked_partition_martingale(const Prior& finite_blocked, int N);

/// Finite dyadic prior with blocks 0..J-1 of the given family, renormalized.
/// Atom labels are "b<j>.<i>", block by block.
Prior dyadic_blocks_prior(double c, int J);

/// The block recursion behind constructive_profile for the dyadic family with
/// D = 2: all blocks when J is absent, blocks 0..J-1 (renormalized) otherwise.
std::vector<double> dyadic_block_profile(double c, std::optional<int> J, int N_max);

struct TheoremBoundReport {
  double xi = 0.0;  ///< xi_N^D(rho)
  MaxVarMethod xi_method = MaxVarMethod::kExhaustive;
  double xi_gap = 0.0;
  std::optional<double> xi_continuous;  ///< xi_N^D(rho_c), when theta > 0
  std::optional<double> xi_discrete;    ///< xi_N^D(rho_d), when theta < 1
  std::optional<double> xi_discrete_plus;
  std::optional<double> xi_bernoulli_theta;
  double lower_composite = 0.0;  ///< theta xi(rho_c) + (1 - theta) xi(rho_d)
  double upper_composite = 0.0;  ///< theta xi(rho_c) + xi(rho_d^+) + xi(Bernoulli(theta))
  double upper_gap = 0.0;        ///< summed gap bounds of the upper composite terms
  double beta = 0.0;
  ExtendedReal z_bound = 0.0;    ///< z-bound for rho_d at beta
  bool pass_lower = false;
  bool pass_upper = false;
  bool pass_z = false;
  bool pass() const { return pass_lower && pass_upper && pass_z; }
};

TheoremBoundReport check_theorem_bounds(const Prior& p, int N, BranchCap D, double beta,
                                        const MaxVarOptions& opts = {});

/// min over the beta grid of z_bound.
ExtendedReal min_z_bound(const Prior& p, int N, const std::vector<double>& betas);
/// {0, 0.05, ..., 0.5}.
std::vector<double> default_beta_grid();

struct GrowthEstimate {
  double exponent = 0.0;  ///< regression slope of ln xi against ln N, minus 1/2
  double residual = 0.0;  ///< root-mean-square residual of the fit
  std::vector<int> N;
  std::vector<double> xi;
  std::optional<double> alpha;  ///< alpha_threshold when the prior has a catalog tail
};

/// Fit over the constructive lower-bound sequence. DegenerateRegression when
/// all values coincide or any is non-positive.
GrowthEstimate growth_exponent(const Prior& p, int D, const std::vector<int>& N_list);

/// Least-squares slope and RMS residual of ln y against ln x.
std::pair<double, double> log_log_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mvlab
