#pragma once

// Priors of the form theta * (non-atomic mass) + (1 - theta) * (atoms), and
// the uncertainty functionals built on their atomic part.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvlab/extended_real.hpp"

namespace mvlab {

/// Parametric families used for countably infinite atomic parts.
enum class TailFamily {
  kGeometric,       ///< rho(l) = (1 - r) r^(l-1), l >= 1
  kPowerLog,        ///< rho(l) proportional to 1 / (l (ln(l + 2))^c), c > 1
  kDyadicPowerLog,  ///< block j holds 2^j equal atoms of total ((j+1)^(1-c) - (j+2)^(1-c))
};

std::string to_string(TailFamily family);
TailFamily tail_family_from_string(const std::string& name);  // UnsupportedFamily

/// An analytic description of infinitely many atoms, indexed l = 1, 2, ...
/// in order of nonincreasing mass. Family masses sum to one; a Prior scales
/// them by whatever mass its explicit atoms leave over.
class TailSpec {
 public:
  static TailSpec geometric(double ratio, std::size_t head_terms = 1000);
  static TailSpec power_log(double c, std::size_t head_terms = 1000);
  static TailSpec dyadic_power_log(double c, std::size_t head_terms = 1000);

  TailFamily family() const { return family_; }
  double parameter() const { return parameter_; }
  /// Number of tail atoms materialized when a finite view is required.
  std::size_t head_terms() const { return head_terms_; }

  /// Family mass of atom l (1-based).
  double mass(std::uint64_t l) const;
  /// Natural log of the family mass as a function of ln(l), valid for huge l.
  double log_mass_at_log_index(double log_l) const;

  /// Normalizing constant of the power-log family (1 for the others).
  double normalizer() const { return normalizer_; }

  /// Dyadic family only: total mass of block j and of all blocks >= j.
  double block_mass(std::uint64_t j) const;
  double blocks_from(std::uint64_t j) const;

 private:
  TailSpec(TailFamily f, double p, std::size_t head);
  TailFamily family_;
  double parameter_;
  std::size_t head_terms_;
  double normalizer_ = 1.0;
};

struct Atom {
  std::string label;
  double weight;
};

/// rho = theta * rho_c + (1 - theta) * rho_d. The atomic part rho_d consists
/// of the explicit atoms plus, optionally, a parametric tail carrying the
/// mass the explicit atoms leave over.
class Prior {
 public:
  /// Validates every invariant; throws InvalidPrior.
  Prior(double theta, std::vector<Atom> atoms, std::optional<TailSpec> tail = std::nullopt);

  static Prior discrete(const std::vector<double>& weights);
  static Prior bernoulli(double p);  ///< atoms "0" (1 - p) and "1" (p)
  static Prior uniform(int m);
  static Prior point_mass();
  static Prior continuous();  ///< theta = 1
  static Prior mixed(double theta, const std::vector<double>& atom_weights);
  static Prior from_tail(const TailSpec& tail);

  double theta() const { return theta_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<TailSpec>& tail() const { return tail_; }
  bool has_tail() const { return tail_.has_value(); }
  bool is_discrete() const { return theta_ == 0.0; }

  /// Explicit atom weights inside rho_d.
  Eigen::VectorXd atom_weights() const;
  /// Mass of rho_d carried by the tail (0 when there is none).
  double tail_mass() const;
  /// Number of atoms; throws InvalidPrior when a tail makes it infinite.
  std::size_t support_size() const;

  /// rho_d as a purely atomic prior.
  Prior discrete_part() const;
  /// Finite prior: explicit atoms plus the first `tail_atoms` tail atoms,
  /// renormalized. Identity for priors without a tail.
  Prior materialized(std::size_t tail_atoms) const;
  Prior materialized() const;

  /// Absolute mass rho({atom i}) = (1 - theta) * weight_i.
  double absolute_atom_mass(std::size_t i) const { return (1.0 - theta_) * atoms_[i].weight; }

 private:
  double theta_;
  std::vector<Atom> atoms_;
  std::optional<TailSpec> tail_;
};

/// Z_delta(rho_d) = sum_l rho(l) [ln(1/rho(l))]^(1/2 - delta), delta <= 1/2.
/// Requires theta = 0 (pass discrete_part() otherwise). A full-mass atom
/// contributes 0. Divergent tails return ExtendedReal::infinity().
ExtendedReal z_delta(const Prior& p, double delta);

/// Shannon entropy with natural log; requires theta = 0.
ExtendedReal shannon_entropy(const Prior& p);

struct ClassicalBounds {
  ExtendedReal sqrt_bound;              ///< sqrt(N) sum_l sqrt(rho_l (1 - rho_l))
  ExtendedReal neyman_bound;            ///< sqrt(2 N S(rho))
  std::optional<double> mz_asymptote;   ///< 2 sqrt(N) phi(x_p), two-atom priors only
};

ClassicalBounds classical_bounds(const Prior& p, int N);

/// 2 sqrt(6) N^(1/2 + beta) Z_beta(rho_d), beta in [0, 1/2].
ExtendedReal z_bound(const Prior& p, int N, double beta);

/// inf { delta in [0, 1/2] : Z_delta < infinity } for a catalog tail.
double alpha_threshold(const TailSpec& tail);
/// Same, addressed by family name; UnsupportedFamily outside the catalog.
double alpha_threshold(const std::string& family, double parameter);

/// Standard normal density and quantile (used by the two-atom asymptote).
double normal_pdf(double x);
double normal_quantile(double p);

// Tail series, exposed for the functionals above and for tests.
namespace tails {
/// sum over tail atoms of m (ln 1/m)^e where m = scale * family mass.
ExtendedReal log_moment(const TailSpec& tail, double scale, double exponent);
/// sum over tail atoms of sqrt(m (1 - m)).
ExtendedReal sqrt_sum(const TailSpec& tail, double scale);
/// Whether sum m (ln 1/m)^e converges for the family (analytic integral test).
bool log_moment_converges(const TailSpec& tail, double exponent);
/// Explicit terms summed before the analytic remainder takes over.
inline constexpr std::uint64_t kPartialSumTerms = 10'000'000;
}  // namespace tails

}  // namespace mvlab
