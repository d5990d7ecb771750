#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mvlab/errors.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {
namespace {

constexpr double kSumTolerance = 1e-12;

std::vector<Atom> labelled(const std::vector<double>& weights) {
  std::vector<Atom> atoms;
  atoms.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) atoms.push_back({std::to_string(i), weights[i]});
  return atoms;
}

void require_discrete(const Prior& p, const char* what) {
  if (p.theta() != 0.0)
    throw InvalidPrior(std::string(what) + " needs a purely atomic prior; pass discrete_part()");
}

}  // namespace

Prior::Prior(double theta, std::vector<Atom> atoms, std::optional<TailSpec> tail)
    : theta_(theta), atoms_(std::move(atoms)), tail_(std::move(tail)) {
  if (!(theta_ >= 0.0 && theta_ <= 1.0)) throw InvalidPrior("theta must lie in [0,1]");
  std::set<std::string> labels;
  double sum = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw InvalidPrior("atom '" + a.label + "' has non-positive weight");
    if (!labels.insert(a.label).second) throw InvalidPrior("duplicate atom label '" + a.label + "'");
    sum += a.weight;
  }
  if (theta_ == 1.0) {
    if (!atoms_.empty() || tail_) throw InvalidPrior("theta = 1 leaves no mass for atoms");
    return;
  }
  if (tail_) {
    if (sum >= 1.0 - kSumTolerance) throw InvalidPrior("explicit atoms leave no mass for the tail");
    return;
  }
  if (atoms_.empty()) throw InvalidPrior("theta < 1 requires atoms");
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw InvalidPrior("atom weights sum to " + std::to_string(sum) + ", not 1");
}

Prior Prior::discrete(const std::vector<double>& weights) { return Prior(0.0, labelled(weights)); }

Prior Prior::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidPrior("Bernoulli parameter must lie in [0,1]");
  if (p == 0.0) return Prior(0.0, {{"0", 1.0}});
  if (p == 1.0) return Prior(0.0, {{"1", 1.0}});
  return Prior(0.0, {{"0", 1.0 - p}, {"1", p}});
}

Prior Prior::uniform(int m) {
  if (m < 1) throw InvalidPrior("uniform prior needs at least one atom");
  return discrete(std::vector<double>(m, 1.0 / m));
}

Prior Prior::point_mass() { return Prior(0.0, {{"0", 1.0}}); }

Prior Prior::continuous() { return Prior(1.0, {}); }

Prior Prior::mixed(double theta, const std::vector<double>& atom_weights) {
  return Prior(theta, labelled(atom_weights));
}

Prior Prior::from_tail(const TailSpec& tail) { return Prior(0.0, {}, tail); }

Eigen::VectorXd Prior::atom_weights() const {
  Eigen::VectorXd w(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) w(i) = atoms_[i].weight;
  return w;
}

double Prior::tail_mass() const {
  if (!tail_) return 0.0;
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight;
  return 1.0 - s;
}

std::size_t Prior::support_size() const {
  if (tail_) throw InvalidPrior("prior with a tail has infinite support");
  return atoms_.size();
}

Prior Prior::discrete_part() const {
  if (theta_ == 1.0) throw InvalidPrior("purely continuous prior has no atomic part");
  return Prior(0.0, atoms_, tail_);
}

Prior Prior::materialized(std::size_t tail_atoms) const {
  if (!tail_) return *this;
  const double scale = tail_mass();
  std::vector<Atom> atoms = atoms_;
  std::set<std::string> used;
  for (const auto& a : atoms) used.insert(a.label);
  double sum = 0.0;
  for (const auto& a : atoms) sum += a.weight;
  for (std::size_t l = 1; l <= tail_atoms; ++l) {
    const double m = scale * tail_->mass(l);
    if (m <= 0.0) break;
    std::string label = "t" + std::to_string(l);
    while (used.count(label)) label += "'";
    atoms.push_back({label, m});
    sum += m;
  }
  for (auto& a : atoms) a.weight /= sum;
  return Prior(theta_, std::move(atoms));
}

Prior Prior::materialized() const { return materialized(tail_ ? tail_->head_terms() : 0); }

ExtendedReal z_delta(const Prior& p, double delta) {
  if (!(delta <= 0.5)) throw InvalidDelta("delta must not exceed 1/2");
  require_discrete(p, "z_delta");
  const double e = 0.5 - delta;
  long double acc = 0.0L;
  for (const auto& a : p.atoms()) {
    if (a.weight >= 1.0) continue;
    acc += e == 0.0 ? a.weight : a.weight * std::pow(-std::log(a.weight), e);
  }
  if (!p.has_tail()) return static_cast<double>(acc);
  const ExtendedReal t = tails::log_moment(*p.tail(), p.tail_mass(), e);
  if (t.is_infinite()) return t;
  return static_cast<double>(acc) + t.to_double();
}

ExtendedReal shannon_entropy(const Prior& p) {
  require_discrete(p, "shannon_entropy");
  long double acc = 0.0L;
  for (const auto& a : p.atoms())
    if (a.weight < 1.0) acc -= a.weight * std::log(a.weight);
  if (!p.has_tail()) return static_cast<double>(acc);
  const ExtendedReal t = tails::log_moment(*p.tail(), p.tail_mass(), 1.0);
  if (t.is_infinite()) return t;
  return static_cast<double>(acc) + t.to_double();
}

ClassicalBounds classical_bounds(const Prior& p, int N) {
  if (N < 1) throw InvalidArgument("N must be positive");
  require_discrete(p, "classical_bounds");
  ClassicalBounds out;
  long double s = 0.0L;
  for (const auto& a : p.atoms()) s += std::sqrt(a.weight * (1.0 - a.weight));
  ExtendedReal sq = static_cast<double>(s);
  if (p.has_tail()) {
    const ExtendedReal t = tails::sqrt_sum(*p.tail(), p.tail_mass());
    sq = t.is_infinite() ? t : ExtendedReal(static_cast<double>(s) + t.to_double());
  }
  const double rootN = std::sqrt(static_cast<double>(N));
  out.sqrt_bound = rootN * sq;
  const ExtendedReal S = shannon_entropy(p);
  out.neyman_bound = S.is_infinite() ? S : ExtendedReal(std::sqrt(2.0 * N * S.to_double()));
  if (!p.has_tail() && p.atoms().size() == 2) {
    const double q = p.atoms()[1].weight;
    out.mz_asymptote = 2.0 * rootN * normal_pdf(normal_quantile(q));
  }
  return out;
}

ExtendedReal z_bound(const Prior& p, int N, double beta) {
  if (!(beta >= 0.0 && beta <= 0.5)) throw InvalidDelta("beta must lie in [0, 1/2]");
  if (N < 1) throw InvalidArgument("N must be positive");
  const ExtendedReal z = z_delta(p, beta);
  const double c = 2.0 * std::sqrt(6.0) * std::pow(static_cast<double>(N), 0.5 + beta);
  return c * z;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw InvalidArgument("quantile level must lie in [0,1]");
  }
  // Acklam's rational approximation followed by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace mvlab
