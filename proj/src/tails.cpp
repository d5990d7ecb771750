#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>

#include "mvlab/errors.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {
namespace {

constexpr double kLn2 = 0.69314718055994530942;

// Integral over y in [0, inf) of h(y) for an integrand decaying at least like
// exp(-rate * y). Composite Simpson up to a cutoff, then the exponential
// remainder h(Y) / rate.
double integrate_exp_decay(const std::function<double(double)>& h, double rate) {
  const double Y = std::min(60.0 / rate, 600.0);
  const int n = 20000;
  const double step = Y / n;
  long double acc = h(0.0) + h(Y);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0L : 2.0L) * h(i * step);
  return static_cast<double>(acc * step / 3.0L) + h(Y) / rate;
}

// m (ln 1/m)^e with the convention that a unit (or larger) mass contributes 0.
double log_term(double m, double e) {
  if (m <= 0.0 || m >= 1.0) return 0.0;
  const double l = -std::log(m);
  return e == 0.0 ? m : m * std::pow(l, e);
}

// Sum over l >= 1 of m_l (ln 1/m_l)^e with m_l = scale / (Z l (ln(l+2))^c),
// exact up to kPartialSumTerms, integral remainder beyond.
double power_log_sum(double c, double Z, double scale, double e) {
  const std::uint64_t L = tails::kPartialSumTerms;
  long double acc = 0.0L;
  for (std::uint64_t l = 1; l <= L; ++l) {
    const double x = static_cast<double>(l);
    acc += log_term(scale / (Z * x * std::pow(std::log(x + 2.0), c)), e);
  }
  // Remainder: x = exp(u), u = U exp(y); integrand in y is
  // u * x * m(x) * (ln 1/m(x))^e with x * m(x) = scale / (Z (ln(x+2))^c).
  const double U = std::log(static_cast<double>(L) + 0.5);
  const double log_scale = std::log(scale);
  const double log_Z = std::log(Z);
  auto h = [&](double y) {
    const double u = U * std::exp(y);
    const double ln_x2 = u + std::log1p(2.0 * std::exp(-u));
    const double xm = std::exp(log_scale - log_Z - c * std::log(ln_x2));
    const double neg_log_m = -log_scale + log_Z + u + c * std::log(ln_x2);
    return u * xm * (e == 0.0 ? 1.0 : std::pow(neg_log_m, e));
  };
  return static_cast<double>(acc) + integrate_exp_decay(h, c - 1.0 - e);
}

// Dyadic blocks: block j has 2^j atoms of mass scale * M_j / 2^j each.
double dyadic_sum(const TailSpec& t, double scale, double e) {
  const double c = t.parameter();
  const std::uint64_t J = tails::kPartialSumTerms;
  const double log_scale = std::log(scale);
  auto block_value = [&](double j) {
    const double Mj = std::pow(j + 1.0, 1.0 - c) * -std::expm1((1.0 - c) * std::log1p(1.0 / (j + 1.0)));
    const double neg_log_w = -log_scale - std::log(Mj) + j * kLn2;
    if (neg_log_w <= 0.0) return 0.0;
    return scale * Mj * (e == 0.0 ? 1.0 : std::pow(neg_log_w, e));
  };
  long double acc = 0.0L;
  for (std::uint64_t j = 0; j < J; ++j) acc += block_value(static_cast<double>(j));
  const double x0 = static_cast<double>(J) - 0.5;
  auto h = [&](double y) {
    const double j = x0 * std::exp(y);
    return j * block_value(j);
  };
  return static_cast<double>(acc) + integrate_exp_decay(h, c - 1.0 - e);
}

}  // namespace

std::string to_string(TailFamily family) {
  switch (family) {
    case TailFamily::kGeometric: return "geometric";
    case TailFamily::kPowerLog: return "power-log";
    case TailFamily::kDyadicPowerLog: return "dyadic-power-log";
  }
  return "unknown";
}

TailFamily tail_family_from_string(const std::string& name) {
  if (name == "geometric") return TailFamily::kGeometric;
  if (name == "power-log") return TailFamily::kPowerLog;
  if (name == "dyadic-power-log") return TailFamily::kDyadicPowerLog;
  throw UnsupportedFamily("unknown tail family '" + name + "'");
}

TailSpec::TailSpec(TailFamily f, double p, std::size_t head)
    : family_(f), parameter_(p), head_terms_(head) {}

TailSpec TailSpec::geometric(double ratio, std::size_t head_terms) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidPrior("geometric ratio must lie in (0,1)");
  return TailSpec(TailFamily::kGeometric, ratio, head_terms);
}

TailSpec TailSpec::power_log(double c, std::size_t head_terms) {
  if (!(c > 1.0)) throw InvalidPrior("power-log exponent must exceed 1");
  TailSpec t(TailFamily::kPowerLog, c, head_terms);
  t.normalizer_ = power_log_sum(c, 1.0, 1.0, 0.0);
  return t;
}

TailSpec TailSpec::dyadic_power_log(double c, std::size_t head_terms) {
  if (!(c > 1.0)) throw InvalidPrior("dyadic-power-log exponent must exceed 1");
  return TailSpec(TailFamily::kDyadicPowerLog, c, head_terms);
}

double TailSpec::block_mass(std::uint64_t j) const {
  const double c = parameter_;
  const double a = static_cast<double>(j) + 1.0;
  return std::pow(a, 1.0 - c) * -std::expm1((1.0 - c) * std::log1p(1.0 / a));
}

double TailSpec::blocks_from(std::uint64_t j) const {
  return std::pow(static_cast<double>(j) + 1.0, 1.0 - parameter_);
}

double TailSpec::mass(std::uint64_t l) const {
  if (l == 0) throw InvalidArgument("tail atoms are indexed from 1");
  const double x = static_cast<double>(l);
  switch (family_) {
    case TailFamily::kGeometric:
      return (1.0 - parameter_) * std::pow(parameter_, x - 1.0);
    case TailFamily::kPowerLog:
      return 1.0 / (normalizer_ * x * std::pow(std::log(x + 2.0), parameter_));
    case TailFamily::kDyadicPowerLog: {
      const std::uint64_t j = static_cast<std::uint64_t>(std::bit_width(l) - 1);
      return std::ldexp(block_mass(j), -static_cast<int>(j));
    }
  }
  return 0.0;
}

double TailSpec::log_mass_at_log_index(double log_l) const {
  switch (family_) {
    case TailFamily::kGeometric:
      return std::log1p(-parameter_) + (std::exp(log_l) - 1.0) * std::log(parameter_);
    case TailFamily::kPowerLog: {
      const double ln_x2 = log_l + std::log1p(2.0 * std::exp(-log_l));
      return -std::log(normalizer_) - log_l - parameter_ * std::log(ln_x2);
    }
    case TailFamily::kDyadicPowerLog: {
      const double j = std::floor(log_l / kLn2);
      const double Mj = std::pow(j + 1.0, 1.0 - parameter_) *
                        -std::expm1((1.0 - parameter_) * std::log1p(1.0 / (j + 1.0)));
      return std::log(Mj) - j * kLn2;
    }
  }
  return 0.0;
}

namespace tails {

bool log_moment_converges(const TailSpec& tail, double exponent) {
  if (tail.family() == TailFamily::kGeometric) return true;
  return tail.parameter() - exponent > 1.0;
}

ExtendedReal log_moment(const TailSpec& tail, double scale, double exponent) {
  if (scale <= 0.0) return 0.0;
  if (!log_moment_converges(tail, exponent)) return ExtendedReal::infinity();
  switch (tail.family()) {
    case TailFamily::kGeometric: {
      const double r = tail.parameter();
      long double acc = 0.0L;
      double m = scale * (1.0 - r);
      std::uint64_t l = 1;
      for (; l <= kPartialSumTerms && m > 0.0; ++l, m *= r) {
        const double t = log_term(m, exponent);
        acc += t;
        if (t < 1e-20 * static_cast<double>(acc) && m < 1e-3) break;
      }
      return static_cast<double>(acc);
    }
    case TailFamily::kPowerLog:
      return power_log_sum(tail.parameter(), tail.normalizer(), scale, exponent);
    case TailFamily::kDyadicPowerLog:
      return dyadic_sum(tail, scale, exponent);
  }
  return ExtendedReal::infinity();
}

ExtendedReal sqrt_sum(const TailSpec& tail, double scale) {
  if (scale <= 0.0) return 0.0;
  if (tail.family() != TailFamily::kGeometric) return ExtendedReal::infinity();
  const double r = tail.parameter();
  long double acc = 0.0L;
  double m = scale * (1.0 - r);
  for (std::uint64_t l = 1; l <= kPartialSumTerms && m > 0.0; ++l, m *= r) {
    const double t = std::sqrt(m * (1.0 - m));
    acc += t;
    if (t < 1e-20 * static_cast<double>(acc)) break;
  }
  return static_cast<double>(acc);
}

}  // namespace tails

double alpha_threshold(const TailSpec& tail) {
  switch (tail.family()) {
    case TailFamily::kGeometric: return 0.0;
    case TailFamily::kPowerLog:
    case TailFamily::kDyadicPowerLog:
      // terms behave like 1 / (l (ln l)^(c - 1/2 + delta)): finite iff delta > 3/2 - c
      return std::clamp(1.5 - tail.parameter(), 0.0, 0.5);
  }
  throw UnsupportedFamily("tail family outside the catalog");
}

double alpha_threshold(const std::string& family, double parameter) {
  switch (tail_family_from_string(family)) {
    case TailFamily::kGeometric: return alpha_threshold(TailSpec::geometric(parameter, 0));
    case TailFamily::kPowerLog:
    case TailFamily::kDyadicPowerLog:
      if (!(parameter > 1.0)) throw InvalidPrior("power-log exponent must exceed 1");
      return std::clamp(1.5 - parameter, 0.0, 0.5);
  }
  throw UnsupportedFamily(family);
}

}  // namespace mvlab
