#include "ntkeig/specfun.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ntkeig {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::string to_string(Activation psi) {
  return psi == Activation::ReluDerivative ? "relu_derivative" : "scaled_relu";
}

double apply_activation(Activation psi, double z, int dim) {
  if (psi == Activation::ReluDerivative) return z > 0.0 ? 1.0 : 0.0;
  return std::sqrt(static_cast<double>(dim)) * (z > 0.0 ? z : 0.0);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
  return std::lgamma(x);
}

double gegenbauer(int r, double nu, double t) {
  if (r < 0) throw std::invalid_argument("gegenbauer: degree must be nonnegative");
  if (!(nu > 0.0)) throw std::invalid_argument("gegenbauer: order must be positive");
  if (r == 0) return 1.0;
  double prev = 1.0;
  double cur = 2.0 * nu * t;
  for (int k = 2; k <= r; ++k) {
    const double next = (2.0 * (k + nu - 1.0) * t * cur - (k + 2.0 * nu - 2.0) * prev) / k;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::int64_t binomial_checked(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t result = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    const __int128 wide = static_cast<__int128>(result) * (n - k + i);
    const __int128 exact = wide / i;  // division is exact at every step
    if (exact > std::numeric_limits<std::int64_t>::max())
      throw std::overflow_error("binomial_checked: result exceeds 64-bit range");
    result = static_cast<std::int64_t>(exact);
  }
  return result;
}

std::int64_t harmonic_dim(int r, int d) {
  if (r < 0) throw std::invalid_argument("harmonic_dim: degree must be nonnegative");
  if (d < 2) throw std::invalid_argument("harmonic_dim: dimension must be at least 2");
  return binomial_checked(static_cast<std::int64_t>(r) + d - 1, d - 1) -
         binomial_checked(static_cast<std::int64_t>(r) + d - 3, d - 1);
}

double addition_kernel(int r, int d, double t) {
  if (d < 3) throw std::domain_error("addition_kernel: requires d >= 3");
  return (2.0 * r + d - 2.0) * gegenbauer(r, 0.5 * (d - 2), t) / (d - 2.0);
}

double addition_tail_bound(int R, int beta, int d, double delta) {
  if (R < 0) throw std::invalid_argument("addition_tail_bound: R must be nonnegative");
  if (beta != 0 && beta != 1) throw std::invalid_argument("addition_tail_bound: beta must be 0 or 1");
  if (d < 3) throw std::domain_error("addition_tail_bound: requires d >= 3");
  if (!(delta > 0.0 && delta < std::numbers::sqrt2))
    throw std::domain_error("addition_tail_bound: delta must lie in (0, sqrt(2))");
  const std::int64_t binom = binomial_checked(2ll * R + beta + d - 1, d - 1);
  return std::pow(0.5 * delta * delta * delta * delta, -0.25 * (d - 2)) *
         std::sqrt(static_cast<double>(binom));
}

double funk_hecke_coeff(int r, int d, Activation psi) {
  if (r < 0) throw std::invalid_argument("funk_hecke_coeff: degree must be nonnegative");
  if (d < 3) throw std::domain_error("funk_hecke_coeff: requires d >= 3");

  if (psi == Activation::ReluDerivative) {
    // c_{r,d} = Gamma(d/2) / (2 Gamma(1 - r/2) Gamma((r+d)/2))
    if (r >= 2 && r % 2 == 0) return 0.0;  // pole of the reciprocal Gamma
    if (r == 0) return 0.5;
    // odd r = 2m+1: Gamma(1 - r/2) = (-1)^m pi / Gamma(m + 1/2)
    const int m = (r - 1) / 2;
    const double log_abs = log_gamma(0.5 * d) + log_gamma(m + 0.5) - std::log(2.0 * kPi) -
                           log_gamma(0.5 * (r + d));
    return (m % 2 == 0 ? 1.0 : -1.0) * std::exp(log_abs);
  }

  // c_{r,d} = sqrt(d) Gamma(d/2) / (4 Gamma((3-r)/2) Gamma((d+r+1)/2))
  if (r >= 3 && r % 2 == 1) return 0.0;  // pole of the reciprocal Gamma
  if (r == 1) return 0.5 / std::sqrt(static_cast<double>(d));
  if (r == 0) {
    const double log_abs = 0.5 * std::log(static_cast<double>(d)) + log_gamma(0.5 * d) -
                           std::log(4.0) - log_gamma(1.5) - log_gamma(0.5 * (d + 1));
    return std::exp(log_abs);
  }
  // even r = 2m, m >= 1: Gamma((3-r)/2) = (-1)^{m-1} pi / Gamma(m - 1/2)
  const int m = r / 2;
  const double log_abs = 0.5 * std::log(static_cast<double>(d)) + log_gamma(0.5 * d) +
                         log_gamma(m - 0.5) - std::log(4.0 * kPi) - log_gamma(0.5 * (d + r + 1));
  return (m % 2 == 1 ? 1.0 : -1.0) * std::exp(log_abs);
}

namespace {

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct FunkHeckeIntegrand {
  int r;
  int d;
  Activation psi;

  double operator()(double t) const {
    const double weight = std::pow(1.0 - t * t, 0.5 * (d - 3));
    const double poly = gegenbauer(r, 0.5 * (d - 2), t);
    const double act = (psi == Activation::ReluDerivative)
                           ? 1.0
                           : std::sqrt(static_cast<double>(d)) * t;
    return act * poly * weight;
  }
};

struct GaussKronrodResult {
  double integral;
  double error;
};

template <typename F>
GaussKronrodResult gauss_kronrod_15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double kronrod = kKronrodWeights[7] * f(center);
  double gauss = kGaussWeights[3] * f(center);
  for (int i = 0; i < 7; ++i) {
    const double offset = half * kKronrodNodes[i];
    const double sum = f(center - offset) + f(center + offset);
    kronrod += kKronrodWeights[i] * sum;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  const double diff = std::abs(kronrod - gauss);
  return {kronrod, std::pow(200.0 * diff, 1.5)};
}

template <typename F>
double adaptive_quadrature(const F& f, double a, double b, double tol, long& budget) {
  budget -= 15;
  if (budget < 0)
    throw std::runtime_error("funk_hecke_quadrature: evaluation budget exhausted before convergence");
  const GaussKronrodResult whole = gauss_kronrod_15(f, a, b);
  if (whole.error <= tol || (b - a) < 1e-14) return whole.integral;
  const double mid = 0.5 * (a + b);
  return adaptive_quadrature(f, a, mid, 0.5 * tol, budget) +
         adaptive_quadrature(f, mid, b, 0.5 * tol, budget);
}

}  // namespace

double funk_hecke_quadrature(int r, int d, Activation psi, double tol) {
  if (r < 0) throw std::invalid_argument("funk_hecke_quadrature: degree must be nonnegative");
  if (d < 3) throw std::domain_error("funk_hecke_quadrature: requires d >= 3");
  if (!(tol > 0.0)) throw std::invalid_argument("funk_hecke_quadrature: tol must be positive");

  // log of the Funk-Hecke prefactor Gamma(r+1) Gamma(d-2) Gamma(d/2) /
  // (sqrt(pi) Gamma(d-2+r) Gamma((d-1)/2))
  const double log_prefactor = log_gamma(r + 1.0) + log_gamma(d - 2.0) + log_gamma(0.5 * d) -
                               0.5 * std::log(kPi) - log_gamma(d - 2.0 + r) -
                               log_gamma(0.5 * (d - 1));
  const double prefactor = std::exp(log_prefactor);

  const FunkHeckeIntegrand integrand{r, d, psi};
  long budget = 1'000'000;
  const double integral = adaptive_quadrature(integrand, 0.0, 1.0, tol / prefactor, budget);
  return prefactor * integral;
}

SpectrumTable::SpectrumTable(int d, Activation psi, int r_max) : d_(d), psi_(psi) {
  if (d < 3) throw std::domain_error("SpectrumTable: requires d >= 3");
  if (r_max < 0) throw std::invalid_argument("SpectrumTable: r_max must be nonnegative");
  coeffs_.reserve(static_cast<std::size_t>(r_max) + 1);
  for (int r = 0; r <= r_max; ++r) coeffs_.push_back(funk_hecke_coeff(r, d, psi));
}

double SpectrumTable::coeff(int r) const {
  if (r < 0) throw std::invalid_argument("SpectrumTable::coeff: degree must be nonnegative");
  if (r <= max_degree()) return coeffs_[static_cast<std::size_t>(r)];
  return funk_hecke_coeff(r, d_, psi_);
}

void SpectrumTable::write_csv(std::ostream& out) const {
  out << "activation,d,r,c_rd\n";
  char buf[64];
  for (int r = 0; r <= max_degree(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", coeffs_[static_cast<std::size_t>(r)]);
    out << to_string(psi_) << ',' << d_ << ',' << r << ',' << buf << '\n';
  }
}

}  // namespace ntkeig
