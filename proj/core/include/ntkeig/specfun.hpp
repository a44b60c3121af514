#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ntkeig {

// The two activations the spectral theory covers: psi = relu'(z) (0/1 step
// with relu'(0) = 0) and psi = sqrt(d) * relu(z).
enum class Activation { ReluDerivative, ScaledRelu };

std::string to_string(Activation psi);
double apply_activation(Activation psi, double z, int dim);

// log Gamma(x) for x > 0. Thin wrapper over std::lgamma with the domain
// check the call sites rely on.
double log_gamma(double x);

// Gegenbauer polynomial C_r^nu(t) by the three-term recurrence
//   r C_r = 2 (r + nu - 1) t C_{r-1} - (r + 2 nu - 2) C_{r-2}.
double gegenbauer(int r, double nu, double t);

// dim(H_r^d) = binom(r+d-1, d-1) - binom(r+d-3, d-1), exact in 64 bits.
// Throws std::overflow_error when the binomials leave the int64 range.
std::int64_t harmonic_dim(int r, int d);

// Exact binomial coefficient with overflow detection; negative n yields 0.
std::int64_t binomial_checked(std::int64_t n, std::int64_t k);

// Degree-r addition-formula kernel G_{r,d}(t) = (2r+d-2) C_r^{(d-2)/2}(t) / (d-2),
// equal to sum_s Y_{r,s}(x) Y_{r,s}(x') whenever <x,x'> = t. Requires d >= 3.
double addition_kernel(int r, int d, double t);

// Truncated-sum magnitude bound (delta^4/2)^{-(d-2)/4} * binom(2R+beta+d-1, d-1)^{1/2}
// with implied constant 1. Requires delta in (0, sqrt(2)), d >= 3.
double addition_tail_bound(int R, int beta, int d, double delta);

// Closed-form Funk-Hecke eigenvalue of the hemisphere transform T_psi on
// H_r^d. Reciprocal-Gamma poles are detected by the parity of r and mapped
// to an exact 0; everything else is evaluated as exp of log-Gamma sums with
// explicit sign bookkeeping. Requires d >= 3.
double funk_hecke_coeff(int r, int d, Activation psi);

// Independent quadrature oracle for funk_hecke_coeff: adaptive Gauss-Kronrod
// evaluation of the Funk-Hecke integral over [0, 1] (the integrand vanishes
// on [-1, 0] for both psi). Absolute error <= tol or a convergence failure
// is thrown once the evaluation budget is exhausted.
double funk_hecke_quadrature(int r, int d, Activation psi, double tol);

// Table of Funk-Hecke coefficients c_{r,d} for 0 <= r <= r_max; immutable
// once built, coefficients beyond r_max are computed on demand.
class SpectrumTable {
 public:
  static constexpr int kDefaultMaxDegree = 64;

  SpectrumTable(int d, Activation psi, int r_max = kDefaultMaxDegree);

  int dim() const { return d_; }
  Activation activation() const { return psi_; }
  int max_degree() const { return static_cast<int>(coeffs_.size()) - 1; }

  double coeff(int r) const;

  // CSV with columns (activation, d, r, c_rd).
  void write_csv(std::ostream& out) const;

 private:
  int d_;
  Activation psi_;
  std::vector<double> coeffs_;
};

}  // namespace ntkeig
