#pragma once

#include <cstdint>
#include <iosfwd>

#include "ntkeig/linalg.hpp"
#include "ntkeig/specfun.hpp"
#include "ntkeig/sphere.hpp"

namespace ntkeig {

// Symmetric n x n kernel Gram matrix. Construction enforces symmetry
// within 1e-10 (max entrywise deviation).
class KernelMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-10;

  explicit KernelMatrix(Matrix entries);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double operator()(int i, int k) const { return entries_(i, k); }

  Vector eigenvalues() const { return jacobi_eigenvalues(entries_); }
  bool is_psd(double tol = 1e-10) const;

 private:
  Matrix entries_;
};

// Smallest-eigenvalue report; values below kClampThreshold are clamped to 0
// with the flag set (limiting kernels of near-duplicate points are
// numerically singular).
struct EigReport {
  static constexpr double kClampThreshold = 1e-12;
  double lambda_min;
  bool clamped;
};

EigReport min_eigenvalue_report(const KernelMatrix& kernel);

// mu = sum_i z_i delta_{x_i}: a signed measure supported on the dataset.
struct DiscreteMeasure {
  Dataset data;
  Vector weights;

  DiscreteMeasure(Dataset data_in, Vector weights_in);
};

// Entry of the limiting kernel K_psi^inf as a function of t = <x, x'>,
// theta = arccos(t):
//   relu'        : (pi - theta) / (2 pi)
//   sqrt(d) relu : (sin(theta) + (pi - theta) cos(theta)) / (2 pi)
// The closed forms are validated against limiting_kernel_mc in the tests
// rather than trusted a priori. Inputs are clamped to [-1, 1].
double limiting_kernel_entry(Activation psi, double t);

// Entrywise application of limiting_kernel_entry to the data Gram matrix.
// ScaledRelu entries already include the factor d from psi = sqrt(d) relu.
KernelMatrix limiting_kernel_matrix(Activation psi, const Dataset& data);

struct MonteCarloKernel {
  KernelMatrix kernel;
  Matrix standard_error;  // per-entry standard error of the mean
  std::int64_t samples;
};

// Direct Monte Carlo of E_u[psi(X^T u) psi(u^T X)] over uniform directions;
// deterministic per seed. Fixed-size shards carry derived seeds and are
// combined by shard index with pairwise summation, so the result is
// bit-identical for every thread count.
MonteCarloKernel limiting_kernel_mc(Activation psi, const Dataset& data, std::int64_t samples,
                                    std::uint64_t seed, int threads = 1);

// Truncated Mercer/Gegenbauer reconstruction
//   sum_{r=0}^{R} c_{r,d}^2 G_{r,d}(t).
double mercer_series_entry(Activation psi, int d, double t, int R);

// <K_psi^inf z, z> = |T_psi mu_z|^2 via the closed-form kernel matrix.
double hemisphere_norm_sq(Activation psi, const DiscreteMeasure& mu);

// Gram matrix D^T D of the degree-(2r+beta, r <= R) spherical-harmonic
// evaluation matrix, assembled through the addition formula (no explicit
// harmonic basis). Diagonal entries equal N = sum_r dim(H_{2r+beta}^d).
struct HarmonicGram {
  int R;
  int beta;
  std::int64_t N;
  Matrix gram;
};

HarmonicGram harmonic_gram(const Dataset& data, int R, int beta);

// sqrt of the smallest eigenvalue of the harmonic Gram, clamped below at 0.
double harmonic_min_sv(const HarmonicGram& hg);

// Serialization: CSV is row-major entries; JSON is {"n":..., "entries":[[...]]};
// eigenvalue reports emit {"lambda_min":..., "clamped": bool}.
void write_kernel_csv(const KernelMatrix& kernel, std::ostream& out);
void write_kernel_json(const KernelMatrix& kernel, std::ostream& out);
KernelMatrix read_kernel_json(std::istream& in);
void write_eig_report_json(const EigReport& report, std::ostream& out);

}  // namespace ntkeig
