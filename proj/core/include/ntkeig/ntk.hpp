#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntkeig/kernel_limit.hpp"
#include "ntkeig/linalg.hpp"
#include "ntkeig/sphere.hpp"

namespace ntkeig {

// Shallow network f(x) = (1/sqrt(d1)) sum_j v_j relu(w_j . x) with all
// entries iid standard Gaussian, deterministic per seed.
struct ShallowParams {
  int d0;
  int d1;
  Matrix W;  // d1 x d0
  Vector v;  // d1
  std::uint64_t seed;
};

// Depth-L network with widths d0, d1, ..., d_{L-1}, d_L = 1 and the output
// normalization f = (prod_{l<L} sqrt(2/d_l)) f_L.
struct DeepParams {
  std::vector<int> widths;     // length L+1, widths.back() == 1
  std::vector<Matrix> weights; // weights[l-1] = W_l, shape d_l x d_{l-1}
  std::uint64_t seed;

  int depth() const { return static_cast<int>(weights.size()); }
};

ShallowParams init_shallow(int d0, int d1, std::uint64_t seed);
DeepParams init_deep(std::vector<int> widths, std::uint64_t seed);

double shallow_forward(const ShallowParams& p, const Vector& x);

// NTK of the shallow network split by parameter block: K1 from the inner
// weights, K2 = (1/d1) relu(WX)^T relu(WX) from the outer weights,
// K = K1 + K2.
struct NtkParts {
  KernelMatrix K;
  KernelMatrix K1;
  KernelMatrix K2;
};

NtkParts shallow_ntk(const ShallowParams& p, const Dataset& data);

// Same result as shallow_ntk(init_shallow(d0, d1, seed), data) but the
// weight rows are generated chunk-wise and never stored, so very wide
// networks stay within memory. Bit-identical to the materialized path.
NtkParts shallow_ntk_streamed(int d0, int d1, std::uint64_t seed, const Dataset& data);

// Exact parameter-gradient distance |grad f(x) - grad f(x')| assembled from
// the W-block and v-block gradients.
double gradient_distance(const ShallowParams& p, const Vector& x, const Vector& x_prime);

// Forward/backward quantities of the deep network on a dataset: feature
// matrices F_l, activation patterns, and the backpropagation rows B_l.
struct LayerTrace {
  // features[l] = F_l (d_l x n), l = 0..L-1 with F_0 = X
  std::vector<Matrix> features;
  // patterns[l-1](j, i) = 1 iff unit j of layer l fires on x_i, l = 1..L-1
  std::vector<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> patterns;
  // backprop[l-1] = B_l (n x d_l), l = 1..L; B_L is the all-ones column
  std::vector<Matrix> backprop;
};

LayerTrace deep_trace(const DeepParams& p, const Dataset& data);

KernelMatrix deep_ntk_decomposed(const DeepParams& p, const Dataset& data);

// Finite-difference oracle for the deep NTK: central differences in every
// parameter coordinate of the normalized network map, then the Gram
// product. Requires parameters in general position; violations of the
// 10h pre-activation margin are reported via GeneralPositionError and the
// caller is expected to resample the seed.
struct GeneralPositionViolation {
  int layer;
  int point;
  int unit;
  double preactivation;
};

class GeneralPositionError : public std::runtime_error {
 public:
  GeneralPositionError(std::string message, std::vector<GeneralPositionViolation> violations_in)
      : std::runtime_error(std::move(message)), violations(std::move(violations_in)) {}
  std::vector<GeneralPositionViolation> violations;
};

KernelMatrix deep_ntk_fd(const DeepParams& p, const Dataset& data, double h = 1e-5);

// Smallest pre-activation magnitude across ReLU layers and data points;
// used to pre-check the finite-difference guard.
double deep_general_position_margin(const DeepParams& p, const Dataset& data);

// Smallest eigenvalue of a kernel matrix (dense symmetric solve), clamped
// at 0 below 1e-12; see min_eigenvalue_report for the clamping flag.
double min_eigenvalue(const KernelMatrix& kernel);

// |f_l(x)|^2 / prod_{h<=l} (d_h/2) for l = 1..L-1.
std::vector<double> feature_norm_profile(const DeepParams& p, const Vector& x);

// Backpropagation-norm families for l = 1..L-1 with S_l(x) =
// Sigma_l(x) prod_{k>l} W_k^T Sigma_k(x).
struct BackpropNorms {
  double sw_sq;    // |S_l(x) W_L^T|^2
  double frob_sq;  // |S_l(x)|_F^2
  double op_sq;    // |S_l(x)|^2 (spectral)
};

std::vector<BackpropNorms> backprop_norm_profile(const DeepParams& p, const Vector& x);

// Empirical fraction of Gaussian rows w with relu'(w.x) != relu'(w.x') for
// unit vectors at angle theta; concentrates at theta/pi.
double activation_flip_rate(double theta, int d, std::int64_t samples, std::uint64_t seed);

// Parameter serialization: a flat little-endian binary container (64-bit
// float payload, header with widths and seed) and JSON for small cases.
void save_params_binary(const ShallowParams& p, std::ostream& out);
void save_params_binary(const DeepParams& p, std::ostream& out);
ShallowParams load_shallow_params_binary(std::istream& in);
DeepParams load_deep_params_binary(std::istream& in);
void write_params_json(const ShallowParams& p, std::ostream& out);
void write_params_json(const DeepParams& p, std::ostream& out);

// Per-layer diagnostics as CSV rows (layer, quantity, value).
void write_layer_trace_csv(const LayerTrace& trace, std::ostream& out);

}  // namespace ntkeig
