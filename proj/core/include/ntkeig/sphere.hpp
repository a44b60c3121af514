#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "ntkeig/linalg.hpp"

namespace ntkeig {

// n points on the unit sphere S^{d0-1}, stored column-major (one point per
// column). Construction rejects columns whose norm deviates from 1 by more
// than kUnitNormTol unless `renormalize` is set explicitly.
class Dataset {
 public:
  static constexpr double kUnitNormTol = 1e-12;

  explicit Dataset(Matrix points, bool renormalize = false);

  int dim() const { return static_cast<int>(points_.rows()); }
  int size() const { return static_cast<int>(points_.cols()); }
  const Matrix& points() const { return points_; }
  Eigen::Ref<const Vector> point(int i) const { return points_.col(i); }

  // X^T X, the n x n matrix of pairwise inner products.
  Matrix gram() const { return points_.transpose() * points_; }

 private:
  Matrix points_;
};

struct SeparationStats {
  // min over i != k of min(|x_i - x_k|, |x_i + x_k|); +inf when n = 1
  double delta;
  // min over i != k of |x_i - x_k|; +inf when n = 1
  double delta_prime;
  // indices achieving delta_prime; {-1, -1} when n = 1
  std::pair<int, int> argmin_pair;
};

// n independent draws from the uniform distribution on S^{d0-1},
// deterministic per seed (per-point sub-seeds, thread-count independent).
Dataset sample_uniform_sphere(int d0, int n, std::uint64_t seed);

// Exact O(n^2 d0) scan of the pairwise minima defined on SeparationStats.
SeparationStats separation_stats(const Dataset& data);

// Largest singular value of the d0 x n data matrix, via symmetric
// eigensolve of X^T X.
double operator_norm(const Dataset& data);

// Closed-form spherical-cap volume bounds: lower (1/2)(delta/2)^{d-1} and
// upper 4 sqrt(pi) (C delta)^{d-1} / d^2 with C = cap_const.
// Requires delta in (0, 1/2), d0 >= 2, cap_const > 0.
std::pair<double, double> cap_volume_bounds(int d0, double delta, double cap_const);

// Serialization. JSON: {"dim": d0, "points": [[...], ...]}; CSV: header
// "x0,x1,...", one point per row. Readers accept either format; the
// file loader sniffs JSON by a leading '{'.
void write_dataset_json(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_json(std::istream& in, bool renormalize = false);
Dataset read_dataset_csv(std::istream& in, bool renormalize = false);
Dataset load_dataset(const std::string& path, bool renormalize = false);

}  // namespace ntkeig
