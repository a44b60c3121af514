#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "ntkeig/specfun.hpp"

namespace ntkeig {

// Truncation-degree plan for the harmonic Gram guarantee. The three cases
// mirror the asymptotic case split behind the eigenvalue bound; case 3 is
// the unconditional fallback.
struct RegimePlan {
  int case_id;  // 1, 2 or 3
  int R;
  std::int64_t N;  // binom(2R + beta + d - 1, d - 1)
  int beta;
  double universal_const;
};

// Explicit lower-bound formulas.
//   shallow: (1 + d log(1/delta)/log d)^{-3} delta^2,  delta in (0, sqrt(2))
//   deep:    (1 + d0 log(1/delta)/log d0)^{-3} delta^4, delta in (0, sqrt(2)]
double shallow_lambda_lower(int d, double delta);
double deep_lambda_lower(int d0, double delta);

// Uniform-data corollary: lambda = (1 + log(n/eps)/log d)^{-3} (eps^2/n^4)^{1/(d-1)}
// and the matching upper bound (log(1/eps)/n^2)^{1/(d-1)}.
struct UniformBounds {
  double lambda;
  double upper;
};
UniformBounds uniform_bounds(int d, int n, double eps);

// Evaluates the three case guards in order and returns the first satisfied
// case with its R and N. Requires delta in (0, sqrt(2)) and
// universal_const > 0; case 3 always applies as a fallback.
RegimePlan select_truncation(int d, double delta, int beta, double universal_const);

// Rate (d+R)^{1/2} d^{-1/2} R^{-3/2} for relu' and
// (d+R)^{-1/2} d^{1/2} R^{-3/2} for sqrt(d) relu, implied constant 1.
double implicit_transform_rate(int d, int R, Activation psi);

// Width requirements; ceilings, saturating at 2^31 rather than failing.
struct WidthRequirement {
  std::int64_t value;
  bool saturated;
};
WidthRequirement width_requirement_shallow(int n, int d, double delta, double opnorm_sq,
                                           double eps, double constant);

struct DeepWidthRequirement {
  std::int64_t d1_min;
  std::int64_t dLm1_min;
  bool saturated;
};
struct DeepWidthConstants {
  double d1_const = 1.0;
  double dLm1_const = 1.0;
};
DeepWidthRequirement width_requirement_deep(int n, int d0, double delta, int L, double eps,
                                            const DeepWidthConstants& consts = {});

// Full report bracketing an empirical smallest eigenvalue between the
// formula bounds; serializes to JSON with every constant and intermediate.
struct BoundReport {
  double lambda_lower;
  double lambda_upper;
  std::int64_t d1_required;
  RegimePlan regime;
  double c_min_sq;  // min over r <= R of c_{2r+beta,d}^2
  int d;
  int n;
  double delta;
  double delta_prime;
  double eps;
  double width_const;
  std::optional<double> empirical_lambda_min;
  std::optional<double> ratio_lower;
  std::optional<double> ratio_upper;
};

void write_bound_report_json(const BoundReport& report, std::ostream& out);

}  // namespace ntkeig
