#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace ntkeig {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// max_{ik} |A - A^T| for symmetry checks.
double asymmetry(const Matrix& a);

// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi sweeps.
// Iterates until the off-diagonal Frobenius norm drops below
// `tol * ||A||_F` (absolute `tol` for a zero matrix). Dense, intended for
// n up to a few thousand.
Vector jacobi_eigenvalues(Matrix a, double tol = 1e-12, int max_sweeps = 64);

// Sum with pairwise (tree) reduction; used wherever accumulation order
// would otherwise depend on shard or thread layout.
double pairwise_sum(std::span<const double> values);

// Ordinary least squares slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

}  // namespace ntkeig
