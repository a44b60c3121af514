#include "ntkeig/sphere.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ntkeig/rng.hpp"

namespace ntkeig {

Dataset::Dataset(Matrix points, bool renormalize) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1)
    throw std::domain_error("Dataset: requires d0 >= 1 and n >= 1");
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    const double norm = points_.col(i).norm();
    if (std::abs(norm - 1.0) <= kUnitNormTol) continue;
    if (!renormalize)
      throw std::invalid_argument("Dataset: column " + std::to_string(i) +
                                  " is not unit norm (|norm - 1| > 1e-12)");
    if (norm == 0.0) throw std::invalid_argument("Dataset: cannot renormalize a zero column");
    points_.col(i) /= norm;
  }
}

Dataset sample_uniform_sphere(int d0, int n, std::uint64_t seed) {
  if (d0 < 1 || n < 1) throw std::domain_error("sample_uniform_sphere: requires d0 >= 1 and n >= 1");
  Matrix points(d0, n);
  for (int i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      GaussianStream g(derive_seed(derive_seed(seed, streams::kDataPoint, i), streams::kResample,
                                   attempt));
      for (int row = 0; row < d0; ++row) points(row, i) = g.next();
      norm = points.col(i).norm();
      if (norm > 1e-300) break;
    }
    points.col(i) /= norm;
  }
  return Dataset(std::move(points), /*renormalize=*/true);
}

SeparationStats separation_stats(const Dataset& data) {
  const int n = data.size();
  if (n < 2) {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf, {-1, -1}};
  }
  double delta_sq = std::numeric_limits<double>::infinity();
  double delta_prime_sq = std::numeric_limits<double>::infinity();
  std::pair<int, int> argmin{-1, -1};
  const Matrix& x = data.points();
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double diff = (x.col(i) - x.col(k)).squaredNorm();
      const double sum = (x.col(i) + x.col(k)).squaredNorm();
      if (diff < delta_prime_sq) {
        delta_prime_sq = diff;
        argmin = {i, k};
      }
      delta_sq = std::min(delta_sq, std::min(diff, sum));
    }
  }
  return {std::sqrt(delta_sq), std::sqrt(delta_prime_sq), argmin};
}

double operator_norm(const Dataset& data) {
  const Vector eigenvalues = jacobi_eigenvalues(data.gram());
  const double largest = eigenvalues(eigenvalues.size() - 1);
  return std::sqrt(std::max(largest, 0.0));
}

std::pair<double, double> cap_volume_bounds(int d0, double delta, double cap_const) {
  if (d0 < 2) throw std::domain_error("cap_volume_bounds: requires d0 >= 2");
  if (!(delta > 0.0 && delta < 0.5))
    throw std::domain_error("cap_volume_bounds: delta must lie in (0, 1/2)");
  if (!(cap_const > 0.0)) throw std::domain_error("cap_volume_bounds: cap_const must be positive");
  const double lower = 0.5 * std::pow(0.5 * delta, d0 - 1);
  const double upper =
      4.0 * std::sqrt(std::numbers::pi) * std::pow(cap_const * delta, d0 - 1) / (static_cast<double>(d0) * d0);
  return {lower, upper};
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset dataset_from_columns(int dim, const std::vector<std::vector<double>>& cols,
                             bool renormalize) {
  if (cols.empty()) throw std::invalid_argument("dataset: no points");
  Matrix points(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (static_cast<int>(cols[i].size()) != dim)
      throw std::invalid_argument("dataset: point " + std::to_string(i) + " has wrong dimension");
    for (int row = 0; row < dim; ++row) points(row, static_cast<Eigen::Index>(i)) = cols[i][row];
  }
  return Dataset(std::move(points), renormalize);
}

}  // namespace

void write_dataset_json(const Dataset& data, std::ostream& out) {
  nlohmann::json j;
  j["dim"] = data.dim();
  auto points = nlohmann::json::array();
  for (int i = 0; i < data.size(); ++i) {
    auto p = nlohmann::json::array();
    for (int row = 0; row < data.dim(); ++row) p.push_back(data.points()(row, i));
    points.push_back(std::move(p));
  }
  j["points"] = std::move(points);
  out << j.dump(2) << '\n';
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (int row = 0; row < data.dim(); ++row) out << (row ? "," : "") << 'x' << row;
  out << '\n';
  for (int i = 0; i < data.size(); ++i) {
    for (int row = 0; row < data.dim(); ++row)
      out << (row ? "," : "") << format_double(data.points()(row, i));
    out << '\n';
  }
}

Dataset read_dataset_json(std::istream& in, bool renormalize) {
  nlohmann::json j;
  in >> j;
  const int dim = j.at("dim").get<int>();
  std::vector<std::vector<double>> cols;
  for (const auto& p : j.at("points")) cols.push_back(p.get<std::vector<double>>());
  return dataset_from_columns(dim, cols, renormalize);
}

Dataset read_dataset_csv(std::istream& in, bool renormalize) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: empty input");
  std::vector<std::vector<double>> cols;
  int dim = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (dim < 0) dim = static_cast<int>(values.size());
    cols.push_back(std::move(values));
  }
  if (dim <= 0) throw std::invalid_argument("dataset csv: no data rows");
  return dataset_from_columns(dim, cols, renormalize);
}

Dataset load_dataset(const std::string& path, bool renormalize) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  int c = in.peek();
  while (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
    in.get();
    c = in.peek();
  }
  if (c == '{') return read_dataset_json(in, renormalize);
  return read_dataset_csv(in, renormalize);
}

}  // namespace ntkeig
