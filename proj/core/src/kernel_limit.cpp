#include "ntkeig/kernel_limit.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ntkeig/rng.hpp"

namespace ntkeig {

namespace {
constexpr double kPi = std::numbers::pi;
}

KernelMatrix::KernelMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols())
    throw std::invalid_argument("KernelMatrix: matrix must be square");
  if (entries_.rows() < 1) throw std::invalid_argument("KernelMatrix: empty matrix");
  if (asymmetry(entries_) > kSymmetryTol)
    throw std::invalid_argument("KernelMatrix: asymmetry exceeds 1e-10");
  // store the symmetrized matrix so eigensolves see an exactly symmetric input
  entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
}

bool KernelMatrix::is_psd(double tol) const {
  const Vector eig = eigenvalues();
  return eig(0) >= -tol * std::max(1.0, std::abs(eig(eig.size() - 1)));
}

EigReport min_eigenvalue_report(const KernelMatrix& kernel) {
  const Vector eig = kernel.eigenvalues();
  const double smallest = eig(0);
  if (smallest < EigReport::kClampThreshold) return {0.0, true};
  return {smallest, false};
}

DiscreteMeasure::DiscreteMeasure(Dataset data_in, Vector weights_in)
    : data(std::move(data_in)), weights(std::move(weights_in)) {
  if (weights.size() != data.size())
    throw std::invalid_argument("DiscreteMeasure: weight count must match dataset size");
  if (!weights.allFinite()) throw std::invalid_argument("DiscreteMeasure: weights must be finite");
}

double limiting_kernel_entry(Activation psi, double t) {
  const double clamped = std::clamp(t, -1.0, 1.0);
  const double theta = std::acos(clamped);
  if (psi == Activation::ReluDerivative) return (kPi - theta) / (2.0 * kPi);
  return (std::sin(theta) + (kPi - theta) * std::cos(theta)) / (2.0 * kPi);
}

KernelMatrix limiting_kernel_matrix(Activation psi, const Dataset& data) {
  const Matrix gram = data.gram();
  Matrix entries(data.size(), data.size());
  for (int i = 0; i < data.size(); ++i) {
    // on the sphere <x_i, x_i> = 1 by definition; evaluating at the stored
    // Gram diagonal would let acos amplify the unit-norm slack
    entries(i, i) = limiting_kernel_entry(psi, 1.0);
    for (int k = i + 1; k < data.size(); ++k) {
      const double value = limiting_kernel_entry(psi, gram(i, k));
      entries(i, k) = value;
      entries(k, i) = value;
    }
  }
  return KernelMatrix(std::move(entries));
}

MonteCarloKernel limiting_kernel_mc(Activation psi, const Dataset& data, std::int64_t samples,
                                    std::uint64_t seed, int threads) {
  if (samples < 1) throw std::invalid_argument("limiting_kernel_mc: samples must be >= 1");
  if (threads < 1) throw std::invalid_argument("limiting_kernel_mc: threads must be >= 1");
  const int n = data.size();
  const int d = data.dim();

  // Fixed-size shards keyed by shard index; the shard layout (and therefore
  // the result) is independent of how shards are scheduled.
  constexpr std::int64_t kShardSize = 8192;
  const std::int64_t shard_count = (samples + kShardSize - 1) / kShardSize;

  std::vector<Matrix> shard_sums(static_cast<std::size_t>(shard_count));
  std::vector<Matrix> shard_sq_sums(static_cast<std::size_t>(shard_count));

  const auto run_shard = [&](std::int64_t shard) {
    const std::int64_t begin = shard * kShardSize;
    const std::int64_t count = std::min(kShardSize, samples - begin);
    GaussianStream g(derive_seed(seed, streams::kMonteCarloShard, static_cast<std::uint64_t>(shard)));
    Matrix sum = Matrix::Zero(n, n);
    Matrix sq_sum = Matrix::Zero(n, n);
    Vector u(d), feat(n);
    for (std::int64_t s = 0; s < count; ++s) {
      double norm_sq = 0.0;
      for (int row = 0; row < d; ++row) {
        u(row) = g.next();
        norm_sq += u(row) * u(row);
      }
      u /= std::sqrt(norm_sq);
      for (int i = 0; i < n; ++i) feat(i) = apply_activation(psi, u.dot(data.point(i)), d);
      for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) {
          const double y = feat(i) * feat(k);
          sum(i, k) += y;
          sq_sum(i, k) += y * y;
        }
    }
    shard_sums[static_cast<std::size_t>(shard)] = std::move(sum);
    shard_sq_sums[static_cast<std::size_t>(shard)] = std::move(sq_sum);
  };

  if (threads == 1 || shard_count == 1) {
    for (std::int64_t shard = 0; shard < shard_count; ++shard) run_shard(shard);
  } else {
    std::atomic<std::int64_t> next{0};
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, shard_count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        std::int64_t shard;
        while ((shard = next.fetch_add(1)) < shard_count) run_shard(shard);
      });
    for (auto& t : pool) t.join();
  }

  Matrix mean(n, n), stderr_mean(n, n);
  std::vector<double> parts(static_cast<std::size_t>(shard_count));
  const double m = static_cast<double>(samples);
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) {
      for (std::int64_t shard = 0; shard < shard_count; ++shard)
        parts[static_cast<std::size_t>(shard)] = shard_sums[static_cast<std::size_t>(shard)](i, k);
      const double total = pairwise_sum(parts);
      for (std::int64_t shard = 0; shard < shard_count; ++shard)
        parts[static_cast<std::size_t>(shard)] = shard_sq_sums[static_cast<std::size_t>(shard)](i, k);
      const double total_sq = pairwise_sum(parts);
      const double avg = total / m;
      const double variance = std::max(0.0, total_sq / m - avg * avg);
      mean(i, k) = mean(k, i) = avg;
      stderr_mean(i, k) = stderr_mean(k, i) = std::sqrt(variance / m);
    }

  return {KernelMatrix(std::move(mean)), std::move(stderr_mean), samples};
}

double mercer_series_entry(Activation psi, int d, double t, int R) {
  if (R < 0) throw std::invalid_argument("mercer_series_entry: R must be nonnegative");
  if (d < 3) throw std::domain_error("mercer_series_entry: requires d >= 3");
  const double clamped = std::clamp(t, -1.0, 1.0);
  // one recurrence pass up to degree R; skip degrees whose coefficient is an
  // exact parity zero
  const double nu = 0.5 * (d - 2);
  double prev = 1.0;            // C_0
  double cur = 2.0 * nu * clamped;  // C_1
  double total = 0.0;
  for (int r = 0; r <= R; ++r) {
    const double c = funk_hecke_coeff(r, d, psi);
    if (c != 0.0) {
      const double geg = (r == 0) ? prev : cur;
      const double g = (2.0 * r + d - 2.0) * geg / (d - 2.0);
      total += c * c * g;
    }
    if (r >= 1) {
      const int k = r + 1;
      const double next = (2.0 * (k + nu - 1.0) * clamped * cur - (k + 2.0 * nu - 2.0) * prev) / k;
      prev = cur;
      cur = next;
    }
  }
  return total;
}

double hemisphere_norm_sq(Activation psi, const DiscreteMeasure& mu) {
  const KernelMatrix kernel = limiting_kernel_matrix(psi, mu.data);
  return mu.weights.dot(kernel.entries() * mu.weights);
}

namespace {

HarmonicGram assemble_harmonic_gram(const Dataset& data, int R, int beta) {
  const int d = data.dim();
  const int n = data.size();
  const Matrix gram_x = data.gram();
  const double nu = 0.5 * (d - 2);

  std::int64_t N = 0;
  for (int r = 0; r <= R; ++r) N += harmonic_dim(2 * r + beta, d);

  const int max_degree = 2 * R + beta;
  Matrix gram(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      const double t = std::clamp(gram_x(i, k), -1.0, 1.0);
      // accumulate G_{2r+beta,d}(t) over r <= R with a single recurrence pass
      double prev = 1.0;
      double cur = 2.0 * nu * t;
      double total = (beta == 0) ? 1.0 : (2.0 + d - 2.0) * cur / (d - 2.0);
      for (int degree = 2; degree <= max_degree; ++degree) {
        const double next = (2.0 * (degree + nu - 1.0) * t * cur - (degree + 2.0 * nu - 2.0) * prev) /
                            degree;
        prev = cur;
        cur = next;
        if (degree % 2 == beta % 2)
          total += (2.0 * degree + d - 2.0) * cur / (d - 2.0);
      }
      gram(i, k) = total;
      gram(k, i) = total;
    }
  }
  return {R, beta, N, std::move(gram)};
}

}  // namespace

HarmonicGram harmonic_gram(const Dataset& data, int R, int beta) {
  if (data.dim() < 3) throw std::domain_error("harmonic_gram: requires d0 >= 3");
  if (R < 0) throw std::invalid_argument("harmonic_gram: R must be nonnegative");
  if (beta != 0 && beta != 1) throw std::invalid_argument("harmonic_gram: beta must be 0 or 1");
  return assemble_harmonic_gram(data, R, beta);
}

double harmonic_min_sv(const HarmonicGram& hg) {
  const Vector eig = jacobi_eigenvalues(hg.gram);
  return std::sqrt(std::max(eig(0), 0.0));
}

namespace {
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_kernel_csv(const KernelMatrix& kernel, std::ostream& out) {
  for (int i = 0; i < kernel.size(); ++i) {
    for (int k = 0; k < kernel.size(); ++k) out << (k ? "," : "") << format_double(kernel(i, k));
    out << '\n';
  }
}

void write_kernel_json(const KernelMatrix& kernel, std::ostream& out) {
  nlohmann::json j;
  j["n"] = kernel.size();
  auto rows = nlohmann::json::array();
  for (int i = 0; i < kernel.size(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < kernel.size(); ++k) row.push_back(kernel(i, k));
    rows.push_back(std::move(row));
  }
  j["entries"] = std::move(rows);
  out << j.dump(2) << '\n';
}

KernelMatrix read_kernel_json(std::istream& in) {
  nlohmann::json j;
  in >> j;
  const int n = j.at("n").get<int>();
  Matrix entries(n, n);
  const auto& rows = j.at("entries");
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) entries(i, k) = rows.at(i).at(k).get<double>();
  return KernelMatrix(std::move(entries));
}

void write_eig_report_json(const EigReport& report, std::ostream& out) {
  nlohmann::json j;
  j["lambda_min"] = report.lambda_min;
  j["clamped"] = report.clamped;
  out << j.dump(2) << '\n';
}

}  // namespace ntkeig
