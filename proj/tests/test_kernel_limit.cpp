#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ntkeig/kernel_limit.hpp"
#include "ntkeig/rng.hpp"

using namespace ntkeig;

namespace {
constexpr double kPi = std::numbers::pi;

Dataset axes(int d, int n) {
  Matrix points = Matrix::Zero(d, n);
  for (int i = 0; i < n; ++i) points(i % d, i) = 1.0;
  return Dataset(std::move(points));
}
}  // namespace

TEST_CASE("limiting kernel entries at the corners") {
  CHECK(limiting_kernel_entry(Activation::ReluDerivative, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(limiting_kernel_entry(Activation::ReluDerivative, -1.0) == doctest::Approx(0.0));
  CHECK(limiting_kernel_entry(Activation::ReluDerivative, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(limiting_kernel_entry(Activation::ScaledRelu, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(limiting_kernel_entry(Activation::ScaledRelu, -1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(limiting_kernel_entry(Activation::ScaledRelu, 0.0) ==
        doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));
  // 1-ulp Gram overshoot is absorbed
  CHECK(std::isfinite(limiting_kernel_entry(Activation::ReluDerivative, 1.0 + 1e-15)));
}

TEST_CASE("limiting kernel matrix hand cases and PSD") {
  const Dataset single = sample_uniform_sphere(4, 1, 3);
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu}) {
    const KernelMatrix k = limiting_kernel_matrix(psi, single);
    CHECK(k(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }

  const KernelMatrix k = limiting_kernel_matrix(Activation::ReluDerivative, axes(3, 2));
  CHECK(k(0, 0) == doctest::Approx(0.5));
  CHECK(k(0, 1) == doctest::Approx(0.25));
  CHECK(k(1, 1) == doctest::Approx(0.5));

  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu}) {
    const KernelMatrix random_k = limiting_kernel_matrix(psi, sample_uniform_sphere(5, 12, 88));
    CHECK(random_k.is_psd());
    for (int i = 0; i < random_k.size(); ++i)
      CHECK(random_k(i, i) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("monte carlo validates the closed-form entries") {
  const Dataset data = axes(3, 3);
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu}) {
    const MonteCarloKernel mc = limiting_kernel_mc(psi, data, 200000, 99);
    const KernelMatrix closed = limiting_kernel_matrix(psi, data);
    for (int i = 0; i < 3; ++i)
      for (int k = i; k < 3; ++k) {
        const double diff = std::abs(mc.kernel(i, k) - closed(i, k));
        CHECK(diff <= 4.0 * mc.standard_error(i, k) + 1e-12);
      }
  }
}

TEST_CASE("single-sample monte carlo is a bernoulli draw") {
  const Dataset single = sample_uniform_sphere(3, 1, 5);
  for (int seed = 0; seed < 10; ++seed) {
    const MonteCarloKernel mc = limiting_kernel_mc(Activation::ReluDerivative, single, 1, seed);
    const double v = mc.kernel(0, 0);
    CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("monte carlo result is bit-identical across thread counts") {
  const Dataset data = sample_uniform_sphere(4, 5, 23);
  const MonteCarloKernel serial = limiting_kernel_mc(Activation::ScaledRelu, data, 60000, 9, 1);
  const MonteCarloKernel threaded = limiting_kernel_mc(Activation::ScaledRelu, data, 60000, 9, 3);
  CHECK((serial.kernel.entries() - threaded.kernel.entries()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.standard_error - threaded.standard_error).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("doubling samples halves the mean standard error") {
  const Dataset data = sample_uniform_sphere(3, 4, 17);
  const MonteCarloKernel small = limiting_kernel_mc(Activation::ScaledRelu, data, 50000, 1);
  const MonteCarloKernel big = limiting_kernel_mc(Activation::ScaledRelu, data, 100000, 1);
  const double ratio = big.standard_error.mean() / small.standard_error.mean();
  CHECK(ratio == doctest::Approx(1.0 / std::numbers::sqrt2).epsilon(0.2));
}

TEST_CASE("mercer series hand values") {
  CHECK(mercer_series_entry(Activation::ReluDerivative, 3, 1.0, 1) ==
        doctest::Approx(0.4375).epsilon(1e-13));
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu})
    for (int d : {3, 6}) {
      const double c0 = funk_hecke_coeff(0, d, psi);
      CHECK(mercer_series_entry(psi, d, 0.37, 0) == doctest::Approx(c0 * c0).epsilon(1e-13));
    }
}

TEST_CASE("mercer series converges to the closed form") {
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu})
    for (double t : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
      const double closed = limiting_kernel_entry(psi, t);
      CHECK(std::abs(closed - mercer_series_entry(psi, 3, t, 200)) <= 1e-3);
    }
}

TEST_CASE("hemisphere norm examples") {
  const Dataset pair = axes(3, 2);
  Vector z(2);
  z << 1.0, 0.0;
  CHECK(hemisphere_norm_sq(Activation::ReluDerivative, DiscreteMeasure(pair, z)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  z << 1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2;
  CHECK(hemisphere_norm_sq(Activation::ReluDerivative, DiscreteMeasure(pair, z)) ==
        doctest::Approx(0.25).epsilon(1e-12));

  // nonnegativity and the smallest-eigenvalue bound
  const Dataset data = sample_uniform_sphere(4, 6, 12);
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu}) {
    const KernelMatrix kernel = limiting_kernel_matrix(psi, data);
    const double lambda_min = kernel.eigenvalues()(0);
    GaussianStream g(55);
    for (int rep = 0; rep < 20; ++rep) {
      Vector w(6);
      for (int i = 0; i < 6; ++i) w(i) = g.next();
      const double norm_sq = hemisphere_norm_sq(psi, DiscreteMeasure(data, w));
      CHECK(norm_sq >= -1e-12);
      CHECK(norm_sq >= lambda_min * w.squaredNorm() - 1e-9);
    }
  }
}

TEST_CASE("harmonic gram hand cases") {
  const Dataset single = sample_uniform_sphere(3, 1, 8);
  const HarmonicGram hg1 = harmonic_gram(single, 3, 0);
  CHECK(hg1.gram(0, 0) == doctest::Approx(static_cast<double>(hg1.N)).epsilon(1e-12));

  // antipodal pair, odd harmonics: [[N, -N], [-N, N]], smallest eigenvalue 0
  Matrix pm(3, 2);
  pm << 1, -1, 0, 0, 0, 0;
  const HarmonicGram hg2 = harmonic_gram(Dataset(pm), 2, 1);
  CHECK(hg2.gram(0, 1) == doctest::Approx(-static_cast<double>(hg2.N)).epsilon(1e-12));
  CHECK(harmonic_min_sv(hg2) == doctest::Approx(0.0).epsilon(1e-9));

  // orthogonal pair, odd harmonics: N * Identity, sigma_min = sqrt(N)
  const HarmonicGram hg3 = harmonic_gram(axes(3, 2), 2, 1);
  CHECK(hg3.gram(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(harmonic_min_sv(hg3) == doctest::Approx(std::sqrt(static_cast<double>(hg3.N))).epsilon(1e-12));
}

TEST_CASE("mercer series matches the term-by-term sum") {
  // independent route: explicit addition_kernel and coefficient calls
  for (Activation psi : {Activation::ReluDerivative, Activation::ScaledRelu})
    for (int d : {3, 5})
      for (double t : {-0.8, -0.2, 0.3, 0.95}) {
        const int R = 41;
        double expected = 0.0;
        for (int r = 0; r <= R; ++r) {
          const double c = funk_hecke_coeff(r, d, psi);
          expected += c * c * addition_kernel(r, d, t);
        }
        CHECK(mercer_series_entry(psi, d, t, R) == doctest::Approx(expected).epsilon(1e-12));
      }
}

TEST_CASE("harmonic gram matches the term-by-term addition kernel sum") {
  const Dataset data = sample_uniform_sphere(4, 5, 321);
  const Matrix gram_x = data.gram();
  for (int beta = 0; beta <= 1; ++beta) {
    const int R = 13;
    const HarmonicGram hg = harmonic_gram(data, R, beta);
    for (int i = 0; i < data.size(); ++i)
      for (int k = i + 1; k < data.size(); ++k) {
        double expected = 0.0;
        for (int r = 0; r <= R; ++r)
          expected += addition_kernel(2 * r + beta, 4, gram_x(i, k));
        CHECK(hg.gram(i, k) == doctest::Approx(expected).epsilon(1e-11));
      }
  }
}

TEST_CASE("harmonic gram diagonal equals N and N telescopes") {
  const Dataset data = sample_uniform_sphere(5, 7, 44);
  for (int beta = 0; beta <= 1; ++beta)
    for (int R : {0, 3, 11}) {
      const HarmonicGram hg = harmonic_gram(data, R, beta);
      std::int64_t n_expected = 0;
      for (int r = 0; r <= R; ++r) n_expected += harmonic_dim(2 * r + beta, 5);
      CHECK(hg.N == n_expected);
      for (int i = 0; i < data.size(); ++i)
        CHECK(hg.gram(i, i) ==
              doctest::Approx(static_cast<double>(hg.N)).epsilon(1e-9));
    }
  CHECK_THROWS_AS(harmonic_gram(sample_uniform_sphere(2, 3, 1), 2, 0), std::domain_error);
}

TEST_CASE("gershgorin circle bound never exceeds the smallest eigenvalue") {
  for (int seed = 0; seed < 15; ++seed) {
    const Dataset data = sample_uniform_sphere(4, 6, 900 + seed);
    for (int beta = 0; beta <= 1; ++beta) {
      const HarmonicGram hg = harmonic_gram(data, 4, beta);
      const double lambda_min = jacobi_eigenvalues(hg.gram)(0);
      double circle = std::numeric_limits<double>::infinity();
      for (int i = 0; i < data.size(); ++i) {
        double off = 0.0;
        for (int k = 0; k < data.size(); ++k)
          if (k != i) off += std::abs(hg.gram(i, k));
        circle = std::min(circle, hg.gram(i, i) - off);
      }
      CHECK(circle <= lambda_min + 1e-7 * static_cast<double>(hg.N));
    }
  }
}

TEST_CASE("min eigenvalue report clamps tiny values") {
  Matrix m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0 + 1e-15;
  const EigReport report = min_eigenvalue_report(KernelMatrix(m));
  CHECK(report.clamped);
  CHECK(report.lambda_min == 0.0);

  const EigReport healthy = min_eigenvalue_report(KernelMatrix(Matrix::Identity(3, 3)));
  CHECK_FALSE(healthy.clamped);
  CHECK(healthy.lambda_min == doctest::Approx(1.0));
}

TEST_CASE("kernel matrix rejects asymmetry") {
  Matrix bad(2, 2);
  bad << 1.0, 0.5, 0.5 + 1e-8, 1.0;
  CHECK_THROWS_AS(KernelMatrix{bad}, std::invalid_argument);
}

TEST_CASE("kernel serialization round trip") {
  const KernelMatrix k = limiting_kernel_matrix(Activation::ScaledRelu, sample_uniform_sphere(3, 4, 7));
  std::stringstream json;
  write_kernel_json(k, json);
  const KernelMatrix back = read_kernel_json(json);
  CHECK((back.entries() - k.entries()).cwiseAbs().maxCoeff() == 0.0);

  std::ostringstream csv;
  write_kernel_csv(k, csv);
  CHECK(csv.str().find(',') != std::string::npos);

  std::ostringstream eig;
  write_eig_report_json(min_eigenvalue_report(k), eig);
  CHECK(eig.str().find("lambda_min") != std::string::npos);
  CHECK(eig.str().find("clamped") != std::string::npos);
}
