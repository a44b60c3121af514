#include <doctest.h>

#include <cmath>
#include <numbers>
#include <fstream>
#include <sstream>
#include <vector>

#include "ntkeig/linalg.hpp"
#include "ntkeig/rng.hpp"
#include "ntkeig/sphere.hpp"

using namespace ntkeig;

namespace {

Dataset make_dataset(std::initializer_list<std::initializer_list<double>> columns) {
  const int d = static_cast<int>(columns.begin()->size());
  Matrix points(d, static_cast<Eigen::Index>(columns.size()));
  int c = 0;
  for (const auto& col : columns) {
    int r = 0;
    for (double v : col) points(r++, c) = v;
    ++c;
  }
  return Dataset(std::move(points), /*renormalize=*/true);
}

}  // namespace

TEST_CASE("sampling produces unit-norm points deterministically") {
  const Dataset one = sample_uniform_sphere(3, 1, 77);
  CHECK(std::abs(one.point(0).norm() - 1.0) <= 1e-12);

  const Dataset a = sample_uniform_sphere(3, 10, 5);
  const Dataset b = sample_uniform_sphere(3, 10, 5);
  CHECK(a.points() == b.points());  // bit-identical

  CHECK_THROWS_AS(sample_uniform_sphere(0, 5, 1), std::domain_error);
  CHECK_THROWS_AS(sample_uniform_sphere(3, 0, 1), std::domain_error);
}

TEST_CASE("law of large numbers: empirical mean shrinks") {
  const Dataset data = sample_uniform_sphere(3, 5000, 123);
  const Vector mean = data.points().rowwise().mean();
  CHECK(mean.norm() < 0.05);
}

TEST_CASE("dataset rejects non-unit columns unless renormalizing") {
  Matrix bad(2, 1);
  bad << 0.5, 0.5;
  CHECK_THROWS_AS(Dataset{bad}, std::invalid_argument);
  const Dataset fixed(bad, /*renormalize=*/true);
  CHECK(std::abs(fixed.point(0).norm() - 1.0) <= 1e-12);
}

TEST_CASE("separation statistics hand cases") {
  const Dataset antipodal = make_dataset({{1, 0, 0}, {-1, 0, 0}});
  const SeparationStats s1 = separation_stats(antipodal);
  CHECK(s1.delta == doctest::Approx(0.0));
  CHECK(s1.delta_prime == doctest::Approx(2.0));

  const Dataset orthogonal = make_dataset({{1, 0, 0}, {0, 1, 0}});
  const SeparationStats s2 = separation_stats(orthogonal);
  CHECK(s2.delta == doctest::Approx(std::numbers::sqrt2).epsilon(1e-14));
  CHECK(s2.delta_prime == doctest::Approx(std::numbers::sqrt2).epsilon(1e-14));

  const double inv = 1.0 / std::numbers::sqrt2;
  const Dataset triple = make_dataset({{1, 0, 0}, {0, 1, 0}, {inv, inv, 0}});
  const SeparationStats s3 = separation_stats(triple);
  CHECK(s3.delta == doctest::Approx(0.7653668647301795).epsilon(1e-13));
  CHECK(s3.delta_prime == doctest::Approx(0.7653668647301795).epsilon(1e-13));
}

TEST_CASE("single point separation uses the infinity sentinel") {
  const SeparationStats s = separation_stats(sample_uniform_sphere(4, 1, 9));
  CHECK(std::isinf(s.delta));
  CHECK(std::isinf(s.delta_prime));
  CHECK(s.argmin_pair.first == -1);
}

TEST_CASE("separation is permutation-invariant and sign-flip covariant") {
  const Dataset data = sample_uniform_sphere(4, 12, 31);
  const double delta = separation_stats(data).delta;

  Matrix permuted = data.points();
  permuted.col(0).swap(permuted.col(7));
  permuted.col(3).swap(permuted.col(11));
  CHECK(separation_stats(Dataset(permuted)).delta == doctest::Approx(delta).epsilon(1e-15));

  Matrix flipped = data.points();
  flipped.col(5) *= -1.0;
  CHECK(separation_stats(Dataset(flipped)).delta == doctest::Approx(delta).epsilon(1e-15));
}

TEST_CASE("operator norm hand cases") {
  CHECK(operator_norm(make_dataset({{1, 0}, {1, 0}})) ==
        doctest::Approx(std::numbers::sqrt2).epsilon(1e-12));
  CHECK(operator_norm(make_dataset({{1, 0}, {0, 1}})) == doctest::Approx(1.0).epsilon(1e-12));
  const double inv = 1.0 / std::numbers::sqrt2;
  CHECK(operator_norm(make_dataset({{1, 0}, {inv, inv}})) ==
        doctest::Approx(1.3065629648763765).epsilon(1e-12));
}

TEST_CASE("operator norm obeys the trace bound and concentrates") {
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 8 + 8 * rep;
    const Dataset data = sample_uniform_sphere(5, n, 100 + rep);
    const double norm_sq = operator_norm(data) * operator_norm(data);
    CHECK(norm_sq <= n + 1e-9);
  }
  // opnorm^2 ~ 1 + c n/d0: pooled estimate of c stays O(1)
  double c_sum = 0.0;
  int count = 0;
  for (int rep = 0; rep < 10; ++rep)
    for (int n : {25, 50, 100}) {
      const Dataset data = sample_uniform_sphere(5, n, 500 + 31 * rep + n);
      const double norm_sq = operator_norm(data) * operator_norm(data);
      c_sum += (norm_sq - 1.0) * 5.0 / n;
      ++count;
    }
  const double c = c_sum / count;
  CHECK(c > 0.3);
  CHECK(c < 5.0);
}

TEST_CASE("cap volume bound values and domain") {
  const auto [lower, upper] = cap_volume_bounds(3, 0.25, 1.0);
  CHECK(lower == doctest::Approx(0.0078125).epsilon(1e-14));
  CHECK(upper == doctest::Approx(0.04923482919181989).epsilon(1e-13));
  CHECK_THROWS_AS(cap_volume_bounds(3, 0.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(cap_volume_bounds(3, 0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(cap_volume_bounds(1, 0.25, 1.0), std::domain_error);
  CHECK_THROWS_AS(cap_volume_bounds(3, 0.25, 0.0), std::domain_error);
}

TEST_CASE("cap bounds bracket the Monte Carlo cap fraction") {
  // C calibrated once for this grid; the true fraction sits between the
  // closed-form bounds for every tested (d0, delta)
  const double cap_const = 1.0;
  const int m = 200000;
  for (int d0 : {3, 4, 6}) {
    for (double delta : {0.25, 0.4, 0.45}) {
      const auto [lower, upper] = cap_volume_bounds(d0, delta, cap_const);
      GaussianStream g(derive_seed(815, d0, static_cast<std::uint64_t>(delta * 100)));
      int hits = 0;
      Vector y(d0);
      for (int s = 0; s < m; ++s) {
        for (int r = 0; r < d0; ++r) y(r) = g.next();
        y /= y.norm();
        // x = e1, membership |y - e1| <= delta
        const double dist_sq = (y(0) - 1.0) * (y(0) - 1.0) + y.squaredNorm() - y(0) * y(0);
        if (dist_sq <= delta * delta) ++hits;
      }
      const double freq = static_cast<double>(hits) / m;
      CHECK(freq >= lower);
      CHECK(freq <= upper);
    }
  }
}

TEST_CASE("median min-distance scaling smoke test") {
  // full-resolution version is acceptance criterion 7
  const int d0 = 5;
  const int trials = 60;
  std::vector<double> log_n, log_med;
  for (int n : {32, 64, 128, 256}) {
    std::vector<double> dps;
    for (int t = 0; t < trials; ++t)
      dps.push_back(separation_stats(sample_uniform_sphere(d0, n, derive_seed(4242, n, t))).delta_prime);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_med.push_back(std::log(median(dps)));
  }
  const double slope = ols_slope(log_n, log_med);
  CHECK(slope < -0.3);
  CHECK(slope > -0.7);
}

TEST_CASE("load_dataset sniffs the format from the content") {
  const Dataset data = sample_uniform_sphere(3, 3, 404);
  {
    std::ofstream out("/tmp/ntkeig_sniff.json");
    write_dataset_json(data, out);
  }
  {
    std::ofstream out("/tmp/ntkeig_sniff.csv");
    write_dataset_csv(data, out);
  }
  CHECK((load_dataset("/tmp/ntkeig_sniff.json").points() - data.points()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((load_dataset("/tmp/ntkeig_sniff.csv").points() - data.points()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK_THROWS_AS(load_dataset("/tmp/ntkeig_missing_file.json"), std::runtime_error);
}

TEST_CASE("dataset JSON and CSV round trips") {
  const Dataset data = sample_uniform_sphere(4, 6, 2024);

  std::stringstream json;
  write_dataset_json(data, json);
  const Dataset from_json = read_dataset_json(json);
  CHECK(from_json.dim() == 4);
  CHECK((from_json.points() - data.points()).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream csv;
  write_dataset_csv(data, csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "x0,x1,x2,x3");
  csv.seekg(0);
  const Dataset from_csv = read_dataset_csv(csv);
  CHECK((from_csv.points() - data.points()).cwiseAbs().maxCoeff() == 0.0);
}
