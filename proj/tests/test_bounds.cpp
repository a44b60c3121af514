#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "ntkeig/bounds.hpp"
#include "ntkeig/harness.hpp"

using namespace ntkeig;

TEST_CASE("shallow lambda lower values") {
  CHECK(shallow_lambda_lower(3, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(shallow_lambda_lower(3, 0.5) == doctest::Approx(1.0327367201637284e-2).epsilon(1e-12));
  CHECK(shallow_lambda_lower(3, 0.25) == doctest::Approx(5.7026494782277227e-4).epsilon(1e-12));
  CHECK(shallow_lambda_lower(3, 0.25) < shallow_lambda_lower(3, 0.5));
  CHECK_THROWS_AS(shallow_lambda_lower(2, 0.5), std::domain_error);
  CHECK_THROWS_AS(shallow_lambda_lower(3, 0.0), std::domain_error);
  CHECK_THROWS_AS(shallow_lambda_lower(3, std::numbers::sqrt2), std::domain_error);
}

TEST_CASE("deep lambda lower values") {
  CHECK(deep_lambda_lower(3, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(deep_lambda_lower(3, 0.5) == doctest::Approx(2.5818418004093210e-3).epsilon(1e-12));
  // sqrt(2) is accepted for the deep formula only
  CHECK_NOTHROW(deep_lambda_lower(3, std::numbers::sqrt2));
  CHECK_THROWS_AS(deep_lambda_lower(3, 1.5), std::domain_error);
}

TEST_CASE("deep equals shallow times delta squared") {
  for (int d : {3, 5, 9})
    for (double delta : {0.1, 0.4, 0.9, 1.2})
      CHECK(deep_lambda_lower(d, delta) ==
            doctest::Approx(shallow_lambda_lower(d, delta) * delta * delta).epsilon(1e-13));
}

TEST_CASE("prefactor keeps lambda below delta powers for delta <= 1") {
  // for delta > 1 the prefactor exceeds 1 (log(1/delta) < 0)
  for (int d : {3, 4, 7, 12})
    for (double delta : {0.05, 0.3, 0.8, 1.0}) {
      CHECK(shallow_lambda_lower(d, delta) <= delta * delta * (1.0 + 1e-12));
      CHECK(deep_lambda_lower(d, delta) <= std::pow(delta, 4.0) * (1.0 + 1e-12));
    }
  // beyond delta = 1 the formula stays finite while the base is positive...
  CHECK(std::isfinite(shallow_lambda_lower(12, 1.2)));
  CHECK(shallow_lambda_lower(12, 1.2) > 1.2 * 1.2);
  // ...and degenerates (base <= 0) once delta >= d^{1/d}
  CHECK_THROWS_AS(shallow_lambda_lower(5, 1.4), std::domain_error);
  CHECK_THROWS_AS(deep_lambda_lower(8, std::numbers::sqrt2), std::domain_error);
}

TEST_CASE("uniform bounds values and ordering") {
  const UniformBounds ub = uniform_bounds(3, 10, 0.1);
  CHECK(ub.lambda == doctest::Approx(7.1456953140198969e-6).epsilon(1e-12));
  CHECK(ub.upper == doctest::Approx(0.15174271293851464).epsilon(1e-12));
  for (int d = 3; d <= 10; ++d)
    for (int n : {2, 4, 16, 64, 256, 1024, 10000})
      for (double eps : {0.01, 0.1, 0.3}) {
        const UniformBounds b = uniform_bounds(d, n, eps);
        CHECK(b.lambda <= b.upper);
      }
  CHECK_THROWS_AS(uniform_bounds(3, 1, 0.1), std::domain_error);
  CHECK_THROWS_AS(uniform_bounds(3, 10, 1.0), std::domain_error);
}

TEST_CASE("truncation selection cases") {
  const RegimePlan case1 = select_truncation(3, 1.0, 0, 1.0);
  CHECK(case1.case_id == 1);
  CHECK(case1.R == 1);
  CHECK(case1.N == binomial_checked(2 + 0 + 2, 2));

  const RegimePlan case3 = select_truncation(3, 0.1, 0, 1.0);
  CHECK(case3.case_id == 3);
  CHECK(case3.R == 180);

  CHECK_THROWS_AS(select_truncation(3, 0.0, 0, 1.0), std::domain_error);
  CHECK_THROWS_AS(select_truncation(3, 0.5, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(select_truncation(3, 0.5, 0, 0.0), std::domain_error);
}

TEST_CASE("truncation output satisfies the binomial inequality") {
  const auto check_plan = [](int d, double delta, int beta, double c) {
    const RegimePlan plan = select_truncation(d, delta, beta, c);
    CHECK(plan.case_id != 2);  // case-2 guard is unreachable for delta < sqrt(2)
    if (plan.case_id == 2)     // contractual bound should case 2 ever fire
      CHECK(plan.R <= std::sqrt(static_cast<double>(d)) / 4.0);
    if (plan.case_id != 1) {
      const double threshold = c * std::pow(0.5 * std::pow(delta, 4.0), -0.5 * (d - 2));
      CHECK(static_cast<double>(plan.N) >= threshold * (1.0 - 1e-12));
    }
    // N consistency with the harmonic_dim telescoping
    std::int64_t total = 0;
    for (int r = 0; r <= plan.R; ++r) total += harmonic_dim(2 * r + beta, d);
    CHECK(plan.N == total);
  };
  for (int d : {3, 4, 5})
    for (double delta : {0.08, 0.2, 0.5, 0.9, 1.1, 1.39})
      for (int beta = 0; beta <= 1; ++beta)
        for (double c : {0.5, 1.0, 2.0}) check_plan(d, delta, beta, c);
  // larger dimensions only where the binomial stays in 64-bit range
  for (int d : {6, 8})
    for (double delta : {0.5, 0.9, 1.2})
      for (int beta = 0; beta <= 1; ++beta)
        for (double c : {0.5, 1.0}) check_plan(d, delta, beta, c);
  // out of range: the overflow is reported, never silently wrapped
  CHECK_THROWS_AS(select_truncation(8, 0.05, 0, 1.0), std::overflow_error);
}

TEST_CASE("implicit transform rate values") {
  CHECK(implicit_transform_rate(3, 1, Activation::ReluDerivative) ==
        doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(implicit_transform_rate(3, 1, Activation::ScaledRelu) ==
        doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
  for (int d : {3, 6, 11})
    for (int R : {1, 2, 7, 31}) {
      const double product = implicit_transform_rate(d, R, Activation::ReluDerivative) *
                             implicit_transform_rate(d, R, Activation::ScaledRelu);
      CHECK(product == doctest::Approx(std::pow(R, -3.0)).epsilon(1e-13));
    }
  CHECK_THROWS_AS(implicit_transform_rate(3, 0, Activation::ReluDerivative), std::domain_error);
}

TEST_CASE("shallow width requirement") {
  const WidthRequirement wr = width_requirement_shallow(10, 3, 0.5, 4.0, 0.1, 1.0);
  CHECK_FALSE(wr.saturated);
  CHECK(wr.value == 1784);
  CHECK_THROWS_AS(width_requirement_shallow(10, 3, 0.5, 4.0, 0.1, 0.0), std::domain_error);
  // linearity in the operator norm, up to the ceiling
  const WidthRequirement doubled = width_requirement_shallow(10, 3, 0.5, 8.0, 0.1, 1.0);
  CHECK(std::abs(static_cast<double>(doubled.value) - 2.0 * static_cast<double>(wr.value)) <= 1.0);
  // saturation above 2^31 is reported, not an error
  const WidthRequirement sat = width_requirement_shallow(10, 3, 0.01, 1e9, 0.1, 1.0);
  CHECK(sat.saturated);
  CHECK(sat.value == (std::int64_t{1} << 31));
}

TEST_CASE("deep width requirement") {
  const DeepWidthRequirement wr = width_requirement_deep(8, 3, 1.0, 3, 0.1);
  CHECK(wr.d1_min == 73);
  CHECK(wr.dLm1_min == 44);
  CHECK_FALSE(wr.saturated);
  CHECK_THROWS_AS(width_requirement_deep(8, 3, 1.0, 2, 0.1), std::domain_error);
  // d1 requirement does not increase when separation improves
  std::int64_t prev = std::numeric_limits<std::int64_t>::max();
  for (double delta : {0.2, 0.5, 0.9, 1.2}) {
    const DeepWidthRequirement cur = width_requirement_deep(8, 3, delta, 3, 0.1);
    CHECK(cur.d1_min <= prev);
    prev = cur.d1_min;
  }
}

TEST_CASE("exact spectral product tracks the asymptotic lambda formula") {
  // (N/2) min_{r<=R} c_{2r+1,d}^2 against shallow_lambda_lower: the two
  // expressions stay within a bounded constant of each other over the grid
  std::vector<std::pair<double, double>> samples;
  for (int d : {3, 4, 5, 6})
    for (double delta : {0.2, 0.35, 0.5, 0.7, 1.0}) {
      const RegimePlan plan = select_truncation(d, delta, 1, 1.0);
      double c_min_sq = std::numeric_limits<double>::infinity();
      for (int r = 0; r <= plan.R; ++r) {
        const double c = funk_hecke_coeff(2 * r + 1, d, Activation::ReluDerivative);
        c_min_sq = std::min(c_min_sq, c * c);
      }
      const double exact = 0.5 * static_cast<double>(plan.N) * c_min_sq;
      const double lambda = shallow_lambda_lower(d, delta);
      CHECK(exact > 0.0);
      samples.emplace_back(lambda, exact);
    }
  const FitResult fit = fit_constant(samples);
  for (const auto& [lambda, exact] : samples) {
    const double ratio = exact / lambda;
    CHECK(ratio >= fit.constant / 100.0);
    CHECK(ratio <= fit.constant * 100.0);
  }
}

TEST_CASE("bound report serializes every input and intermediate") {
  BoundReport report{};
  report.lambda_lower = 0.01;
  report.lambda_upper = 0.3;
  report.d1_required = 1784;
  report.regime = select_truncation(3, 0.5, 1, 1.0);
  report.c_min_sq = 1e-3;
  report.d = 3;
  report.n = 10;
  report.delta = 0.5;
  report.delta_prime = 0.6;
  report.eps = 0.1;
  report.width_const = 1.0;
  report.empirical_lambda_min = 0.05;
  report.ratio_lower = 5.0;
  report.ratio_upper = 0.166;
  std::ostringstream out;
  write_bound_report_json(report, out);
  const std::string json = out.str();
  for (const char* key : {"lambda_lower", "lambda_upper", "d1_required", "regime", "c_min_sq",
                          "empirical_lambda_min", "ratio_lower", "ratio_upper", "width_const"})
    CHECK(json.find(key) != std::string::npos);
}
