#include "ntkeig/bounds.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ntkeig {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr std::int64_t kSaturation = std::int64_t{1} << 31;

void check_dim(int d, const char* who) {
  if (d < 3) throw std::domain_error(std::string(who) + ": requires d >= 3");
}

double prefactor(int d, double delta) {
  const double base = 1.0 + d * std::log(1.0 / delta) / std::log(static_cast<double>(d));
  // for delta > d^{1/d} the asymptotic prefactor degenerates (base <= 0)
  if (!(base > 0.0))
    throw std::domain_error("lambda formula degenerates: delta too close to sqrt(2) for this d");
  return 1.0 / (base * base * base);
}

// width requirements are at least one unit; formulas can go nonpositive when
// lambda exceeds n
std::int64_t saturating_ceil(double value, bool& saturated) {
  const double up = std::ceil(value);
  if (up >= static_cast<double>(kSaturation)) {
    saturated = true;
    return kSaturation;
  }
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(up));
}

}  // namespace

double shallow_lambda_lower(int d, double delta) {
  check_dim(d, "shallow_lambda_lower");
  if (!(delta > 0.0 && delta < kSqrt2))
    throw std::domain_error("shallow_lambda_lower: delta must lie in (0, sqrt(2))");
  return prefactor(d, delta) * delta * delta;
}

double deep_lambda_lower(int d0, double delta) {
  check_dim(d0, "deep_lambda_lower");
  if (!(delta > 0.0 && delta <= kSqrt2))
    throw std::domain_error("deep_lambda_lower: delta must lie in (0, sqrt(2)]");
  return prefactor(d0, delta) * delta * delta * delta * delta;
}

UniformBounds uniform_bounds(int d, int n, double eps) {
  check_dim(d, "uniform_bounds");
  if (n < 2) throw std::domain_error("uniform_bounds: requires n >= 2");
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("uniform_bounds: eps must lie in (0, 1)");
  const double base = 1.0 + std::log(n / eps) / std::log(static_cast<double>(d));
  const double lambda =
      std::pow(eps * eps / std::pow(static_cast<double>(n), 4.0), 1.0 / (d - 1)) /
      (base * base * base);
  const double upper =
      std::pow(std::log(1.0 / eps) / (static_cast<double>(n) * n), 1.0 / (d - 1));
  return {lambda, upper};
}

RegimePlan select_truncation(int d, double delta, int beta, double universal_const) {
  check_dim(d, "select_truncation");
  if (!(delta > 0.0 && delta < kSqrt2))
    throw std::domain_error("select_truncation: delta must lie in (0, sqrt(2))");
  if (beta != 0 && beta != 1) throw std::invalid_argument("select_truncation: beta must be 0 or 1");
  if (!(universal_const > 0.0))
    throw std::domain_error("select_truncation: universal_const must be positive");

  const double c = universal_const;
  const double lhs_threshold = c * std::pow(0.5 * std::pow(delta, 4.0), -0.5 * (d - 2));

  int case_id;
  int R;
  if (static_cast<double>(d) >= lhs_threshold) {
    case_id = 1;
    R = 1;
  } else if (std::sqrt(static_cast<double>(d)) * std::log(static_cast<double>(d)) >=
             (8.0 * std::log1p(c) + 16.0 * d) * std::log(2.0 / delta)) {
    case_id = 2;
    R = static_cast<int>(
        std::ceil((std::log1p(c) + 2.0 * d * std::log(2.0 / delta)) / std::log(static_cast<double>(d))));
  } else {
    case_id = 3;
    const double raw =
        (1.0 + 2.0 * c) * d * std::pow(2.0 / delta, 2.0 * (d - 2) / (d - 1.0));
    if (raw > 1e9) throw std::overflow_error("select_truncation: truncation degree out of range");
    R = static_cast<int>(std::ceil(raw));
  }
  R = std::max(R, 1);
  const std::int64_t N = binomial_checked(2ll * R + beta + d - 1, d - 1);
  return {case_id, R, N, beta, universal_const};
}

double implicit_transform_rate(int d, int R, Activation psi) {
  check_dim(d, "implicit_transform_rate");
  if (R < 1) throw std::domain_error("implicit_transform_rate: requires R >= 1");
  const double dr = static_cast<double>(d) + R;
  const double rate = std::pow(static_cast<double>(R), -1.5);
  if (psi == Activation::ReluDerivative) return std::sqrt(dr) / std::sqrt(static_cast<double>(d)) * rate;
  return std::sqrt(static_cast<double>(d)) / std::sqrt(dr) * rate;
}

WidthRequirement width_requirement_shallow(int n, int d, double delta, double opnorm_sq,
                                           double eps, double constant) {
  if (n < 1) throw std::domain_error("width_requirement_shallow: requires n >= 1");
  if (!(opnorm_sq > 0.0))
    throw std::domain_error("width_requirement_shallow: opnorm_sq must be positive");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::domain_error("width_requirement_shallow: eps must lie in (0, 1)");
  if (!(constant > 0.0))
    throw std::domain_error("width_requirement_shallow: constant must be positive");
  const double lambda = shallow_lambda_lower(d, delta);
  bool saturated = false;
  const std::int64_t value =
      saturating_ceil(constant * opnorm_sq / lambda * std::log(n / eps), saturated);
  return {value, saturated};
}

DeepWidthRequirement width_requirement_deep(int n, int d0, double delta, int L, double eps,
                                            const DeepWidthConstants& consts) {
  if (n < 1) throw std::domain_error("width_requirement_deep: requires n >= 1");
  if (L < 3) throw std::domain_error("width_requirement_deep: requires L >= 3");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::domain_error("width_requirement_deep: eps must lie in (0, 1)");
  if (!(consts.d1_const > 0.0 && consts.dLm1_const > 0.0))
    throw std::domain_error("width_requirement_deep: constants must be positive");
  const double lambda = deep_lambda_lower(d0, delta);
  bool saturated = false;
  const double n_over_lambda = n / lambda;
  const std::int64_t d1 = saturating_ceil(
      consts.d1_const * n_over_lambda * std::log(n_over_lambda) * std::log(n / eps), saturated);
  const std::int64_t dLm1 = saturating_ceil(
      consts.dLm1_const * std::pow(2.0, L) * std::log(static_cast<double>(n) * L / eps), saturated);
  return {d1, dLm1, saturated};
}

void write_bound_report_json(const BoundReport& report, std::ostream& out) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["lambda_lower"] = report.lambda_lower;
  j["lambda_upper"] = report.lambda_upper;
  j["d1_required"] = report.d1_required;
  j["regime"] = {{"case_id", report.regime.case_id},
                 {"R", report.regime.R},
                 {"N", report.regime.N},
                 {"beta", report.regime.beta},
                 {"universal_const", report.regime.universal_const}};
  j["c_min_sq"] = report.c_min_sq;
  j["inputs"] = {{"d", report.d},       {"n", report.n},     {"delta", report.delta},
                 {"delta_prime", report.delta_prime}, {"eps", report.eps},
                 {"width_const", report.width_const}};
  if (report.empirical_lambda_min) {
    j["empirical_lambda_min"] = *report.empirical_lambda_min;
    j["ratio_lower"] = *report.ratio_lower;
    j["ratio_upper"] = *report.ratio_upper;
  }
  out << j.dump(2) << '\n';
}

}  // namespace ntkeig
