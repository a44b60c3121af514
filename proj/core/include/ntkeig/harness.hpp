#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ntkeig {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind {
  ShallowVerify,
  DeepVerify,
  KernelConvergence,
  SeparationScaling,
  FunkHeckeAudit,
  GramGuarantee,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Every universal constant the bound formulas suppress, spelled out so no
// report can silently present a bound as sharp.
struct ConstantsRecord {
  double width_const = 1.0;      // shallow width requirement
  double d1_const = 1.0;         // deep width requirement, first layer
  double dLm1_const = 1.0;       // deep width requirement, last hidden layer
  double cap_const = 1.0;        // spherical cap upper bound
  double universal_const = 1.0;  // truncation selection C
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SeparationScaling;
  std::vector<int> n_grid;
  std::vector<int> d0_grid;
  std::vector<int> width_grid;
  std::vector<int> L_grid;
  std::vector<double> delta_targets;  // minimum-separation targets (resampled to meet)
  int trials = 1;
  double eps = 0.1;
  std::uint64_t seed = 0;
  ConstantsRecord constants;
  std::int64_t mc_samples = 100000;
  int r_max = 30;
  double tol = 1e-8;
  std::string out_path;
  std::string format = "csv";
  int threads = 1;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ConfigError when a grid the experiment kind relies on is empty,
// trials < 1, or eps is outside (0, 1).
void validate_config(const ExperimentConfig& cfg);

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

struct FittedConstant {
  std::string name;
  double value;
  double residual_spread;
};

struct CheckResult {
  std::string name;
  bool pass;
  double observed;
  double threshold;
};

// Per-cell numeric records under a fixed, documented column schema plus the
// fitted constants and pass/fail flags. The CSV body (columns + rows) is
// byte-identical across reruns of the same config; wall time and version
// live in the metadata only.
struct SweepReport {
  ExperimentKind kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<FittedConstant> fitted_constants;
  std::vector<CheckResult> checks;
  bool all_pass = true;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

SweepReport run_experiment(const ExperimentConfig& cfg);

void write_sweep_csv(const SweepReport& report, std::ostream& out);
void write_sweep_json(const SweepReport& report, std::ostream& out);

// Least-squares fit of observed = c * predicted in log space over positive
// samples (predicted, observed); needs at least 3 samples.
struct FitResult {
  double constant;
  double residual_spread;
};
FitResult fit_constant(std::span<const std::pair<double, double>> samples);

// One-sided Clopper-Pearson upper confidence bound on a binomial success
// probability, via bisection on the exact CDF.
double binomial_upper_confidence(int violations, int trials, double confidence);

}  // namespace ntkeig
