#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ntkeig/bounds.hpp"
#include "ntkeig/harness.hpp"
#include "ntkeig/kernel_limit.hpp"
#include "ntkeig/ntk.hpp"
#include "ntkeig/rng.hpp"
#include "ntkeig/specfun.hpp"
#include "ntkeig/sphere.hpp"

namespace {

using namespace ntkeig;

void write_output(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open output file: " + out_path);
  out << body;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu-derivative" || name == "relu_derivative") return Activation::ReluDerivative;
  if (name == "scaled-relu" || name == "scaled_relu") return Activation::ScaledRelu;
  throw CLI::ValidationError("--activation", "must be relu-derivative or scaled-relu");
}

std::vector<int> parse_width_list(const std::string& spec) {
  std::vector<int> widths;
  std::stringstream stream(spec);
  std::string cell;
  while (std::getline(stream, cell, ',')) widths.push_back(std::stoi(cell));
  return widths;
}

std::string kernel_body(const KernelMatrix& kernel, const std::string& format) {
  std::ostringstream body;
  if (format == "json")
    write_kernel_json(kernel, body);
  else
    write_kernel_csv(kernel, body);
  return body.str();
}

int run_gen_data(int dim, int num, std::uint64_t seed, const std::string& out,
                 const std::string& format) {
  const Dataset data = sample_uniform_sphere(dim, num, seed);
  std::ostringstream body;
  if (format == "json")
    write_dataset_json(data, body);
  else
    write_dataset_csv(data, body);
  write_output(out, body.str());
  return 0;
}

struct BoundsShallowArgs {
  std::string data_path;
  int dim = 3;
  int n = 2;
  double delta = 1.0;
  double delta_prime = 0.0;
  double opnorm_sq = 0.0;
  double eps = 0.1;
  double width_const = 1.0;
  double universal_const = 1.0;
  int beta = 1;
  bool empirical = false;
  std::uint64_t seed = 0;
  std::string out;
};

int run_bounds_shallow(const BoundsShallowArgs& args) {
  int d = args.dim, n = args.n;
  double delta = args.delta, delta_prime = args.delta_prime, opnorm_sq = args.opnorm_sq;
  std::optional<Dataset> data;
  if (!args.data_path.empty()) {
    data = load_dataset(args.data_path);
    const SeparationStats sep = separation_stats(*data);
    d = data->dim();
    n = data->size();
    delta = sep.delta;
    delta_prime = sep.delta_prime;
    const double opnorm = operator_norm(*data);
    opnorm_sq = opnorm * opnorm;
  }
  if (delta_prime == 0.0) delta_prime = delta;
  if (opnorm_sq == 0.0) opnorm_sq = 1.0;

  BoundReport report{};
  report.d = d;
  report.n = n;
  report.delta = delta;
  report.delta_prime = delta_prime;
  report.eps = args.eps;
  report.width_const = args.width_const;
  report.lambda_lower = shallow_lambda_lower(d, delta);
  report.lambda_upper = delta_prime;  // implied constant 1
  report.regime = select_truncation(d, delta, args.beta, args.universal_const);
  double c_min_sq = std::numeric_limits<double>::infinity();
  for (int r = 0; r <= report.regime.R; ++r) {
    const double c = funk_hecke_coeff(
        2 * r + args.beta, d,
        args.beta == 1 ? Activation::ReluDerivative : Activation::ScaledRelu);
    c_min_sq = std::min(c_min_sq, c * c);
  }
  report.c_min_sq = c_min_sq;
  const WidthRequirement width =
      width_requirement_shallow(n, d, delta, opnorm_sq, args.eps, args.width_const);
  report.d1_required = width.value;

  if (args.empirical) {
    if (!data) throw std::runtime_error("--empirical needs --data");
    if (width.saturated) throw std::runtime_error("--empirical: width requirement saturated");
    const NtkParts parts =
        shallow_ntk_streamed(d, static_cast<int>(width.value), args.seed, *data);
    const double lambda_min = min_eigenvalue(parts.K);
    report.empirical_lambda_min = lambda_min;
    report.ratio_lower = lambda_min / report.lambda_lower;
    report.ratio_upper = lambda_min / delta_prime;
  }

  std::ostringstream body;
  write_bound_report_json(report, body);
  write_output(args.out, body.str());
  return 0;
}

int run_bounds_deep(int d0, int n, double delta, int layers, double eps, const std::string& out) {
  const double lambda = deep_lambda_lower(d0, delta);
  const DeepWidthRequirement widths = width_requirement_deep(n, d0, delta, layers, eps);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["lambda_lower"] = lambda;
  j["lambda_upper"] = static_cast<double>(layers);  // O(L), implied constant 1
  j["d1_min"] = widths.d1_min;
  j["dLm1_min"] = widths.dLm1_min;
  j["saturated"] = widths.saturated;
  j["inputs"] = {{"d0", d0}, {"n", n}, {"delta", delta}, {"L", layers}, {"eps", eps}};
  write_output(out, j.dump(2) + "\n");
  return 0;
}

int run_bounds_uniform(int d, int n, double eps, const std::string& out) {
  const UniformBounds bounds = uniform_bounds(d, n, eps);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["lambda"] = bounds.lambda;
  j["upper"] = bounds.upper;
  j["inputs"] = {{"d", d}, {"n", n}, {"eps", eps}};
  write_output(out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "NTK smallest-eigenvalue toolkit: finite-width NTK Gram matrices, limiting "
      "kernels, Funk-Hecke spectra, eigenvalue bounds, and verification sweeps"};
  app.require_subcommand(1);

  // ---- gen-data
  auto* gen = app.add_subcommand("gen-data", "Sample a uniform spherical dataset");
  int gen_dim = 3, gen_num = 8;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_format = "json";
  gen->add_option("--dim", gen_dim, "ambient dimension d0")->required();
  gen->add_option("--num", gen_num, "number of points n")->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "output path (default stdout)");
  gen->add_option("--format", gen_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

  // ---- bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate the eigenvalue bound formulas");
  bounds_cmd->require_subcommand(1);

  auto* bs = bounds_cmd->add_subcommand("shallow", "Shallow-network bound report");
  BoundsShallowArgs bs_args;
  bs->add_option("--data", bs_args.data_path, "dataset file (JSON or CSV)");
  bs->add_option("--dim", bs_args.dim, "dimension d (ignored with --data)");
  bs->add_option("--n", bs_args.n, "sample count n (ignored with --data)");
  bs->add_option("--delta", bs_args.delta, "separation delta (ignored with --data)");
  bs->add_option("--delta-prime", bs_args.delta_prime, "min pairwise distance");
  bs->add_option("--opnorm-sq", bs_args.opnorm_sq, "squared operator norm of X");
  bs->add_option("--eps", bs_args.eps, "failure probability");
  bs->add_option("--width-const", bs_args.width_const, "width requirement constant");
  bs->add_option("--universal-const", bs_args.universal_const, "truncation constant C");
  bs->add_option("--beta", bs_args.beta, "harmonic parity (0 or 1)")->check(CLI::Range(0, 1));
  bs->add_flag("--empirical", bs_args.empirical,
               "also compute lambda_min of a shallow NTK at the required width (needs --data)");
  bs->add_option("--seed", bs_args.seed, "network seed for --empirical");
  bs->add_option("--out", bs_args.out, "output path");

  auto* bd = bounds_cmd->add_subcommand("deep", "Deep-network bound report");
  int bd_d0 = 3, bd_n = 8, bd_L = 3;
  double bd_delta = 1.0, bd_eps = 0.1;
  std::string bd_out;
  bd->add_option("--dim", bd_d0, "input dimension d0")->required();
  bd->add_option("--n", bd_n, "sample count n")->required();
  bd->add_option("--delta", bd_delta, "separation delta")->required();
  bd->add_option("--L", bd_L, "network depth L");
  bd->add_option("--eps", bd_eps, "failure probability");
  bd->add_option("--out", bd_out, "output path");

  auto* bu = bounds_cmd->add_subcommand("uniform", "Uniform-data corollary bounds");
  int bu_d = 3, bu_n = 10;
  double bu_eps = 0.1;
  std::string bu_out;
  bu->add_option("--dim", bu_d, "dimension d")->required();
  bu->add_option("--n", bu_n, "sample count n")->required();
  bu->add_option("--eps", bu_eps, "failure probability");
  bu->add_option("--out", bu_out, "output path");

  // ---- kernel
  auto* kernel_cmd = app.add_subcommand("kernel", "Limiting kernel matrices");
  kernel_cmd->require_subcommand(1);
  std::string k_data, k_out, k_format = "csv", k_activation = "relu-derivative";
  std::int64_t k_samples = 100000;
  int k_degree = 64;
  int k_threads = 1;
  std::uint64_t k_seed = 0;
  for (const char* name : {"closed", "mc", "series"}) {
    auto* sub = kernel_cmd->add_subcommand(name);
    sub->add_option("--data", k_data, "dataset file (JSON or CSV)")->required();
    sub->add_option("--activation", k_activation, "relu-derivative|scaled-relu");
    sub->add_option("--out", k_out, "output path");
    sub->add_option("--format", k_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    if (std::string(name) == "mc") {
      sub->add_option("--samples", k_samples, "Monte Carlo sample count");
      sub->add_option("--seed", k_seed, "RNG seed");
      sub->add_option("--threads", k_threads, "worker threads (result is thread-count independent)");
    }
    if (std::string(name) == "series") sub->add_option("--degree", k_degree, "truncation degree R");
  }

  // ---- ntk
  auto* ntk_cmd = app.add_subcommand("ntk", "Finite-width NTK Gram matrices");
  ntk_cmd->require_subcommand(1);

  auto* ns = ntk_cmd->add_subcommand("shallow", "Shallow-network NTK");
  std::string ns_data, ns_out, ns_format = "csv", ns_params;
  int ns_width = 128;
  std::uint64_t ns_seed = 0;
  bool ns_parts = false;
  ns->add_option("--data", ns_data, "dataset file")->required();
  ns->add_option("--width", ns_width, "hidden width d1")->required();
  ns->add_option("--seed", ns_seed, "RNG seed");
  ns->add_option("--out", ns_out, "kernel output path");
  ns->add_option("--format", ns_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  ns->add_option("--save-params", ns_params, "write the parameter container here");
  ns->add_flag("--parts", ns_parts, "also emit K1/K2 next to --out");

  auto* nd = ntk_cmd->add_subcommand("deep", "Deep-network NTK via the layer decomposition");
  std::string nd_data, nd_out, nd_format = "csv", nd_widths = "32,16", nd_params;
  std::uint64_t nd_seed = 0;
  nd->add_option("--data", nd_data, "dataset file")->required();
  nd->add_option("--widths", nd_widths, "hidden widths, comma separated")->required();
  nd->add_option("--seed", nd_seed, "RNG seed");
  nd->add_option("--out", nd_out, "kernel output path");
  nd->add_option("--format", nd_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  nd->add_option("--save-params", nd_params, "write the parameter container here");

  // ---- verify
  auto* verify = app.add_subcommand("verify", "Run a verification experiment from a config");
  std::string v_experiment, v_config, v_out, v_format;
  std::optional<std::uint64_t> v_seed;
  std::optional<int> v_threads;
  verify
      ->add_option("experiment", v_experiment,
                   "shallow-verify|deep-verify|kernel-convergence|separation-scaling|"
                   "funk-hecke-audit|gram-guarantee")
      ->required();
  verify->add_option("--config", v_config, "experiment config JSON")->required();
  verify->add_option("--seed", v_seed, "override the config seed");
  verify->add_option("--out", v_out, "override the config output path");
  verify->add_option("--format", v_format, "override the config format (csv|json)");
  verify->add_option("--threads", v_threads, "override the config thread count");

  // ---- audit
  auto* audit = app.add_subcommand("audit", "Built-in audits");
  auto* audit_fh = audit->add_subcommand("funk-hecke", "Closed form vs quadrature audit");
  int a_dmin = 3, a_dmax = 12, a_rmax = 30;
  double a_tol = 1e-8;
  std::string a_out, a_format = "csv";
  int a_threads = 1;
  audit_fh->add_option("--dmin", a_dmin, "smallest dimension");
  audit_fh->add_option("--dmax", a_dmax, "largest dimension");
  audit_fh->add_option("--rmax", a_rmax, "largest degree");
  audit_fh->add_option("--tol", a_tol, "agreement tolerance");
  audit_fh->add_option("--out", a_out, "output path");
  audit_fh->add_option("--format", a_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  audit_fh->add_option("--threads", a_threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(gen_dim, gen_num, gen_seed, gen_out, gen_format);

    if (bounds_cmd->parsed()) {
      if (bs->parsed()) return run_bounds_shallow(bs_args);
      if (bd->parsed()) return run_bounds_deep(bd_d0, bd_n, bd_delta, bd_L, bd_eps, bd_out);
      if (bu->parsed()) return run_bounds_uniform(bu_d, bu_n, bu_eps, bu_out);
    }

    if (kernel_cmd->parsed()) {
      const Dataset data = load_dataset(k_data);
      const Activation psi = parse_activation(k_activation);
      const CLI::App* sub = kernel_cmd->get_subcommands().front();
      KernelMatrix kernel = [&] {
        if (sub->get_name() == "closed") return limiting_kernel_matrix(psi, data);
        if (sub->get_name() == "mc")
          return limiting_kernel_mc(psi, data, k_samples, k_seed, k_threads).kernel;
        Matrix entries(data.size(), data.size());
        const Matrix gram = data.gram();
        for (int i = 0; i < data.size(); ++i)
          for (int k = i; k < data.size(); ++k) {
            const double value = mercer_series_entry(psi, data.dim(), gram(i, k), k_degree);
            entries(i, k) = value;
            entries(k, i) = value;
          }
        return KernelMatrix(std::move(entries));
      }();
      write_output(k_out, kernel_body(kernel, k_format));
      std::ostringstream eig;
      write_eig_report_json(min_eigenvalue_report(kernel), eig);
      std::cerr << eig.str();
      return 0;
    }

    if (ntk_cmd->parsed()) {
      if (ns->parsed()) {
        const Dataset data = load_dataset(ns_data);
        const ShallowParams params = init_shallow(data.dim(), ns_width, ns_seed);
        const NtkParts parts = shallow_ntk(params, data);
        if (!ns_params.empty()) {
          std::ofstream pout(ns_params, std::ios::binary);
          save_params_binary(params, pout);
        }
        write_output(ns_out, kernel_body(parts.K, ns_format));
        if (ns_parts && !ns_out.empty()) {
          write_output(ns_out + ".k1", kernel_body(parts.K1, ns_format));
          write_output(ns_out + ".k2", kernel_body(parts.K2, ns_format));
        }
        std::ostringstream eig;
        write_eig_report_json(min_eigenvalue_report(parts.K), eig);
        std::cerr << eig.str();
        return 0;
      }
      if (nd->parsed()) {
        const Dataset data = load_dataset(nd_data);
        std::vector<int> widths = parse_width_list(nd_widths);
        widths.insert(widths.begin(), data.dim());
        widths.push_back(1);
        const DeepParams params = init_deep(widths, nd_seed);
        const KernelMatrix kernel = deep_ntk_decomposed(params, data);
        if (!nd_params.empty()) {
          std::ofstream pout(nd_params, std::ios::binary);
          save_params_binary(params, pout);
        }
        write_output(nd_out, kernel_body(kernel, nd_format));
        std::ostringstream eig;
        write_eig_report_json(min_eigenvalue_report(kernel), eig);
        std::cerr << eig.str();
        return 0;
      }
    }

    if (verify->parsed()) {
      ExperimentConfig cfg = load_experiment_config(v_config);
      if (cfg.kind != experiment_kind_from_string(v_experiment))
        throw ConfigError("config experiment kind does not match the requested experiment");
      if (v_seed) cfg.seed = *v_seed;
      if (v_threads) cfg.threads = *v_threads;
      if (!v_out.empty()) cfg.out_path = v_out;
      if (!v_format.empty()) {
        if (v_format != "csv" && v_format != "json")
          throw ConfigError("format must be csv or json");
        cfg.format = v_format;
      }
      const SweepReport report = run_experiment(cfg);
      std::ostringstream body;
      if (cfg.format == "json")
        write_sweep_json(report, body);
      else
        write_sweep_csv(report, body);
      write_output(cfg.out_path, body.str());
      for (const auto& check : report.checks)
        std::cerr << (check.pass ? "[pass] " : "[FAIL] ") << check.name << " (observed "
                  << check.observed << ", threshold " << check.threshold << ")\n";
      return report.all_pass ? 0 : 1;
    }

    if (audit->parsed() && audit_fh->parsed()) {
      ExperimentConfig cfg;
      cfg.kind = ExperimentKind::FunkHeckeAudit;
      for (int d = a_dmin; d <= a_dmax; ++d) cfg.d0_grid.push_back(d);
      cfg.r_max = a_rmax;
      cfg.tol = a_tol;
      cfg.threads = a_threads;
      const SweepReport report = run_experiment(cfg);
      std::ostringstream body;
      if (a_format == "json")
        write_sweep_json(report, body);
      else
        write_sweep_csv(report, body);
      write_output(a_out, body.str());
      for (const auto& check : report.checks)
        std::cerr << (check.pass ? "[pass] " : "[FAIL] ") << check.name << "\n";
      return report.all_pass ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
