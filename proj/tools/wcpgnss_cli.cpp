#include "wcp/config.hpp"
#include "wcp/eliminator.hpp"
#include "wcp/io.hpp"
#include "wcp/metrics.hpp"
#include "wcp/simulator.hpp"
#include "wcp/solver.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace wcp;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

struct SolverFlags {
  std::string config_file;
  std::string mode;
  std::optional<int> n_max;
  std::string eliminator;
  std::optional<long long> eliminator_seed;
  std::string wcp_kernel;
  std::optional<double> wcp_k;
  std::optional<int> max_iterations;
  std::vector<std::string> settings;

  void attach(CLI::App* app, bool with_mode = true) {
    app->add_option("--config", config_file, "solver key=value file")->check(CLI::ExistingFile);
    if (with_mode) app->add_option("--mode", mode, "wls | psr-dop | psr-dop-tdcp | psr-dop-wcp");
    app->add_option("--n-max", n_max, "maximum window size")->check(CLI::Range(2, 1000));
    app->add_option("--eliminator", eliminator, "orthonormal | random-unitary | tdcp");
    app->add_option("--eliminator-seed", eliminator_seed)->check(CLI::NonNegativeNumber);
    app->add_option("--wcp-kernel", wcp_kernel, "none | huber | cauchy");
    app->add_option("--wcp-k", wcp_k, "window kernel parameter")->check(CLI::PositiveNumber);
    app->add_option("--max-iterations", max_iterations)->check(CLI::Range(1, 100000));
    app->add_option("--set", settings, "extra solver key=value");
  }

  SolverConfig build() const {
    SolverConfig c = config_file.empty() ? SolverConfig{} : read_solver_config(std::filesystem::path(config_file));
    for (const std::string& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
      apply_solver_setting(c, std::string_view(s).substr(0, eq), std::string_view(s).substr(eq + 1));
    }
    if (!mode.empty()) apply_solver_setting(c, "mode", mode);
    if (n_max) c.max_window = *n_max;
    if (!eliminator.empty()) apply_solver_setting(c, "eliminator", eliminator);
    if (eliminator_seed) c.eliminator_seed = static_cast<std::uint64_t>(*eliminator_seed);
    if (!wcp_kernel.empty()) apply_solver_setting(c, "wcp_kernel", wcp_kernel);
    if (wcp_k) c.kernels.wcp.k = *wcp_k;
    if (max_iterations) c.max_iterations = *max_iterations;
    c.validate();
    return c;
  }
};

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void print_metrics(const ErrorMetrics& m) {
  std::cout << "MEAN  " << fixed(m.mean_2d) << '\n'
            << "STD   " << fixed(m.std_2d) << '\n'
            << "Max   " << fixed(m.max_2d) << '\n'
            << "MEAN3D " << fixed(m.mean_3d) << '\n';
}

void print_divergence(const SolveReport& r) {
  std::cerr << "divergence: solver did not converge (" << reason_name(r.reason) << ") after "
            << r.iterations << " iterations; final gradient " << r.final_gradient << ", cost "
            << r.initial_cost << " -> " << r.final_cost << '\n';
}

int run_simulate(const std::string& preset, const std::string& config_file,
                 const std::vector<std::string>& settings, std::optional<long long> seed,
                 const std::string& out_dataset, const std::string& out_truth,
                 const std::string& out_injections) {
  ScenarioConfig sc = scenario_preset(preset);
  if (!config_file.empty()) sc = read_scenario_config(std::filesystem::path(config_file), sc);
  for (const std::string& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    apply_scenario_setting(sc, std::string_view(s).substr(0, eq), std::string_view(s).substr(eq + 1));
  }
  if (seed) sc.seed = static_cast<std::uint64_t>(*seed);
  sc.validate();
  const Simulation sim = generate(sc);
  write_dataset(sim.dataset, std::filesystem::path(out_dataset));
  if (!out_truth.empty()) write_trajectory(sim.truth, std::filesystem::path(out_truth));
  if (!out_injections.empty()) write_injections(sim.injections, std::filesystem::path(out_injections));
  std::cout << "epochs " << sim.dataset.epochs.size() << ", injections " << sim.injections.size()
            << '\n';
  return kOk;
}

int run_solve(const SolverFlags& flags, const std::string& dataset_path, const std::string& out_traj,
              const std::string& out_report, const std::string& truth_path) {
  const SolverConfig config = flags.build();
  const Dataset dataset = read_dataset(std::filesystem::path(dataset_path));
  const SolveReport report = run_estimator(dataset, config);
  if (!out_traj.empty()) write_trajectory(report.trajectory, std::filesystem::path(out_traj));
  if (!out_report.empty()) write_report(report, std::filesystem::path(out_report));
  std::cout << "mode " << mode_name(report.mode) << ", " << reason_name(report.reason) << ", "
            << report.iterations << " iterations, cost " << report.initial_cost << " -> "
            << report.final_cost << '\n';
  if (!truth_path.empty()) print_metrics(evaluate(report.trajectory, read_trajectory(std::filesystem::path(truth_path))));
  if (!report.converged()) {
    print_divergence(report);
    return kSolver;
  }
  return kOk;
}

int run_compare(const SolverFlags& flags, const std::string& dataset_path, const std::string& truth_path) {
  const SolverConfig base = flags.build();
  const Dataset dataset = read_dataset(std::filesystem::path(dataset_path));
  const Trajectory truth = read_trajectory(std::filesystem::path(truth_path));
  const EstimatorMode modes[] = {EstimatorMode::WLS_SPP, EstimatorMode::PSR_DOP,
                                 EstimatorMode::PSR_DOP_TDCP, EstimatorMode::PSR_DOP_WCP};
  std::vector<ErrorMetrics> rows;
  bool all_converged = true;
  for (EstimatorMode m : modes) {
    SolverConfig c = base;
    c.mode = m;
    const SolveReport r = run_estimator(dataset, c);
    if (!r.converged()) {
      all_converged = false;
      std::cerr << mode_name(m) << ": ";
      print_divergence(r);
    }
    rows.push_back(evaluate(r.trajectory, truth));
  }
  std::printf("%-6s %12s %12s %12s %12s\n", "", "WLS", "Sol1", "Sol2", "Sol3");
  auto line = [&](const char* name, auto field) {
    std::printf("%-6s", name);
    for (const ErrorMetrics& m : rows) std::printf(" %12s", fixed(field(m)).c_str());
    std::printf("\n");
  };
  line("MEAN", [](const ErrorMetrics& m) { return m.mean_2d; });
  line("STD", [](const ErrorMetrics& m) { return m.std_2d; });
  line("Max", [](const ErrorMetrics& m) { return m.max_2d; });
  return all_converged ? kOk : kSolver;
}

int run_matrix_dump(const std::string& kind_name, int n, long long seed) {
  auto kind = parse_eliminator(kind_name);
  if (!kind) throw std::invalid_argument("unknown eliminator kind '" + kind_name + "'");
  const EliminatorMatrix e = make_eliminator(*kind, n, static_cast<std::uint64_t>(seed));
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.cols(); ++c)
      std::cout << (c ? "," : "") << format_double(e.entries(r, c));
    std::cout << '\n';
  }
  return kOk;
}

int run_plot_data(const SolverFlags& flags, const std::string& dataset_path,
                  const std::string& truth_path, const std::string& errors_path,
                  const std::string& residuals_path, const std::string& histogram_path, int bins,
                  double range) {
  const SolverConfig config = flags.build();
  const Dataset dataset = read_dataset(std::filesystem::path(dataset_path));
  const SolveReport report = run_estimator(dataset, config);

  if (!errors_path.empty()) {
    if (truth_path.empty()) throw std::invalid_argument("--errors requires --truth");
    const ErrorMetrics m = evaluate(report.trajectory, read_trajectory(std::filesystem::path(truth_path)));
    std::ofstream out(errors_path);
    out << "epoch_index,east_m,north_m,up_m,horizontal_m,error_3d_m\n";
    for (const EpochError& e : m.series)
      out << e.epoch_index << ',' << format_double(e.east) << ',' << format_double(e.north) << ','
          << format_double(e.up) << ',' << format_double(e.horizontal) << ','
          << format_double(e.three_d) << '\n';
  }
  const CostBreakdown breakdown = marginal_cost_breakdown(report);
  if (!residuals_path.empty()) {
    std::ofstream out(residuals_path);
    out << "type,factor,sat,epoch_index,component,whitened,weight,reweighted\n";
    for (const ResidualEntry& e : breakdown.entries)
      out << factor_type_name(e.type) << ',' << e.factor << ','
          << (e.type == FactorType::Doppler ? std::string() : e.sat.str()) << ',' << e.epoch_index
          << ',' << e.component << ',' << format_double(e.whitened) << ','
          << format_double(e.weight) << ',' << format_double(e.reweighted()) << '\n';
  }
  if (!histogram_path.empty()) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    std::size_t below = 0, above = 0;
    const double width = 2.0 * range / bins;
    for (const ResidualEntry& e : breakdown.of(FactorType::Wcp)) {
      const double v = e.reweighted();
      if (v < -range) ++below;
      else if (v >= range) ++above;
      else counts[std::min<std::size_t>(static_cast<std::size_t>((v + range) / width), counts.size() - 1)]++;
    }
    std::ofstream out(histogram_path);
    out << "bin_low,bin_high,count\n";
    out << "-inf," << format_double(-range) << ',' << below << '\n';
    for (int b = 0; b < bins; ++b)
      out << format_double(-range + b * width) << ',' << format_double(-range + (b + 1) * width)
          << ',' << counts[static_cast<std::size_t>(b)] << '\n';
    out << format_double(range) << ",inf," << above << '\n';
  }
  return report.converged() ? kOk : kSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Window carrier-phase GNSS factor-graph positioning"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset with ground truth");
  std::string preset = "clean", scenario_file, out_dataset, out_truth, out_injections;
  std::vector<std::string> scenario_settings;
  std::optional<long long> scenario_seed;
  simulate->add_option("--preset", preset, "clean | urban | heavy-slip")
      ->check(CLI::IsMember({"clean", "urban", "heavy-slip"}));
  simulate->add_option("--config", scenario_file, "scenario key=value file")->check(CLI::ExistingFile);
  simulate->add_option("--set", scenario_settings, "extra scenario key=value");
  simulate->add_option("--seed", scenario_seed)->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", out_dataset, "dataset output")->required();
  simulate->add_option("--truth", out_truth, "ground-truth trajectory output");
  simulate->add_option("--injections", out_injections, "injection log output");

  auto* solve_cmd = app.add_subcommand("solve", "estimate a trajectory from a dataset");
  SolverFlags solve_flags;
  std::string dataset_path, out_traj, out_report, truth_path;
  solve_flags.attach(solve_cmd);
  solve_cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", out_traj, "trajectory output");
  solve_cmd->add_option("--report", out_report, "solve report output");
  solve_cmd->add_option("--truth", truth_path, "optional truth for a metrics summary")->check(CLI::ExistingFile);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "horizontal error metrics against truth");
  std::string eval_traj, eval_truth;
  evaluate_cmd->add_option("--trajectory", eval_traj)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--truth", eval_truth)->required()->check(CLI::ExistingFile);

  auto* compare = app.add_subcommand("compare", "run all four estimators and tabulate errors");
  SolverFlags compare_flags;
  std::string compare_dataset, compare_truth;
  compare_flags.attach(compare, false);
  compare->add_option("--dataset", compare_dataset)->required()->check(CLI::ExistingFile);
  compare->add_option("--truth", compare_truth)->required()->check(CLI::ExistingFile);

  auto* dump = app.add_subcommand("matrix-dump", "print an eliminator matrix as CSV");
  std::string dump_kind = "tdcp";
  int dump_n = 5;
  long long dump_seed = 1;
  dump->add_option("--kind", dump_kind, "tdcp | random-unitary | orthonormal")
      ->check(CLI::IsMember({"tdcp", "d", "random-unitary", "g", "orthonormal", "s"}));
  dump->add_option("--n", dump_n)->check(CLI::Range(2, 1000));
  dump->add_option("--seed", dump_seed)->check(CLI::NonNegativeNumber);

  auto* plot = app.add_subcommand("plot-data", "per-epoch errors and window residual histograms");
  SolverFlags plot_flags;
  std::string plot_dataset, plot_truth, plot_errors, plot_residuals, plot_hist;
  int plot_bins = 40;
  double plot_range = 8.0;
  plot_flags.attach(plot);
  plot->add_option("--dataset", plot_dataset)->required()->check(CLI::ExistingFile);
  plot->add_option("--truth", plot_truth)->check(CLI::ExistingFile);
  plot->add_option("--errors", plot_errors, "per-epoch error CSV");
  plot->add_option("--residuals", plot_residuals, "whitened residual CSV");
  plot->add_option("--histogram", plot_hist, "window residual histogram CSV");
  plot->add_option("--bins", plot_bins)->check(CLI::Range(1, 10000));
  plot->add_option("--range", plot_range, "histogram half-width")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate)
      return run_simulate(preset, scenario_file, scenario_settings, scenario_seed, out_dataset,
                          out_truth, out_injections);
    if (*solve_cmd) return run_solve(solve_flags, dataset_path, out_traj, out_report, truth_path);
    if (*evaluate_cmd) {
      print_metrics(evaluate(read_trajectory(std::filesystem::path(eval_traj)),
                             read_trajectory(std::filesystem::path(eval_truth))));
      return kOk;
    }
    if (*compare) return run_compare(compare_flags, compare_dataset, compare_truth);
    if (*dump) return run_matrix_dump(dump_kind, dump_n, dump_seed);
    if (*plot)
      return run_plot_data(plot_flags, plot_dataset, plot_truth, plot_errors, plot_residuals,
                           plot_hist, plot_bins, plot_range);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
