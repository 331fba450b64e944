#pragma once

#include "wcp/graph.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace wcp {

enum class FactorType { Pseudorange, Doppler, Tdcp, Wcp };
std::string_view factor_type_name(FactorType type);

enum class ConvergenceReason {
  GradientTolerance,
  StepTolerance,
  FunctionTolerance,
  MaxIterations,
  DampingOverflow,  // no cost-decreasing step found even at huge damping
  PerEpoch,         // WLS_SPP: no batch problem was solved
};
std::string_view reason_name(ConvergenceReason reason);

struct FactorCosts {
  double pseudorange = 0.0;
  double doppler = 0.0;
  double tdcp = 0.0;
  double wcp = 0.0;

  double total() const { return pseudorange + doppler + tdcp + wcp; }
  double& operator[](FactorType type);
};

/// One whitened residual component at the final state.
struct ResidualEntry {
  FactorType type = FactorType::Pseudorange;
  std::size_t factor = 0;           // index within the graph's list of that type
  SatelliteId sat;                  // unset for Doppler factors
  std::int64_t epoch_index = 0;     // first epoch the factor touches
  std::size_t component = 0;
  double whitened = 0.0;
  double weight = 1.0;              // IRLS weight of the whole factor

  double reweighted() const;
};

struct WindowDiagnostics {
  SatelliteId sat;
  std::int64_t first_epoch_index = 0;
  std::size_t size = 0;
  double norm = 0.0;    // whitened residual norm
  double weight = 1.0;  // IRLS weight
};

struct SolveReport {
  EstimatorMode mode = EstimatorMode::PSR_DOP_WCP;
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  FactorCosts final_costs;
  ConvergenceReason reason = ConvergenceReason::MaxIterations;
  double final_gradient = 0.0;  // max-abs
  std::vector<double> cost_history;  // after each accepted step, starting with the initial cost
  Trajectory trajectory;
  std::vector<WindowDiagnostics> windows;
  std::vector<ResidualEntry> residuals;

  bool converged() const {
    return reason == ConvergenceReason::GradientTolerance ||
           reason == ConvergenceReason::StepTolerance ||
           reason == ConvergenceReason::FunctionTolerance || reason == ConvergenceReason::PerEpoch;
  }
};

/// Levenberg-Marquardt on the whitened, robust-reweighted factor graph,
/// starting from the graph's initial states.
SolveReport solve(const FactorGraph& graph, const SolverConfig& config);

/// Same, from explicit per-epoch initial states (one per graph epoch).
SolveReport solve(const FactorGraph& graph, const SolverConfig& config,
                  std::span<const ReceiverState> initial);

/// build_graph followed by solve.
SolveReport run_estimator(const Dataset& dataset, const SolverConfig& config);

struct CostBreakdown {
  FactorCosts costs;
  std::vector<ResidualEntry> entries;
  std::vector<WindowDiagnostics> windows;

  std::vector<ResidualEntry> of(FactorType type) const;
};

CostBreakdown marginal_cost_breakdown(const SolveReport& report);

}  // namespace wcp
