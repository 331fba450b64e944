#pragma once

#include "wcp/eliminator.hpp"
#include "wcp/factors.hpp"
#include "wcp/geodesy.hpp"
#include "wcp/robust.hpp"
#include "wcp/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wcp {

enum class EstimatorMode { WLS_SPP, PSR_DOP, PSR_DOP_TDCP, PSR_DOP_WCP };

std::string_view mode_name(EstimatorMode mode);
std::optional<EstimatorMode> parse_mode(std::string_view name);

/// Robust kernel attached to each factor family.
struct KernelSet {
  RobustKernel pseudorange = RobustKernel::none();
  RobustKernel doppler = RobustKernel::none();
  RobustKernel tdcp = RobustKernel::none();
  RobustKernel wcp = RobustKernel::cauchy(2.0);
};

struct SolverConfig {
  EstimatorMode mode = EstimatorMode::PSR_DOP_WCP;
  int max_window = 6;            // N_max
  bool chain_windows = true;     // consecutive windows share their boundary epoch
  EliminatorKind eliminator = EliminatorKind::OrthonormalBasisT;
  std::uint64_t eliminator_seed = 1;
  KernelSet kernels;
  int max_iterations = 50;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;  // step norm relative to the anchor position norm
  double function_tolerance = 1e-6;  // relative cost decrease of an accepted step
  double initial_lambda = 1e-4;
  WeightingConfig weighting;
  bool earth_rotation = false;
  KlobucharCoefficients klobuchar;
  double time_of_week_offset = 0.0;  // added to epoch seconds for the ionosphere model

  RangeModel range_model() const { return {earth_rotation ? kEarthRotationRate : 0.0}; }
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientSatellitesError : public DataError {
 public:
  using DataError::DataError;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the damped normal matrix is singular; carries the offending epoch.
class UnobservableError : public SolverError {
 public:
  UnobservableError(std::int64_t epoch_index, const std::string& what)
      : SolverError(what), epoch_index_(epoch_index) {}
  std::int64_t epoch_index() const { return epoch_index_; }

 private:
  std::int64_t epoch_index_;
};

/// Fill absent ionosphere/troposphere values from the broadcast models
/// evaluated at `receiver`. Satellites below the tropo mask get zero delays.
std::vector<SatelliteState> resolve_atmosphere(const Epoch& epoch, const Vec3& receiver,
                                               const SolverConfig& config);

struct WlsSolution {
  ReceiverState state;
  Eigen::MatrixXd covariance;  // (3 + #clocks) square, a priori weights
  int iterations = 0;
  int used = 0;
};

/// Single-epoch Gauss-Newton on corrected pseudoranges. Starts from the
/// Earth's center unless `initial` is given.
WlsSolution solve_wls_epoch(const Epoch& epoch, const SolverConfig& config,
                            std::optional<Vec3> initial = std::nullopt);

/// Unknowns: per-epoch position followed by one clock per constellation that
/// has a factor at that epoch.
struct StateLayout {
  std::vector<std::size_t> offset;
  std::vector<std::vector<Constellation>> clocks;
  std::size_t dimension = 0;

  std::size_t position_index(std::size_t epoch) const { return offset[epoch]; }
  /// Throws if the epoch has no clock for the constellation.
  std::size_t clock_index(std::size_t epoch, Constellation c) const;
};

struct FactorGraph {
  EstimatorMode mode = EstimatorMode::PSR_DOP_WCP;
  std::vector<EpochTime> epochs;
  StateLayout layout;
  std::vector<PseudorangeFactor> pseudoranges;
  std::vector<DopplerVelocityFactor> dopplers;
  std::vector<TdcpFactor> tdcps;
  std::vector<PhaseWindow> windows;
  std::vector<ReceiverState> initial;             // per-epoch WLS (or fallback)
  std::vector<std::optional<DopplerVelocity>> doppler_velocity;
  RangeModel range;

  std::size_t factor_count() const {
    return pseudoranges.size() + dopplers.size() + tdcps.size() + windows.size();
  }
};

/// Split a lock-continuous track of `length` samples into window bounds
/// [begin, end). With chaining, consecutive windows share one epoch; without,
/// windows are disjoint and a trailing single sample is dropped.
std::vector<std::pair<std::size_t, std::size_t>> split_track(std::size_t length, int max_window,
                                                             bool chain);

FactorGraph build_graph(const Dataset& dataset, const SolverConfig& config);

}  // namespace wcp
