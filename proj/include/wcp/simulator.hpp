#pragma once

#include "wcp/factors.hpp"
#include "wcp/geodesy.hpp"
#include "wcp/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wcp {

/// Walker-style shell of circular orbits.
struct OrbitalShell {
  Constellation constellation = Constellation::GPS;
  int planes = 6;
  int per_plane = 5;
  double radius = 2.656e7;                         // m
  double inclination = 55.0 * 3.14159265358979323846 / 180.0;  // rad
  int phasing = 1;                                 // Walker F
  double wavelength = kGpsL1Wavelength;
  int first_prn = 1;
};

OrbitalShell gps_shell();
OrbitalShell beidou_shell();

enum class TrajectoryKind { Static, ConstantVelocity, WaypointSpline };
std::string_view trajectory_name(TrajectoryKind kind);
std::optional<TrajectoryKind> parse_trajectory(std::string_view name);

struct ScenarioConfig {
  int epochs = 60;
  double rate = 1.0;  // Hz
  std::vector<OrbitalShell> shells{gps_shell()};
  int max_satellites = 0;  // 0 keeps every satellite above the mask
  double elevation_mask = 10.0 * 3.14159265358979323846 / 180.0;

  GeodeticPosition origin{22.3193 * 3.14159265358979323846 / 180.0,
                          114.1694 * 3.14159265358979323846 / 180.0, 10.0};
  TrajectoryKind trajectory = TrajectoryKind::Static;
  Vec3 velocity_enu{5.0, 0.0, 0.0};  // m/s, constant-velocity mode
  std::vector<Vec3> waypoints_enu;   // spline mode; empty selects a built-in loop

  // Zenith noise; scaled by the estimator's elevation/SNR variance model.
  double sigma_pseudorange = 0.0;
  double sigma_phase = 0.0;
  double sigma_doppler = 0.0;

  double outlier_probability = 0.0;  // per (epoch, satellite) pseudorange
  double outlier_min = 10.0;
  double outlier_max = 50.0;
  double doppler_outlier_probability = 0.0;
  double doppler_outlier_max = 0.5;  // m/s, symmetric

  double slip_probability = 0.0;  // per track per epoch
  int slip_min_cycles = 1;
  int slip_max_cycles = 10;
  bool flag_slips = false;  // set loss-of-lock on injected slips

  double snr_zenith_gain = 20.0;  // snr = snr_horizon + gain * sin(el) + N(0, snr_noise)
  double snr_horizon = 30.0;
  double snr_noise = 1.0;

  double receiver_clock_bias = 3.0e4;  // m
  double receiver_clock_drift = 0.2;   // m/s
  double inter_system_bias = 15.0;     // m, added per extra constellation
  double satellite_clock_max = 3.0e4;  // m, uniform bias magnitude
  double satellite_drift_max = 0.01;   // m/s
  double phase_correction_max = 0.0;   // m, uniform per measurement

  bool atmosphere = true;
  KlobucharCoefficients klobuchar = default_klobuchar();
  double time_of_week_offset = 345600.0;
  bool earth_rotation = false;

  std::uint64_t seed = 1;

  static KlobucharCoefficients default_klobuchar();
  /// Throws std::invalid_argument for out-of-range values.
  void validate() const;
};

/// Named scenarios: "clean", "urban", "heavy-slip".
ScenarioConfig scenario_preset(std::string_view name);

enum class InjectionType { NlosOutlier, DopplerOutlier, CycleSlip, FlaggedCycleSlip };
std::string_view injection_name(InjectionType type);
std::optional<InjectionType> parse_injection(std::string_view name);

struct InjectionRecord {
  std::int64_t epoch_index = 0;
  SatelliteId sat;
  InjectionType type = InjectionType::NlosOutlier;
  double magnitude = 0.0;  // m, m/s or cycles

  bool operator==(const InjectionRecord&) const = default;
};

struct Simulation {
  Dataset dataset;
  Trajectory truth;
  std::vector<InjectionRecord> injections;
};

/// Deterministic per seed. Noise-free measurements satisfy the estimator's
/// models exactly at the true states.
Simulation generate(const ScenarioConfig& scenario);

/// Shift the phase of `sat` at `epoch_index` and every following epoch of the
/// same continuous track by `cycles`. The flagged variant also raises the
/// loss-of-lock indicator at `epoch_index`.
InjectionRecord inject_cycle_slip(Dataset& dataset, const SatelliteId& sat,
                                  std::int64_t epoch_index, int cycles, bool flagged = false);

/// Phase in cycles whose product with `wavelength` rounds to `meters` exactly.
double exact_phase_cycles(double meters, double wavelength);

/// Round to the simulator's additive-term grid (2^-28 m).
double quantize(double meters);

}  // namespace wcp
