#pragma once

#include "wcp/eliminator.hpp"
#include "wcp/geodesy.hpp"
#include "wcp/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace wcp {

enum class MeasurementKind { Pseudorange, Phase, Doppler };

/// Elevation/SNR variance model:
///   sigma^2 = sigma_base^2 / sin^2(el) * clamp(10^((snr_ref - snr) / snr_slope), 1, snr_max_factor)
struct WeightingConfig {
  double sigma_pseudorange = 1.0;  // m
  double sigma_phase = 0.01;       // m
  double sigma_doppler = 0.1;      // m/s
  double snr_ref = 45.0;           // dB-Hz
  double snr_slope = 30.0;         // dB per decade
  double snr_max_factor = 100.0;
  double elevation_mask = 10.0 * 3.14159265358979323846 / 180.0;  // rad
};

double measurement_variance(double elevation, double snr, MeasurementKind kind,
                            const WeightingConfig& config);

/// Range model shared by every factor: Euclidean distance plus an optional
/// Earth-rotation term (rate 0 disables it).
struct RangeModel {
  double earth_rotation_rate = 0.0;
};

struct LinkGeometry {
  double range = 0.0;
  Vec3 gradient = Vec3::Zero();  // d(measurement - range) / d(receiver position)
};

LinkGeometry link_geometry(const Vec3& receiver, const Vec3& satellite, const RangeModel& model);

/// rho + sat_clock - iono - tropo; missing atmosphere terms count as zero.
double correct_pseudorange(const Observation& obs, const SatelliteState& sat);

/// lambda * psi + sat_clock - iono - tropo - phase_correction.
double correct_phase(const Observation& obs, const SatelliteState& sat);

/// Carrier phase in meters. Every consumer goes through this product so that
/// the simulator can pick phases whose product is exact.
inline double phase_meters(double cycles, double wavelength) { return cycles * wavelength; }

// ---------------------------------------------------------------------------
// Pseudorange
// ---------------------------------------------------------------------------

struct PseudorangeFactor {
  std::size_t epoch = 0;  // position in the graph's epoch list
  SatelliteId sat;
  Vec3 satellite_position = Vec3::Zero();
  double corrected_pseudorange = 0.0;
  double variance = 1.0;
};

struct ScalarResidual {
  double value = 0.0;
  Eigen::RowVector4d jacobian = Eigen::RowVector4d::Zero();  // (p_r, clock)
};

ScalarResidual pseudorange_residual(const Vec3& position, double clock_bias,
                                    const PseudorangeFactor& factor, const RangeModel& model = {});
ScalarResidual pseudorange_residual(const ReceiverState& state, const PseudorangeFactor& factor,
                                    const RangeModel& model = {});

// ---------------------------------------------------------------------------
// Doppler
// ---------------------------------------------------------------------------

struct DopplerVelocity {
  Vec3 velocity = Vec3::Zero();  // m/s
  double clock_drift = 0.0;      // m/s
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
  int used = 0;
};

/// Weighted least squares on -lambda * d = (v_s - v_r) . u + drift_r - drift_s.
/// Returns nullopt when fewer than four usable Dopplers remain above the mask
/// or the geometry is singular (condition number > 1e8).
std::optional<DopplerVelocity> doppler_wls_velocity(std::span<const Observation> observations,
                                                    std::span<const SatelliteState> satellites,
                                                    const Vec3& receiver_position,
                                                    const WeightingConfig& weighting,
                                                    const RangeModel& model = {});

struct DopplerVelocityFactor {
  std::size_t epoch = 0;  // constrains (epoch, epoch + 1)
  Vec3 velocity = Vec3::Zero();
  double dt = 1.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
};

struct VectorResidual3 {
  Vec3 value = Vec3::Zero();
  Eigen::Matrix<double, 3, 8> jacobian = Eigen::Matrix<double, 3, 8>::Zero();  // (p_t, c_t, p_t1, c_t1)
};

VectorResidual3 doppler_velocity_residual(const Vec3& position_t, const Vec3& position_t1,
                                          const DopplerVelocityFactor& factor);

// ---------------------------------------------------------------------------
// Time-differenced carrier phase
// ---------------------------------------------------------------------------

struct TdcpFactor {
  std::size_t epoch = 0;  // constrains (epoch, epoch + 1)
  SatelliteId sat;
  Vec3 satellite_position_t = Vec3::Zero();
  Vec3 satellite_position_t1 = Vec3::Zero();
  double delta_phase = 0.0;  // corrected phase(t+1) - corrected phase(t), m
  double variance = 1.0;
};

struct PairResidual {
  double value = 0.0;
  Eigen::Matrix<double, 1, 8> jacobian = Eigen::Matrix<double, 1, 8>::Zero();  // (p_t, c_t, p_t1, c_t1)
};

/// residual = delta_phase - [(r_t1 + c_t1) - (r_t + c_t)]
PairResidual tdcp_residual(const Vec3& position_t, double clock_t, const Vec3& position_t1,
                           double clock_t1, const TdcpFactor& factor, const RangeModel& model = {});

// ---------------------------------------------------------------------------
// Window carrier phase
// ---------------------------------------------------------------------------

/// N consecutive corrected phases of one satellite that share one ambiguity.
struct PhaseWindow {
  SatelliteId sat;
  std::size_t first_epoch = 0;
  std::vector<Vec3> satellite_positions;
  Eigen::VectorXd phases;     // corrected lambda * psi, m
  Eigen::VectorXd variances;  // m^2
  EliminatorMatrix eliminator;
  Eigen::MatrixXd covariance;  // E diag(variances) E^T
  Eigen::MatrixXd whitener;    // W with W^T W = pinv(covariance), rank rows

  std::size_t size() const { return static_cast<std::size_t>(phases.size()); }
};

struct PhaseTrack {
  SatelliteId sat;
  std::size_t first_epoch = 0;
  std::vector<Vec3> satellite_positions;
  std::vector<double> phases;
  std::vector<double> variances;
  std::vector<bool> loss_of_lock;  // optional; any flag after the first sample is rejected
};

PhaseWindow build_phase_window(const PhaseTrack& track, EliminatorKind kind, std::uint64_t seed,
                               int max_window);
PhaseWindow build_phase_window(const PhaseTrack& track, EliminatorMatrix eliminator);

struct WindowResidual {
  Eigen::VectorXd value;     // E (phases - h), unwhitened
  Eigen::MatrixXd jacobian;  // rows x 4N, per epoch (p, clock)
};

WindowResidual wcp_residual(const PhaseWindow& window, std::span<const Vec3> positions,
                            std::span<const double> clocks, const RangeModel& model = {});

}  // namespace wcp
