#include "wcp/factors.hpp"

#include "wcp/kernels/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wcp {

double measurement_variance(double elevation, double snr, MeasurementKind kind,
                            const WeightingConfig& c) {
  if (!(elevation >= c.elevation_mask) || !(elevation > 0.0))
    throw std::invalid_argument("measurement_variance: elevation below mask");
  double sigma = c.sigma_pseudorange;
  if (kind == MeasurementKind::Phase) sigma = c.sigma_phase;
  if (kind == MeasurementKind::Doppler) sigma = c.sigma_doppler;
  const double s = std::sin(elevation);
  const double snr_factor =
      std::clamp(std::pow(10.0, (c.snr_ref - snr) / c.snr_slope), 1.0, c.snr_max_factor);
  return sigma * sigma / (s * s) * snr_factor;
}

LinkGeometry link_geometry(const Vec3& receiver, const Vec3& satellite, const RangeModel& model) {
  double range = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
  const kernels::LinkInputs in{{&receiver.x(), 1}, {&receiver.y(), 1}, {&receiver.z(), 1},
                               {&satellite.x(), 1}, {&satellite.y(), 1}, {&satellite.z(), 1},
                               model.earth_rotation_rate};
  kernels::scalar::link_geometry(in, {{&range, 1}, {&gx, 1}, {&gy, 1}, {&gz, 1}});
  if (!std::isfinite(range) || !std::isfinite(gx))
    throw std::invalid_argument("link_geometry: coincident receiver and satellite");
  return {range, Vec3(gx, gy, gz)};
}

double correct_pseudorange(const Observation& obs, const SatelliteState& sat) {
  if (!obs.pseudorange) throw std::invalid_argument("correct_pseudorange: missing pseudorange");
  if (!(obs.sat == sat.sat)) throw std::invalid_argument("correct_pseudorange: satellite mismatch");
  return *obs.pseudorange + sat.clock_bias - sat.iono_delay.value_or(0.0) -
         sat.tropo_delay.value_or(0.0);
}

double correct_phase(const Observation& obs, const SatelliteState& sat) {
  if (!obs.carrier_phase) throw std::invalid_argument("correct_phase: missing carrier phase");
  if (!(obs.sat == sat.sat)) throw std::invalid_argument("correct_phase: satellite mismatch");
  return phase_meters(*obs.carrier_phase, obs.wavelength) + sat.clock_bias -
         sat.iono_delay.value_or(0.0) - sat.tropo_delay.value_or(0.0) - obs.phase_correction;
}

ScalarResidual pseudorange_residual(const Vec3& position, double clock_bias,
                                    const PseudorangeFactor& f, const RangeModel& model) {
  const LinkGeometry g = link_geometry(position, f.satellite_position, model);
  ScalarResidual r;
  r.value = f.corrected_pseudorange - (g.range + clock_bias);
  r.jacobian << g.gradient.transpose(), -1.0;
  return r;
}

ScalarResidual pseudorange_residual(const ReceiverState& state, const PseudorangeFactor& f,
                                    const RangeModel& model) {
  auto it = state.clock_bias.find(f.sat.constellation);
  if (it == state.clock_bias.end())
    throw std::invalid_argument("pseudorange_residual: no clock for constellation");
  return pseudorange_residual(state.position, it->second, f, model);
}

std::optional<DopplerVelocity> doppler_wls_velocity(std::span<const Observation> observations,
                                                    std::span<const SatelliteState> satellites,
                                                    const Vec3& receiver_position,
                                                    const WeightingConfig& weighting,
                                                    const RangeModel& /*model*/) {
  if (receiver_position.norm() <= 6.2e6) return std::nullopt;

  std::vector<Eigen::Vector4d> rows;
  std::vector<double> y, w;
  for (const Observation& obs : observations) {
    if (!obs.doppler) continue;
    auto sat = std::find_if(satellites.begin(), satellites.end(),
                            [&](const SatelliteState& s) { return s.sat == obs.sat; });
    if (sat == satellites.end()) continue;
    const double el = elevation_azimuth(receiver_position, sat->position).elevation;
    if (el < weighting.elevation_mask) continue;
    const Vec3 u = (sat->position - receiver_position).normalized();
    const double range_rate = -obs.wavelength * *obs.doppler;
    // range_rate - v_s.u + drift_s = -u.v_r + drift_r
    rows.emplace_back(-u.x(), -u.y(), -u.z(), 1.0);
    y.push_back(range_rate - sat->velocity.dot(u) + sat->clock_drift);
    w.push_back(1.0 / measurement_variance(el, obs.snr, MeasurementKind::Doppler, weighting));
  }
  if (rows.size() < 4) return std::nullopt;

  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    normal += w[i] * rows[i] * rows[i].transpose();
    rhs += w[i] * y[i] * rows[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e8) return std::nullopt;

  const Eigen::Matrix4d cov = normal.inverse();
  const Eigen::Vector4d x = normal.ldlt().solve(rhs);
  DopplerVelocity out;
  out.velocity = x.head<3>();
  out.clock_drift = x(3);
  out.covariance = cov.topLeftCorner<3, 3>();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.used = static_cast<int>(rows.size());
  return out;
}

VectorResidual3 doppler_velocity_residual(const Vec3& position_t, const Vec3& position_t1,
                                          const DopplerVelocityFactor& f) {
  if (!(f.dt > 0.0)) throw std::invalid_argument("doppler_velocity_residual: dt must be positive");
  VectorResidual3 r;
  r.value = f.velocity - (position_t1 - position_t) / f.dt;
  const double s = 1.0 / f.dt;
  r.jacobian.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity() * s;
  r.jacobian.block<3, 3>(0, 4) = -Eigen::Matrix3d::Identity() * s;
  return r;
}

PairResidual tdcp_residual(const Vec3& position_t, double clock_t, const Vec3& position_t1,
                           double clock_t1, const TdcpFactor& f, const RangeModel& model) {
  const LinkGeometry g0 = link_geometry(position_t, f.satellite_position_t, model);
  const LinkGeometry g1 = link_geometry(position_t1, f.satellite_position_t1, model);
  PairResidual r;
  r.value = f.delta_phase - ((g1.range + clock_t1) - (g0.range + clock_t));
  r.jacobian << -g0.gradient.transpose(), 1.0, g1.gradient.transpose(), -1.0;
  return r;
}

namespace {

Eigen::MatrixXd whitener_for(const Eigen::MatrixXd& cov, EliminatorKind kind) {
  if (kind == EliminatorKind::OrthonormalBasisT) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("build_phase_window: window covariance not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    return l.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  }
  // Singular covariance (E 1 = 0 with a square E): whiten on the range space.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values.maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) > 1e-12 * top) keep.push_back(i);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(keep.size()), cov.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Eigen::Index i = keep[r];
    w.row(static_cast<Eigen::Index>(r)) = eig.eigenvectors().col(i).transpose() / std::sqrt(values(i));
  }
  return w;
}

void check_track(const PhaseTrack& track) {
  const std::size_t n = track.phases.size();
  if (n < 2) throw std::invalid_argument("build_phase_window: track shorter than 2 epochs");
  if (track.variances.size() != n || track.satellite_positions.size() != n)
    throw std::invalid_argument("build_phase_window: inconsistent track lengths");
  for (std::size_t i = 1; i < track.loss_of_lock.size() && i < n; ++i)
    if (track.loss_of_lock[i])
      throw std::invalid_argument("build_phase_window: loss of lock inside track");
  for (double v : track.variances)
    if (!(v > 0.0)) throw std::invalid_argument("build_phase_window: non-positive variance");
}

}  // namespace

PhaseWindow build_phase_window(const PhaseTrack& track, EliminatorMatrix eliminator) {
  check_track(track);
  const auto n = static_cast<Eigen::Index>(track.phases.size());
  if (eliminator.cols() != n)
    throw std::invalid_argument("build_phase_window: eliminator width does not match track");

  PhaseWindow w;
  w.sat = track.sat;
  w.first_epoch = track.first_epoch;
  w.satellite_positions = track.satellite_positions;
  w.phases = Eigen::Map<const Eigen::VectorXd>(track.phases.data(), n);
  w.variances = Eigen::Map<const Eigen::VectorXd>(track.variances.data(), n);
  w.eliminator = std::move(eliminator);
  w.covariance = w.eliminator.entries * w.variances.asDiagonal() * w.eliminator.entries.transpose();
  w.covariance = (0.5 * (w.covariance + w.covariance.transpose())).eval();
  w.whitener = whitener_for(w.covariance, w.eliminator.kind);
  return w;
}

PhaseWindow build_phase_window(const PhaseTrack& track, EliminatorKind kind, std::uint64_t seed,
                               int max_window) {
  check_track(track);
  const int n = static_cast<int>(track.phases.size());
  if (n > max_window) throw std::invalid_argument("build_phase_window: track longer than N_max");
  return build_phase_window(track, make_eliminator(kind, n, seed));
}

WindowResidual wcp_residual(const PhaseWindow& window, std::span<const Vec3> positions,
                            std::span<const double> clocks, const RangeModel& model) {
  const std::size_t n = window.size();
  if (positions.size() != n || clocks.size() != n)
    throw std::invalid_argument("wcp_residual: states do not cover the window");

  Eigen::VectorXd misfit(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 4);
  for (std::size_t t = 0; t < n; ++t) {
    const LinkGeometry g = link_geometry(positions[t], window.satellite_positions[t], model);
    const auto i = static_cast<Eigen::Index>(t);
    misfit(i) = window.phases(i) - (g.range + clocks[t]);
    local.row(i) << g.gradient.transpose(), -1.0;
  }
  const Eigen::MatrixXd& e = window.eliminator.entries;
  WindowResidual r;
  r.value = e * misfit;
  r.jacobian = Eigen::MatrixXd::Zero(e.rows(), 4 * static_cast<Eigen::Index>(n));
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(n); ++t)
    r.jacobian.middleCols(4 * t, 4) = e.col(t) * local.row(t);
  return r;
}

}  // namespace wcp
