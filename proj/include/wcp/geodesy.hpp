#pragma once

#include "wcp/types.hpp"

#include <Eigen/Core>

#include <array>

namespace wcp {

inline constexpr double kSpeedOfLight = 299792458.0;          // m/s
inline constexpr double kEarthRotationRate = 7.2921151467e-5;  // rad/s
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kGpsL1Frequency = 1575.42e6;
inline constexpr double kGpsL1Wavelength = kSpeedOfLight / kGpsL1Frequency;
inline constexpr double kBeidouB1Frequency = 1561.098e6;
inline constexpr double kBeidouB1Wavelength = kSpeedOfLight / kBeidouB1Frequency;

struct GeodeticPosition {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad, (-pi, pi]
  double height = 0.0;     // m above the WGS-84 ellipsoid
};

GeodeticPosition ecef_to_geodetic(const Vec3& p);
Vec3 geodetic_to_ecef(const GeodeticPosition& g);

/// Rows are the east, north and up unit vectors at the given position.
Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticPosition& g);

struct LookAngles {
  double elevation = 0.0;  // rad, [-pi/2, pi/2]
  double azimuth = 0.0;    // rad, [0, 2pi) clockwise from north
};

LookAngles elevation_azimuth(const Vec3& receiver, const Vec3& satellite);

/// Saastamoinen zenith delay under a standard atmosphere (1013.25 hPa,
/// 291.15 K, 11.75 hPa water vapour at sea level) mapped with 1/sin(el).
double tropo_delay_saastamoinen(double elevation, double height, double latitude = 0.0);

inline constexpr double kTropoMinElevation = 0.05;  // rad

/// Broadcast ionosphere parameters (alpha0..3, beta0..3).
struct KlobucharCoefficients {
  std::array<double, 4> alpha{};
  std::array<double, 4> beta{};
};

/// Klobuchar L1 obliquity factor F = 1 + 16 (0.53 - E)^3, E in semicircles.
double klobuchar_obliquity(double elevation);

/// Single-frequency Klobuchar slant delay in meters. `time_of_week` is GPS
/// seconds of week; the L1 delay is scaled by (wavelength / L1)^2.
double iono_delay_klobuchar(double elevation, double azimuth, const GeodeticPosition& receiver,
                            double time_of_week, const KlobucharCoefficients& coefficients,
                            double wavelength = kGpsL1Wavelength);

/// Geometric range with the optional Earth-rotation (Sagnac) term
/// omega_e * (x_s * y_r - y_s * x_r) / c.
double sagnac_corrected_range(const Vec3& receiver, const Vec3& satellite,
                              double earth_rotation_rate = kEarthRotationRate);

}  // namespace wcp
