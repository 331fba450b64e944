#include "wcp/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wcp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE2 = kWgs84F * (2.0 - kWgs84F);

}  // namespace

GeodeticPosition ecef_to_geodetic(const Vec3& p) {
  if (!p.allFinite() || p.norm() <= 6.2e6)
    throw std::invalid_argument("ecef_to_geodetic: position inside the Earth");

  const double r2 = p.x() * p.x() + p.y() * p.y();
  double z = p.z();
  double zk = 0.0;
  double v = kWgs84A;
  for (int i = 0; i < 50 && std::abs(z - zk) >= 1e-10; ++i) {
    zk = z;
    const double sinp = z / std::sqrt(r2 + z * z);
    v = kWgs84A / std::sqrt(1.0 - kE2 * sinp * sinp);
    z = p.z() + v * kE2 * sinp;
  }
  GeodeticPosition g;
  g.latitude = r2 > 1e-12 ? std::atan(z / std::sqrt(r2)) : (p.z() > 0.0 ? kPi / 2.0 : -kPi / 2.0);
  g.longitude = r2 > 1e-12 ? std::atan2(p.y(), p.x()) : 0.0;
  if (g.longitude <= -kPi) g.longitude += 2.0 * kPi;
  g.height = std::sqrt(r2 + z * z) - v;
  return g;
}

Vec3 geodetic_to_ecef(const GeodeticPosition& g) {
  const double sinp = std::sin(g.latitude);
  const double cosp = std::cos(g.latitude);
  const double sinl = std::sin(g.longitude);
  const double cosl = std::cos(g.longitude);
  const double v = kWgs84A / std::sqrt(1.0 - kE2 * sinp * sinp);
  return {(v + g.height) * cosp * cosl, (v + g.height) * cosp * sinl,
          (v * (1.0 - kE2) + g.height) * sinp};
}

Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticPosition& g) {
  const double sinp = std::sin(g.latitude);
  const double cosp = std::cos(g.latitude);
  const double sinl = std::sin(g.longitude);
  const double cosl = std::cos(g.longitude);
  Eigen::Matrix3d r;
  r << -sinl, cosl, 0.0,
       -sinp * cosl, -sinp * sinl, cosp,
       cosp * cosl, cosp * sinl, sinp;
  return r;
}

LookAngles elevation_azimuth(const Vec3& receiver, const Vec3& satellite) {
  const Vec3 los = satellite - receiver;
  const double range = los.norm();
  if (!(range > 0.0)) throw std::invalid_argument("elevation_azimuth: zero baseline");
  const Vec3 enu = ecef_to_enu_rotation(ecef_to_geodetic(receiver)) * (los / range);
  LookAngles a;
  a.elevation = std::asin(std::clamp(enu.z(), -1.0, 1.0));
  const double horizontal = enu.x() * enu.x() + enu.y() * enu.y();
  a.azimuth = horizontal < 1e-24 ? 0.0 : std::atan2(enu.x(), enu.y());
  if (a.azimuth < 0.0) a.azimuth += 2.0 * kPi;
  if (a.azimuth >= 2.0 * kPi) a.azimuth -= 2.0 * kPi;
  return a;
}

double tropo_delay_saastamoinen(double elevation, double height, double latitude) {
  if (!(elevation > kTropoMinElevation))
    throw std::invalid_argument("tropo_delay_saastamoinen: elevation below mask");
  const double h = std::clamp(height, 0.0, 1e4);
  const double scale = std::pow(1.0 - 2.2557e-5 * h, 5.2568);
  const double pressure = 1013.25 * scale;  // hPa
  const double temperature = 291.15 - 6.5e-3 * h;  // K
  const double vapour = 11.75 * scale;  // hPa
  const double zenith_dry =
      0.0022768 * pressure / (1.0 - 0.00266 * std::cos(2.0 * latitude) - 0.00028 * h / 1e3);
  const double zenith_wet = 0.002277 * (1255.0 / temperature + 0.05) * vapour;
  return (zenith_dry + zenith_wet) / std::sin(elevation);
}

double klobuchar_obliquity(double elevation) {
  const double e = elevation / kPi;
  return 1.0 + 16.0 * std::pow(0.53 - e, 3);
}

double iono_delay_klobuchar(double elevation, double azimuth, const GeodeticPosition& receiver,
                            double time_of_week, const KlobucharCoefficients& c,
                            double wavelength) {
  const double el = elevation / kPi;  // semicircles
  const double psi = 0.0137 / (el + 0.11) - 0.022;
  double phi = receiver.latitude / kPi + psi * std::cos(azimuth);
  phi = std::clamp(phi, -0.416, 0.416);
  const double lam = receiver.longitude / kPi + psi * std::sin(azimuth) / std::cos(phi * kPi);
  phi += 0.064 * std::cos((lam - 1.617) * kPi);  // geomagnetic latitude

  double local_time = 43200.0 * lam + time_of_week;
  local_time -= std::floor(local_time / 86400.0) * 86400.0;

  const double obliquity = klobuchar_obliquity(elevation);
  double amplitude = c.alpha[0] + phi * (c.alpha[1] + phi * (c.alpha[2] + phi * c.alpha[3]));
  double period = c.beta[0] + phi * (c.beta[1] + phi * (c.beta[2] + phi * c.beta[3]));
  if (amplitude < 0.0) amplitude = 0.0;
  if (period < 72000.0) period = 72000.0;
  const double x = 2.0 * kPi * (local_time - 50400.0) / period;

  double seconds = 5e-9;
  if (std::abs(x) < 1.57) seconds += amplitude * (1.0 + x * x * (-0.5 + x * x / 24.0));
  const double ratio = wavelength / kGpsL1Wavelength;
  return kSpeedOfLight * obliquity * seconds * ratio * ratio;
}

double sagnac_corrected_range(const Vec3& receiver, const Vec3& satellite, double earth_rotation_rate) {
  const double geometric = (satellite - receiver).norm();
  return geometric + earth_rotation_rate *
                         (satellite.x() * receiver.y() - satellite.y() * receiver.x()) / kSpeedOfLight;
}

}  // namespace wcp
