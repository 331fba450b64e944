#include "wcp/geodesy.hpp"
#include "wcp/simulator.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace wcp {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(GeodesyTest, EquatorAxes) {
  const GeodeticPosition a = ecef_to_geodetic(Vec3(6378137.0, 0.0, 0.0));
  EXPECT_NEAR(a.latitude, 0.0, 1e-12);
  EXPECT_NEAR(a.longitude, 0.0, 1e-12);
  EXPECT_NEAR(a.height, 0.0, 1e-9);

  const GeodeticPosition b = ecef_to_geodetic(Vec3(0.0, 6378137.0, 0.0));
  EXPECT_NEAR(b.latitude, 0.0, 1e-12);
  EXPECT_NEAR(b.longitude, kPi / 2.0, 1e-12);
  EXPECT_NEAR(b.height, 0.0, 1e-9);
}

TEST(GeodesyTest, Pole) {
  const double b = kWgs84A * (1.0 - kWgs84F);
  const GeodeticPosition g = ecef_to_geodetic(Vec3(0.0, 0.0, b + 100.0));
  EXPECT_NEAR(g.latitude, kPi / 2.0, 1e-12);
  EXPECT_NEAR(g.height, 100.0, 1e-6);
}

TEST(GeodesyTest, RejectsInsideEarth) {
  EXPECT_THROW(ecef_to_geodetic(Vec3(1000.0, 0.0, 0.0)), std::invalid_argument);
  EXPECT_THROW(ecef_to_geodetic(Vec3(6.1e6, 0.0, 0.0)), std::invalid_argument);
}

TEST(GeodesyTest, RoundTripRandomSurfacePoints) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> lat(-kPi / 2.0 + 1e-6, kPi / 2.0 - 1e-6);
  std::uniform_real_distribution<double> lon(-kPi + 1e-9, kPi);
  std::uniform_real_distribution<double> h(-100.0, 9000.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const GeodeticPosition g{lat(rng), lon(rng), h(rng)};
    const Vec3 p = geodetic_to_ecef(g);
    const Vec3 q = geodetic_to_ecef(ecef_to_geodetic(p));
    worst = std::max(worst, (p - q).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(GeodesyTest, EnuRotationIsOrthonormal) {
  const Eigen::Matrix3d r = ecef_to_enu_rotation({0.4, 2.0, 0.0});
  EXPECT_LT((r * r.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-14);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-14);
}

TEST(ElevationTest, Zenith) {
  const GeodeticPosition g{0.39, 1.99, 10.0};
  const Vec3 rx = geodetic_to_ecef(g);
  const Vec3 up = ecef_to_enu_rotation(g).row(2).transpose();
  EXPECT_NEAR(elevation_azimuth(rx, rx + 2.0e7 * up).elevation, kPi / 2.0, 1e-7);
}

TEST(ElevationTest, Horizon) {
  const GeodeticPosition g{-0.7, 0.3, 0.0};
  const Vec3 rx = geodetic_to_ecef(g);
  const Eigen::Matrix3d r = ecef_to_enu_rotation(g);
  const Vec3 east = r.row(0).transpose();
  const Vec3 north = r.row(1).transpose();
  const LookAngles a = elevation_azimuth(rx, rx + 2.0e7 * east);
  EXPECT_NEAR(a.elevation, 0.0, 1e-9);
  EXPECT_NEAR(a.azimuth, kPi / 2.0, 1e-9);
  const LookAngles b = elevation_azimuth(rx, rx + 1.0e3 * north);
  EXPECT_NEAR(b.elevation, 0.0, 1e-9);
  EXPECT_NEAR(std::remainder(b.azimuth, 2.0 * kPi), 0.0, 1e-9);
  EXPECT_LT(b.azimuth, 2.0 * kPi);
  const LookAngles c = elevation_azimuth(rx, rx - 1.0e3 * east);
  EXPECT_NEAR(c.azimuth, 3.0 * kPi / 2.0, 1e-9);
}

TEST(ElevationTest, RejectsZeroBaseline) {
  const Vec3 rx(6378137.0, 0.0, 0.0);
  EXPECT_THROW(elevation_azimuth(rx, rx), std::invalid_argument);
}

TEST(ElevationTest, ScaleInvariant) {
  const Vec3 rx = geodetic_to_ecef({0.39, 1.99, 10.0});
  const Vec3 los(1.2e7, -3.0e6, 1.5e7);
  const LookAngles a = elevation_azimuth(rx, rx + los);
  for (double s : {1e-3, 0.5, 3.0}) {
    const LookAngles b = elevation_azimuth(rx, rx + s * los);
    EXPECT_NEAR(a.elevation, b.elevation, 1e-12);
    EXPECT_NEAR(a.azimuth, b.azimuth, 1e-12);
  }
}

// Up is the ellipsoid normal from the implicit surface gradient; east and
// north follow from cross products with the polar axis.
TEST(ElevationTest, MatchesEllipsoidNormalOracle) {
  ScenarioConfig sc;
  sc.epochs = 3;
  const Simulation sim = generate(sc);
  const GeodeticPosition g{sc.origin.latitude, sc.origin.longitude, 0.0};
  const Vec3 rx = geodetic_to_ecef(g);
  const double b = kWgs84A * (1.0 - kWgs84F);
  const Vec3 up = Vec3(rx.x() / (kWgs84A * kWgs84A), rx.y() / (kWgs84A * kWgs84A), rx.z() / (b * b)).normalized();
  const Vec3 east = Vec3::UnitZ().cross(up).normalized();
  const Vec3 north = up.cross(east);
  int checked = 0;
  for (const SatelliteState& s : sim.dataset.epochs[0].satellites) {
    const Vec3 u = (s.position - rx).normalized();
    const double el = std::asin(u.dot(up));
    double az = std::atan2(u.dot(east), u.dot(north));
    if (az < 0.0) az += 2.0 * kPi;
    const LookAngles a = elevation_azimuth(rx, s.position);
    EXPECT_NEAR(a.elevation, el, 1e-9);
    EXPECT_NEAR(a.azimuth, az, 1e-9);
    ++checked;
  }
  EXPECT_GE(checked, 6);
}

TEST(TropoTest, ZenithSeaLevel) {
  const double z = tropo_delay_saastamoinen(kPi / 2.0, 0.0);
  EXPECT_GT(z, 2.3);
  EXPECT_LT(z, 2.6);
  // dry 0.0022768 * 1013.25 / (1 - 0.00266) plus wet 0.002277 * (1255 / 291.15 + 0.05) * 11.75
  EXPECT_NEAR(z, 2.4297843972277, 1e-12);
}

TEST(TropoTest, MappingAndMonotonicity) {
  const double z = tropo_delay_saastamoinen(kPi / 2.0, 0.0);
  const double d30 = tropo_delay_saastamoinen(kPi / 6.0, 0.0);
  EXPECT_NEAR(d30 / (2.0 * z), 1.0, 0.1);
  const double deg = kPi / 180.0;
  EXPECT_GT(tropo_delay_saastamoinen(15 * deg, 0.0), tropo_delay_saastamoinen(45 * deg, 0.0));
  EXPECT_GT(tropo_delay_saastamoinen(45 * deg, 0.0), tropo_delay_saastamoinen(85 * deg, 0.0));
  EXPECT_LT(tropo_delay_saastamoinen(kPi / 2.0, 2000.0), z);
}

TEST(TropoTest, RejectsBelowMask) {
  EXPECT_THROW(tropo_delay_saastamoinen(0.01, 0.0), std::invalid_argument);
  EXPECT_THROW(tropo_delay_saastamoinen(-0.3, 0.0), std::invalid_argument);
}

TEST(KlobucharTest, ZenithObliquity) {
  EXPECT_NEAR(klobuchar_obliquity(kPi / 2.0), 1.0 + 16.0 * 0.03 * 0.03 * 0.03, 1e-15);
  EXPECT_NEAR(klobuchar_obliquity(kPi / 2.0), 1.000432, 1e-12);
}

TEST(KlobucharTest, ZeroCoefficientsGiveNightFloor) {
  const KlobucharCoefficients zero;
  const GeodeticPosition rx{0.6, -1.2, 50.0};
  for (double el : {0.2, 0.7, 1.4}) {
    const double d = iono_delay_klobuchar(el, 1.0, rx, 3600.0 * 7, zero);
    EXPECT_NEAR(d, 5e-9 * kSpeedOfLight * klobuchar_obliquity(el), 1e-12);
  }
}

// The broadcast recipe stepped by hand in semicircles for one geometry.
TEST(KlobucharTest, HandSteppedEvaluation) {
  KlobucharCoefficients c;
  c.alpha = {3.82e-8, 1.49e-8, -1.79e-7, 0.0};
  c.beta = {1.43e5, 0.0, -3.28e5, 1.13e5};
  const GeodeticPosition rx{40.0 * kPi / 180.0, -100.0 * kPi / 180.0, 0.0};
  const double elevation = 20.0 * kPi / 180.0;
  const double azimuth = 210.0 * kPi / 180.0;
  const double tow = 593100.0;

  const double e = 20.0 / 180.0;
  const double psi = 0.0137 / (e + 0.11) - 0.022;
  const double phi_i = 40.0 / 180.0 + psi * std::cos(azimuth);
  const double lam_i = -100.0 / 180.0 + psi * std::sin(azimuth) / std::cos(phi_i * kPi);
  const double phi_m = phi_i + 0.064 * std::cos((lam_i - 1.617) * kPi);
  const double t = std::fmod(43200.0 * lam_i + tow, 86400.0);
  const double f = 1.0 + 16.0 * std::pow(0.53 - e, 3);
  const double amp = c.alpha[0] + c.alpha[1] * phi_m + c.alpha[2] * phi_m * phi_m;
  const double per = c.beta[0] + c.beta[2] * phi_m * phi_m + c.beta[3] * phi_m * phi_m * phi_m;
  const double x = 2.0 * kPi * (t - 50400.0) / per;
  ASSERT_LT(std::abs(x), 1.57);
  const double expected =
      kSpeedOfLight * f * (5e-9 + std::max(amp, 0.0) * (1.0 - x * x / 2.0 + x * x * x * x / 24.0));

  const double got = iono_delay_klobuchar(elevation, azimuth, rx, tow, c);
  EXPECT_NEAR(got, expected, 1e-9);
  EXPECT_GT(got, 5e-9 * kSpeedOfLight * f);
}

TEST(KlobucharTest, WavelengthScaling) {
  const KlobucharCoefficients c = ScenarioConfig::default_klobuchar();
  const GeodeticPosition rx{0.39, 1.99, 10.0};
  const double l1 = iono_delay_klobuchar(0.8, 2.0, rx, 400000.0, c);
  const double b1 = iono_delay_klobuchar(0.8, 2.0, rx, 400000.0, c, kBeidouB1Wavelength);
  const double ratio = kBeidouB1Wavelength / kGpsL1Wavelength;
  EXPECT_NEAR(b1, l1 * ratio * ratio, 1e-12);
}

TEST(AtmosphereTest, NonNegativeForMaskedInGeometry) {
  const KlobucharCoefficients c = ScenarioConfig::default_klobuchar();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> el(0.06, kPi / 2.0), az(0.0, 2.0 * kPi), lat(-1.4, 1.4),
      lon(-kPi, kPi), tow(0.0, 604800.0);
  for (int i = 0; i < 500; ++i) {
    const double e = el(rng);
    const GeodeticPosition rx{lat(rng), lon(rng), 0.0};
    const double t = tropo_delay_saastamoinen(e, 0.0, rx.latitude);
    const double d = iono_delay_klobuchar(e, az(rng), rx, tow(rng), c);
    EXPECT_TRUE(std::isfinite(t) && t > 0.0);
    EXPECT_TRUE(std::isfinite(d) && d > 0.0);
  }
}

TEST(SagnacTest, DisabledIsEuclidean) {
  const Vec3 rx(-2.4e6, 5.4e6, 2.4e6), sx(1.5e7, 1.8e7, 8.0e6);
  EXPECT_EQ(sagnac_corrected_range(rx, sx, 0.0), (sx - rx).norm());
}

TEST(SagnacTest, ReceiverAtOrigin) {
  const Vec3 sx(1.5e7, 1.8e7, 8.0e6);
  EXPECT_EQ(sagnac_corrected_range(Vec3::Zero(), sx), sx.norm());
}

TEST(SagnacTest, EquatorialMagnitude) {
  const Vec3 rx(kWgs84A, 0.0, 0.0);
  const Vec3 sx = 2.656e7 * Vec3(std::cos(0.6), std::sin(0.6), 0.0);
  const double term = kEarthRotationRate * (sx.x() * rx.y() - sx.y() * rx.x()) / kSpeedOfLight;
  const double corrected = sagnac_corrected_range(rx, sx);
  EXPECT_NEAR(corrected - (sx - rx).norm(), term, 1e-7);
  EXPECT_LT(std::abs(term), 40.0);
  EXPECT_GT(std::abs(term), 1.0);
}

}  // namespace
}  // namespace wcp
