#include "wcp/simulator.hpp"

#include "wcp/kernels/kernels.hpp"
#include "wcp/prng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace wcp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEarthGm = 3.986004418e14;
constexpr double kGrid = 268435456.0;  // 2^28

struct SatTrack {
  std::int64_t ambiguity = 0;  // cycles, includes accumulated slips
  bool flag_next = false;
};

struct Orbit {
  SatelliteId id;
  double radius = 0.0;
  double inclination = 0.0;
  double node = 0.0;
  double phase0 = 0.0;
  double wavelength = 0.0;
  double clock_bias = 0.0;
  double clock_drift = 0.0;
};

void orbit_state(const Orbit& o, double t, Vec3& position, Vec3& velocity) {
  const double n = std::sqrt(kEarthGm / (o.radius * o.radius * o.radius));
  const double u = o.phase0 + n * t;
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(o.node), so = std::sin(o.node);
  const double ci = std::cos(o.inclination), si = std::sin(o.inclination);
  position = o.radius * Vec3(co * cu - so * ci * su, so * cu + co * ci * su, si * su);
  velocity = o.radius * n * Vec3(-co * su - so * ci * cu, -so * su + co * ci * cu, si * cu);
}

Vec3 catmull_rom(const std::vector<Vec3>& pts, double s) {
  const auto m = static_cast<long>(pts.size());
  const double wrapped = std::fmod(s, static_cast<double>(m));
  const long i = static_cast<long>(std::floor(wrapped));
  const double u = wrapped - static_cast<double>(i);
  auto at = [&](long k) { return pts[static_cast<std::size_t>(((k % m) + m) % m)]; };
  const Vec3 p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  const double u2 = u * u, u3 = u2 * u;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
}

std::vector<Vec3> receiver_positions(const ScenarioConfig& sc) {
  const Vec3 origin = geodetic_to_ecef(sc.origin);
  const Eigen::Matrix3d enu_to_ecef = ecef_to_enu_rotation(sc.origin).transpose();
  std::vector<Vec3> out;
  const double duration = sc.epochs / sc.rate;
  std::vector<Vec3> waypoints = sc.waypoints_enu;
  if (waypoints.empty())
    waypoints = {Vec3(0, 0, 0), Vec3(120, 0, 0), Vec3(120, 80, 0), Vec3(0, 80, 0)};
  const Vec3 v = enu_to_ecef * sc.velocity_enu;
  for (int k = 0; k < sc.epochs; ++k) {
    const double t = k / sc.rate;
    switch (sc.trajectory) {
      case TrajectoryKind::Static: out.push_back(origin); break;
      case TrajectoryKind::ConstantVelocity: out.push_back(origin + v * t); break;
      case TrajectoryKind::WaypointSpline: {
        const double s = t / duration * static_cast<double>(waypoints.size());
        out.push_back(origin + enu_to_ecef * catmull_rom(waypoints, s));
        break;
      }
    }
  }
  return out;
}

double elevation_of(const Vec3& receiver, const Vec3& satellite) {
  return elevation_azimuth(receiver, satellite).elevation;
}

}  // namespace

double quantize(double meters) { return std::nearbyint(meters * kGrid) / kGrid; }

double exact_phase_cycles(double meters, double wavelength) {
  double psi = meters / wavelength;
  if (psi * wavelength == meters) return psi;
  double up = psi, down = psi;
  for (int i = 0; i < 64; ++i) {
    up = std::nextafter(up, HUGE_VAL);
    down = std::nextafter(down, -HUGE_VAL);
    if (up * wavelength == meters) return up;
    if (down * wavelength == meters) return down;
  }
  return psi;  // no exact representative; nearest product is within one ulp
}

OrbitalShell gps_shell() { return {}; }

OrbitalShell beidou_shell() {
  OrbitalShell s;
  s.constellation = Constellation::BeiDou;
  s.planes = 3;
  s.per_plane = 8;
  s.radius = 2.7906e7;
  s.phasing = 1;
  s.wavelength = kBeidouB1Wavelength;
  return s;
}

std::string_view trajectory_name(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Static: return "static";
    case TrajectoryKind::ConstantVelocity: return "constant-velocity";
    case TrajectoryKind::WaypointSpline: return "waypoint-spline";
  }
  return "?";
}

std::optional<TrajectoryKind> parse_trajectory(std::string_view name) {
  if (name == "static") return TrajectoryKind::Static;
  if (name == "constant-velocity") return TrajectoryKind::ConstantVelocity;
  if (name == "waypoint-spline" || name == "spline") return TrajectoryKind::WaypointSpline;
  return std::nullopt;
}

std::string_view injection_name(InjectionType type) {
  switch (type) {
    case InjectionType::NlosOutlier: return "nlos";
    case InjectionType::DopplerOutlier: return "doppler";
    case InjectionType::CycleSlip: return "slip";
    case InjectionType::FlaggedCycleSlip: return "flagged-slip";
  }
  return "?";
}

std::optional<InjectionType> parse_injection(std::string_view name) {
  if (name == "nlos") return InjectionType::NlosOutlier;
  if (name == "doppler") return InjectionType::DopplerOutlier;
  if (name == "slip") return InjectionType::CycleSlip;
  if (name == "flagged-slip") return InjectionType::FlaggedCycleSlip;
  return std::nullopt;
}

KlobucharCoefficients ScenarioConfig::default_klobuchar() {
  return {{1.1176e-8, 7.4506e-9, -5.9605e-8, -5.9605e-8}, {9.0112e4, 4.9152e4, -1.3107e5, -3.2768e5}};
}

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("scenario: ") + what);
  };
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(epochs >= 1, "epochs must be >= 1");
  require(rate > 0.0 && std::isfinite(rate), "rate must be positive");
  require(!shells.empty(), "at least one orbital shell");
  for (const OrbitalShell& s : shells)
    require(s.planes >= 1 && s.per_plane >= 1 && s.radius > 1.5e7 && s.radius < 5e7 &&
                s.wavelength > 0.0,
            "bad orbital shell");
  require(max_satellites >= 0, "max_satellites must be >= 0");
  require(sigma_pseudorange >= 0.0 && sigma_phase >= 0.0 && sigma_doppler >= 0.0,
          "noise sigmas must be >= 0");
  require(prob(outlier_probability) && prob(doppler_outlier_probability) && prob(slip_probability),
          "probabilities must lie in [0, 1]");
  require(outlier_min >= 0.0 && outlier_max >= outlier_min, "bad outlier range");
  require(slip_min_cycles >= 1 && slip_max_cycles >= slip_min_cycles, "bad slip range");
  require(std::abs(receiver_clock_bias) + std::abs(receiver_clock_drift) * epochs / rate < 1e5,
          "receiver clock must stay within 1e5 m");
  require(satellite_clock_max >= 0.0 && satellite_clock_max <= 3e5, "bad satellite clock range");
  require(snr_noise >= 0.0 && phase_correction_max >= 0.0, "bad snr/correction settings");
}

ScenarioConfig scenario_preset(std::string_view name) {
  ScenarioConfig s;
  if (name == "clean") return s;
  s.sigma_pseudorange = 1.0;
  s.sigma_phase = 0.01;
  s.sigma_doppler = 0.1;
  s.trajectory = TrajectoryKind::WaypointSpline;
  s.epochs = 120;
  if (name == "urban") {
    s.outlier_probability = 0.10;
    s.slip_probability = 0.02;
    return s;
  }
  if (name == "heavy-slip") {
    s.outlier_probability = 0.10;
    s.slip_probability = 0.10;
    return s;
  }
  throw std::invalid_argument("unknown scenario preset: " + std::string(name));
}

Simulation generate(const ScenarioConfig& sc) {
  sc.validate();
  const WeightingConfig weights;  // estimator defaults set the noise shape
  CounterRng geometry_rng(derive_seed(sc.seed, 1));
  CounterRng clock_rng(derive_seed(sc.seed, 2));
  CounterRng snr_rng(derive_seed(sc.seed, 3));
  CounterRng noise_rng(derive_seed(sc.seed, 4));
  CounterRng outlier_rng(derive_seed(sc.seed, 5));
  CounterRng slip_rng(derive_seed(sc.seed, 6));
  CounterRng ambiguity_rng(derive_seed(sc.seed, 7));
  CounterRng correction_rng(derive_seed(sc.seed, 8));

  std::vector<Orbit> orbits;
  for (const OrbitalShell& shell : sc.shells) {
    const double node_offset = geometry_rng.uniform(0.0, 2.0 * kPi);
    const double phase_offset = geometry_rng.uniform(0.0, 2.0 * kPi);
    const int total = shell.planes * shell.per_plane;
    for (int p = 0; p < shell.planes; ++p) {
      for (int k = 0; k < shell.per_plane; ++k) {
        Orbit o;
        o.id = {shell.constellation, shell.first_prn + p * shell.per_plane + k};
        o.radius = shell.radius;
        o.inclination = shell.inclination;
        o.node = node_offset + 2.0 * kPi * p / shell.planes;
        o.phase0 = phase_offset + 2.0 * kPi * k / shell.per_plane +
                   2.0 * kPi * shell.phasing * p / total;
        o.wavelength = shell.wavelength;
        o.clock_bias = clock_rng.uniform(-sc.satellite_clock_max, sc.satellite_clock_max);
        o.clock_drift = clock_rng.uniform(-sc.satellite_drift_max, sc.satellite_drift_max);
        orbits.push_back(o);
      }
    }
  }
  std::sort(orbits.begin(), orbits.end(), [](const Orbit& a, const Orbit& b) { return a.id < b.id; });

  const std::vector<Vec3> truth_positions = receiver_positions(sc);
  std::vector<Constellation> systems;
  for (const OrbitalShell& s : sc.shells)
    if (std::find(systems.begin(), systems.end(), s.constellation) == systems.end())
      systems.push_back(s.constellation);

  std::vector<SatelliteId> chosen;
  if (sc.max_satellites > 0) {
    std::vector<std::pair<double, SatelliteId>> ranked;
    for (const Orbit& o : orbits) {
      Vec3 pos, vel;
      orbit_state(o, 0.0, pos, vel);
      const double el = elevation_of(truth_positions[0], pos);
      if (el >= sc.elevation_mask) ranked.emplace_back(el, o.id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(sc.max_satellites); ++i)
      chosen.push_back(ranked[i].second);
  }

  Simulation sim;
  std::map<SatelliteId, SatTrack> tracks;
  const RangeModel model{sc.earth_rotation ? kEarthRotationRate : 0.0};

  for (int k = 0; k < sc.epochs; ++k) {
    const double t = k / sc.rate;
    const Vec3& pr = truth_positions[static_cast<std::size_t>(k)];
    const Vec3 vr = k + 1 < sc.epochs
                        ? Vec3((truth_positions[static_cast<std::size_t>(k + 1)] - pr) * sc.rate)
                        : (k > 0 ? Vec3((pr - truth_positions[static_cast<std::size_t>(k - 1)]) * sc.rate)
                                 : Vec3::Zero());
    const GeodeticPosition geo = ecef_to_geodetic(pr);

    ReceiverState truth;
    truth.epoch = {t, k};
    truth.position = pr;
    truth.velocity = vr;
    const double base_clock = sc.receiver_clock_bias + sc.receiver_clock_drift * t;
    for (std::size_t i = 0; i < systems.size(); ++i)
      truth.clock_bias[systems[i]] = quantize(base_clock) + quantize(sc.inter_system_bias * i);

    Epoch epoch;
    epoch.time = {t, k};
    std::map<SatelliteId, SatTrack> next_tracks;
    for (const Orbit& o : orbits) {
      if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), o.id) == chosen.end()) continue;
      Vec3 ps, vs;
      orbit_state(o, t, ps, vs);
      const LookAngles look = elevation_azimuth(pr, ps);
      if (look.elevation < sc.elevation_mask) continue;

      SatelliteState sat;
      sat.sat = o.id;
      sat.position = ps;
      sat.velocity = vs;
      sat.clock_bias = quantize(o.clock_bias + o.clock_drift * t);
      sat.clock_drift = o.clock_drift;
      double iono = 0.0, tropo = 0.0;
      if (sc.atmosphere) {
        iono = quantize(iono_delay_klobuchar(look.elevation, look.azimuth, geo,
                                             t + sc.time_of_week_offset, sc.klobuchar, o.wavelength));
        tropo = quantize(tropo_delay_saastamoinen(look.elevation, geo.height, geo.latitude));
      }
      sat.iono_delay = iono;
      sat.tropo_delay = tropo;

      const double clock_r = truth.clock_bias.at(o.id.constellation);
      const double range = kernels::link_range(pr, ps, model.earth_rotation_rate);
      const double snr = sc.snr_horizon + sc.snr_zenith_gain * std::sin(look.elevation) +
                         sc.snr_noise * snr_rng.normal();
      // Noise shape follows the estimator's weighting model.
      const double shape = std::sqrt(measurement_variance(std::max(look.elevation, weights.elevation_mask),
                                                          snr, MeasurementKind::Pseudorange, weights)) /
                           weights.sigma_pseudorange;

      Observation obs;
      obs.sat = o.id;
      obs.snr = snr;
      obs.wavelength = o.wavelength;

      double pr_error = quantize(sc.sigma_pseudorange * shape * noise_rng.normal());
      if (outlier_rng.bernoulli(sc.outlier_probability)) {
        const double bias = quantize(outlier_rng.uniform(sc.outlier_min, sc.outlier_max));
        pr_error += bias;
        sim.injections.push_back({k, o.id, InjectionType::NlosOutlier, bias});
      }
      obs.pseudorange = range + clock_r - sat.clock_bias + iono + tropo + pr_error;

      const Vec3 u = (ps - pr).normalized();
      double range_rate = (vs - vr).dot(u) + sc.receiver_clock_drift - sat.clock_drift +
                          sc.sigma_doppler * shape * noise_rng.normal();
      if (outlier_rng.bernoulli(sc.doppler_outlier_probability)) {
        const double bias = outlier_rng.uniform(-sc.doppler_outlier_max, sc.doppler_outlier_max);
        range_rate += bias;
        sim.injections.push_back({k, o.id, InjectionType::DopplerOutlier, bias});
      }
      obs.doppler = -range_rate / o.wavelength;

      auto prev = tracks.find(o.id);
      SatTrack track;
      if (prev == tracks.end()) {
        track.ambiguity = ambiguity_rng.uniform_int(-100000, 100000);
      } else {
        track = prev->second;
        if (slip_rng.bernoulli(sc.slip_probability)) {
          const auto mag = slip_rng.uniform_int(sc.slip_min_cycles, sc.slip_max_cycles);
          const int cycles = static_cast<int>(slip_rng.bernoulli(0.5) ? mag : -mag);
          track.ambiguity += cycles;
          obs.loss_of_lock = sc.flag_slips;
          sim.injections.push_back({k, o.id,
                                    sc.flag_slips ? InjectionType::FlaggedCycleSlip
                                                  : InjectionType::CycleSlip,
                                    static_cast<double>(cycles)});
        }
      }
      next_tracks[o.id] = track;

      if (sc.phase_correction_max > 0.0)
        obs.phase_correction =
            quantize(correction_rng.uniform(-sc.phase_correction_max, sc.phase_correction_max));
      const double phase_error = quantize(sc.sigma_phase * shape * noise_rng.normal());
      const double ambiguity_m = quantize(static_cast<double>(track.ambiguity) * o.wavelength);
      const double phase_m = range + clock_r - sat.clock_bias + iono + tropo + obs.phase_correction +
                             ambiguity_m + phase_error;
      obs.carrier_phase = exact_phase_cycles(phase_m, o.wavelength);

      epoch.satellites.push_back(sat);
      epoch.observations.push_back(obs);
    }
    tracks = std::move(next_tracks);
    sim.dataset.epochs.push_back(std::move(epoch));
    sim.truth.states.push_back(std::move(truth));
  }
  return sim;
}

InjectionRecord inject_cycle_slip(Dataset& dataset, const SatelliteId& sat,
                                  std::int64_t epoch_index, int cycles, bool flagged) {
  if (cycles == 0) throw std::invalid_argument("inject_cycle_slip: cycles must be nonzero");
  auto it = std::find_if(dataset.epochs.begin(), dataset.epochs.end(),
                         [&](const Epoch& e) { return e.time.index == epoch_index; });
  if (it == dataset.epochs.end())
    throw std::invalid_argument("inject_cycle_slip: epoch not in dataset");
  bool first = true;
  for (; it != dataset.epochs.end(); ++it) {
    auto obs = std::find_if(it->observations.begin(), it->observations.end(),
                            [&](const Observation& o) { return o.sat == sat; });
    if (obs == it->observations.end() || !obs->carrier_phase) {
      if (first) throw std::invalid_argument("inject_cycle_slip: satellite has no phase at epoch");
      break;
    }
    if (!first && obs->loss_of_lock) break;
    *obs->carrier_phase += cycles;
    if (first && flagged) obs->loss_of_lock = true;
    first = false;
  }
  return {epoch_index, sat, flagged ? InjectionType::FlaggedCycleSlip : InjectionType::CycleSlip,
          static_cast<double>(cycles)};
}

}  // namespace wcp
