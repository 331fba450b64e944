#include "wcp/graph.hpp"

#include "wcp/prng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace wcp {

std::string_view mode_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::WLS_SPP: return "wls";
    case EstimatorMode::PSR_DOP: return "psr-dop";
    case EstimatorMode::PSR_DOP_TDCP: return "psr-dop-tdcp";
    case EstimatorMode::PSR_DOP_WCP: return "psr-dop-wcp";
  }
  return "?";
}

std::optional<EstimatorMode> parse_mode(std::string_view name) {
  if (name == "wls" || name == "wls-spp") return EstimatorMode::WLS_SPP;
  if (name == "psr-dop" || name == "sol1") return EstimatorMode::PSR_DOP;
  if (name == "psr-dop-tdcp" || name == "sol2") return EstimatorMode::PSR_DOP_TDCP;
  if (name == "psr-dop-wcp" || name == "sol3") return EstimatorMode::PSR_DOP_WCP;
  return std::nullopt;
}

void SolverConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("solver config: ") + what);
  };
  require(max_window >= 2, "max_window must be >= 2");
  require(max_iterations >= 1, "max_iterations must be >= 1");
  require(gradient_tolerance > 0.0, "gradient_tolerance must be positive");
  require(step_tolerance > 0.0, "step_tolerance must be positive");
  require(function_tolerance > 0.0, "function_tolerance must be positive");
  require(initial_lambda > 0.0, "initial_lambda must be positive");
  for (const RobustKernel* k : {&kernels.pseudorange, &kernels.doppler, &kernels.tdcp, &kernels.wcp})
    require(k->k > 0.0 && std::isfinite(k->k), "kernel parameter must be positive");
  require(weighting.sigma_pseudorange > 0.0 && weighting.sigma_phase > 0.0 &&
              weighting.sigma_doppler > 0.0,
          "sigmas must be positive");
  require(weighting.elevation_mask >= 0.0 && weighting.elevation_mask < 1.5,
          "elevation mask out of range");
  require(weighting.snr_slope > 0.0 && weighting.snr_max_factor >= 1.0, "bad snr weighting");
}

std::size_t StateLayout::clock_index(std::size_t epoch, Constellation c) const {
  const auto& list = clocks[epoch];
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i] == c) return offset[epoch] + 3 + i;
  throw std::out_of_range("state layout: no clock for constellation at epoch");
}

std::vector<SatelliteState> resolve_atmosphere(const Epoch& epoch, const Vec3& receiver,
                                               const SolverConfig& config) {
  std::vector<SatelliteState> out = epoch.satellites;
  if (receiver.norm() <= 6.2e6) return out;
  const GeodeticPosition geo = ecef_to_geodetic(receiver);
  for (SatelliteState& s : out) {
    if (s.iono_delay && s.tropo_delay) continue;
    const LookAngles look = elevation_azimuth(receiver, s.position);
    if (!s.tropo_delay)
      s.tropo_delay = look.elevation > kTropoMinElevation
                          ? tropo_delay_saastamoinen(look.elevation, geo.height, geo.latitude)
                          : 0.0;
    if (!s.iono_delay) {
      const Observation* obs = epoch.find_observation(s.sat);
      const double wavelength = obs && obs->wavelength > 0.0 ? obs->wavelength : kGpsL1Wavelength;
      s.iono_delay = look.elevation > 0.0
                         ? iono_delay_klobuchar(look.elevation, look.azimuth, geo,
                                                epoch.time.seconds + config.time_of_week_offset,
                                                config.klobuchar, wavelength)
                         : 0.0;
    }
  }
  return out;
}

WlsSolution solve_wls_epoch(const Epoch& epoch, const SolverConfig& config,
                            std::optional<Vec3> initial) {
  const RangeModel model = config.range_model();
  Vec3 p = initial.value_or(Vec3::Zero());
  std::map<Constellation, double> clocks;
  bool settled = false;

  struct Row {
    Constellation c;
    Vec3 sat;
    double y;
    double w;
  };

  for (int iteration = 1; iteration <= 20; ++iteration) {
    const bool located = p.norm() > 6.2e6;
    const bool weighted = located && settled;
    const std::vector<SatelliteState> sats =
        located ? resolve_atmosphere(epoch, p, config) : epoch.satellites;

    std::vector<Row> rows;
    for (const Observation& obs : epoch.observations) {
      if (!obs.pseudorange) continue;
      auto s = std::find_if(sats.begin(), sats.end(),
                            [&](const SatelliteState& x) { return x.sat == obs.sat; });
      if (s == sats.end()) continue;
      double w = 1.0;
      if (weighted) {
        const double el = elevation_azimuth(p, s->position).elevation;
        if (el < config.weighting.elevation_mask) continue;
        w = 1.0 / measurement_variance(el, obs.snr, MeasurementKind::Pseudorange, config.weighting);
      }
      rows.push_back({obs.sat.constellation, s->position, correct_pseudorange(obs, *s), w});
    }

    std::vector<Constellation> systems;
    for (const Row& r : rows)
      if (std::find(systems.begin(), systems.end(), r.c) == systems.end()) systems.push_back(r.c);
    std::sort(systems.begin(), systems.end());
    const std::size_t need = 3 + systems.size();
    if (rows.size() < need) {
      std::ostringstream msg;
      msg << "insufficient satellites at epoch " << epoch.time.index << ": " << rows.size()
          << " usable pseudoranges, " << need << " required";
      throw InsufficientSatellitesError(msg.str());
    }

    const auto dim = static_cast<Eigen::Index>(need);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (const Row& r : rows) {
      const LinkGeometry g = link_geometry(p, r.sat, model);
      const auto ci = static_cast<Eigen::Index>(
          3 + (std::find(systems.begin(), systems.end(), r.c) - systems.begin()));
      Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
      a.head<3>() = -g.gradient;  // d(range)/dp
      a(ci) = 1.0;
      const double clk = clocks.count(r.c) ? clocks[r.c] : 0.0;
      const double misfit = r.y - (g.range + clk);
      normal += r.w * a * a.transpose();
      rhs += r.w * misfit * a;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw SolverError("wls: singular geometry at epoch " + std::to_string(epoch.time.index));
    const Eigen::VectorXd dx = ldlt.solve(rhs);
    p += dx.head<3>();
    for (std::size_t i = 0; i < systems.size(); ++i) {
      clocks[systems[i]] += dx(static_cast<Eigen::Index>(3 + i));
    }
    const double step = dx.head<3>().norm();
    if (step < 1e3) settled = true;
    if (step < 1e-4 && weighted) {
      WlsSolution out;
      out.state.epoch = epoch.time;
      out.state.position = p;
      for (Constellation c : systems) out.state.clock_bias[c] = clocks[c];
      out.covariance = normal.inverse();
      out.iterations = iteration;
      out.used = static_cast<int>(rows.size());
      return out;
    }
  }
  throw SolverError("wls: no convergence after 20 iterations at epoch " +
                    std::to_string(epoch.time.index));
}

std::vector<std::pair<std::size_t, std::size_t>> split_track(std::size_t length, int max_window,
                                                             bool chain) {
  if (max_window < 2) throw std::invalid_argument("split_track: max_window must be >= 2");
  const auto cap = static_cast<std::size_t>(max_window);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  while (begin + 1 < length) {
    const std::size_t end = std::min(begin + cap, length);
    out.emplace_back(begin, end);
    if (end == length) break;
    begin = chain ? end - 1 : end;
  }
  return out;
}

namespace {

struct OpenTrack {
  PhaseTrack track;
  std::size_t last = 0;
};

std::uint64_t window_tag(const SatelliteId& sat, std::int64_t epoch_index) {
  return (static_cast<std::uint64_t>(sat.constellation) << 56) ^
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(sat.prn)) << 40) ^
         static_cast<std::uint64_t>(epoch_index);
}

std::vector<ReceiverState> initial_states(const Dataset& dataset, const SolverConfig& config) {
  const std::size_t n = dataset.epochs.size();
  std::vector<std::optional<ReceiverState>> fixes(n);
  std::optional<Vec3> previous;
  for (std::size_t t = 0; t < n; ++t) {
    const Epoch& e = dataset.epochs[t];
    try {
      fixes[t] = solve_wls_epoch(e, config, previous).state;
    } catch (const DataError&) {
    } catch (const SolverError&) {
      if (previous) {
        try {
          fixes[t] = solve_wls_epoch(e, config).state;
        } catch (const std::runtime_error&) {
        }
      }
    }
    if (fixes[t]) previous = fixes[t]->position;
  }

  std::vector<ReceiverState> out(n);
  std::optional<ReceiverState> last;
  for (std::size_t t = 0; t < n; ++t) {
    if (fixes[t]) last = fixes[t];
    if (last) out[t] = *last;
  }
  if (!last)
    throw DataError("no epoch has enough satellites for an initial position fix");
  // Epochs before the first fix borrow the first fix.
  std::size_t first = 0;
  while (!fixes[first]) ++first;
  for (std::size_t t = 0; t < first; ++t) out[t] = *fixes[first];
  for (std::size_t t = 0; t < n; ++t) out[t].epoch = dataset.epochs[t].time;
  return out;
}

}  // namespace

FactorGraph build_graph(const Dataset& dataset, const SolverConfig& config) {
  if (dataset.epochs.empty()) throw DataError("empty dataset");
  config.validate();

  FactorGraph graph;
  graph.mode = config.mode;
  graph.range = config.range_model();
  const std::size_t n = dataset.epochs.size();
  for (const Epoch& e : dataset.epochs) graph.epochs.push_back(e.time);
  graph.initial = initial_states(dataset, config);
  graph.doppler_velocity.assign(n, std::nullopt);

  std::vector<std::set<Constellation>> used(n);
  std::vector<PhaseTrack> tracks;
  std::map<SatelliteId, OpenTrack> open;
  auto close = [&](std::map<SatelliteId, OpenTrack>::iterator it) {
    if (it->second.track.phases.size() >= 2) tracks.push_back(std::move(it->second.track));
    return open.erase(it);
  };

  for (std::size_t t = 0; t < n; ++t) {
    const Epoch& epoch = dataset.epochs[t];
    const Vec3& p = graph.initial[t].position;
    const std::vector<SatelliteState> sats = resolve_atmosphere(epoch, p, config);

    if (auto v = doppler_wls_velocity(epoch.observations, sats, p, config.weighting, graph.range))
      graph.doppler_velocity[t] = v;
    if (config.mode == EstimatorMode::WLS_SPP) continue;

    std::set<SatelliteId> seen;
    for (const Observation& obs : epoch.observations) {
      auto s = std::find_if(sats.begin(), sats.end(),
                            [&](const SatelliteState& x) { return x.sat == obs.sat; });
      if (s == sats.end()) continue;
      const double el = elevation_azimuth(p, s->position).elevation;
      if (el < config.weighting.elevation_mask) continue;

      if (obs.pseudorange) {
        PseudorangeFactor f;
        f.epoch = t;
        f.sat = obs.sat;
        f.satellite_position = s->position;
        f.corrected_pseudorange = correct_pseudorange(obs, *s);
        f.variance = measurement_variance(el, obs.snr, MeasurementKind::Pseudorange, config.weighting);
        graph.pseudoranges.push_back(f);
        used[t].insert(obs.sat.constellation);
      }

      if (config.mode == EstimatorMode::PSR_DOP || !obs.carrier_phase) continue;
      seen.insert(obs.sat);
      const double phase = correct_phase(obs, *s);
      const double var = measurement_variance(el, obs.snr, MeasurementKind::Phase, config.weighting);
      auto it = open.find(obs.sat);
      if (it != open.end() && (it->second.last + 1 != t || obs.loss_of_lock)) {
        close(it);
        it = open.end();
      }
      if (it == open.end()) {
        OpenTrack fresh;
        fresh.track.sat = obs.sat;
        fresh.track.first_epoch = t;
        it = open.emplace(obs.sat, std::move(fresh)).first;
      }
      it->second.track.satellite_positions.push_back(s->position);
      it->second.track.phases.push_back(phase);
      it->second.track.variances.push_back(var);
      it->second.last = t;
    }
    for (auto it = open.begin(); it != open.end();) it = seen.count(it->first) ? std::next(it) : close(it);
  }
  for (auto it = open.begin(); it != open.end();) it = close(it);
  std::sort(tracks.begin(), tracks.end(), [](const PhaseTrack& a, const PhaseTrack& b) {
    return std::tie(a.first_epoch, a.sat) < std::tie(b.first_epoch, b.sat);
  });

  if (config.mode != EstimatorMode::WLS_SPP) {
    for (std::size_t t = 0; t + 1 < n; ++t) {
      if (!graph.doppler_velocity[t]) continue;
      DopplerVelocityFactor f;
      f.epoch = t;
      f.velocity = graph.doppler_velocity[t]->velocity;
      f.dt = dataset.epochs[t + 1].time.seconds - dataset.epochs[t].time.seconds;
      f.covariance = graph.doppler_velocity[t]->covariance;
      graph.dopplers.push_back(f);
    }
  }

  for (const PhaseTrack& track : tracks) {
    const std::size_t len = track.phases.size();
    if (config.mode == EstimatorMode::PSR_DOP_TDCP) {
      for (std::size_t i = 0; i + 1 < len; ++i) {
        TdcpFactor f;
        f.epoch = track.first_epoch + i;
        f.sat = track.sat;
        f.satellite_position_t = track.satellite_positions[i];
        f.satellite_position_t1 = track.satellite_positions[i + 1];
        f.delta_phase = track.phases[i + 1] - track.phases[i];
        f.variance = track.variances[i] + track.variances[i + 1];
        graph.tdcps.push_back(f);
        used[f.epoch].insert(f.sat.constellation);
        used[f.epoch + 1].insert(f.sat.constellation);
      }
    } else if (config.mode == EstimatorMode::PSR_DOP_WCP) {
      for (const auto& [b, e] : split_track(len, config.max_window, config.chain_windows)) {
        PhaseTrack part;
        part.sat = track.sat;
        part.first_epoch = track.first_epoch + b;
        part.satellite_positions.assign(track.satellite_positions.begin() + static_cast<long>(b),
                                        track.satellite_positions.begin() + static_cast<long>(e));
        part.phases.assign(track.phases.begin() + static_cast<long>(b),
                           track.phases.begin() + static_cast<long>(e));
        part.variances.assign(track.variances.begin() + static_cast<long>(b),
                              track.variances.begin() + static_cast<long>(e));
        const std::uint64_t seed =
            derive_seed(config.eliminator_seed,
                        window_tag(part.sat, dataset.epochs[part.first_epoch].time.index));
        graph.windows.push_back(build_phase_window(
            part, make_eliminator(config.eliminator, static_cast<int>(e - b), seed)));
        for (std::size_t t = part.first_epoch; t < part.first_epoch + (e - b); ++t)
          used[t].insert(part.sat.constellation);
      }
    }
  }

  graph.layout.offset.resize(n);
  graph.layout.clocks.resize(n);
  std::size_t next = 0;
  for (std::size_t t = 0; t < n; ++t) {
    graph.layout.offset[t] = next;
    if (config.mode == EstimatorMode::WLS_SPP)
      for (const auto& [c, v] : graph.initial[t].clock_bias) used[t].insert(c);
    graph.layout.clocks[t].assign(used[t].begin(), used[t].end());
    next += 3 + used[t].size();
  }
  graph.layout.dimension = next;
  return graph;
}

}  // namespace wcp
