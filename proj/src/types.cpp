#include "wcp/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace wcp {

char constellation_code(Constellation c) {
  switch (c) {
    case Constellation::GPS: return 'G';
    case Constellation::GLONASS: return 'R';
    case Constellation::BeiDou: return 'C';
    case Constellation::Galileo: return 'E';
    case Constellation::SIM: return 'S';
  }
  return '?';
}

std::optional<Constellation> constellation_from_code(char code) {
  switch (code) {
    case 'G': return Constellation::GPS;
    case 'R': return Constellation::GLONASS;
    case 'C': return Constellation::BeiDou;
    case 'E': return Constellation::Galileo;
    case 'S': return Constellation::SIM;
    default: return std::nullopt;
  }
}

std::string SatelliteId::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%02d", constellation_code(constellation), prn);
  return buf;
}

const SatelliteState* Epoch::find_satellite(const SatelliteId& id) const {
  auto it = std::find_if(satellites.begin(), satellites.end(),
                         [&](const SatelliteState& s) { return s.sat == id; });
  return it == satellites.end() ? nullptr : &*it;
}

const Observation* Epoch::find_observation(const SatelliteId& id) const {
  auto it = std::find_if(observations.begin(), observations.end(),
                         [&](const Observation& o) { return o.sat == id; });
  return it == observations.end() ? nullptr : &*it;
}

const ReceiverState* Trajectory::find(std::int64_t epoch_index) const {
  auto it = std::lower_bound(states.begin(), states.end(), epoch_index,
                             [](const ReceiverState& s, std::int64_t i) { return s.epoch.index < i; });
  if (it == states.end() || it->epoch.index != epoch_index) return nullptr;
  return &*it;
}

std::size_t ValidationReport::fatal_count() const {
  return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(), [](const Finding& f) {
    return f.severity == Severity::Fatal;
  }));
}

std::size_t ValidationReport::warning_count() const {
  return findings.size() - fatal_count();
}

std::string ValidationReport::first_fatal() const {
  for (const auto& f : findings)
    if (f.severity == Severity::Fatal) return f.message;
  return {};
}

namespace {

bool finite3(const Vec3& v) { return v.allFinite(); }

}  // namespace

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  auto add = [&](Severity s, std::size_t epoch, std::string msg) {
    report.findings.push_back({s, epoch, std::move(msg)});
  };

  for (std::size_t e = 0; e < dataset.epochs.size(); ++e) {
    const Epoch& ep = dataset.epochs[e];
    const std::string where = "epoch " + std::to_string(ep.time.index) + ": ";
    report.satellite_counts.push_back(ep.observations.size());

    if (e > 0) {
      const Epoch& prev = dataset.epochs[e - 1];
      if (ep.time.index <= prev.time.index)
        add(Severity::Fatal, e, where + "epoch index not strictly increasing");
      if (!(ep.time.seconds > prev.time.seconds)) {
        ++report.non_monotone_timestamps;
        add(Severity::Fatal, e, where + "non-positive dt");
      }
    }
    if (ep.time.index < 0) add(Severity::Fatal, e, where + "negative epoch index");

    std::set<SatelliteId> seen;
    for (const auto& obs : ep.observations) {
      if (!seen.insert(obs.sat).second)
        add(Severity::Fatal, e, where + "duplicate satellite " + obs.sat.str());
      if (!ep.find_satellite(obs.sat))
        add(Severity::Fatal, e, where + "orphan observation " + obs.sat.str());
      if (!obs.pseudorange) ++report.missing_pseudorange;
      if (!obs.doppler) ++report.missing_doppler;
      if (!obs.carrier_phase) ++report.missing_phase;
      if (obs.pseudorange && !(*obs.pseudorange > 0.0 && std::isfinite(*obs.pseudorange)))
        add(Severity::Fatal, e, where + "non-positive pseudorange " + obs.sat.str());
      if (!(obs.wavelength > 0.0 && std::isfinite(obs.wavelength)))
        add(Severity::Fatal, e, where + "non-positive wavelength " + obs.sat.str());
      if (obs.doppler && !std::isfinite(*obs.doppler))
        add(Severity::Fatal, e, where + "non-finite doppler " + obs.sat.str());
      if (obs.carrier_phase && !std::isfinite(*obs.carrier_phase))
        add(Severity::Fatal, e, where + "non-finite carrier phase " + obs.sat.str());
      if (!(obs.snr >= 0.0)) add(Severity::Warning, e, where + "negative snr " + obs.sat.str());
    }

    std::set<SatelliteId> states;
    for (const auto& s : ep.satellites) {
      if (!states.insert(s.sat).second)
        add(Severity::Fatal, e, where + "duplicate satellite state " + s.sat.str());
      if (!finite3(s.position) || !finite3(s.velocity) || !std::isfinite(s.clock_bias) ||
          !std::isfinite(s.clock_drift)) {
        add(Severity::Fatal, e, where + "non-finite satellite state " + s.sat.str());
        continue;
      }
      const double r = s.position.norm();
      if (r < 1.5e7 || r > 5e7)
        add(Severity::Warning, e, where + "satellite radius out of band " + s.sat.str());
    }
  }
  return report;
}

}  // namespace wcp
