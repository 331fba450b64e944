#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wcp {

using Vec3 = Eigen::Vector3d;

enum class Constellation : std::uint8_t { GPS, GLONASS, BeiDou, Galileo, SIM };

/// Single-letter RINEX-style system code (G, R, C, E, S).
char constellation_code(Constellation c);
std::optional<Constellation> constellation_from_code(char code);

struct SatelliteId {
  Constellation constellation = Constellation::GPS;
  int prn = 0;

  auto operator<=>(const SatelliteId&) const = default;
  bool operator==(const SatelliteId&) const = default;

  /// "G07" style label.
  std::string str() const;
};

struct EpochTime {
  double seconds = 0.0;       // run-relative
  std::int64_t index = 0;     // strictly increasing within a dataset

  bool operator==(const EpochTime&) const = default;
};

/// One satellite's raw measurements at one epoch. Any of the three ranging
/// observables may be missing.
struct Observation {
  SatelliteId sat;
  std::optional<double> pseudorange;    // m
  std::optional<double> doppler;        // Hz, positive when closing
  std::optional<double> carrier_phase;  // cycles
  double snr = 0.0;                     // dB-Hz
  double wavelength = 0.0;              // m
  bool loss_of_lock = false;            // phase may have slipped since the previous epoch
  double phase_correction = 0.0;        // m, precomputed antenna/wind-up/tide terms

  bool operator==(const Observation&) const = default;
};

/// Satellite state at signal emission. Clock terms are in meters. Atmosphere
/// delays are optional; missing values are filled from the broadcast models.
struct SatelliteState {
  SatelliteId sat;
  Vec3 position = Vec3::Zero();  // ECEF m
  Vec3 velocity = Vec3::Zero();  // ECEF m/s
  double clock_bias = 0.0;       // m
  double clock_drift = 0.0;      // m/s
  std::optional<double> iono_delay;   // m
  std::optional<double> tropo_delay;  // m

  bool operator==(const SatelliteState& o) const {
    return sat == o.sat && position == o.position && velocity == o.velocity &&
           clock_bias == o.clock_bias && clock_drift == o.clock_drift &&
           iono_delay == o.iono_delay && tropo_delay == o.tropo_delay;
  }
};

struct Epoch {
  EpochTime time;
  std::vector<Observation> observations;
  std::vector<SatelliteState> satellites;

  const SatelliteState* find_satellite(const SatelliteId& id) const;
  const Observation* find_observation(const SatelliteId& id) const;

  bool operator==(const Epoch&) const = default;
};

struct Dataset {
  std::vector<Epoch> epochs;

  bool operator==(const Dataset&) const = default;
};

/// Per-epoch receiver unknowns. Clock biases are meters, one per constellation.
/// Velocity is the Doppler least-squares by-product, not an optimized unknown.
struct ReceiverState {
  EpochTime epoch;
  Vec3 position = Vec3::Zero();
  std::map<Constellation, double> clock_bias;
  Vec3 velocity = Vec3::Zero();

  bool operator==(const ReceiverState& o) const {
    return epoch == o.epoch && position == o.position && clock_bias == o.clock_bias &&
           velocity == o.velocity;
  }
};

struct Trajectory {
  std::vector<ReceiverState> states;

  const ReceiverState* find(std::int64_t epoch_index) const;
  bool operator==(const Trajectory&) const = default;
};

enum class Severity { Warning, Fatal };

struct Finding {
  Severity severity = Severity::Warning;
  std::size_t epoch = 0;  // position in Dataset::epochs
  std::string message;
};

struct ValidationReport {
  std::vector<std::size_t> satellite_counts;
  std::size_t missing_pseudorange = 0;
  std::size_t missing_doppler = 0;
  std::size_t missing_phase = 0;
  std::size_t non_monotone_timestamps = 0;
  std::vector<Finding> findings;

  std::size_t fatal_count() const;
  std::size_t warning_count() const;
  bool accepted() const { return fatal_count() == 0; }
  /// First fatal message, empty when accepted.
  std::string first_fatal() const;
};

ValidationReport validate_dataset(const Dataset& dataset);

}  // namespace wcp
