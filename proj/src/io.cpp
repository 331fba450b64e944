#include "wcp/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace wcp {

namespace {

constexpr std::string_view kDatasetMagic = "# wcpgnss-dataset v";
constexpr std::string_view kTrajectoryMagic = "# wcpgnss-trajectory v";
constexpr std::string_view kInjectionMagic = "# wcpgnss-injections v";
constexpr std::string_view kTrajectoryColumns =
    "epoch_index,t_seconds,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,clock_m";
constexpr std::string_view kInjectionColumns = "epoch_index,sat,type,magnitude";

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
  throw DataError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }
  std::size_t number() const { return number_; }
  std::string_view source() const { return source_; }

  // Version header then column header.
  void expect_header(std::string_view magic, std::string_view columns, const char* what) {
    std::string line;
    if (!next(line)) throw DataError(std::string(source_) + ": no epochs");
    if (line.rfind(magic, 0) != 0) fail(source_, number_, std::string("missing ") + what + " header");
    const std::string_view version = std::string_view(line).substr(magic.size());
    if (version != std::to_string(kDatasetFormatVersion))
      fail(source_, number_, std::string("unsupported ") + what + " format version '" +
                                 std::string(version) + "'");
    if (!next(line)) throw DataError(std::string(source_) + ": no epochs");
    if (line != columns) fail(source_, number_, "unexpected column header");
  }

 private:
  std::istream& in_;
  std::string_view source_;
  std::size_t number_ = 0;
};

double to_double(const LineReader& r, std::string_view field, const char* name) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    fail(r.source(), r.number(), std::string("bad number in ") + name + ": '" + std::string(field) + "'");
  return v;
}

long long to_int(const LineReader& r, std::string_view field, const char* name) {
  long long v = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    fail(r.source(), r.number(), std::string("bad integer in ") + name + ": '" + std::string(field) + "'");
  return v;
}

std::optional<double> to_optional(const LineReader& r, std::string_view field, const char* name) {
  if (field.empty()) return std::nullopt;
  return to_double(r, field, name);
}

SatelliteId to_sat(const LineReader& r, std::string_view code, std::string_view prn) {
  if (code.size() != 1) fail(r.source(), r.number(), "bad constellation '" + std::string(code) + "'");
  auto c = constellation_from_code(code[0]);
  if (!c) fail(r.source(), r.number(), "unknown constellation '" + std::string(code) + "'");
  return {*c, static_cast<int>(to_int(r, prn, "prn"))};
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

template <typename F>
void write_file(const std::filesystem::path& path, F&& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  body(out);
  if (!out) throw DataError("failed writing " + path.string());
}

std::ifstream open_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  out << kDatasetMagic << kDatasetFormatVersion << '\n' << kDatasetColumns << '\n';
  auto sat_fields = [&](const SatelliteState& s) {
    out << format_double(s.position.x()) << ',' << format_double(s.position.y()) << ','
        << format_double(s.position.z()) << ',' << format_double(s.velocity.x()) << ','
        << format_double(s.velocity.y()) << ',' << format_double(s.velocity.z()) << ','
        << format_double(s.clock_bias) << ',' << format_double(s.clock_drift) << ','
        << opt(s.iono_delay) << ',' << opt(s.tropo_delay);
  };
  for (const Epoch& e : dataset.epochs) {
    const std::string head =
        std::to_string(e.time.index) + ',' + format_double(e.time.seconds) + ',';
    if (e.observations.empty() && e.satellites.empty()) {
      out << head << ",,,,,,,,,,,,,,,,,,\n";
      continue;
    }
    for (const Observation& o : e.observations) {
      out << head << constellation_code(o.sat.constellation) << ',' << o.sat.prn << ','
          << opt(o.pseudorange) << ',' << opt(o.doppler) << ',' << opt(o.carrier_phase) << ','
          << format_double(o.wavelength) << ',' << format_double(o.snr) << ','
          << (o.loss_of_lock ? 1 : 0) << ',';
      if (const SatelliteState* s = e.find_satellite(o.sat)) {
        sat_fields(*s);
      } else {
        out << ",,,,,,,,,";
      }
      out << ',' << format_double(o.phase_correction) << '\n';
    }
    // Satellite states without an observation: measurement fields stay empty.
    for (const SatelliteState& s : e.satellites) {
      if (e.find_observation(s.sat)) continue;
      out << head << constellation_code(s.sat.constellation) << ',' << s.sat.prn << ",,,,,,,";
      sat_fields(s);
      out << ",\n";
    }
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_dataset(dataset, out); });
}

Dataset read_dataset(std::istream& in, std::string_view source) {
  LineReader reader(in, source);
  reader.expect_header(kDatasetMagic, kDatasetColumns, "dataset");

  Dataset dataset;
  std::string line;
  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != 21)
      fail(source, reader.number(), "expected 21 fields, found " + std::to_string(f.size()));
    const std::int64_t index = to_int(reader, f[0], "epoch_index");
    const double t = to_double(reader, f[1], "t_seconds");
    if (dataset.epochs.empty() || dataset.epochs.back().time.index != index) {
      Epoch e;
      e.time = {t, index};
      dataset.epochs.push_back(std::move(e));
    } else if (dataset.epochs.back().time.seconds != t) {
      fail(source, reader.number(), "t_seconds differs within epoch " + std::to_string(index));
    }
    Epoch& epoch = dataset.epochs.back();
    if (f[2].empty() && f[3].empty()) continue;  // empty epoch marker

    const SatelliteId sat = to_sat(reader, f[2], f[3]);
    const bool has_observation = !f[7].empty();
    if (has_observation) {
      Observation o;
      o.sat = sat;
      o.pseudorange = to_optional(reader, f[4], "pseudorange_m");
      o.doppler = to_optional(reader, f[5], "doppler_hz");
      o.carrier_phase = to_optional(reader, f[6], "phase_cycles");
      o.wavelength = to_double(reader, f[7], "wavelength_m");
      o.snr = f[8].empty() ? 0.0 : to_double(reader, f[8], "snr_dbhz");
      const long long lock = f[9].empty() ? 0 : to_int(reader, f[9], "lock");
      if (lock != 0 && lock != 1) fail(source, reader.number(), "lock must be 0 or 1");
      o.loss_of_lock = lock == 1;
      o.phase_correction = f[20].empty() ? 0.0 : to_double(reader, f[20], "phase_corr_m");
      epoch.observations.push_back(o);
    }
    if (!f[10].empty()) {
      SatelliteState s;
      s.sat = sat;
      s.position = Vec3(to_double(reader, f[10], "sat_x_m"), to_double(reader, f[11], "sat_y_m"),
                        to_double(reader, f[12], "sat_z_m"));
      s.velocity = Vec3(to_double(reader, f[13], "sat_vx_mps"), to_double(reader, f[14], "sat_vy_mps"),
                        to_double(reader, f[15], "sat_vz_mps"));
      s.clock_bias = to_double(reader, f[16], "sat_clk_m");
      s.clock_drift = to_double(reader, f[17], "sat_clkdrift_mps");
      s.iono_delay = to_optional(reader, f[18], "iono_m");
      s.tropo_delay = to_optional(reader, f[19], "tropo_m");
      epoch.satellites.push_back(s);
    } else if (!has_observation) {
      fail(source, reader.number(), "record carries neither an observation nor a satellite state");
    }
  }
  if (dataset.epochs.empty()) throw DataError(std::string(source) + ": no epochs");

  const ValidationReport report = validate_dataset(dataset);
  if (!report.accepted()) throw DataError(std::string(source) + ": " + report.first_fatal());
  return dataset;
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_file(path);
  const std::string name = path.string();
  return read_dataset(in, name);
}

void write_trajectory(const Trajectory& trajectory, std::ostream& out) {
  out << kTrajectoryMagic << kDatasetFormatVersion << '\n' << kTrajectoryColumns << '\n';
  for (const ReceiverState& s : trajectory.states) {
    out << s.epoch.index << ',' << format_double(s.epoch.seconds) << ','
        << format_double(s.position.x()) << ',' << format_double(s.position.y()) << ','
        << format_double(s.position.z()) << ',' << format_double(s.velocity.x()) << ','
        << format_double(s.velocity.y()) << ',' << format_double(s.velocity.z()) << ',';
    bool first = true;
    for (const auto& [c, v] : s.clock_bias) {
      if (!first) out << ';';
      out << constellation_code(c) << '=' << format_double(v);
      first = false;
    }
    out << '\n';
  }
}

void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_trajectory(trajectory, out); });
}

Trajectory read_trajectory(std::istream& in, std::string_view source) {
  LineReader reader(in, source);
  reader.expect_header(kTrajectoryMagic, kTrajectoryColumns, "trajectory");
  Trajectory out;
  std::string line;
  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != 9)
      fail(source, reader.number(), "expected 9 fields, found " + std::to_string(f.size()));
    ReceiverState s;
    s.epoch = {to_double(reader, f[1], "t_seconds"), to_int(reader, f[0], "epoch_index")};
    s.position = Vec3(to_double(reader, f[2], "x_m"), to_double(reader, f[3], "y_m"),
                      to_double(reader, f[4], "z_m"));
    s.velocity = Vec3(to_double(reader, f[5], "vx_mps"), to_double(reader, f[6], "vy_mps"),
                      to_double(reader, f[7], "vz_mps"));
    if (!f[8].empty()) {
      for (std::string_view item : split(f[8], ';')) {
        if (item.size() < 3 || item[1] != '=')
          fail(source, reader.number(), "bad clock entry '" + std::string(item) + "'");
        auto c = constellation_from_code(item[0]);
        if (!c) fail(source, reader.number(), "unknown constellation in clock entry");
        s.clock_bias[*c] = to_double(reader, item.substr(2), "clock_m");
      }
    }
    if (!out.states.empty() && s.epoch.index <= out.states.back().epoch.index)
      fail(source, reader.number(), "epoch index not strictly increasing");
    out.states.push_back(std::move(s));
  }
  if (out.states.empty()) throw DataError(std::string(source) + ": no epochs");
  return out;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  auto in = open_file(path);
  const std::string name = path.string();
  return read_trajectory(in, name);
}

void write_injections(const std::vector<InjectionRecord>& log, std::ostream& out) {
  out << kInjectionMagic << kDatasetFormatVersion << '\n' << kInjectionColumns << '\n';
  for (const InjectionRecord& r : log)
    out << r.epoch_index << ',' << r.sat.str() << ',' << injection_name(r.type) << ','
        << format_double(r.magnitude) << '\n';
}

void write_injections(const std::vector<InjectionRecord>& log, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_injections(log, out); });
}

std::vector<InjectionRecord> read_injections(std::istream& in, std::string_view source) {
  LineReader reader(in, source);
  std::vector<InjectionRecord> out;
  try {
    reader.expect_header(kInjectionMagic, kInjectionColumns, "injection log");
  } catch (const DataError& e) {
    if (reader.number() <= 1 && std::string_view(e.what()).find("no epochs") != std::string_view::npos)
      throw DataError(std::string(source) + ": empty injection log");
    throw;
  }
  std::string line;
  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != 4)
      fail(source, reader.number(), "expected 4 fields, found " + std::to_string(f.size()));
    InjectionRecord r;
    r.epoch_index = to_int(reader, f[0], "epoch_index");
    if (f[1].size() < 2) fail(source, reader.number(), "bad satellite '" + std::string(f[1]) + "'");
    r.sat = to_sat(reader, f[1].substr(0, 1), f[1].substr(1));
    auto type = parse_injection(f[2]);
    if (!type) fail(source, reader.number(), "unknown injection type '" + std::string(f[2]) + "'");
    r.type = *type;
    r.magnitude = to_double(reader, f[3], "magnitude");
    out.push_back(r);
  }
  return out;
}

std::vector<InjectionRecord> read_injections(const std::filesystem::path& path) {
  auto in = open_file(path);
  const std::string name = path.string();
  return read_injections(in, name);
}

void write_report(const SolveReport& r, std::ostream& out) {
  out << "# wcpgnss-report v" << kDatasetFormatVersion << '\n';
  out << "mode=" << mode_name(r.mode) << '\n'
      << "converged=" << (r.converged() ? "true" : "false") << '\n'
      << "reason=" << reason_name(r.reason) << '\n'
      << "iterations=" << r.iterations << '\n'
      << "accepted_steps=" << r.accepted_steps << '\n'
      << "initial_cost=" << format_double(r.initial_cost) << '\n'
      << "final_cost=" << format_double(r.final_cost) << '\n'
      << "final_gradient=" << format_double(r.final_gradient) << '\n'
      << "cost_pseudorange=" << format_double(r.final_costs.pseudorange) << '\n'
      << "cost_doppler=" << format_double(r.final_costs.doppler) << '\n'
      << "cost_tdcp=" << format_double(r.final_costs.tdcp) << '\n'
      << "cost_wcp=" << format_double(r.final_costs.wcp) << '\n'
      << "epochs=" << r.trajectory.states.size() << '\n'
      << "windows=" << r.windows.size() << '\n';
  out << "cost_history=";
  for (std::size_t i = 0; i < r.cost_history.size(); ++i)
    out << (i ? ";" : "") << format_double(r.cost_history[i]);
  out << "\n\n[windows]\nsat,first_epoch,size,whitened_norm,weight\n";
  for (const WindowDiagnostics& w : r.windows)
    out << w.sat.str() << ',' << w.first_epoch_index << ',' << w.size << ','
        << format_double(w.norm) << ',' << format_double(w.weight) << '\n';
}

void write_report(const SolveReport& report, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& out) { write_report(report, out); });
}

}  // namespace wcp
