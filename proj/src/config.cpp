#include "wcp/config.hpp"

#include "wcp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace wcp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Same operation order as the literal defaults, e.g. 10.0 * pi / 180.0.
double radians(double deg) { return deg * kPi / 180.0; }

// A degree value that converts back to `rad` exactly.
double degrees(double rad) {
  const double d = rad * 180.0 / kPi;
  double up = d, down = d;
  for (int i = 0; i < 16 && radians(d) != rad; ++i) {
    if (radians(up = std::nextafter(up, HUGE_VAL)) == rad) return up;
    if (radians(down = std::nextafter(down, -HUGE_VAL)) == rad) return down;
  }
  return d;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw std::invalid_argument("'" + std::string(key) + "': " + std::string(why) + " (got '" +
                              std::string(value) + "')");
}

std::array<double, 4> parse_four(std::string_view key, std::string_view value) {
  std::array<double, 4> out{};
  std::size_t i = 0, start = 0;
  while (true) {
    const std::size_t pos = value.find(',', start);
    if (i >= 4) bad(key, value, "expected four comma-separated numbers");
    out[i++] = parse_number(trim(value.substr(start, pos == std::string_view::npos ? pos : pos - start)), key);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (i != 4) bad(key, value, "expected four comma-separated numbers");
  return out;
}

RobustKernel with_kind(RobustKernel k, std::string_view key, std::string_view value) {
  auto kind = parse_kernel(value);
  if (!kind) bad(key, value, "kernel must be none, huber or cauchy");
  k.kind = *kind;
  return k;
}

double positive(std::string_view key, std::string_view value) {
  const double v = parse_number(value, key);
  if (!(v > 0.0)) bad(key, value, "must be positive");
  return v;
}

double non_negative(std::string_view key, std::string_view value) {
  const double v = parse_number(value, key);
  if (!(v >= 0.0)) bad(key, value, "must be non-negative");
  return v;
}

double probability(std::string_view key, std::string_view value) {
  const double v = parse_number(value, key);
  if (!(v >= 0.0 && v <= 1.0)) bad(key, value, "must lie in [0, 1]");
  return v;
}

template <typename Apply>
void read_lines(std::istream& in, Apply&& apply) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = trim(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("line " + std::to_string(number) + ": expected key=value");
    try {
      apply(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    bad(what, text, "expected a finite number");
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) bad(what, text, "expected an integer");
  return v;
}

bool parse_bool(std::string_view text, std::string_view what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad(what, text, "expected true or false");
}

void apply_solver_setting(SolverConfig& c, std::string_view key, std::string_view value) {
  if (key == "mode") {
    auto m = parse_mode(value);
    if (!m) bad(key, value, "mode must be wls, psr-dop, psr-dop-tdcp or psr-dop-wcp");
    c.mode = *m;
  } else if (key == "n_max" || key == "max_window") {
    const long long n = parse_integer(value, key);
    if (n < 2 || n > 1000) bad(key, value, "must lie in [2, 1000]");
    c.max_window = static_cast<int>(n);
  } else if (key == "chain_windows") {
    c.chain_windows = parse_bool(value, key);
  } else if (key == "eliminator") {
    auto k = parse_eliminator(value);
    if (!k) bad(key, value, "eliminator must be orthonormal, random-unitary or tdcp");
    c.eliminator = *k;
  } else if (key == "eliminator_seed") {
    const long long s = parse_integer(value, key);
    if (s < 0) bad(key, value, "must be non-negative");
    c.eliminator_seed = static_cast<std::uint64_t>(s);
  } else if (key == "pseudorange_kernel") {
    c.kernels.pseudorange = with_kind(c.kernels.pseudorange, key, value);
  } else if (key == "pseudorange_k") {
    c.kernels.pseudorange.k = positive(key, value);
  } else if (key == "doppler_kernel") {
    c.kernels.doppler = with_kind(c.kernels.doppler, key, value);
  } else if (key == "doppler_k") {
    c.kernels.doppler.k = positive(key, value);
  } else if (key == "tdcp_kernel") {
    c.kernels.tdcp = with_kind(c.kernels.tdcp, key, value);
  } else if (key == "tdcp_k") {
    c.kernels.tdcp.k = positive(key, value);
  } else if (key == "wcp_kernel") {
    c.kernels.wcp = with_kind(c.kernels.wcp, key, value);
  } else if (key == "wcp_k") {
    c.kernels.wcp.k = positive(key, value);
  } else if (key == "max_iterations") {
    const long long n = parse_integer(value, key);
    if (n < 1 || n > 100000) bad(key, value, "must lie in [1, 100000]");
    c.max_iterations = static_cast<int>(n);
  } else if (key == "gradient_tolerance") {
    c.gradient_tolerance = positive(key, value);
  } else if (key == "step_tolerance") {
    c.step_tolerance = positive(key, value);
  } else if (key == "function_tolerance") {
    c.function_tolerance = positive(key, value);
  } else if (key == "initial_lambda") {
    c.initial_lambda = positive(key, value);
  } else if (key == "elevation_mask_deg") {
    const double d = parse_number(value, key);
    if (d < 0.0 || d >= 85.0) bad(key, value, "must lie in [0, 85)");
    c.weighting.elevation_mask = radians(d);
  } else if (key == "sigma_pseudorange") {
    c.weighting.sigma_pseudorange = positive(key, value);
  } else if (key == "sigma_phase") {
    c.weighting.sigma_phase = positive(key, value);
  } else if (key == "sigma_doppler") {
    c.weighting.sigma_doppler = positive(key, value);
  } else if (key == "snr_ref") {
    c.weighting.snr_ref = parse_number(value, key);
  } else if (key == "snr_slope") {
    c.weighting.snr_slope = positive(key, value);
  } else if (key == "snr_max_factor") {
    c.weighting.snr_max_factor = parse_number(value, key);
    if (c.weighting.snr_max_factor < 1.0) bad(key, value, "must be >= 1");
  } else if (key == "earth_rotation") {
    c.earth_rotation = parse_bool(value, key);
  } else if (key == "klobuchar_alpha") {
    c.klobuchar.alpha = parse_four(key, value);
  } else if (key == "klobuchar_beta") {
    c.klobuchar.beta = parse_four(key, value);
  } else if (key == "time_of_week_offset") {
    c.time_of_week_offset = parse_number(value, key);
  } else {
    throw std::invalid_argument("unknown solver key '" + std::string(key) + "'");
  }
}

void apply_scenario_setting(ScenarioConfig& c, std::string_view key, std::string_view value) {
  auto integer_in = [&](long long lo, long long hi) {
    const long long v = parse_integer(value, key);
    if (v < lo || v > hi) bad(key, value, "out of range");
    return v;
  };
  if (key == "epochs") {
    c.epochs = static_cast<int>(integer_in(1, 1000000));
  } else if (key == "rate") {
    c.rate = positive(key, value);
  } else if (key == "constellations") {
    c.shells.clear();
    std::size_t start = 0;
    while (start <= value.size()) {
      const std::size_t pos = value.find(',', start);
      const std::string_view name =
          trim(value.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (name == "gps") c.shells.push_back(gps_shell());
      else if (name == "beidou") c.shells.push_back(beidou_shell());
      else bad(key, value, "constellations are gps and/or beidou");
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  } else if (key == "max_satellites") {
    c.max_satellites = static_cast<int>(integer_in(0, 1000));
  } else if (key == "elevation_mask_deg") {
    const double d = parse_number(value, key);
    if (d < 0.0 || d >= 85.0) bad(key, value, "must lie in [0, 85)");
    c.elevation_mask = radians(d);
  } else if (key == "origin_lat_deg") {
    const double d = parse_number(value, key);
    if (std::abs(d) > 90.0) bad(key, value, "must lie in [-90, 90]");
    c.origin.latitude = radians(d);
  } else if (key == "origin_lon_deg") {
    const double d = parse_number(value, key);
    if (std::abs(d) > 180.0) bad(key, value, "must lie in [-180, 180]");
    c.origin.longitude = radians(d);
  } else if (key == "origin_height") {
    c.origin.height = parse_number(value, key);
  } else if (key == "trajectory") {
    auto t = parse_trajectory(value);
    if (!t) bad(key, value, "trajectory must be static, constant-velocity or waypoint-spline");
    c.trajectory = *t;
  } else if (key == "velocity_east") {
    c.velocity_enu.x() = parse_number(value, key);
  } else if (key == "velocity_north") {
    c.velocity_enu.y() = parse_number(value, key);
  } else if (key == "velocity_up") {
    c.velocity_enu.z() = parse_number(value, key);
  } else if (key == "sigma_pseudorange") {
    c.sigma_pseudorange = non_negative(key, value);
  } else if (key == "sigma_phase") {
    c.sigma_phase = non_negative(key, value);
  } else if (key == "sigma_doppler") {
    c.sigma_doppler = non_negative(key, value);
  } else if (key == "outlier_probability") {
    c.outlier_probability = probability(key, value);
  } else if (key == "outlier_min") {
    c.outlier_min = non_negative(key, value);
  } else if (key == "outlier_max") {
    c.outlier_max = non_negative(key, value);
  } else if (key == "doppler_outlier_probability") {
    c.doppler_outlier_probability = probability(key, value);
  } else if (key == "doppler_outlier_max") {
    c.doppler_outlier_max = non_negative(key, value);
  } else if (key == "slip_probability") {
    c.slip_probability = probability(key, value);
  } else if (key == "slip_min_cycles") {
    c.slip_min_cycles = static_cast<int>(integer_in(1, 1000000));
  } else if (key == "slip_max_cycles") {
    c.slip_max_cycles = static_cast<int>(integer_in(1, 1000000));
  } else if (key == "flag_slips") {
    c.flag_slips = parse_bool(value, key);
  } else if (key == "snr_horizon") {
    c.snr_horizon = parse_number(value, key);
  } else if (key == "snr_zenith_gain") {
    c.snr_zenith_gain = parse_number(value, key);
  } else if (key == "snr_noise") {
    c.snr_noise = non_negative(key, value);
  } else if (key == "receiver_clock_bias") {
    c.receiver_clock_bias = parse_number(value, key);
  } else if (key == "receiver_clock_drift") {
    c.receiver_clock_drift = parse_number(value, key);
  } else if (key == "inter_system_bias") {
    c.inter_system_bias = parse_number(value, key);
  } else if (key == "satellite_clock_max") {
    c.satellite_clock_max = non_negative(key, value);
  } else if (key == "satellite_drift_max") {
    c.satellite_drift_max = non_negative(key, value);
  } else if (key == "phase_correction_max") {
    c.phase_correction_max = non_negative(key, value);
  } else if (key == "atmosphere") {
    c.atmosphere = parse_bool(value, key);
  } else if (key == "earth_rotation") {
    c.earth_rotation = parse_bool(value, key);
  } else if (key == "time_of_week_offset") {
    c.time_of_week_offset = parse_number(value, key);
  } else if (key == "klobuchar_alpha") {
    c.klobuchar.alpha = parse_four(key, value);
  } else if (key == "klobuchar_beta") {
    c.klobuchar.beta = parse_four(key, value);
  } else if (key == "seed") {
    const long long s = parse_integer(value, key);
    if (s < 0) bad(key, value, "must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else {
    throw std::invalid_argument("unknown scenario key '" + std::string(key) + "'");
  }
}

SolverConfig read_solver_config(std::istream& in, SolverConfig base) {
  read_lines(in, [&](std::string_view k, std::string_view v) { apply_solver_setting(base, k, v); });
  base.validate();
  return base;
}

SolverConfig read_solver_config(const std::filesystem::path& path, SolverConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read_solver_config(in, std::move(base));
}

ScenarioConfig read_scenario_config(std::istream& in, ScenarioConfig base) {
  read_lines(in, [&](std::string_view k, std::string_view v) { apply_scenario_setting(base, k, v); });
  base.validate();
  return base;
}

ScenarioConfig read_scenario_config(const std::filesystem::path& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read_scenario_config(in, std::move(base));
}

void write_solver_config(const SolverConfig& c, std::ostream& out) {
  auto four = [](const std::array<double, 4>& a) {
    return format_double(a[0]) + "," + format_double(a[1]) + "," + format_double(a[2]) + "," +
           format_double(a[3]);
  };
  out << "mode=" << mode_name(c.mode) << '\n'
      << "n_max=" << c.max_window << '\n'
      << "chain_windows=" << (c.chain_windows ? "true" : "false") << '\n'
      << "eliminator=" << eliminator_name(c.eliminator) << '\n'
      << "eliminator_seed=" << c.eliminator_seed << '\n'
      << "pseudorange_kernel=" << kernel_name(c.kernels.pseudorange.kind) << '\n'
      << "pseudorange_k=" << format_double(c.kernels.pseudorange.k) << '\n'
      << "doppler_kernel=" << kernel_name(c.kernels.doppler.kind) << '\n'
      << "doppler_k=" << format_double(c.kernels.doppler.k) << '\n'
      << "tdcp_kernel=" << kernel_name(c.kernels.tdcp.kind) << '\n'
      << "tdcp_k=" << format_double(c.kernels.tdcp.k) << '\n'
      << "wcp_kernel=" << kernel_name(c.kernels.wcp.kind) << '\n'
      << "wcp_k=" << format_double(c.kernels.wcp.k) << '\n'
      << "max_iterations=" << c.max_iterations << '\n'
      << "gradient_tolerance=" << format_double(c.gradient_tolerance) << '\n'
      << "step_tolerance=" << format_double(c.step_tolerance) << '\n'
      << "function_tolerance=" << format_double(c.function_tolerance) << '\n'
      << "initial_lambda=" << format_double(c.initial_lambda) << '\n'
      << "elevation_mask_deg=" << format_double(degrees(c.weighting.elevation_mask)) << '\n'
      << "sigma_pseudorange=" << format_double(c.weighting.sigma_pseudorange) << '\n'
      << "sigma_phase=" << format_double(c.weighting.sigma_phase) << '\n'
      << "sigma_doppler=" << format_double(c.weighting.sigma_doppler) << '\n'
      << "snr_ref=" << format_double(c.weighting.snr_ref) << '\n'
      << "snr_slope=" << format_double(c.weighting.snr_slope) << '\n'
      << "snr_max_factor=" << format_double(c.weighting.snr_max_factor) << '\n'
      << "earth_rotation=" << (c.earth_rotation ? "true" : "false") << '\n'
      << "klobuchar_alpha=" << four(c.klobuchar.alpha) << '\n'
      << "klobuchar_beta=" << four(c.klobuchar.beta) << '\n'
      << "time_of_week_offset=" << format_double(c.time_of_week_offset) << '\n';
}

void write_scenario_config(const ScenarioConfig& c, std::ostream& out) {
  std::string shells;
  for (const OrbitalShell& s : c.shells) {
    if (!shells.empty()) shells += ',';
    shells += s.constellation == Constellation::BeiDou ? "beidou" : "gps";
  }
  out << "epochs=" << c.epochs << '\n'
      << "rate=" << format_double(c.rate) << '\n'
      << "constellations=" << shells << '\n'
      << "max_satellites=" << c.max_satellites << '\n'
      << "elevation_mask_deg=" << format_double(degrees(c.elevation_mask)) << '\n'
      << "origin_lat_deg=" << format_double(degrees(c.origin.latitude)) << '\n'
      << "origin_lon_deg=" << format_double(degrees(c.origin.longitude)) << '\n'
      << "origin_height=" << format_double(c.origin.height) << '\n'
      << "trajectory=" << trajectory_name(c.trajectory) << '\n'
      << "velocity_east=" << format_double(c.velocity_enu.x()) << '\n'
      << "velocity_north=" << format_double(c.velocity_enu.y()) << '\n'
      << "velocity_up=" << format_double(c.velocity_enu.z()) << '\n'
      << "sigma_pseudorange=" << format_double(c.sigma_pseudorange) << '\n'
      << "sigma_phase=" << format_double(c.sigma_phase) << '\n'
      << "sigma_doppler=" << format_double(c.sigma_doppler) << '\n'
      << "outlier_probability=" << format_double(c.outlier_probability) << '\n'
      << "outlier_min=" << format_double(c.outlier_min) << '\n'
      << "outlier_max=" << format_double(c.outlier_max) << '\n'
      << "doppler_outlier_probability=" << format_double(c.doppler_outlier_probability) << '\n'
      << "doppler_outlier_max=" << format_double(c.doppler_outlier_max) << '\n'
      << "slip_probability=" << format_double(c.slip_probability) << '\n'
      << "slip_min_cycles=" << c.slip_min_cycles << '\n'
      << "slip_max_cycles=" << c.slip_max_cycles << '\n'
      << "flag_slips=" << (c.flag_slips ? "true" : "false") << '\n'
      << "snr_horizon=" << format_double(c.snr_horizon) << '\n'
      << "snr_zenith_gain=" << format_double(c.snr_zenith_gain) << '\n'
      << "snr_noise=" << format_double(c.snr_noise) << '\n'
      << "receiver_clock_bias=" << format_double(c.receiver_clock_bias) << '\n'
      << "receiver_clock_drift=" << format_double(c.receiver_clock_drift) << '\n'
      << "inter_system_bias=" << format_double(c.inter_system_bias) << '\n'
      << "satellite_clock_max=" << format_double(c.satellite_clock_max) << '\n'
      << "satellite_drift_max=" << format_double(c.satellite_drift_max) << '\n'
      << "phase_correction_max=" << format_double(c.phase_correction_max) << '\n'
      << "atmosphere=" << (c.atmosphere ? "true" : "false") << '\n'
      << "earth_rotation=" << (c.earth_rotation ? "true" : "false") << '\n'
      << "time_of_week_offset=" << format_double(c.time_of_week_offset) << '\n'
      << "seed=" << c.seed << '\n';
}

}  // namespace wcp
