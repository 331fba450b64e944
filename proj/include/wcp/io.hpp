#pragma once

#include "wcp/graph.hpp"
#include "wcp/simulator.hpp"
#include "wcp/solver.hpp"
#include "wcp/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace wcp {

inline constexpr int kDatasetFormatVersion = 1;

/// Column order of the dataset format (one record per epoch and satellite).
inline constexpr std::string_view kDatasetColumns =
    "epoch_index,t_seconds,constellation,prn,pseudorange_m,doppler_hz,phase_cycles,wavelength_m,"
    "snr_dbhz,lock,sat_x_m,sat_y_m,sat_z_m,sat_vx_mps,sat_vy_mps,sat_vz_mps,sat_clk_m,"
    "sat_clkdrift_mps,iono_m,tropo_m,phase_corr_m";

/// Shortest text that parses back to the same double.
std::string format_double(double value);

void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Parses and validates. Throws DataError naming the line (parse errors) or
/// the epoch and satellite (validation errors).
Dataset read_dataset(std::istream& in, std::string_view source = "<stream>");
Dataset read_dataset(const std::filesystem::path& path);

void write_trajectory(const Trajectory& trajectory, std::ostream& out);
void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory read_trajectory(std::istream& in, std::string_view source = "<stream>");
Trajectory read_trajectory(const std::filesystem::path& path);

void write_injections(const std::vector<InjectionRecord>& log, std::ostream& out);
void write_injections(const std::vector<InjectionRecord>& log, const std::filesystem::path& path);
std::vector<InjectionRecord> read_injections(std::istream& in, std::string_view source = "<stream>");
std::vector<InjectionRecord> read_injections(const std::filesystem::path& path);

/// key=value summary followed by a per-window table.
void write_report(const SolveReport& report, std::ostream& out);
void write_report(const SolveReport& report, const std::filesystem::path& path);

}  // namespace wcp
