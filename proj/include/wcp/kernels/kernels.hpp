#pragma once

#include "wcp/types.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string_view>

// Data-parallel inner loops of the estimator. Each kernel has a scalar
// reference implementation and, where the CPU supports it, an AVX2 variant
// selected at runtime. The link-geometry kernels are bit-identical across
// backends (no fused multiply-add, IEEE sqrt/div); gram_update uses FMA in the
// vector path and agrees with the reference to rounding.
namespace wcp::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);
bool backend_available(Backend b);
/// Backend used by the dispatching entry points.
Backend active_backend();
/// Pin a backend (tests, benchmarking); nullopt restores auto-detection.
void force_backend(std::optional<Backend> b);

/// Range with optional Earth-rotation term, evaluated in a fixed operation
/// order shared by every backend and by the simulator.
inline double link_range(double rx, double ry, double rz, double sx, double sy, double sz,
                         double earth_rotation_rate) {
  const double dx = sx - rx;
  const double dy = sy - ry;
  const double dz = sz - rz;
  const double n2 = (dx * dx + dy * dy) + dz * dz;
  double range = std::sqrt(n2);
  if (earth_rotation_rate != 0.0)
    range += earth_rotation_rate * (sx * ry - sy * rx) / 299792458.0;
  return range;
}

inline double link_range(const Vec3& receiver, const Vec3& satellite, double earth_rotation_rate) {
  return link_range(receiver.x(), receiver.y(), receiver.z(), satellite.x(), satellite.y(),
                    satellite.z(), earth_rotation_rate);
}

/// Structure-of-arrays batch of receiver/satellite pairs.
struct LinkInputs {
  std::span<const double> rx, ry, rz;
  std::span<const double> sx, sy, sz;
  double earth_rotation_rate = 0.0;
};

/// range[i] and the gradient of (measurement - range) with respect to the
/// receiver position: unit line of sight plus the Earth-rotation term.
/// When `offset` is non-empty it receives range(r) - range(0), evaluated as
/// (r.r - 2 s.r) / (|s - r| + |s|) so that it keeps full relative precision
/// for receivers given relative to a nearby reference point.
struct LinkOutputs {
  std::span<double> range;
  std::span<double> gx, gy, gz;
  std::span<double> offset = {};
};

void link_geometry(const LinkInputs& in, const LinkOutputs& out);

/// h (k x k, row-major) += a^T a and g (k) += a^T r for a (m x k, row-major).
void gram_update(std::span<const double> a, std::span<const double> r, int m, int k,
                 std::span<double> h, std::span<double> g);

namespace scalar {
void link_geometry(const LinkInputs& in, const LinkOutputs& out);
void gram_update(std::span<const double> a, std::span<const double> r, int m, int k,
                 std::span<double> h, std::span<double> g);
}  // namespace scalar

namespace avx2 {
void link_geometry(const LinkInputs& in, const LinkOutputs& out);
void gram_update(std::span<const double> a, std::span<const double> r, int m, int k,
                 std::span<double> h, std::span<double> g);
}  // namespace avx2

}  // namespace wcp::kernels
