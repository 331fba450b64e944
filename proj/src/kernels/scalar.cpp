#include "wcp/kernels/kernels.hpp"

#include <cassert>

namespace wcp::kernels::scalar {

void link_geometry(const LinkInputs& in, const LinkOutputs& out) {
  const std::size_t n = in.rx.size();
  assert(out.range.size() >= n);
  const double w = in.earth_rotation_rate;
  const double wc = w / 299792458.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = in.sx[i] - in.rx[i];
    const double dy = in.sy[i] - in.ry[i];
    const double dz = in.sz[i] - in.rz[i];
    const double n2 = (dx * dx + dy * dy) + dz * dz;
    const double geometric = std::sqrt(n2);
    const double inv = 1.0 / geometric;
    double range = geometric;
    if (w != 0.0) range += w * (in.sx[i] * in.ry[i] - in.sy[i] * in.rx[i]) / 299792458.0;
    out.range[i] = range;
    if (!out.offset.empty()) {
      const double rx = in.rx[i], ry = in.ry[i], rz = in.rz[i];
      const double sx = in.sx[i], sy = in.sy[i], sz = in.sz[i];
      const double rr = (rx * rx + ry * ry) + rz * rz;
      const double sr = (sx * rx + sy * ry) + sz * rz;
      const double ss = (sx * sx + sy * sy) + sz * sz;
      double offset = (rr - 2.0 * sr) / (geometric + std::sqrt(ss));
      if (w != 0.0) offset += w * (sx * ry - sy * rx) / 299792458.0;
      out.offset[i] = offset;
    }
    out.gx[i] = dx * inv + wc * in.sy[i];
    out.gy[i] = dy * inv - wc * in.sx[i];
    out.gz[i] = dz * inv;
  }
}

void gram_update(std::span<const double> a, std::span<const double> r, int m, int k,
                 std::span<double> h, std::span<double> g) {
  for (int row = 0; row < m; ++row) {
    const double* ar = a.data() + static_cast<std::size_t>(row) * k;
    const double rr = r[static_cast<std::size_t>(row)];
    for (int i = 0; i < k; ++i) {
      const double ai = ar[i];
      if (ai == 0.0) continue;
      double* hi = h.data() + static_cast<std::size_t>(i) * k;
      for (int j = 0; j < k; ++j) hi[j] += ai * ar[j];
      g[static_cast<std::size_t>(i)] += ai * rr;
    }
  }
}

}  // namespace wcp::kernels::scalar
