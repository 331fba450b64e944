#include "wcp/kernels/kernels.hpp"

#include <immintrin.h>

namespace wcp::kernels::avx2 {

void link_geometry(const LinkInputs& in, const LinkOutputs& out) {
  const std::size_t n = in.rx.size();
  const double w = in.earth_rotation_rate;
  const __m256d vw = _mm256_set1_pd(w);
  const __m256d vwc = _mm256_set1_pd(w / 299792458.0);
  const __m256d vc = _mm256_set1_pd(299792458.0);
  const __m256d one = _mm256_set1_pd(1.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d rx = _mm256_loadu_pd(in.rx.data() + i);
    const __m256d ry = _mm256_loadu_pd(in.ry.data() + i);
    const __m256d rz = _mm256_loadu_pd(in.rz.data() + i);
    const __m256d sx = _mm256_loadu_pd(in.sx.data() + i);
    const __m256d sy = _mm256_loadu_pd(in.sy.data() + i);
    const __m256d sz = _mm256_loadu_pd(in.sz.data() + i);

    const __m256d dx = _mm256_sub_pd(sx, rx);
    const __m256d dy = _mm256_sub_pd(sy, ry);
    const __m256d dz = _mm256_sub_pd(sz, rz);
    // (dx*dx + dy*dy) + dz*dz, unfused to match the reference bit for bit
    const __m256d n2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                     _mm256_mul_pd(dz, dz));
    const __m256d geometric = _mm256_sqrt_pd(n2);
    const __m256d inv = _mm256_div_pd(one, geometric);
    __m256d range = geometric;
    if (w != 0.0) {
      const __m256d cross = _mm256_sub_pd(_mm256_mul_pd(sx, ry), _mm256_mul_pd(sy, rx));
      range = _mm256_add_pd(range, _mm256_div_pd(_mm256_mul_pd(vw, cross), vc));
    }
    _mm256_storeu_pd(out.range.data() + i, range);
    if (!out.offset.empty()) {
      const __m256d rr = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(rx, rx), _mm256_mul_pd(ry, ry)),
                                       _mm256_mul_pd(rz, rz));
      const __m256d sr = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(sx, rx), _mm256_mul_pd(sy, ry)),
                                       _mm256_mul_pd(sz, rz));
      const __m256d ss = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(sx, sx), _mm256_mul_pd(sy, sy)),
                                       _mm256_mul_pd(sz, sz));
      const __m256d num = _mm256_sub_pd(rr, _mm256_mul_pd(_mm256_set1_pd(2.0), sr));
      __m256d offset = _mm256_div_pd(num, _mm256_add_pd(geometric, _mm256_sqrt_pd(ss)));
      if (w != 0.0) {
        const __m256d cross = _mm256_sub_pd(_mm256_mul_pd(sx, ry), _mm256_mul_pd(sy, rx));
        offset = _mm256_add_pd(offset, _mm256_div_pd(_mm256_mul_pd(vw, cross), vc));
      }
      _mm256_storeu_pd(out.offset.data() + i, offset);
    }
    _mm256_storeu_pd(out.gx.data() + i, _mm256_add_pd(_mm256_mul_pd(dx, inv), _mm256_mul_pd(vwc, sy)));
    _mm256_storeu_pd(out.gy.data() + i, _mm256_sub_pd(_mm256_mul_pd(dy, inv), _mm256_mul_pd(vwc, sx)));
    _mm256_storeu_pd(out.gz.data() + i, _mm256_mul_pd(dz, inv));
  }
  if (i < n) {
    const LinkInputs tail{in.rx.subspan(i), in.ry.subspan(i), in.rz.subspan(i),
                          in.sx.subspan(i), in.sy.subspan(i), in.sz.subspan(i),
                          in.earth_rotation_rate};
    const LinkOutputs tail_out{out.range.subspan(i), out.gx.subspan(i), out.gy.subspan(i),
                               out.gz.subspan(i),
                               out.offset.empty() ? out.offset : out.offset.subspan(i)};
    scalar::link_geometry(tail, tail_out);
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
      const __m256d va = _mm256_set1_pd(ai);
      int j = 0;
      for (; j + 4 <= k; j += 4) {
        const __m256d acc = _mm256_loadu_pd(hi + j);
        _mm256_storeu_pd(hi + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(ar + j), acc));
      }
      for (; j < k; ++j) hi[j] += ai * ar[j];
      g[static_cast<std::size_t>(i)] += ai * rr;
    }
  }
}

}  // namespace wcp::kernels::avx2
