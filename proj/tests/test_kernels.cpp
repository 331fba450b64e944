#include "wcp/kernels/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace wcp::kernels {
namespace {

struct Links {
  std::vector<double> rx, ry, rz, sx, sy, sz;
};

Links random_links(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rec(-6.4e6, 6.4e6), sat(-2.7e7, 2.7e7);
  Links l;
  for (std::size_t i = 0; i < n; ++i) {
    l.rx.push_back(rec(rng));
    l.ry.push_back(rec(rng));
    l.rz.push_back(rec(rng));
    l.sx.push_back(sat(rng));
    l.sy.push_back(sat(rng));
    l.sz.push_back(sat(rng));
  }
  return l;
}

struct Out {
  std::vector<double> range, gx, gy, gz;
  explicit Out(std::size_t n) : range(n), gx(n), gy(n), gz(n) {}
  LinkOutputs view() { return {range, gx, gy, gz}; }
};

class BackendGuard {
 public:
  ~BackendGuard() { force_backend(std::nullopt); }
};

TEST(LinkGeometryTest, ScalarMatchesDirectFormula) {
  const Links l = random_links(37, 3);
  Out out(37);
  scalar::link_geometry({l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, 0.0}, out.view());
  for (std::size_t i = 0; i < 37; ++i) {
    const Vec3 r(l.rx[i], l.ry[i], l.rz[i]), s(l.sx[i], l.sy[i], l.sz[i]);
    EXPECT_NEAR(out.range[i], (s - r).norm(), 1e-8);
    const Vec3 u = (s - r).normalized();
    EXPECT_NEAR(out.gx[i], u.x(), 1e-14);
    EXPECT_NEAR(out.gy[i], u.y(), 1e-14);
    EXPECT_NEAR(out.gz[i], u.z(), 1e-14);
    EXPECT_EQ(out.range[i], link_range(r, s, 0.0));
  }
}

TEST(LinkGeometryTest, EarthRotationGradient) {
  const Links l = random_links(9, 4);
  const double w = 7.2921151467e-5;
  Out out(9);
  scalar::link_geometry({l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, w}, out.view());
  for (std::size_t i = 0; i < 9; ++i) {
    const double h = 1.0;
    auto range = [&](double dx, double dy) {
      return link_range(l.rx[i] + dx, l.ry[i] + dy, l.rz[i], l.sx[i], l.sy[i], l.sz[i], w);
    };
    EXPECT_EQ(out.range[i], range(0.0, 0.0));
    EXPECT_NEAR(out.gx[i], -(range(h, 0) - range(-h, 0)) / (2 * h), 1e-8);
    EXPECT_NEAR(out.gy[i], -(range(0, h) - range(0, -h)) / (2 * h), 1e-8);
  }
}

TEST(LinkGeometryTest, Avx2BitIdenticalToScalar) {
  if (!backend_available(Backend::Avx2)) GTEST_SKIP() << "AVX2 not available";
  for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 63u, 1000u}) {
    for (double w : {0.0, 7.2921151467e-5}) {
      const Links l = random_links(n, n + 11);
      Out a(n), b(n);
      const LinkInputs in{l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, w};
      scalar::link_geometry(in, a.view());
      avx2::link_geometry(in, b.view());
      EXPECT_EQ(a.range, b.range) << n;
      EXPECT_EQ(a.gx, b.gx) << n;
      EXPECT_EQ(a.gy, b.gy) << n;
      EXPECT_EQ(a.gz, b.gz) << n;
    }
  }
}

TEST(LinkGeometryTest, OffsetKeepsPrecisionNearOrigin) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> near(-50.0, 50.0), sat(-2.7e7, 2.7e7);
  const std::size_t n = 41;
  Links l;
  for (std::size_t i = 0; i < n; ++i) {
    l.rx.push_back(near(rng));
    l.ry.push_back(near(rng));
    l.rz.push_back(near(rng));
    l.sx.push_back(sat(rng));
    l.sy.push_back(sat(rng));
    l.sz.push_back(sat(rng));
  }
  std::vector<double> offset(n), offset2(n);
  Out a(n), b(n);
  LinkOutputs va = a.view();
  va.offset = offset;
  scalar::link_geometry({l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, 0.0}, va);
  for (std::size_t i = 0; i < n; ++i) {
    using ld = long double;
    auto len = [](ld x, ld y, ld z) { return std::sqrt(x * x + y * y + z * z); };
    const ld ref = len(ld(l.sx[i]) - l.rx[i], ld(l.sy[i]) - l.ry[i], ld(l.sz[i]) - l.rz[i]) -
                   len(l.sx[i], l.sy[i], l.sz[i]);
    EXPECT_NEAR(offset[i], static_cast<double>(ref), 1e-12 * (1.0 + std::abs(static_cast<double>(ref))));
  }
  if (!backend_available(Backend::Avx2)) return;
  LinkOutputs vb = b.view();
  vb.offset = offset2;
  avx2::link_geometry({l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, 0.0}, vb);
  EXPECT_EQ(offset, offset2);
  EXPECT_EQ(a.range, b.range);
}

TEST(GramUpdateTest, ScalarMatchesEigen) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (auto [m, k] : {std::pair{1, 4}, {3, 6}, {5, 24}, {7, 3}}) {
    std::vector<double> a(static_cast<std::size_t>(m * k)), r(static_cast<std::size_t>(m));
    for (double& v : a) v = nd(rng);
    for (double& v : r) v = nd(rng);
    std::vector<double> h(static_cast<std::size_t>(k * k), 1.0), g(static_cast<std::size_t>(k), -1.0);
    scalar::gram_update(a, r, m, k, h, g);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> am(a.data(), m, k);
    const Eigen::Map<const Eigen::VectorXd> rm(r.data(), m);
    const Eigen::MatrixXd hh = am.transpose() * am;
    const Eigen::VectorXd gg = am.transpose() * rm;
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(g[static_cast<std::size_t>(i)], gg(i) - 1.0, 1e-12);
      for (int j = 0; j < k; ++j) EXPECT_NEAR(h[static_cast<std::size_t>(i * k + j)], hh(i, j) + 1.0, 1e-12);
    }
  }
}

TEST(GramUpdateTest, Avx2MatchesScalarToRounding) {
  if (!backend_available(Backend::Avx2)) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (auto [m, k] : {std::pair{1, 4}, {1, 8}, {2, 5}, {5, 24}, {10, 44}, {3, 7}}) {
    std::vector<double> a(static_cast<std::size_t>(m * k)), r(static_cast<std::size_t>(m));
    for (double& v : a) v = 1e3 * nd(rng);
    for (double& v : r) v = nd(rng);
    std::vector<double> h1(static_cast<std::size_t>(k * k), 0.0), h2 = h1;
    std::vector<double> g1(static_cast<std::size_t>(k), 0.0), g2 = g1;
    scalar::gram_update(a, r, m, k, h1, g1);
    avx2::gram_update(a, r, m, k, h2, g2);
    for (std::size_t i = 0; i < h1.size(); ++i)
      EXPECT_NEAR(h1[i], h2[i], 1e-12 * (1.0 + std::abs(h1[i]))) << m << "x" << k;
    for (std::size_t i = 0; i < g1.size(); ++i)
      EXPECT_NEAR(g1[i], g2[i], 1e-12 * (1.0 + std::abs(g1[i]))) << m << "x" << k;
  }
}

TEST(DispatchTest, ForcedBackendIsUsed) {
  BackendGuard guard;
  force_backend(Backend::Scalar);
  EXPECT_EQ(active_backend(), Backend::Scalar);
  const Links l = random_links(17, 21);
  Out a(17), b(17);
  const LinkInputs in{l.rx, l.ry, l.rz, l.sx, l.sy, l.sz, 0.0};
  link_geometry(in, a.view());
  scalar::link_geometry(in, b.view());
  EXPECT_EQ(a.range, b.range);
  if (backend_available(Backend::Avx2)) {
    force_backend(Backend::Avx2);
    EXPECT_EQ(active_backend(), Backend::Avx2);
  }
  force_backend(std::nullopt);
  EXPECT_TRUE(backend_available(active_backend()));
  EXPECT_TRUE(backend_available(Backend::Scalar));
  EXPECT_EQ(backend_name(Backend::Scalar), "scalar");
}

}  // namespace
}  // namespace wcp::kernels
