#include "wcp/eliminator.hpp"

#include "wcp/prng.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace wcp {

namespace {

using cd = std::complex<double>;

void require_window(int n, const char* who) {
  if (n < 2) throw std::invalid_argument(std::string(who) + ": window size must be >= 2");
}

// Householder QR with plain loops so the result does not depend on the
// vectorization Eigen picks. Returns Q, R with R's diagonal real and >= 0.
void householder_qr(const Eigen::MatrixXcd& a, Eigen::MatrixXcd& q, Eigen::MatrixXcd& r) {
  const Eigen::Index m = a.rows();
  r = a;
  q = Eigen::MatrixXcd::Identity(m, m);
  std::vector<cd> v(static_cast<std::size_t>(m));

  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    double norm2 = 0.0;
    for (Eigen::Index i = k; i < m; ++i) norm2 += std::norm(r(i, k));
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    const cd x0 = r(k, k);
    const cd phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cd(1.0, 0.0);
    const cd alpha = -phase * norm;

    double vnorm2 = 0.0;
    for (Eigen::Index i = k; i < m; ++i) {
      v[static_cast<std::size_t>(i)] = r(i, k) - (i == k ? alpha : cd(0.0));
      vnorm2 += std::norm(v[static_cast<std::size_t>(i)]);
    }
    if (vnorm2 == 0.0) continue;

    // R <- (I - 2 v v^H / |v|^2) R
    for (Eigen::Index j = 0; j < m; ++j) {
      cd dot = 0.0;
      for (Eigen::Index i = k; i < m; ++i) dot += std::conj(v[static_cast<std::size_t>(i)]) * r(i, j);
      const cd f = 2.0 * dot / vnorm2;
      for (Eigen::Index i = k; i < m; ++i) r(i, j) -= f * v[static_cast<std::size_t>(i)];
    }
    // Q <- Q (I - 2 v v^H / |v|^2)
    for (Eigen::Index i = 0; i < m; ++i) {
      cd dot = 0.0;
      for (Eigen::Index j = k; j < m; ++j) dot += q(i, j) * v[static_cast<std::size_t>(j)];
      const cd f = 2.0 * dot / vnorm2;
      for (Eigen::Index j = k; j < m; ++j) q(i, j) -= f * std::conj(v[static_cast<std::size_t>(j)]);
    }
  }

  // Column-scale Q and row-scale R so that diag(R) is real non-negative.
  for (Eigen::Index k = 0; k < m; ++k) {
    const cd d = r(k, k);
    const double mag = std::abs(d);
    const cd phase = mag > 0.0 ? d / mag : cd(1.0, 0.0);
    for (Eigen::Index i = 0; i < m; ++i) q(i, k) *= phase;
    for (Eigen::Index j = 0; j < m; ++j) r(k, j) *= std::conj(phase);
    r(k, k) = cd(mag, 0.0);
    for (Eigen::Index i = k + 1; i < m; ++i) r(i, k) = 0.0;
  }
}

}  // namespace

EliminatorMatrix orthonormal_null_basis(int n) {
  require_window(n, "orthonormal_null_basis");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  // u = e1 - 1/sqrt(n); reflector P = I - 2 u u^T / |u|^2 swaps e1 and 1/sqrt(n).
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, -inv_sqrt_n);
  u(0) += 1.0;
  const double unorm2 = u.squaredNorm();
  Eigen::MatrixXd reflector = Eigen::MatrixXd::Identity(n, n) - (2.0 / unorm2) * u * u.transpose();

  EliminatorMatrix e;
  e.kind = EliminatorKind::OrthonormalBasisT;
  e.entries = reflector.bottomRows(n - 1);
  return e;
}

UnitaryConstruction random_unitary_construction(int n, std::uint64_t seed) {
  require_window(n, "random_unitary_eliminator");
  const int m = n - 1;
  CounterRng rng(seed);
  Eigen::MatrixXd h1(m, m), h2(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h1(i, j) = rng.uniform();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h2(i, j) = rng.uniform();

  Eigen::MatrixXcd h(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h(i, j) = cd(h1(i, j) - (i == j ? 1.0 : 0.0), h2(i, j));

  UnitaryConstruction c;
  householder_qr(h, c.q, c.r);
  c.basis = orthonormal_null_basis(n).entries.transpose();

  // U = S Q S^T + 1 1^T / n, accumulated in a fixed order.
  Eigen::MatrixXcd qst(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      cd acc = 0.0;
      for (int k = 0; k < m; ++k) acc += c.q(i, k) * c.basis(j, k);
      qst(i, j) = acc;
    }
  c.u.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cd acc = 0.0;
      for (int k = 0; k < m; ++k) acc += c.basis(i, k) * qst(k, j);
      c.u(i, j) = acc + cd(1.0 / n, 0.0);
    }
  return c;
}

EliminatorMatrix random_unitary_eliminator(int n, std::uint64_t seed) {
  const UnitaryConstruction c = random_unitary_construction(n, seed);
  EliminatorMatrix e;
  e.kind = EliminatorKind::RandomUnitaryImag;
  e.entries = c.u.imag();
  return e;
}

EliminatorMatrix tdcp_difference_matrix(int n) {
  require_window(n, "tdcp_difference_matrix");
  EliminatorMatrix e;
  e.kind = EliminatorKind::TimeDifference;
  e.entries = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    e.entries(i, i) = -1.0;
    e.entries(i, i + 1) = 1.0;
  }
  return e;
}

EliminatorMatrix make_eliminator(EliminatorKind kind, int n, std::uint64_t seed) {
  switch (kind) {
    case EliminatorKind::RandomUnitaryImag: return random_unitary_eliminator(n, seed);
    case EliminatorKind::OrthonormalBasisT: return orthonormal_null_basis(n);
    case EliminatorKind::TimeDifference: return tdcp_difference_matrix(n);
  }
  throw std::invalid_argument("make_eliminator: unknown kind");
}

std::string_view eliminator_name(EliminatorKind kind) {
  switch (kind) {
    case EliminatorKind::RandomUnitaryImag: return "random-unitary";
    case EliminatorKind::OrthonormalBasisT: return "orthonormal";
    case EliminatorKind::TimeDifference: return "tdcp";
  }
  return "orthonormal";
}

std::optional<EliminatorKind> parse_eliminator(std::string_view name) {
  if (name == "random-unitary" || name == "g") return EliminatorKind::RandomUnitaryImag;
  if (name == "orthonormal" || name == "s") return EliminatorKind::OrthonormalBasisT;
  if (name == "tdcp" || name == "d") return EliminatorKind::TimeDifference;
  return std::nullopt;
}

}  // namespace wcp
