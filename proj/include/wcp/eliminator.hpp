#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>

namespace wcp {

enum class EliminatorKind {
  RandomUnitaryImag,   // G = Im(U), n x n, rank n-1
  OrthonormalBasisT,   // S^T, (n-1) x n, orthonormal rows
  TimeDifference,      // consecutive differences, n x n, last row zero
};

/// A matrix E with E * 1 = 0: left-multiplying a window of carrier phases
/// that share one ambiguity removes that ambiguity.
struct EliminatorMatrix {
  EliminatorKind kind = EliminatorKind::OrthonormalBasisT;
  Eigen::MatrixXd entries;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

/// Deterministic Householder basis of the complement of the all-ones vector:
/// rows 2..n of the reflector that maps e1 onto 1/sqrt(n).
EliminatorMatrix orthonormal_null_basis(int n);

/// Random unitary construction:
///   H = H1 + i H2 with entries U[0, 1) from CounterRng(seed), (n-1) x (n-1),
///   H1 drawn row-major first, then H2;
///   Q R = H - I with R's diagonal real and non-negative;
///   U = S Q S^T + (1/n) 1 1^T, S = orthonormal_null_basis(n)^T;
///   G = Im(U).
EliminatorMatrix random_unitary_eliminator(int n, std::uint64_t seed);

/// Intermediate products of random_unitary_eliminator, exposed for checks.
struct UnitaryConstruction {
  Eigen::MatrixXd basis;   // S, n x (n-1)
  Eigen::MatrixXcd q;      // (n-1) x (n-1)
  Eigen::MatrixXcd r;
  Eigen::MatrixXcd u;      // n x n
};

UnitaryConstruction random_unitary_construction(int n, std::uint64_t seed);

/// Row i < n-1: -1 at column i, +1 at column i+1. Row n-1 is zero.
EliminatorMatrix tdcp_difference_matrix(int n);

EliminatorMatrix make_eliminator(EliminatorKind kind, int n, std::uint64_t seed);

std::string_view eliminator_name(EliminatorKind kind);
std::optional<EliminatorKind> parse_eliminator(std::string_view name);

}  // namespace wcp
