#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qcuts3d {

/// Dense symmetric eigendecomposition. Eigenvalues ascending; eigenvector k
/// is the contiguous row vectors[k * n .. k * n + n).
struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;
  std::vector<double> vectors;

  std::span<const double> vector(std::size_t k) const { return {vectors.data() + k * n, n}; }
};

/// Householder tridiagonalisation followed by implicit QL. `matrix` is n x n
/// row-major and must be symmetric.
SymmetricEigen symmetric_eigen(std::vector<double> matrix, std::size_t n);

/// Implicit QL on a symmetric tridiagonal matrix (diag, off-diagonal with
/// off[i] coupling i and i+1).
SymmetricEigen tridiagonal_eigen(std::vector<double> diag, std::vector<double> off);

/// y = A x for a symmetric operator; y is preallocated to x.size().
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

inline constexpr double kDefaultEigenTolerance = 1e-8;

struct EigensolverOptions {
  /// Relative residual ||A z - lambda z|| / (lambda ||z||).
  double tolerance = kDefaultEigenTolerance;
  /// Operator applications allowed; 0 means 10 n.
  std::size_t max_applications = 0;
  /// Search-space size before a thick restart; 0 picks min(n, 64).
  std::size_t basis_size = 0;
};

struct Eigenpair {
  double value = 0.0;
  std::vector<double> vector;  // unit norm
  double residual = 0.0;       // ||A z - lambda z|| / (|lambda| ||z||)
  std::size_t applications = 0;
  /// True when the residual met the attainable floor set by rounding in the
  /// operator (about sqrt(n) * eps * ||A||) rather than tolerance * lambda.
  bool at_precision_floor = false;
};

/// Smallest eigenpair of a symmetric positive definite operator using only
/// operator applications: thick-restart Lanczos with full reorthogonalisation
/// started from the normalised all-ones vector. Deterministic.
///
/// Throws ArgumentError for n == 0 and ConvergenceError (carrying the best
/// relative residual) when the application budget runs out.
Eigenpair smallest_eigenpair(const LinearOperator& op, std::size_t n,
                             const EigensolverOptions& options = {});

}  // namespace qcuts3d
