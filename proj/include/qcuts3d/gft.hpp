#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qcuts3d/graph.hpp"
#include "qcuts3d/supervoxel.hpp"
#include "qcuts3d/volume.hpp"

namespace qcuts3d {

/// The m lowest Laplacian eigenpairs. Vector k occupies the contiguous row
/// vectors[k * n .. k * n + n).
struct SpectrumBasis {
  std::size_t n = 0;
  std::vector<double> eigenvalues;
  std::vector<double> vectors;
  /// Largest ||L u - lambda u|| relative to the spectral radius of L.
  double max_residual = 0.0;

  std::size_t size() const noexcept { return eigenvalues.size(); }
  std::span<const double> vector(std::size_t k) const { return {vectors.data() + k * n, n}; }
};

inline constexpr double kSpectrumTolerance = 1e-8;

/// Lowest m eigenpairs of L = D - W (potentials ignored) from a dense
/// decomposition. Throws ArgumentError unless 1 <= m <= n and
/// ConvergenceError when a residual exceeds kSpectrumTolerance.
SpectrumBasis laplacian_spectrum(const SupervoxelGraph& graph, std::size_t m);

/// sum_k (u_k . signal) u_k over the first `count` basis vectors
/// (all of them when count is 0).
std::vector<double> project_reconstruct(std::span<const double> signal, const SpectrumBasis& basis,
                                        std::size_t count = 0);

/// Fraction of every supervoxel's voxels that carry `phase_code`.
std::vector<double> phase_fraction_signal(const LabelVolume& labels, int phase_code,
                                          const SupervoxelMap& map);

inline const std::vector<double> kDefaultSpectrumFractions{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};

struct CurvePoint {
  double fraction = 0.0;
  std::size_t basis_vectors = 0;  // ceil(fraction * n)
  double mse = 0.0;
};

/// Reconstruction error of `signal` against growing prefixes of the basis.
/// The error at m vectors is (||x||^2 - sum_{k<m} (u_k . x)^2) / n, clamped
/// at 0, which is exactly non-increasing in m.
std::vector<CurvePoint> reconstruction_curve(std::span<const double> signal, const SpectrumBasis& basis,
                                             std::span<const double> fractions = kDefaultSpectrumFractions);

struct PhaseCurve {
  int code = 0;
  std::string name;
  std::vector<CurvePoint> points;
};

/// One curve per codebook phase present in `labels`, sharing the Laplacian
/// basis of the graph built over `volume`'s supervoxel means.
std::vector<PhaseCurve> reconstruction_curves(const LabelVolume& labels, const Volume& volume,
                                              const SupervoxelMap& map,
                                              std::span<const double> fractions = kDefaultSpectrumFractions,
                                              double sigma = kDefaultSigma,
                                              KernelVariant kernel = KernelVariant::absolute);

/// Single-phase convenience over reconstruction_curves.
std::vector<CurvePoint> reconstruction_curve(const LabelVolume& labels, int phase_code, const Volume& volume,
                                             const SupervoxelMap& map,
                                             std::span<const double> fractions = kDefaultSpectrumFractions,
                                             double sigma = kDefaultSigma,
                                             KernelVariant kernel = KernelVariant::absolute);

/// Header "fraction,basis_vectors,mse_<name>..." then one row per fraction.
std::string curves_csv(const std::vector<PhaseCurve>& curves);

}  // namespace qcuts3d
