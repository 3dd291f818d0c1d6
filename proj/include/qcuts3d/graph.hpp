#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qcuts3d/supervoxel.hpp"
#include "qcuts3d/volume.hpp"

namespace qcuts3d {

/// Edge kernel. `absolute` is exp(-|si - sj| / 2 sigma^2); `squared` is the
/// conventional Gaussian exp(-(si - sj)^2 / 2 sigma^2).
enum class KernelVariant { absolute, squared };

/// Which implementation of W z to use. `fast` only exists for the absolute
/// kernel; requesting it for the squared kernel falls back to `dense`.
enum class OperatorPath { fast, dense };

inline constexpr double kDefaultSigma = 0.1;
inline constexpr double kDefaultPhiMultiplier = 10.0;

/// Fully connected supervoxel graph over mean intensities.
class SupervoxelGraph {
 public:
  SupervoxelGraph(std::vector<double> means, double sigma,
                  KernelVariant kernel = KernelVariant::absolute);

  std::size_t size() const noexcept { return means_.size(); }
  double sigma() const noexcept { return sigma_; }
  KernelVariant kernel() const noexcept { return kernel_; }
  const std::vector<double>& means() const noexcept { return means_; }

  /// w_ij for i != j, 0 on the diagonal.
  double weight(std::size_t i, std::size_t j) const noexcept;

  /// Nodes ordered by ascending mean intensity (ties by id).
  const std::vector<std::uint32_t>& sorted_order() const noexcept { return order_; }

  /// d_i = sum_{j != i} w_ij.
  const std::vector<double>& degrees() const noexcept { return degrees_; }

  const std::vector<std::uint32_t>& seeds() const noexcept { return seeds_; }
  const std::vector<double>& potentials() const noexcept { return phi_; }
  bool has_seeds() const noexcept { return !seeds_.empty(); }

  /// Sets the seed set and the per-node unary potential.
  void set_seeds(std::vector<std::uint32_t> seeds, std::vector<double> potentials);

  /// out = W z
  void apply_weights(std::span<const double> z, std::span<double> out,
                     OperatorPath path = OperatorPath::fast) const;

 private:
  void apply_weights_fast(std::span<const double> z, std::span<double> out) const;
  void apply_weights_dense(std::span<const double> z, std::span<double> out) const;

  std::vector<double> means_;
  double sigma_;
  KernelVariant kernel_;
  std::vector<std::uint32_t> order_;
  // exp(-(s_{k} - s_{k-1}) / 2 sigma^2) along the sorted order; decay_[0] unused
  std::vector<double> decay_;
  std::vector<double> degrees_;
  std::vector<std::uint32_t> seeds_;
  std::vector<double> phi_;
};

/// Throws ArgumentError for sigma <= 0, empty input or means outside [0,1].
SupervoxelGraph build_graph(std::vector<double> means, double sigma,
                            KernelVariant kernel = KernelVariant::absolute);

enum class Axis { x = 0, y = 1, z = 2 };

Axis parse_axis(char c);

/// Per slice perpendicular to `axis`, per voxel row along the first remaining
/// axis, picks the intersecting supervoxel with the lowest mean (ties: lower
/// id). Returns the sorted, deduplicated seed ids.
std::vector<std::uint32_t> select_pore_seeds(const Volume& volume, const SupervoxelMap& map,
                                             std::span<const double> means, Axis axis = Axis::z);

/// phi[i] = phi_seed for seeds, 0 elsewhere.
std::vector<double> unary_potentials(const SupervoxelGraph& graph,
                                     std::span<const std::uint32_t> seeds, double phi_seed);

/// multiplier * max_i d_i. A graph without edges has no degree scale; the
/// multiplier itself is returned then.
double default_phi_seed(const SupervoxelGraph& graph, double multiplier = kDefaultPhiMultiplier);

std::vector<double> weighted_degrees(const SupervoxelGraph& graph);

/// (phi_i + d_i) z_i - sum_{j != i} w_ij z_j
std::vector<double> apply_hamiltonian(const SupervoxelGraph& graph, std::span<const double> z,
                                      OperatorPath path = OperatorPath::fast);
void apply_hamiltonian(const SupervoxelGraph& graph, std::span<const double> z, std::span<double> out,
                       OperatorPath path = OperatorPath::fast);

/// L z = (D - W) z, ignoring potentials.
void apply_laplacian(const SupervoxelGraph& graph, std::span<const double> z, std::span<double> out,
                     OperatorPath path = OperatorPath::fast);

}  // namespace qcuts3d
