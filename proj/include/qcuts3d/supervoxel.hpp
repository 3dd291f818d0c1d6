#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "qcuts3d/volume.hpp"

namespace qcuts3d {

/// Per-voxel supervoxel ids, dense in [0, count()).
class SupervoxelMap {
 public:
  SupervoxelMap() = default;
  /// Throws ArgumentError if ids are not dense or the size mismatches dims.
  SupervoxelMap(Dims dims, std::vector<std::uint32_t> assignment);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t count() const noexcept { return sizes_.size(); }
  const std::vector<std::uint32_t>& assignment() const noexcept { return assignment_; }
  std::uint32_t operator[](std::size_t voxel) const noexcept { return assignment_[voxel]; }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  /// Number of SLIC iterations actually run (0 for hand-built maps).
  int iterations = 0;

 private:
  Dims dims_{};
  std::vector<std::uint32_t> assignment_;
  std::vector<std::size_t> sizes_;
};

inline constexpr std::array<std::size_t, 4> kDefaultScales{2000, 4000, 6000, 8000};

struct SlicOptions {
  std::size_t target_count = 2000;
  int max_iterations = 10;
  /// Seed value of the per-cluster adaptive compactness (intensity units).
  double initial_compactness = 0.1;
  /// Lower bound on the adaptive compactness. A perfectly homogeneous cluster
  /// would otherwise drop its spatial term and claim its whole window.
  double min_compactness = 0.05;
  /// Early exit when fewer than this fraction of voxels change label.
  double convergence_fraction = 0.001;
  unsigned threads = 1;
};

/// Seeding layout for a requested supervoxel count.
struct SeedGrid {
  std::array<std::size_t, 3> counts{1, 1, 1};
  double step = 1.0;  // S, the nominal supervoxel edge length in voxels
};

SeedGrid seed_grid(const Dims& dims, std::size_t target_count);

/// Sum of absolute central differences along x, y and z (clamped at borders).
std::vector<float> gradient_magnitude(const Volume& volume);

/// 3D SLIC with per-cluster adaptive compactness followed by 6-connectivity
/// enforcement. Deterministic and independent of the thread count.
SupervoxelMap slic3d(const Volume& volume, const SlicOptions& options);

/// Arithmetic mean intensity of every supervoxel.
std::vector<double> supervoxel_means(const Volume& volume, const SupervoxelMap& map);

/// Relabels every non-largest 6-connected fragment of a label to its largest
/// adjacent neighbour, then makes ids dense.
std::vector<std::uint32_t> enforce_connectivity(const Dims& dims,
                                                std::vector<std::uint32_t> labels);

/// Debug export: u32 raw + sidecar.
void save_supervoxel_ids(const SupervoxelMap& map, const std::filesystem::path& raw_path);

}  // namespace qcuts3d
