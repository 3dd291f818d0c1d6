#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qcuts3d/eigensolver.hpp"
#include "qcuts3d/graph.hpp"
#include "qcuts3d/supervoxel.hpp"
#include "qcuts3d/volume.hpp"

namespace qcuts3d {

struct KMeans2Result {
  std::vector<std::uint8_t> assignment;  // 0 = low cluster, 1 = high cluster
  std::array<double, 2> centers{};
  int solid_cluster = 1;  // cluster with the higher mean
  double within_ss = 0.0;
  int iterations = 0;
};

/// Binary k-means on a 1D vector. Lloyd from (min, max) to a fixed point;
/// distance ties go to the lower-center cluster. Throws DegenerateError when
/// all values are identical and ArgumentError for fewer than two values.
KMeans2Result kmeans2(std::span<const double> values);

/// Each voxel receives its supervoxel's value.
SaliencyField voxelize(std::span<const double> values, const SupervoxelMap& map);
/// Each voxel receives its supervoxel's binary label (nonzero = solid).
SegmentationMask voxelize_labels(std::span<const std::uint8_t> labels, const SupervoxelMap& map);

/// Solid iff strictly more than half the masks say solid.
SegmentationMask majority_vote(std::span<const SegmentationMask> masks);

/// Explicit seed potential, or a multiple of the graph's largest degree.
struct PhiSeedRule {
  double multiplier = kDefaultPhiMultiplier;
  std::optional<double> value;
};

struct PipelineConfig {
  std::vector<std::size_t> scales{kDefaultScales.begin(), kDefaultScales.end()};
  double sigma = kDefaultSigma;
  KernelVariant kernel = KernelVariant::absolute;
  PhiSeedRule phi_seed;
  Axis axis = Axis::z;
  double percentile_low = kDefaultPercentileLow;
  double percentile_high = kDefaultPercentileHigh;
  int slic_iterations = 10;
  EigensolverOptions eigen;
  unsigned threads = 1;
};

struct ScaleDiagnostics {
  std::size_t target = 0;
  std::size_t supervoxels = 0;
  int slic_iterations = 0;
  std::size_t seeds = 0;
  double phi_seed = 0.0;
  double eigenvalue = 0.0;
  double residual = 0.0;
  std::size_t applications = 0;
  double solid_fraction = 0.0;
  bool degenerate = false;
  double seconds = 0.0;
};

/// Everything one supervoxel scale produces, at supervoxel resolution.
struct ScaleResult {
  SupervoxelMap map;
  std::vector<double> saliency;       // per supervoxel, [0,1]
  std::vector<std::uint8_t> labels;   // per supervoxel, 1 = solid
  ScaleDiagnostics diagnostics;
};

/// One scale of the pipeline on an already contrast-adjusted volume.
ScaleResult segment_scale(const Volume& adjusted, std::size_t target, const PipelineConfig& config,
                          unsigned threads = 1);

struct SegmentationResult {
  SegmentationMask mask;
  SaliencyField field;  // scale-averaged saliency
  std::vector<ScaleDiagnostics> scales;
  bool contrast_warning = false;
  double seconds = 0.0;
};

/// contrast_adjust, then per scale slic3d -> means -> graph -> seeds ->
/// potentials -> quantum cut -> kmeans2 -> voxelize, fused by majority vote.
SegmentationResult segment_volume(const Volume& volume, const PipelineConfig& config = {});

}  // namespace qcuts3d
