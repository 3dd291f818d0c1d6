#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "qcuts3d/volume.hpp"

namespace qcuts3d {

/// Phase codes written into phantom label volumes.
enum PhantomPhase : std::uint8_t { kGas = 0, kSolid = 1, kWater = 2, kOil = 3 };

struct PhantomSpec {
  std::size_t size = 64;
  std::size_t grain_count = 90;
  double r_min = 5.0;
  double r_max = 9.0;
  /// Mean intensity per phase code (gas, solid, water, oil).
  std::array<double, 4> intensity{0.10, 0.90, 0.35, 0.55};
  double noise_sigma = 0.0;
  double blur_sigma = 0.0;
  std::uint64_t seed = 1;
  /// Centers must be at least (1 - max_overlap) (r_i + r_j) apart.
  double max_overlap = 0.3;
  /// Keep every grain fully inside the cube.
  bool contain_grains = false;
  /// Pore phases sharing the void space. Gas alone gives a two-phase phantom.
  std::vector<std::uint8_t> pore_phases{kGas, kWater, kOil};
  /// Region-growth seeds per pore phase.
  std::size_t seeds_per_phase = 3;
  std::size_t max_attempts = 1'000'000;
};

struct Grain {
  double x = 0.0, y = 0.0, z = 0.0, r = 0.0;
};

struct Phantom {
  Volume volume;
  LabelVolume labels;
  std::vector<Grain> grains;
};

/// Throws ArgumentError for an invalid spec.
void validate(const PhantomSpec& spec);

/// Deterministic for a fixed spec. Grains are placed by rejection sampling,
/// the void is split among the pore phases by multi-source region growth
/// (voxels no seed reaches stay gas), then noise and blur are applied to the
/// intensities only. Throws PlacementError when the grains do not fit.
Phantom generate_phantom(const PhantomSpec& spec);

/// Sum of 4/3 pi r^3 over the grains: the union volume when they are disjoint.
double analytic_grain_volume(const std::vector<Grain>& grains);

Codebook phantom_codebook();

}  // namespace qcuts3d
