#include "qcuts3d/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

namespace qcuts3d {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with edge clamping.
void blur(std::vector<double>& data, const Dims& dims, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  std::vector<double> out(data.size());
  const std::array<std::size_t, 3> stride{1, dims.nx, dims.nx * dims.ny};
  for (int axis = 0; axis < 3; ++axis) {
    const long len = static_cast<long>(dims.extent(axis));
    for (std::size_t z = 0; z < dims.nz; ++z) {
      for (std::size_t y = 0; y < dims.ny; ++y) {
        for (std::size_t x = 0; x < dims.nx; ++x) {
          const std::size_t v = dims.index(x, y, z);
          const long pos = static_cast<long>(axis == 0 ? x : axis == 1 ? y : z);
          const std::size_t line = v - static_cast<std::size_t>(pos) * stride[axis];
          double acc = 0.0;
          for (long t = -radius; t <= radius; ++t) {
            const long p = std::clamp(pos + t, 0L, len - 1);
            acc += kernel[t + radius] * data[line + static_cast<std::size_t>(p) * stride[axis]];
          }
          out[v] = acc;
        }
      }
    }
    data.swap(out);
  }
}

void grow_pore_phases(std::vector<std::uint8_t>& labels, const Dims& dims, const PhantomSpec& spec,
                      std::mt19937_64& rng) {
  std::vector<std::size_t> pore;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] != kSolid) pore.push_back(v);
  }
  if (pore.empty()) return;

  constexpr std::uint8_t unset = 0xff;
  for (std::size_t v : pore) labels[v] = unset;
  std::deque<std::size_t> queue;
  std::uniform_int_distribution<std::size_t> pick(0, pore.size() - 1);
  for (std::uint8_t phase : spec.pore_phases) {
    for (std::size_t s = 0; s < spec.seeds_per_phase; ++s) {
      const std::size_t v = pore[pick(rng)];
      if (labels[v] != unset) continue;
      labels[v] = phase;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    const std::size_t x = v % dims.nx, y = (v / dims.nx) % dims.ny, z = v / (dims.nx * dims.ny);
    const std::size_t nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                  {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
    for (const auto& n : nb) {
      if (n[0] >= dims.nx || n[1] >= dims.ny || n[2] >= dims.nz) continue;  // wraps on underflow
      const std::size_t u = dims.index(n[0], n[1], n[2]);
      if (labels[u] != unset) continue;
      labels[u] = labels[v];
      queue.push_back(u);
    }
  }
  for (std::size_t v : pore) {
    if (labels[v] == unset) labels[v] = kGas;
  }
}

}  // namespace

Codebook phantom_codebook() {
  return {{kGas, "pore"}, {kSolid, "solid"}, {kWater, "water"}, {kOil, "oil"}};
}

void validate(const PhantomSpec& spec) {
  if (spec.size < 1) throw ArgumentError("phantom size must be >= 1");
  if (!(spec.r_min > 0.0) || !(spec.r_min <= spec.r_max) ||
      !(spec.r_max < static_cast<double>(spec.size) / 2.0)) {
    throw ArgumentError("grain radii need 0 < r_min <= r_max < size / 2");
  }
  const auto& I = spec.intensity;
  if (!(I[kGas] < I[kWater] && I[kWater] < I[kOil] && I[kOil] < I[kSolid])) {
    throw ArgumentError("phase intensities must be ordered gas < water < oil < solid");
  }
  for (double v : I) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("phase intensities must lie in [0,1]");
  }
  if (!(spec.noise_sigma >= 0.0) || !(spec.blur_sigma >= 0.0)) {
    throw ArgumentError("noise and blur sigmas must be >= 0");
  }
  if (!(spec.max_overlap >= 0.0 && spec.max_overlap < 1.0)) {
    throw ArgumentError("max_overlap must lie in [0, 1)");
  }
  if (spec.pore_phases.empty()) throw ArgumentError("at least one pore phase is required");
  for (auto p : spec.pore_phases) {
    if (p != kGas && p != kWater && p != kOil) {
      throw ArgumentError("pore phases must be gas, water or oil codes");
    }
  }
}

double analytic_grain_volume(const std::vector<Grain>& grains) {
  double total = 0.0;
  for (const auto& g : grains) total += 4.0 / 3.0 * std::numbers::pi * g.r * g.r * g.r;
  return total;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const Dims dims{spec.size, spec.size, spec.size};
  const double edge = static_cast<double>(spec.size);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Phantom ph;
  std::size_t attempts = 0;
  while (ph.grains.size() < spec.grain_count) {
    if (attempts++ >= spec.max_attempts) {
      throw PlacementError("placed only " + std::to_string(ph.grains.size()) + " of " +
                           std::to_string(spec.grain_count) + " grains in " + std::to_string(spec.max_attempts) +
                           " attempts; try smaller radii or fewer grains");
    }
    Grain g;
    g.r = spec.r_min + (spec.r_max - spec.r_min) * unit(rng);
    const double lo = spec.contain_grains ? g.r : 0.0;
    const double span = spec.contain_grains ? edge - 1.0 - 2.0 * g.r : edge - 1.0;
    g.x = lo + span * unit(rng);
    g.y = lo + span * unit(rng);
    g.z = lo + span * unit(rng);
    const bool clear = std::all_of(ph.grains.begin(), ph.grains.end(), [&](const Grain& o) {
      const double dx = g.x - o.x, dy = g.y - o.y, dz = g.z - o.z;
      const double min_dist = (1.0 - spec.max_overlap) * (g.r + o.r);
      return dx * dx + dy * dy + dz * dz >= min_dist * min_dist;
    });
    if (clear) ph.grains.push_back(g);
  }

  std::vector<std::uint8_t> labels(dims.count(), kGas);
  for (const auto& g : ph.grains) {
    auto range = [&](double c) {
      const long a = std::max(0L, static_cast<long>(std::floor(c - g.r)));
      const long b = std::min(static_cast<long>(spec.size) - 1, static_cast<long>(std::ceil(c + g.r)));
      return std::pair{a, b};
    };
    const auto [x0, x1] = range(g.x);
    const auto [y0, y1] = range(g.y);
    const auto [z0, z1] = range(g.z);
    for (long z = z0; z <= z1; ++z) {
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const double dx = x - g.x, dy = y - g.y, dz = z - g.z;
          if (dx * dx + dy * dy + dz * dz <= g.r * g.r) {
            labels[dims.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                              static_cast<std::size_t>(z))] = kSolid;
          }
        }
      }
    }
  }

  const bool fluids = std::any_of(spec.pore_phases.begin(), spec.pore_phases.end(),
                                  [](std::uint8_t p) { return p != kGas; });
  if (fluids) grow_pore_phases(labels, dims, spec, rng);

  std::vector<double> intensity(dims.count());
  for (std::size_t v = 0; v < intensity.size(); ++v) intensity[v] = spec.intensity[labels[v]];
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : intensity) v += noise(rng);
  }
  if (spec.blur_sigma > 0.0) blur(intensity, dims, spec.blur_sigma);

  std::vector<float> values(dims.count());
  for (std::size_t v = 0; v < values.size(); ++v) {
    values[v] = static_cast<float>(std::clamp(intensity[v], 0.0, 1.0));
  }
  ph.volume = Volume(dims, std::move(values));
  ph.labels = LabelVolume(dims, std::move(labels), phantom_codebook());
  return ph;
}

}  // namespace qcuts3d
