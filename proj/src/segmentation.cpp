#include "qcuts3d/segmentation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "qcuts3d/parallel.hpp"
#include "qcuts3d/qcuts.hpp"

namespace qcuts3d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Partition {
  std::array<double, 2> centers{};
  double within_ss = 0.0;
};

Partition score(std::span<const double> values, const std::vector<std::uint8_t>& assignment) {
  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[assignment[i]] += values[i];
    ++count[assignment[i]];
  }
  Partition p;
  for (int c = 0; c < 2; ++c) p.centers[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - p.centers[assignment[i]];
    p.within_ss += d * d;
  }
  return p;
}

// Lloyd iterations from the given centers until the assignment is stable.
int lloyd(std::span<const double> values, std::array<double, 2> centers, std::vector<std::uint8_t>& assignment) {
  auto assign = [&] {
    const std::uint8_t lower = centers[0] <= centers[1] ? 0 : 1;
    bool changed = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d0 = std::abs(values[i] - centers[0]);
      const double d1 = std::abs(values[i] - centers[1]);
      const std::uint8_t a = d0 < d1 ? 0 : d1 < d0 ? 1 : lower;
      changed = changed || a != assignment[i];
      assignment[i] = a;
    }
    return changed;
  };
  assignment.assign(values.size(), 0);
  assign();
  int iterations = 0;
  for (;;) {
    ++iterations;
    std::array<double, 2> sum{0.0, 0.0};
    std::array<std::size_t, 2> count{0, 0};
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[assignment[i]] += values[i];
      ++count[assignment[i]];
    }
    for (int c = 0; c < 2; ++c) {
      if (count[c]) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
    if (!assign()) break;
  }
  return iterations;
}

}  // namespace

KMeans2Result kmeans2(std::span<const double> values) {
  if (values.size() < 2) throw ArgumentError("kmeans2 needs at least two values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DegenerateError("kmeans2: all values are identical");

  KMeans2Result result;
  result.iterations = lloyd(values, {lo, hi}, result.assignment);
  Partition part = score(values, result.assignment);

  // Lloyd can stall in a local minimum; the optimal 1D split is contiguous in
  // sorted order, so scan every boundary between distinct values.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double total_sq = 0.0;
  for (double v : sorted) total_sq += (v - mean) * (v - mean);
  double left_sum = 0.0;
  double best_ss = part.within_ss;
  std::size_t best_split = 0;
  for (std::size_t s = 1; s < n; ++s) {
    left_sum += sorted[s - 1] - mean;
    if (!(sorted[s] > sorted[s - 1])) continue;
    const double nl = static_cast<double>(s), nr = static_cast<double>(n - s);
    // within_ss = total - nl * meanL^2 - nr * meanR^2 in centered coordinates
    const double ss = total_sq - left_sum * left_sum / nl - left_sum * left_sum / nr;
    if (ss < best_ss * (1.0 - 1e-12) - 1e-300) {
      best_ss = ss;
      best_split = s;
    }
  }
  if (best_split > 0) {
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i < best_split; ++i) left += sorted[i];
    for (std::size_t i = best_split; i < n; ++i) right += sorted[i];
    const std::array<double, 2> start{left / static_cast<double>(best_split),
                                      right / static_cast<double>(n - best_split)};
    std::vector<std::uint8_t> alt;
    const int extra = lloyd(values, start, alt);
    const Partition alt_part = score(values, alt);
    if (alt_part.within_ss < part.within_ss) {
      result.assignment = std::move(alt);
      result.iterations += extra;
      part = alt_part;
    }
  }

  result.centers = part.centers;
  result.within_ss = part.within_ss;
  result.solid_cluster = part.centers[1] >= part.centers[0] ? 1 : 0;
  return result;
}

SaliencyField voxelize(std::span<const double> values, const SupervoxelMap& map) {
  if (values.size() != map.count()) {
    throw ArgumentError("value count " + std::to_string(values.size()) + " does not match " +
                        std::to_string(map.count()) + " supervoxels");
  }
  SaliencyField field(map.dims());
  for (std::size_t v = 0; v < field.size(); ++v) field[v] = static_cast<float>(values[map[v]]);
  return field;
}

SegmentationMask voxelize_labels(std::span<const std::uint8_t> labels, const SupervoxelMap& map) {
  if (labels.size() != map.count()) {
    throw ArgumentError("label count " + std::to_string(labels.size()) + " does not match " +
                        std::to_string(map.count()) + " supervoxels");
  }
  SegmentationMask mask(map.dims());
  for (std::size_t v = 0; v < mask.size(); ++v) {
    mask[v] = labels[map[v]] ? SegmentationMask::solid : SegmentationMask::pore;
  }
  return mask;
}

SegmentationMask majority_vote(std::span<const SegmentationMask> masks) {
  if (masks.empty()) throw ArgumentError("majority vote needs at least one mask");
  const Dims dims = masks.front().dims();
  for (const auto& m : masks) {
    if (!(m.dims() == dims)) throw ArgumentError("majority vote: mask dims differ");
  }
  SegmentationMask out(dims);
  const std::size_t voters = masks.size();
  for (std::size_t v = 0; v < out.size(); ++v) {
    std::size_t solid = 0;
    for (const auto& m : masks) solid += m[v] == SegmentationMask::solid;
    out[v] = 2 * solid > voters ? SegmentationMask::solid : SegmentationMask::pore;
  }
  return out;
}

ScaleResult segment_scale(const Volume& adjusted, std::size_t target, const PipelineConfig& config,
                          unsigned threads) {
  const auto start = Clock::now();
  ScaleResult r;
  ScaleDiagnostics& diag = r.diagnostics;
  diag.target = target;

  SlicOptions slic;
  slic.target_count = target;
  slic.max_iterations = config.slic_iterations;
  slic.threads = threads;
  r.map = slic3d(adjusted, slic);
  diag.supervoxels = r.map.count();
  diag.slic_iterations = r.map.iterations;

  auto means = supervoxel_means(adjusted, r.map);
  const auto seeds = select_pore_seeds(adjusted, r.map, means, config.axis);
  diag.seeds = seeds.size();
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  const bool flat = *hi - *lo <= 1e-12;

  SupervoxelGraph graph = build_graph(std::move(means), config.sigma, config.kernel);
  const std::size_t n = graph.size();
  r.saliency.assign(n, 0.0);
  r.labels.assign(n, 0);

  if (flat || n < 2) {
    // no intensity contrast between supervoxels: nothing to separate
    diag.degenerate = true;
  } else {
    diag.phi_seed = config.phi_seed.value ? *config.phi_seed.value
                                          : default_phi_seed(graph, config.phi_seed.multiplier);
    auto phi = unary_potentials(graph, seeds, diag.phi_seed);
    graph.set_seeds(seeds, std::move(phi));
    const SaliencyVector saliency = quantum_cut(graph, config.eigen);
    diag.eigenvalue = saliency.eigenvalue;
    diag.residual = saliency.residual;
    diag.applications = saliency.applications;
    r.saliency = saliency.values;
    try {
      const KMeans2Result km = kmeans2(r.saliency);
      for (std::size_t i = 0; i < n; ++i) {
        r.labels[i] = km.assignment[i] == km.solid_cluster ? 1 : 0;
      }
    } catch (const DegenerateError&) {
      diag.degenerate = true;
    }
  }

  std::size_t solid_voxels = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (r.labels[k]) solid_voxels += r.map.sizes()[k];
  }
  diag.solid_fraction = static_cast<double>(solid_voxels) / static_cast<double>(adjusted.size());
  diag.seconds = seconds_since(start);
  return r;
}

SegmentationResult segment_volume(const Volume& volume, const PipelineConfig& config) {
  const auto start = Clock::now();
  if (config.scales.empty()) throw ArgumentError("at least one supervoxel scale is required");
  if (!(config.sigma > 0.0)) throw ArgumentError("sigma must be > 0");

  const ContrastResult adjusted =
      contrast_adjust(volume, config.percentile_low, config.percentile_high);

  const std::size_t n_scales = config.scales.size();
  const unsigned threads = resolve_threads(config.threads);
  const unsigned outer = static_cast<unsigned>(std::min<std::size_t>(threads, n_scales));
  const unsigned inner = std::max(1u, threads / std::max(1u, outer));

  std::vector<ScaleResult> per_scale(n_scales);
  parallel_for(n_scales, outer, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      per_scale[s] = segment_scale(adjusted.volume, config.scales[s], config, inner);
    }
  });

  // fuse in ascending scale order so the field does not depend on list order
  std::vector<std::size_t> order(n_scales);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return config.scales[a] < config.scales[b]; });

  const Dims dims = volume.dims();
  std::vector<std::uint16_t> votes(dims.count(), 0);
  std::vector<double> field_sum(dims.count(), 0.0);
  for (std::size_t s : order) {
    const ScaleResult& r = per_scale[s];
    for (std::size_t v = 0; v < dims.count(); ++v) {
      const auto id = r.map[v];
      votes[v] += r.labels[id];
      field_sum[v] += r.saliency[id];
    }
  }

  SegmentationResult result;
  result.mask = SegmentationMask(dims);
  result.field = SaliencyField(dims);
  for (std::size_t v = 0; v < dims.count(); ++v) {
    result.mask[v] = 2 * static_cast<std::size_t>(votes[v]) > n_scales ? SegmentationMask::solid
                                                                        : SegmentationMask::pore;
    result.field[v] = static_cast<float>(std::clamp(field_sum[v] / static_cast<double>(n_scales), 0.0, 1.0));
  }
  result.scales.reserve(n_scales);
  for (auto& r : per_scale) result.scales.push_back(r.diagnostics);
  result.contrast_warning = adjusted.degenerate;
  result.seconds = seconds_since(start);
  return result;
}

}  // namespace qcuts3d
