#include "qcuts3d/supervoxel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "qcuts3d/parallel.hpp"

namespace qcuts3d {

namespace {

constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();

struct Center {
  double x, y, z, intensity;
};

// 6-neighbourhood offsets of voxel i; returns the number written to out.
int neighbours6(const Dims& d, std::size_t i, std::array<std::size_t, 6>& out) {
  const std::size_t x = i % d.nx;
  const std::size_t y = (i / d.nx) % d.ny;
  const std::size_t z = i / (d.nx * d.ny);
  const std::size_t sxy = d.nx * d.ny;
  int n = 0;
  if (x > 0) out[n++] = i - 1;
  if (x + 1 < d.nx) out[n++] = i + 1;
  if (y > 0) out[n++] = i - d.nx;
  if (y + 1 < d.ny) out[n++] = i + d.nx;
  if (z > 0) out[n++] = i - sxy;
  if (z + 1 < d.nz) out[n++] = i + sxy;
  return n;
}

}  // namespace

SupervoxelMap::SupervoxelMap(Dims dims, std::vector<std::uint32_t> assignment)
    : dims_(dims), assignment_(std::move(assignment)) {
  if (!dims.valid() || assignment_.size() != dims.count()) {
    throw ArgumentError("supervoxel assignment size does not match dims " + to_string(dims));
  }
  std::uint32_t max_id = 0;
  for (auto id : assignment_) max_id = std::max(max_id, id);
  if (max_id == kUnassigned) throw ArgumentError("supervoxel assignment has unassigned voxels");
  sizes_.assign(static_cast<std::size_t>(max_id) + 1, 0);
  for (auto id : assignment_) ++sizes_[id];
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] == 0) throw ArgumentError("supervoxel ids are not dense: id " + std::to_string(k) + " is empty");
  }
}

SeedGrid seed_grid(const Dims& dims, std::size_t target_count) {
  SeedGrid grid;
  std::array<bool, 3> active{true, true, true};
  double step = 1.0;
  for (;;) {
    double volume = 1.0;
    int n_active = 0;
    for (int a = 0; a < 3; ++a) {
      if (active[a]) {
        volume *= static_cast<double>(dims.extent(a));
        ++n_active;
      }
    }
    if (n_active == 0) break;
    step = std::pow(volume / static_cast<double>(target_count), 1.0 / n_active);
    bool changed = false;
    // an axis thinner than one supervoxel gets a single seed layer
    for (int a = 0; a < 3; ++a) {
      if (active[a] && static_cast<double>(dims.extent(a)) < step) {
        active[a] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  grid.step = std::max(step, 1.0);
  for (int a = 0; a < 3; ++a) {
    const auto n = dims.extent(a);
    if (!active[a]) {
      grid.counts[a] = 1;
    } else {
      const auto c = static_cast<std::size_t>(std::llround(static_cast<double>(n) / grid.step));
      grid.counts[a] = std::clamp<std::size_t>(c, 1, n);
    }
  }
  return grid;
}

std::vector<float> gradient_magnitude(const Volume& volume) {
  const Dims& d = volume.dims();
  std::vector<float> grad(volume.size());
  for (std::size_t z = 0; z < d.nz; ++z) {
    const std::size_t z0 = z > 0 ? z - 1 : z, z1 = z + 1 < d.nz ? z + 1 : z;
    for (std::size_t y = 0; y < d.ny; ++y) {
      const std::size_t y0 = y > 0 ? y - 1 : y, y1 = y + 1 < d.ny ? y + 1 : y;
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t x0 = x > 0 ? x - 1 : x, x1 = x + 1 < d.nx ? x + 1 : x;
        grad[d.index(x, y, z)] = std::abs(volume.at(x1, y, z) - volume.at(x0, y, z)) +
                                 std::abs(volume.at(x, y1, z) - volume.at(x, y0, z)) +
                                 std::abs(volume.at(x, y, z1) - volume.at(x, y, z0));
      }
    }
  }
  return grad;
}

std::vector<std::uint32_t> enforce_connectivity(const Dims& dims, std::vector<std::uint32_t> labels) {
  const std::size_t n = dims.count();
  if (labels.size() != n) throw ArgumentError("label count does not match dims");

  // 6-connected components of equal label, discovered in voxel order
  std::vector<std::uint32_t> comp(n, kUnassigned);
  std::vector<std::uint32_t> comp_label;
  std::vector<std::size_t> comp_size;
  std::vector<std::size_t> stack;
  std::array<std::size_t, 6> nb{};
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (comp[seed] != kUnassigned) continue;
    const auto id = static_cast<std::uint32_t>(comp_label.size());
    const std::uint32_t label = labels[seed];
    comp_label.push_back(label);
    comp_size.push_back(0);
    comp[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      ++comp_size[id];
      const int k = neighbours6(dims, v, nb);
      for (int j = 0; j < k; ++j) {
        const std::size_t u = nb[j];
        if (comp[u] == kUnassigned && labels[u] == label) {
          comp[u] = id;
          stack.push_back(u);
        }
      }
    }
  }

  const std::size_t n_comp = comp_label.size();
  std::uint32_t max_label = 0;
  for (auto l : comp_label) max_label = std::max(max_label, l);
  const std::size_t n_labels = static_cast<std::size_t>(max_label) + 1;

  // the largest component of each label keeps it (first discovered on ties)
  std::vector<std::uint32_t> main_comp(n_labels, kUnassigned);
  for (std::size_t c = 0; c < n_comp; ++c) {
    auto& m = main_comp[comp_label[c]];
    if (m == kUnassigned || comp_size[c] > comp_size[m]) m = static_cast<std::uint32_t>(c);
  }
  std::vector<std::uint32_t> resolved(n_comp, kUnassigned);
  std::vector<std::size_t> label_size(n_labels, 0);
  std::vector<std::uint32_t> orphans;
  for (std::size_t c = 0; c < n_comp; ++c) {
    if (main_comp[comp_label[c]] == c) {
      resolved[c] = comp_label[c];
      label_size[comp_label[c]] = comp_size[c];
    } else {
      orphans.push_back(static_cast<std::uint32_t>(c));
    }
  }

  if (!orphans.empty()) {
    // voxel lists of orphan fragments, grouped by component
    std::vector<std::uint32_t> orphan_slot(n_comp, kUnassigned);
    for (std::size_t s = 0; s < orphans.size(); ++s) orphan_slot[orphans[s]] = static_cast<std::uint32_t>(s);
    std::vector<std::size_t> offsets(orphans.size() + 1, 0);
    for (std::size_t s = 0; s < orphans.size(); ++s) offsets[s + 1] = offsets[s] + comp_size[orphans[s]];
    std::vector<std::size_t> members(offsets.back());
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t v = 0; v < n; ++v) {
      const auto s = orphan_slot[comp[v]];
      if (s != kUnassigned) members[fill[s]++] = v;
    }

    std::vector<std::uint32_t> pending(orphans.size());
    std::iota(pending.begin(), pending.end(), 0u);
    while (!pending.empty()) {
      std::vector<std::uint32_t> still;
      for (auto s : pending) {
        std::uint32_t best = kUnassigned;
        for (std::size_t m = offsets[s]; m < offsets[s + 1]; ++m) {
          const int k = neighbours6(dims, members[m], nb);
          for (int j = 0; j < k; ++j) {
            const std::uint32_t target = resolved[comp[nb[j]]];
            if (target == kUnassigned) continue;
            if (best == kUnassigned || label_size[target] > label_size[best] ||
                (label_size[target] == label_size[best] && target < best)) {
              best = target;
            }
          }
        }
        if (best == kUnassigned) {
          still.push_back(s);
        } else {
          resolved[orphans[s]] = best;
        }
      }
      if (still.size() == pending.size()) {
        throw DataError("connectivity enforcement could not attach isolated fragments");
      }
      pending.swap(still);
    }
  }

  // dense ids in ascending order of surviving labels
  std::vector<std::uint32_t> dense(n_labels, kUnassigned);
  std::vector<bool> used(n_labels, false);
  for (std::size_t c = 0; c < n_comp; ++c) used[resolved[c]] = true;
  std::uint32_t next = 0;
  for (std::size_t l = 0; l < n_labels; ++l) {
    if (used[l]) dense[l] = next++;
  }
  for (std::size_t v = 0; v < n; ++v) labels[v] = dense[resolved[comp[v]]];
  return labels;
}

SupervoxelMap slic3d(const Volume& volume, const SlicOptions& options) {
  const Dims& d = volume.dims();
  const std::size_t n = d.count();
  if (options.target_count == 0) throw ArgumentError("target supervoxel count must be >= 1");
  if (options.target_count > n) {
    throw ArgumentError("target supervoxel count " + std::to_string(options.target_count) +
                        " exceeds voxel count " + std::to_string(n));
  }
  if (options.max_iterations < 1) throw ArgumentError("SLIC iteration cap must be >= 1");

  const SeedGrid grid = seed_grid(d, options.target_count);
  const double step = grid.step;
  const auto grad = gradient_magnitude(volume);

  // seeds on a regular lattice, moved to the lowest-gradient voxel nearby
  std::vector<Center> centers;
  centers.reserve(grid.counts[0] * grid.counts[1] * grid.counts[2]);
  for (std::size_t k = 0; k < grid.counts[2]; ++k) {
    for (std::size_t j = 0; j < grid.counts[1]; ++j) {
      for (std::size_t i = 0; i < grid.counts[0]; ++i) {
        const std::array<std::size_t, 3> idx{i, j, k};
        std::array<std::size_t, 3> p{};
        for (int a = 0; a < 3; ++a) {
          const double c = (static_cast<double>(idx[a]) + 0.5) * static_cast<double>(d.extent(a)) /
                           static_cast<double>(grid.counts[a]);
          p[a] = std::min(static_cast<std::size_t>(c), d.extent(a) - 1);
        }
        std::size_t best = d.index(p[0], p[1], p[2]);
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const auto x = static_cast<std::ptrdiff_t>(p[0]) + dx;
              const auto y = static_cast<std::ptrdiff_t>(p[1]) + dy;
              const auto z = static_cast<std::ptrdiff_t>(p[2]) + dz;
              if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(d.nx) ||
                  y >= static_cast<std::ptrdiff_t>(d.ny) || z >= static_cast<std::ptrdiff_t>(d.nz)) {
                continue;
              }
              const std::size_t v = d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                            static_cast<std::size_t>(z));
              if (grad[v] < grad[best]) best = v;
            }
          }
        }
        const std::size_t bx = best % d.nx, by = (best / d.nx) % d.ny, bz = best / (d.nx * d.ny);
        centers.push_back({static_cast<double>(bx), static_cast<double>(by), static_cast<double>(bz),
                           static_cast<double>(volume[best])});
      }
    }
  }
  const std::size_t k_count = centers.size();
  std::vector<double> compactness(k_count, options.initial_compactness);

  // bucket grid with cell edge `step`: a center within `step` of a voxel on
  // every axis lies in the voxel's cell or an adjacent one
  std::array<std::size_t, 3> cells{};
  std::array<std::vector<std::size_t>, 3> cell_of;
  std::array<std::vector<std::size_t>, 3> cell_begin;
  for (int a = 0; a < 3; ++a) {
    const auto ext = d.extent(a);
    cells[a] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(ext) / step)));
    cell_of[a].resize(ext);
    cell_begin[a].assign(cells[a] + 1, ext);
    for (std::size_t x = ext; x-- > 0;) {
      const auto c = std::min(static_cast<std::size_t>(static_cast<double>(x) / step), cells[a] - 1);
      cell_of[a][x] = c;
      cell_begin[a][c] = x;
    }
    // empty cells inherit the start of the next one
    for (std::size_t c = cells[a]; c-- > 0;) cell_begin[a][c] = std::min(cell_begin[a][c], cell_begin[a][c + 1]);
  }
  auto cell_index = [&](std::size_t cx, std::size_t cy, std::size_t cz) {
    return cx + cells[0] * (cy + cells[1] * cz);
  };
  auto center_cell = [&](int a, double coord) {
    const auto c = static_cast<std::size_t>(std::max(0.0, coord) / step);
    return std::min(c, cells[a] - 1);
  };

  std::vector<std::uint32_t> labels(n, kUnassigned);
  std::vector<std::vector<std::uint32_t>> buckets(cells[0] * cells[1] * cells[2]);
  std::vector<double> spatial_weight(k_count);
  const std::size_t change_limit =
      static_cast<std::size_t>(options.convergence_fraction * static_cast<double>(n));
  const unsigned threads = resolve_threads(options.threads);

  int iterations = 0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    ++iterations;
    for (auto& b : buckets) b.clear();
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& c = centers[k];
      buckets[cell_index(center_cell(0, c.x), center_cell(1, c.y), center_cell(2, c.z))].push_back(
          static_cast<std::uint32_t>(k));
      const double m = compactness[k] / step;
      spatial_weight[k] = m * m;
    }

    // assignment: each voxel independently picks the best window that covers it
    std::vector<std::size_t> changed_per_slab(cells[2], 0);
    parallel_for(cells[2], threads, [&](std::size_t cz_begin, std::size_t cz_end) {
      std::vector<std::uint32_t> candidates;
      for (std::size_t cz = cz_begin; cz < cz_end; ++cz) {
        std::size_t changed = 0;
        for (std::size_t cy = 0; cy < cells[1]; ++cy) {
          for (std::size_t cx = 0; cx < cells[0]; ++cx) {
            candidates.clear();
            for (std::size_t nz = cz > 0 ? cz - 1 : 0; nz <= std::min(cz + 1, cells[2] - 1); ++nz)
              for (std::size_t ny = cy > 0 ? cy - 1 : 0; ny <= std::min(cy + 1, cells[1] - 1); ++ny)
                for (std::size_t nx = cx > 0 ? cx - 1 : 0; nx <= std::min(cx + 1, cells[0] - 1); ++nx) {
                  const auto& b = buckets[cell_index(nx, ny, nz)];
                  candidates.insert(candidates.end(), b.begin(), b.end());
                }
            for (std::size_t z = cell_begin[2][cz]; z < cell_begin[2][cz + 1]; ++z) {
              for (std::size_t y = cell_begin[1][cy]; y < cell_begin[1][cy + 1]; ++y) {
                std::size_t v = d.index(cell_begin[0][cx], y, z);
                for (std::size_t x = cell_begin[0][cx]; x < cell_begin[0][cx + 1]; ++x, ++v) {
                  const double intensity = volume[v];
                  double best_dist = std::numeric_limits<double>::infinity();
                  std::uint32_t best = kUnassigned;
                  for (const std::uint32_t k : candidates) {
                    const Center& c = centers[k];
                    const double dx = static_cast<double>(x) - c.x;
                    const double dy = static_cast<double>(y) - c.y;
                    const double dz = static_cast<double>(z) - c.z;
                    if (std::abs(dx) > step || std::abs(dy) > step || std::abs(dz) > step) continue;
                    const double dc = intensity - c.intensity;
                    const double dist = dc * dc + (dx * dx + dy * dy + dz * dz) * spatial_weight[k];
                    if (dist < best_dist || (dist == best_dist && k < best)) {
                      best_dist = dist;
                      best = k;
                    }
                  }
                  if (best != kUnassigned && best != labels[v]) {
                    labels[v] = best;
                    ++changed;
                  }
                }
              }
            }
          }
        }
        changed_per_slab[cz] = changed;
      }
    });
    const std::size_t changed =
        std::accumulate(changed_per_slab.begin(), changed_per_slab.end(), std::size_t{0});

    // voxels no window reached yet: nearest center in space (first iteration, tiny steps)
    if (iter == 0) {
      for (std::size_t v = 0; v < n; ++v) {
        if (labels[v] != kUnassigned) continue;
        const double x = static_cast<double>(v % d.nx);
        const double y = static_cast<double>((v / d.nx) % d.ny);
        const double z = static_cast<double>(v / (d.nx * d.ny));
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < k_count; ++k) {
          const auto& c = centers[k];
          const double dist = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) + (z - c.z) * (z - c.z);
          if (dist < best_dist) {
            best_dist = dist;
            labels[v] = static_cast<std::uint32_t>(k);
          }
        }
      }
    }

    // center update plus next-iteration compactness (max intensity distance)
    std::vector<std::array<double, 4>> sums(k_count, {0.0, 0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(k_count, 0);
    std::vector<double> max_dc(k_count, 0.0);
    for (std::size_t z = 0, v = 0; z < d.nz; ++z) {
      for (std::size_t y = 0; y < d.ny; ++y) {
        for (std::size_t x = 0; x < d.nx; ++x, ++v) {
          const auto k = labels[v];
          const double intensity = volume[v];
          auto& s = sums[k];
          s[0] += static_cast<double>(x);
          s[1] += static_cast<double>(y);
          s[2] += static_cast<double>(z);
          s[3] += intensity;
          ++counts[k];
          max_dc[k] = std::max(max_dc[k], std::abs(intensity - centers[k].intensity));
        }
      }
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      if (counts[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[k]);
      centers[k] = {sums[k][0] * inv, sums[k][1] * inv, sums[k][2] * inv, sums[k][3] * inv};
      compactness[k] = std::max(options.min_compactness, max_dc[k]);
    }

    if (iter > 0 && changed < change_limit) break;
  }

  SupervoxelMap map(d, enforce_connectivity(d, std::move(labels)));
  map.iterations = iterations;
  return map;
}

std::vector<double> supervoxel_means(const Volume& volume, const SupervoxelMap& map) {
  if (!(volume.dims() == map.dims())) {
    throw ArgumentError("volume dims " + to_string(volume.dims()) + " do not match supervoxel map " +
                        to_string(map.dims()));
  }
  std::vector<double> sums(map.count(), 0.0);
  for (std::size_t v = 0; v < volume.size(); ++v) sums[map[v]] += volume[v];
  for (std::size_t k = 0; k < sums.size(); ++k) sums[k] /= static_cast<double>(map.sizes()[k]);
  return sums;
}

void save_supervoxel_ids(const SupervoxelMap& map, const std::filesystem::path& raw_path) {
  RawHeader h;
  h.dims = map.dims();
  h.dtype = ElementType::u32;
  h.kind = "supervoxels";
  std::vector<char> bytes(map.assignment().size() * 4);
  for (std::size_t i = 0; i < map.assignment().size(); ++i) {
    const std::uint32_t v = map[i];
    bytes[4 * i + 0] = static_cast<char>(v & 0xFF);
    bytes[4 * i + 1] = static_cast<char>((v >> 8) & 0xFF);
    bytes[4 * i + 2] = static_cast<char>((v >> 16) & 0xFF);
    bytes[4 * i + 3] = static_cast<char>((v >> 24) & 0xFF);
  }
  std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + raw_path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + raw_path.string());
  write_sidecar(sidecar_path(raw_path), h);
}

}  // namespace qcuts3d
