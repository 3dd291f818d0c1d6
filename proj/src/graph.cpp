#include "qcuts3d/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qcuts3d {

SupervoxelGraph::SupervoxelGraph(std::vector<double> means, double sigma, KernelVariant kernel)
    : means_(std::move(means)), sigma_(sigma), kernel_(kernel) {
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw ArgumentError("kernel bandwidth sigma must be > 0");
  if (means_.empty()) throw ArgumentError("graph needs at least one node");
  for (double s : means_) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw ArgumentError("node intensities must lie in [0,1]");
  }
  const std::size_t n = means_.size();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return means_[a] < means_[b]; });
  const double inv_width = 1.0 / (2.0 * sigma_ * sigma_);
  decay_.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    decay_[k] = std::exp(-(means_[order_[k]] - means_[order_[k - 1]]) * inv_width);
  }
  phi_.assign(n, 0.0);
  degrees_.assign(n, 0.0);
  const std::vector<double> ones(n, 1.0);
  apply_weights(ones, degrees_);
}

double SupervoxelGraph::weight(std::size_t i, std::size_t j) const noexcept {
  if (i == j) return 0.0;
  const double diff = std::abs(means_[i] - means_[j]);
  const double arg = kernel_ == KernelVariant::absolute ? diff : diff * diff;
  return std::exp(-arg / (2.0 * sigma_ * sigma_));
}

void SupervoxelGraph::set_seeds(std::vector<std::uint32_t> seeds, std::vector<double> potentials) {
  if (potentials.size() != size()) throw ArgumentError("potential vector length does not match node count");
  for (auto s : seeds) {
    if (s >= size()) throw ArgumentError("seed id " + std::to_string(s) + " out of range");
  }
  seeds_ = std::move(seeds);
  phi_ = std::move(potentials);
}

void SupervoxelGraph::apply_weights(std::span<const double> z, std::span<double> out,
                                    OperatorPath path) const {
  if (z.size() != size() || out.size() != size()) {
    throw ArgumentError("vector length does not match graph size " + std::to_string(size()));
  }
  if (path == OperatorPath::fast && kernel_ == KernelVariant::absolute) {
    apply_weights_fast(z, out);
  } else {
    apply_weights_dense(z, out);
  }
}

// The absolute kernel is a 1D Laplace kernel in s. Along the sorted order
//   left_k  = sum_{j<k} exp(-(t_k - t_j)) z_j = decay_k (left_{k-1} + z_{k-1})
//   right_k = sum_{j>k} exp(-(t_j - t_k)) z_j = decay_{k+1} (right_{k+1} + z_{k+1})
// so W z costs O(n) once the order is known.
void SupervoxelGraph::apply_weights_fast(std::span<const double> z, std::span<double> out) const {
  const std::size_t n = size();
  double left = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) left = decay_[k] * (left + z[order_[k - 1]]);
    out[order_[k]] = left;
  }
  double right = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) right = decay_[k + 1] * (right + z[order_[k + 1]]);
    out[order_[k]] += right;
  }
}

void SupervoxelGraph::apply_weights_dense(std::span<const double> z, std::span<double> out) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) acc += weight(i, j) * z[j];
    }
    out[i] = acc;
  }
}

SupervoxelGraph build_graph(std::vector<double> means, double sigma, KernelVariant kernel) {
  return SupervoxelGraph(std::move(means), sigma, kernel);
}

Axis parse_axis(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::x;
    case 'y': case 'Y': return Axis::y;
    case 'z': case 'Z': return Axis::z;
    default: throw ArgumentError(std::string("axis must be x, y or z, got '") + c + "'");
  }
}

std::vector<std::uint32_t> select_pore_seeds(const Volume& volume, const SupervoxelMap& map,
                                             std::span<const double> means, Axis axis) {
  const Dims& d = volume.dims();
  if (!(d == map.dims())) throw ArgumentError("volume and supervoxel map dims differ");
  if (means.size() != map.count()) throw ArgumentError("means length does not match supervoxel count");

  const int slice_axis = static_cast<int>(axis);
  // rows run along the first remaining axis; the other one indexes rows in a slice
  int row_axis = -1, across_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (a == slice_axis) continue;
    if (row_axis < 0) {
      row_axis = a;
    } else {
      across_axis = a;
    }
  }
  const std::array<std::size_t, 3> stride{1, d.nx, d.nx * d.ny};

  std::vector<bool> chosen(map.count(), false);
  for (std::size_t s = 0; s < d.extent(slice_axis); ++s) {
    for (std::size_t r = 0; r < d.extent(across_axis); ++r) {
      const std::size_t base = s * stride[slice_axis] + r * stride[across_axis];
      std::uint32_t best = map[base];
      for (std::size_t t = 1; t < d.extent(row_axis); ++t) {
        const std::uint32_t id = map[base + t * stride[row_axis]];
        if (means[id] < means[best] || (means[id] == means[best] && id < best)) best = id;
      }
      chosen[best] = true;
    }
  }
  std::vector<std::uint32_t> seeds;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    if (chosen[k]) seeds.push_back(static_cast<std::uint32_t>(k));
  }
  return seeds;
}

std::vector<double> unary_potentials(const SupervoxelGraph& graph, std::span<const std::uint32_t> seeds,
                                     double phi_seed) {
  if (!(phi_seed > 0.0) || !std::isfinite(phi_seed)) throw ArgumentError("seed potential must be > 0");
  if (seeds.empty()) throw ConfigurationError("no pore seeds: the Hamiltonian would not be positive definite");
  std::vector<double> phi(graph.size(), 0.0);
  for (auto s : seeds) {
    if (s >= graph.size()) throw ArgumentError("seed id " + std::to_string(s) + " out of range");
    phi[s] = phi_seed;
  }
  return phi;
}

double default_phi_seed(const SupervoxelGraph& graph, double multiplier) {
  if (!(multiplier > 0.0)) throw ArgumentError("seed potential multiplier must be > 0");
  const double max_degree = *std::max_element(graph.degrees().begin(), graph.degrees().end());
  return multiplier * (max_degree > 0.0 ? max_degree : 1.0);
}

std::vector<double> weighted_degrees(const SupervoxelGraph& graph) { return graph.degrees(); }

void apply_hamiltonian(const SupervoxelGraph& graph, std::span<const double> z, std::span<double> out,
                       OperatorPath path) {
  graph.apply_weights(z, out, path);
  const auto& d = graph.degrees();
  const auto& phi = graph.potentials();
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (phi[i] + d[i]) * z[i] - out[i];
}

std::vector<double> apply_hamiltonian(const SupervoxelGraph& graph, std::span<const double> z,
                                      OperatorPath path) {
  std::vector<double> out(graph.size());
  apply_hamiltonian(graph, z, out, path);
  return out;
}

void apply_laplacian(const SupervoxelGraph& graph, std::span<const double> z, std::span<double> out,
                     OperatorPath path) {
  graph.apply_weights(z, out, path);
  const auto& d = graph.degrees();
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = d[i] * z[i] - out[i];
}

}  // namespace qcuts3d
