#include "qcuts3d/gft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qcuts3d/eigensolver.hpp"

namespace qcuts3d {

namespace {

std::size_t prefix_size(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("spectrum fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  // tolerate products like 0.29 * 100 landing a hair above an integer
  const double m = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, n);
}

}  // namespace

SpectrumBasis laplacian_spectrum(const SupervoxelGraph& graph, std::size_t m) {
  const std::size_t n = graph.size();
  if (m < 1 || m > n) {
    throw ArgumentError("basis size must lie in [1, " + std::to_string(n) + "], got " + std::to_string(m));
  }
  std::vector<double> lap(n * n, 0.0);
  const auto& deg = graph.degrees();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) lap[i * n + j] = i == j ? deg[i] : -graph.weight(i, j);
  }
  SymmetricEigen full = symmetric_eigen(std::move(lap), n);

  SpectrumBasis basis;
  basis.n = n;
  basis.eigenvalues.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(m));
  basis.vectors.assign(full.vectors.begin(), full.vectors.begin() + static_cast<std::ptrdiff_t>(m * n));

  const double radius = std::max({std::abs(full.values.front()), std::abs(full.values.back()), 1e-300});
  std::vector<double> lu(n);
  for (std::size_t k = 0; k < m; ++k) {
    const auto u = basis.vector(k);
    apply_laplacian(graph, u, lu);
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = lu[i] - basis.eigenvalues[k] * u[i];
      r2 += d * d;
    }
    basis.max_residual = std::max(basis.max_residual, std::sqrt(r2) / radius);
  }
  if (basis.max_residual > kSpectrumTolerance) {
    throw ConvergenceError("Laplacian eigenpairs did not reach the residual tolerance", basis.max_residual);
  }
  return basis;
}

std::vector<double> project_reconstruct(std::span<const double> signal, const SpectrumBasis& basis,
                                        std::size_t count) {
  if (signal.size() != basis.n) {
    throw ArgumentError("signal length " + std::to_string(signal.size()) + " does not match basis length " +
                        std::to_string(basis.n));
  }
  if (count == 0 || count > basis.size()) count = basis.size();
  std::vector<double> out(basis.n, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const auto u = basis.vector(k);
    double c = 0.0;
    for (std::size_t i = 0; i < basis.n; ++i) c += u[i] * signal[i];
    for (std::size_t i = 0; i < basis.n; ++i) out[i] += c * u[i];
  }
  return out;
}

std::vector<double> phase_fraction_signal(const LabelVolume& labels, int phase_code, const SupervoxelMap& map) {
  if (!(labels.dims() == map.dims())) {
    throw ArgumentError("labels " + to_string(labels.dims()) + " and supervoxels " + to_string(map.dims()) +
                        " differ in dims");
  }
  if (!labels.has_code(phase_code)) {
    throw ArgumentError("phase code " + std::to_string(phase_code) + " is not in the codebook");
  }
  std::vector<double> hits(map.count(), 0.0);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == phase_code) hits[map[v]] += 1.0;
  }
  for (std::size_t k = 0; k < hits.size(); ++k) hits[k] /= static_cast<double>(map.sizes()[k]);
  return hits;
}

std::vector<CurvePoint> reconstruction_curve(std::span<const double> signal, const SpectrumBasis& basis,
                                             std::span<const double> fractions) {
  const std::size_t n = basis.n;
  if (signal.size() != n) {
    throw ArgumentError("signal length " + std::to_string(signal.size()) + " does not match basis length " +
                        std::to_string(n));
  }
  std::vector<std::size_t> sizes;
  std::size_t needed = 0;
  for (double f : fractions) {
    sizes.push_back(prefix_size(f, n));
    needed = std::max(needed, sizes.back());
  }
  if (needed > basis.size()) {
    throw ArgumentError("basis holds " + std::to_string(basis.size()) + " vectors but " +
                        std::to_string(needed) + " are needed");
  }

  double energy = 0.0;
  for (double x : signal) energy += x * x;
  // captured[m] = sum of squared coefficients of the first m basis vectors
  std::vector<double> captured(needed + 1, 0.0);
  for (std::size_t k = 0; k < needed; ++k) {
    const auto u = basis.vector(k);
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += u[i] * signal[i];
    captured[k + 1] = captured[k] + c * c;
  }

  std::vector<CurvePoint> curve;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double mse = std::max(0.0, energy - captured[sizes[i]]) / static_cast<double>(n);
    curve.push_back({fractions[i], sizes[i], mse});
  }
  return curve;
}

std::vector<PhaseCurve> reconstruction_curves(const LabelVolume& labels, const Volume& volume,
                                              const SupervoxelMap& map, std::span<const double> fractions,
                                              double sigma, KernelVariant kernel) {
  if (!(volume.dims() == map.dims())) {
    throw ArgumentError("volume " + to_string(volume.dims()) + " and supervoxels " + to_string(map.dims()) +
                        " differ in dims");
  }
  const SupervoxelGraph graph = build_graph(supervoxel_means(volume, map), sigma, kernel);
  const std::size_t n = graph.size();
  std::size_t needed = 1;
  for (double f : fractions) needed = std::max(needed, prefix_size(f, n));
  const SpectrumBasis basis = laplacian_spectrum(graph, needed);

  std::vector<bool> present(256, false);
  for (auto v : labels.values()) present[v] = true;
  std::vector<PhaseCurve> curves;
  for (const auto& [code, name] : labels.codebook()) {
    if (code < 0 || code > 255 || !present[static_cast<std::size_t>(code)]) continue;
    const auto signal = phase_fraction_signal(labels, code, map);
    curves.push_back({code, name, reconstruction_curve(signal, basis, fractions)});
  }
  return curves;
}

std::vector<CurvePoint> reconstruction_curve(const LabelVolume& labels, int phase_code, const Volume& volume,
                                             const SupervoxelMap& map, std::span<const double> fractions,
                                             double sigma, KernelVariant kernel) {
  const SupervoxelGraph graph = build_graph(supervoxel_means(volume, map), sigma, kernel);
  const auto signal = phase_fraction_signal(labels, phase_code, map);
  std::size_t needed = 1;
  for (double f : fractions) needed = std::max(needed, prefix_size(f, graph.size()));
  return reconstruction_curve(signal, laplacian_spectrum(graph, needed), fractions);
}

std::string curves_csv(const std::vector<PhaseCurve>& curves) {
  std::string out = "fraction,basis_vectors";
  for (const auto& c : curves) out += ",mse_" + (c.name.empty() ? std::to_string(c.code) : c.name);
  out += '\n';
  if (curves.empty()) return out;
  char buf[64];
  for (std::size_t i = 0; i < curves.front().points.size(); ++i) {
    const auto& p = curves.front().points[i];
    std::snprintf(buf, sizeof buf, "%g,%zu", p.fraction, p.basis_vectors);
    out += buf;
    for (const auto& c : curves) {
      std::snprintf(buf, sizeof buf, ",%.10e", c.points[i].mse);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace qcuts3d
