#include "qcuts3d/qcuts.hpp"

#include <algorithm>
#include <cmath>

namespace qcuts3d {

SaliencyVector saliency_from_eigenvector(std::span<const double> z) {
  double peak = 0.0;
  for (double v : z) peak = std::max(peak, v * v);
  if (!(peak > 0.0)) throw ArgumentError("saliency of a zero eigenvector is undefined");
  SaliencyVector out;
  out.values.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out.values[i] = z[i] * z[i] / peak;
  return out;
}

LinearOperator hamiltonian_operator(const SupervoxelGraph& graph, OperatorPath path) {
  return [&graph, path](std::span<const double> in, std::span<double> out) {
    apply_hamiltonian(graph, in, out, path);
  };
}

SaliencyVector quantum_cut(const SupervoxelGraph& graph, const EigensolverOptions& options) {
  if (!graph.has_seeds()) throw ConfigurationError("quantum cut needs at least one pore seed");
  const Eigenpair pair = smallest_eigenpair(hamiltonian_operator(graph), graph.size(), options);
  SaliencyVector out = saliency_from_eigenvector(pair.vector);
  out.eigenvalue = pair.value;
  out.residual = pair.residual;
  out.applications = pair.applications;
  return out;
}

}  // namespace qcuts3d
