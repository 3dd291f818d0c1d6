#pragma once

#include <span>
#include <vector>

#include "qcuts3d/eigensolver.hpp"
#include "qcuts3d/graph.hpp"

namespace qcuts3d {

/// Per-supervoxel solid likelihood in [0,1] plus solve diagnostics.
struct SaliencyVector {
  std::vector<double> values;
  double eigenvalue = 0.0;
  double residual = 0.0;
  std::size_t applications = 0;
};

/// y_i = z_i^2 / max_j z_j^2. Sign of z does not matter.
SaliencyVector saliency_from_eigenvector(std::span<const double> z);

/// The Hamiltonian H = D - W + V of a seeded graph as a matrix-free operator.
LinearOperator hamiltonian_operator(const SupervoxelGraph& graph, OperatorPath path = OperatorPath::fast);

/// Smallest eigenpair of the graph's Hamiltonian turned into saliency.
/// Throws ConfigurationError when the graph has no seeds.
SaliencyVector quantum_cut(const SupervoxelGraph& graph, const EigensolverOptions& options = {});

}  // namespace qcuts3d
