#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "qcuts3d/graph.hpp"
#include "qcuts3d/supervoxel.hpp"

namespace qcuts3d::testing {

// Dense H = D - W + diag(phi) built straight from the kernel definition.
inline Eigen::MatrixXd dense_hamiltonian(const SupervoxelGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  const auto& s = g.means();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  const double two_sigma2 = 2.0 * g.sigma() * g.sigma();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::abs(s[i] - s[j]);
      const double w = std::exp(-(g.kernel() == KernelVariant::absolute ? d : d * d) / two_sigma2);
      h(i, j) = -w;
      h(i, i) += w;
    }
    if (!g.potentials().empty()) h(i, i) += g.potentials()[static_cast<std::size_t>(i)];
  }
  return h;
}

inline std::vector<double> random_means(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(n);
  for (auto& v : s) v = u(rng);
  return s;
}

// Random graph with a random non-empty seed set and phi = phi_mult * max degree.
inline SupervoxelGraph random_seeded_graph(std::size_t n, std::mt19937_64& rng, double sigma = 0.1,
                                           double phi_mult = kDefaultPhiMultiplier) {
  SupervoxelGraph g = build_graph(random_means(n, rng), sigma);
  std::bernoulli_distribution coin(0.2);
  std::vector<std::uint32_t> seeds;
  for (std::size_t i = 0; i < n; ++i) {
    if (coin(rng)) seeds.push_back(static_cast<std::uint32_t>(i));
  }
  if (seeds.empty()) seeds.push_back(static_cast<std::uint32_t>(rng() % n));
  auto phi = unary_potentials(g, seeds, default_phi_seed(g, phi_mult));
  g.set_seeds(seeds, std::move(phi));
  return g;
}

// Redraws random_seeded_graph until cond(H) <= max_condition. Beyond roughly
// 1e7 a double-precision dense oracle cannot resolve the smallest eigenvalue
// to 1e-9 relative, so comparisons against it are meaningless there.
inline SupervoxelGraph conditioned_seeded_graph(std::size_t n, std::mt19937_64& rng, double max_condition = 1e6,
                                                std::size_t* redraws = nullptr) {
  for (;;) {
    SupervoxelGraph g = random_seeded_graph(n, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_hamiltonian(g), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(es.eigenvalues().size() - 1);
    if (lo > 0.0 && hi <= max_condition * lo) return g;
    if (redraws) ++*redraws;
  }
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Every supervoxel's voxels form one 6-connected component.
inline bool all_six_connected(const SupervoxelMap& map) {
  const Dims d = map.dims();
  std::vector<bool> seen(d.count(), false);
  std::vector<bool> label_done(map.count(), false);
  for (std::size_t start = 0; start < d.count(); ++start) {
    if (seen[start]) continue;
    const std::uint32_t id = map[start];
    if (label_done[id]) return false;  // second component of the same id
    label_done[id] = true;
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      const std::size_t x = v % d.nx, y = (v / d.nx) % d.ny, z = v / (d.nx * d.ny);
      const std::size_t nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                    {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
      for (const auto& n : nb) {
        if (n[0] >= d.nx || n[1] >= d.ny || n[2] >= d.nz) continue;
        const std::size_t u = d.index(n[0], n[1], n[2]);
        if (seen[u] || map[u] != id) continue;
        seen[u] = true;
        queue.push_back(u);
      }
    }
  }
  return true;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("qcuts3d_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace qcuts3d::testing
