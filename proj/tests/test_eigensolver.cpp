#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qcuts3d/eigensolver.hpp"
#include "qcuts3d/qcuts.hpp"
#include "support.hpp"

using namespace qcuts3d;
using qcuts3d::testing::dense_hamiltonian;
using qcuts3d::testing::random_seeded_graph;

namespace {

LinearOperator matrix_operator(const Eigen::MatrixXd& m) {
  return [m](std::span<const double> in, std::span<double> out) {
    Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = m * x;
  };
}

double abs_cosine(std::span<const double> a, const Eigen::VectorXd& b) {
  Eigen::Map<const Eigen::VectorXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  return std::abs(x.dot(b)) / (x.norm() * b.norm());
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return out;
}

}  // namespace

TEST(DenseEigen, MatchesOracleOnRandomSymmetric) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int n : {1, 2, 3, 10, 40}) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
    const SymmetricEigen mine = symmetric_eigen(row_major(a), static_cast<std::size_t>(n));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    for (int k = 0; k < n; ++k) {
      EXPECT_NEAR(mine.values[k], ref.eigenvalues()(k), 1e-12 * std::max(1.0, ref.eigenvalues().cwiseAbs().maxCoeff()));
      // residual of each returned pair
      Eigen::Map<const Eigen::VectorXd> v(mine.vector(k).data(), n);
      EXPECT_LE((a * v - mine.values[k] * v).norm(), 1e-11 * std::max(1.0, a.norm()));
      EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    }
  }
}

TEST(DenseEigen, TridiagonalKnownSpectrum) {
  // path-graph Laplacian-like tridiagonal 2, -1: eigenvalues 2 - 2 cos(k pi / (n + 1))
  const std::size_t n = 12;
  const auto r = tridiagonal_eigen(std::vector<double>(n, 2.0), std::vector<double>(n - 1, -1.0));
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_NEAR(r.values[k], 2.0 - 2.0 * std::cos((k + 1) * M_PI / (n + 1)), 1e-13);
  }
}

TEST(SmallestEigenpair, IdentityOperator) {
  const auto pair = smallest_eigenpair([](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  }, 3);
  EXPECT_NEAR(pair.value, 1.0, 1e-14);
  double norm = 0.0;
  for (double v : pair.vector) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-14);
}

TEST(SmallestEigenpair, TwoByTwoClosedForm) {
  const double alpha = 3.0;
  Eigen::MatrixXd h(2, 2);
  h << alpha + 1, -1, -1, 1;
  const auto pair = smallest_eigenpair(matrix_operator(h), 2);
  const double lambda = (5.0 - std::sqrt(13.0)) / 2.0;
  EXPECT_NEAR(pair.value, lambda, 1e-14);
  Eigen::VectorXd expected(2);
  expected << 1.0, 1.0 / (1.0 - lambda);
  EXPECT_GE(abs_cosine(pair.vector, expected), 1.0 - 1e-12);
}

TEST(SmallestEigenpair, MatchesDenseOracleOnSeededGraphs) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::size_t> size(2, 64);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = qcuts3d::testing::conditioned_seeded_graph(size(rng), rng);
    const Eigen::MatrixXd h = dense_hamiltonian(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(h);
    const auto pair = smallest_eigenpair(hamiltonian_operator(g), g.size());
    const double lambda = ref.eigenvalues()(0);
    EXPECT_LE(std::abs(pair.value - lambda), 1e-9 * lambda) << "trial " << trial;
    EXPECT_GE(abs_cosine(pair.vector, ref.eigenvectors().col(0)), 1.0 - 1e-8) << "trial " << trial;
    EXPECT_LE(pair.residual, 1e-8);
  }
}

TEST(SmallestEigenpair, LargeOperatorResidual) {
  std::mt19937_64 rng(23);
  const auto g = random_seeded_graph(3000, rng);
  const auto pair = smallest_eigenpair(hamiltonian_operator(g), g.size());
  const auto hz = apply_hamiltonian(g, pair.vector);
  double r = 0.0;
  for (std::size_t i = 0; i < hz.size(); ++i) r += std::pow(hz[i] - pair.value * pair.vector[i], 2);
  EXPECT_LE(std::sqrt(r), 1e-8 * pair.value);
}

TEST(SmallestEigenpair, Deterministic) {
  std::mt19937_64 rng(24);
  const auto g = random_seeded_graph(500, rng);
  const auto a = smallest_eigenpair(hamiltonian_operator(g), g.size());
  const auto b = smallest_eigenpair(hamiltonian_operator(g), g.size());
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.vector, b.vector);
}

TEST(SmallestEigenpair, Errors) {
  const LinearOperator id = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  EXPECT_THROW(smallest_eigenpair(id, 0), ArgumentError);
  std::mt19937_64 rng(25);
  const auto g = random_seeded_graph(400, rng);
  EigensolverOptions tight;
  tight.max_applications = 3;
  try {
    smallest_eigenpair(hamiltonian_operator(g), g.size(), tight);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_residual(), 0.0);
  }
}

TEST(Saliency, Examples) {
  EXPECT_EQ(saliency_from_eigenvector(std::vector<double>{1, 0, 0}).values, (std::vector<double>{1, 0, 0}));
  const auto y = saliency_from_eigenvector(std::vector<double>{0.6, 0.8}).values;
  EXPECT_NEAR(y[0], 0.5625, 1e-15);
  EXPECT_EQ(y[1], 1.0);
  EXPECT_EQ(saliency_from_eigenvector(std::vector<double>{-0.6, 0.8}).values,
            saliency_from_eigenvector(std::vector<double>{0.6, -0.8}).values);
  EXPECT_THROW(saliency_from_eigenvector(std::vector<double>{0, 0}), ArgumentError);
}

TEST(QuantumCut, SeparatesTwoClusters) {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> jitter(-0.03, 0.03);
  std::vector<double> s;
  std::vector<std::uint32_t> seeds;
  for (int i = 0; i < 10; ++i) s.push_back(0.1 + jitter(rng));
  for (int i = 0; i < 10; ++i) s.push_back(0.9 + jitter(rng));
  auto g = build_graph(s, 0.1);
  for (std::uint32_t i = 0; i < 10; i += 3) seeds.push_back(i);
  g.set_seeds(seeds, unary_potentials(g, seeds, default_phi_seed(g)));
  const auto sal = quantum_cut(g);
  const double dark_max = *std::max_element(sal.values.begin(), sal.values.begin() + 10);
  const double bright_min = *std::min_element(sal.values.begin() + 10, sal.values.end());
  EXPECT_GT(bright_min, dark_max);
  // same ordering from the dense oracle
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(dense_hamiltonian(g));
  const Eigen::VectorXd z = ref.eigenvectors().col(0);
  const auto oracle = saliency_from_eigenvector(qcuts3d::testing::to_std(z)).values;
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(sal.values[i], oracle[i], 1e-6);
}

TEST(QuantumCut, AllSeededEqualIntensityIsUniform) {
  auto g = build_graph(std::vector<double>(8, 0.4), 0.1);
  std::vector<std::uint32_t> all(8);
  std::iota(all.begin(), all.end(), 0u);
  g.set_seeds(all, unary_potentials(g, all, 5.0));
  for (double v : quantum_cut(g).values) EXPECT_NEAR(v, 1.0, 1e-10);
}

TEST(QuantumCut, SeedsLessSalientThanNonSeeds) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_seeded_graph(50, rng);
    const auto sal = quantum_cut(g).values;
    double seed_sum = 0.0, other_sum = 0.0;
    std::size_t seed_n = 0;
    std::vector<bool> is_seed(50, false);
    for (auto s : g.seeds()) is_seed[s] = true;
    for (std::size_t i = 0; i < 50; ++i) {
      if (is_seed[i]) {
        seed_sum += sal[i];
        ++seed_n;
      } else {
        other_sum += sal[i];
      }
    }
    if (seed_n == 50) continue;
    EXPECT_LE(seed_sum / seed_n, other_sum / (50 - seed_n));
  }
}

TEST(QuantumCut, RayleighMinimalAgainstPerturbations) {
  std::mt19937_64 rng(28);
  const auto g = random_seeded_graph(60, rng);
  const auto pair = smallest_eigenpair(hamiltonian_operator(g), g.size());
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> z = pair.vector;
    for (double& v : z) v += noise(rng) * (rng() % 2 ? 1.0 : -1.0);
    const auto hz = apply_hamiltonian(g, z);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      num += z[i] * hz[i];
      den += z[i] * z[i];
    }
    EXPECT_LE(pair.value, num / den * (1.0 + 1e-12));
  }
}

TEST(QuantumCut, LargerSeedPotentialDoesNotRaiseSeedSaliency) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_seeded_graph(30, rng);
    const auto seeds = g.seeds();
    double previous = 2.0;
    for (double mult : {1.0, 10.0, 100.0}) {
      g.set_seeds(seeds, unary_potentials(g, seeds, default_phi_seed(g, mult)));
      const auto sal = quantum_cut(g).values;
      double seed_max = 0.0;
      for (auto s : seeds) seed_max = std::max(seed_max, sal[s]);
      EXPECT_LE(seed_max, previous + 1e-9);
      previous = seed_max;
    }
  }
}

TEST(QuantumCut, NoSeedsIsConfigurationError) {
  const auto g = build_graph({0.1, 0.9}, 0.1);
  EXPECT_THROW(quantum_cut(g), ConfigurationError);
}
