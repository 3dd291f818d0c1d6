#include "qcuts3d/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qcuts3d/error.hpp"

namespace qcuts3d {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Eigenvectors are kept as rows of z (z[k * n + i]) so every rotation below
// touches contiguous memory.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z, std::size_t n) {
  if (n == 0) return;
  // e[i] couples i and i+1; e[n-1] is scratch
  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 200) throw ConvergenceError("tridiagonal QL did not converge", std::abs(e[l]));
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = m; i-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          double* zi = z.data() + i * n;
          double* zi1 = z.data() + (i + 1) * n;
          for (std::size_t k = 0; k < n; ++k) {
            const double t = zi1[k];
            zi1[k] = s * zi[k] + c * t;
            zi[k] = c * zi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

SymmetricEigen sorted(std::vector<double> d, std::vector<double> z, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  SymmetricEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    std::copy_n(z.begin() + static_cast<std::ptrdiff_t>(order[k] * n), n,
                out.vectors.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

SymmetricEigen tridiagonal_eigen(std::vector<double> diag, std::vector<double> off) {
  const std::size_t n = diag.size();
  if (n == 0) return {};
  if (off.size() + 1 != n && off.size() != n) throw ArgumentError("off-diagonal length must be n - 1");
  off.resize(n, 0.0);
  off[n - 1] = 0.0;
  std::vector<double> z(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  ql_implicit(diag, off, z, n);
  return sorted(std::move(diag), std::move(z), n);
}

SymmetricEigen symmetric_eigen(std::vector<double> matrix, std::size_t n) {
  if (matrix.size() != n * n) throw ArgumentError("matrix size does not match n * n");
  if (n == 0) return {};
  // Householder reduction. The matrix is symmetric, so the reduction runs on
  // the transposed layout: V(r, c) lives at w[c * n + r] and columns of V are
  // contiguous. On exit row k of w is column k of the orthogonal factor.
  std::vector<double>& w = matrix;
  auto V = [&](std::size_t r, std::size_t c) -> double& { return w[c * n + r]; };
  std::vector<double> d(n), e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        double* col = &V(0, j);
        for (std::size_t k = j + 1; k < i; ++k) {
          g += col[k] * d[k];
          e[k] += col[k] * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        double* col = &V(0, j);
        for (std::size_t k = j; k < i; ++k) col[k] -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  // accumulate transformations
  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    double* next = &V(0, i + 1);
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = next[k] / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double* col = &V(0, j);
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += next[k] * col[k];
        for (std::size_t k = 0; k <= i; ++k) col[k] -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) next[k] = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;

  // e[i] couples i-1 and i here; shift so it couples i and i+1
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  ql_implicit(d, e, w, n);
  return sorted(std::move(d), std::move(w), n);
}

Eigenpair smallest_eigenpair(const LinearOperator& op, std::size_t n, const EigensolverOptions& options) {
  if (n == 0) throw ArgumentError("eigenproblem dimension must be >= 1");
  if (!(options.tolerance > 0.0)) throw ArgumentError("eigensolver tolerance must be > 0");
  const std::size_t max_apps = options.max_applications > 0 ? options.max_applications : 10 * n;
  const std::size_t basis_max =
      std::clamp<std::size_t>(options.basis_size > 0 ? options.basis_size : 64, 1, n);
  const std::size_t keep = std::max<std::size_t>(1, basis_max / 3);

  std::vector<std::vector<double>> basis;   // orthonormal search space
  std::vector<std::vector<double>> images;  // A applied to each basis vector
  std::vector<double> projected;            // basis^T A basis, basis_max x basis_max
  projected.assign(basis_max * basis_max, 0.0);
  auto P = [&](std::size_t i, std::size_t j) -> double& { return projected[i * basis_max + j]; };

  std::size_t applications = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  double norm_estimate = 0.0;
  std::mt19937_64 fresh_rng(0x5eed5eedULL);

  // Two passes of classical Gram-Schmidt; returns the norm left over.
  auto orthogonalize = [&](std::vector<double>& v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        const double c = dot(b, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * b[i];
      }
    }
    return norm(v);
  };

  // Next direction once the current space is invariant: a deterministic
  // pseudo-random vector orthogonal to everything so far.
  auto fresh_direction = [&](std::vector<double>& v) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int attempt = 0; attempt < 4; ++attempt) {
      v.assign(n, 0.0);
      for (auto& x : v) x = unit(fresh_rng);
      const double before = norm(v);
      const double after = orthogonalize(v);
      if (after > 1e-8 * before) {
        for (auto& x : v) x /= after;
        return true;
      }
    }
    return false;
  };

  std::vector<double> pending(n, 1.0 / std::sqrt(static_cast<double>(n)));
  bool have_pending = true;
  std::vector<double> ritz(n), ritz_image(n), residual(n);

  for (;;) {
    if (!have_pending) break;
    if (applications >= max_apps) {
      throw ConvergenceError("eigensolver did not converge within " + std::to_string(max_apps) +
                                 " operator applications",
                             best_residual);
    }
    // grow the search space by one vector
    const std::size_t k = basis.size();
    basis.push_back(pending);
    images.emplace_back(n);
    op(basis[k], images[k]);
    ++applications;
    for (std::size_t j = 0; j <= k; ++j) {
      const double v = dot(basis[j], images[k]);
      P(j, k) = v;
      P(k, j) = v;
    }
    const std::size_t m = basis.size();

    // Rayleigh-Ritz on the current space
    std::vector<double> small(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) small[i * m + j] = 0.5 * (P(i, j) + P(j, i));
    const SymmetricEigen ritz_pairs = symmetric_eigen(std::move(small), m);
    norm_estimate = std::max({norm_estimate, std::abs(ritz_pairs.values.front()),
                              std::abs(ritz_pairs.values.back())});
    const double theta = ritz_pairs.values.front();
    const auto coeff = ritz_pairs.vector(0);
    std::fill(ritz.begin(), ritz.end(), 0.0);
    std::fill(ritz_image.begin(), ritz_image.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double c = coeff[j];
      const auto& b = basis[j];
      const auto& ab = images[j];
      for (std::size_t i = 0; i < n; ++i) {
        ritz[i] += c * b[i];
        ritz_image[i] += c * ab[i];
      }
    }
    const double ritz_norm = norm(ritz);
    for (std::size_t i = 0; i < n; ++i) residual[i] = ritz_image[i] - theta * ritz[i];
    const double res = norm(residual) / ritz_norm;
    const double relative = res / std::max(std::abs(theta), std::numeric_limits<double>::min());
    best_residual = std::min(best_residual, relative);
    const double floor = 10.0 * std::sqrt(static_cast<double>(n)) * kEps * norm_estimate;
    const bool full_space = m == n;
    if (relative <= options.tolerance || res <= floor || full_space) {
      Eigenpair out;
      out.value = theta;
      out.vector = ritz;
      for (auto& x : out.vector) x /= ritz_norm;
      out.residual = relative;
      out.applications = applications;
      out.at_precision_floor = relative > options.tolerance;
      return out;
    }

    // next Krylov direction: A v_k orthogonalised against the space
    std::vector<double> next = images[k];
    const double image_norm = norm(next);
    const double left = orthogonalize(next);
    if (left > 1e-10 * image_norm && left > 0.0) {
      for (auto& x : next) x /= left;
      have_pending = true;
    } else {
      have_pending = fresh_direction(next);
    }
    pending = std::move(next);

    if (m == basis_max && have_pending) {
      // thick restart: keep the `keep` smallest Ritz vectors
      const std::size_t kept = std::min(keep, m);
      std::vector<std::vector<double>> new_basis(kept, std::vector<double>(n, 0.0));
      std::vector<std::vector<double>> new_images(kept, std::vector<double>(n, 0.0));
      for (std::size_t r = 0; r < kept; ++r) {
        const auto c = ritz_pairs.vector(r);
        for (std::size_t j = 0; j < m; ++j) {
          const double cj = c[j];
          for (std::size_t i = 0; i < n; ++i) {
            new_basis[r][i] += cj * basis[j][i];
            new_images[r][i] += cj * images[j][i];
          }
        }
      }
      basis = std::move(new_basis);
      images = std::move(new_images);
      std::fill(projected.begin(), projected.end(), 0.0);
      for (std::size_t i = 0; i < kept; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const double v = dot(basis[i], images[j]);
          P(i, j) = v;
          P(j, i) = v;
        }
      // the pending direction stays orthogonal to the kept span
      orthogonalize(pending);
      const double pn = norm(pending);
      for (auto& x : pending) x /= pn;
    }
  }
  throw ConvergenceError("eigensolver exhausted the search space without converging", best_residual);
}

}  // namespace qcuts3d
