#pragma once

// Shared test fixtures: synthetic datasets and the independent oracles the
// solver tests check against. Everything here is deliberately naive; the
// oracles must not share code with the implementation paths they verify.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "isqa/dataio.hpp"
#include "isqa/problems.hpp"
#include "isqa/subsolvers.hpp"

namespace testsupport {

using isqa::Index;
using isqa::Matrix;
using isqa::Vector;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vector random_vector(Index n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

// Sparse binary-classification toy: features uniform in [-1,1] at the given
// density, labels from a planted sparse weight vector plus noise. A positive
// column_decay spreads the column scales over that many orders of magnitude,
// which makes the curvature ill-conditioned and inner solves genuinely hard.
inline isqa::Dataset synthetic_classification(Index rows, Index cols, double density,
                                              std::uint64_t seed, double column_decay = 0.0,
                                              double value_scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-value_scale, value_scale);
  std::bernoulli_distribution keep(density);
  std::normal_distribution<double> noise(0.0, 0.1);

  Vector w = Vector::Zero(cols);
  for (Index j = 0; j < cols; j += 3) w[j] = unif(gen);
  Vector col_scale(cols);
  for (Index j = 0; j < cols; ++j)
    col_scale[j] = std::pow(10.0, -column_decay * j / std::max<Index>(1, cols - 1));

  isqa::Dataset ds;
  isqa::SparseMatrix& m = ds.features;
  m.n_rows = rows;
  m.n_cols = cols;
  for (Index i = 0; i < rows; ++i) {
    double margin = noise(gen);
    for (Index j = 0; j < cols; ++j) {
      if (!keep(gen)) continue;
      double v = unif(gen) * col_scale[j];
      if (v == 0.0) v = 0.5 * col_scale[j];
      m.col_indices.push_back(j);
      m.values.push_back(v);
      margin += v * w[j];
    }
    // guarantee at least one feature per row
    if (m.row_offsets.back() == m.nnz()) {
      m.col_indices.push_back(i % cols);
      m.values.push_back(1.0);
      margin += w[i % cols];
    }
    m.row_offsets.push_back(m.nnz());
    ds.labels.push_back(margin >= 0 ? 1.0 : -1.0);
  }
  return ds;
}

// Seeded symmetric matrix with eigenvalues in [lo, hi].
inline Matrix random_symmetric(Index n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Matrix raw(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) raw(i, j) = std::normal_distribution<double>()(gen);
  Eigen::HouseholderQR<Matrix> qr(raw);
  Matrix q = qr.householderQ();
  Vector eigs(n);
  std::uniform_real_distribution<double> unif(lo, hi);
  for (Index i = 0; i < n; ++i) eigs[i] = unif(gen);
  Matrix out = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

// Central finite differences.
inline Vector fd_gradient(const isqa::SmoothPart& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector e = x;
  for (Index i = 0; i < x.size(); ++i) {
    double step = h * std::max(1.0, std::abs(x[i]));
    e[i] = x[i] + step;
    double fp = f.value(e);
    e[i] = x[i] - step;
    double fm = f.value(e);
    e[i] = x[i];
    g[i] = (fp - fm) / (2 * step);
  }
  return g;
}

// Dense BFGS matrix built pair by pair from the base gamma0^{-1} I with the
// textbook rank-two update; rejected pairs must be filtered by the caller.
inline Matrix dense_bfgs(Index n, double gamma0,
                         const std::vector<std::pair<Vector, Vector>>& pairs) {
  Matrix b = Matrix::Identity(n, n) / gamma0;
  for (const auto& [s, y] : pairs) {
    Vector bs = b * s;
    b -= (bs * bs.transpose()) / s.dot(bs);
    b += (y * y.transpose()) / y.dot(s);
  }
  return 0.5 * (b + b.transpose());
}

// Exact minimum of Q(d) = g^T d + 0.5 d^T H d + w||x + d||_1 - w||x||_1 in
// two dimensions by enumerating the 9 sign/zero patterns of u = x + d.
inline double l1_qstar_enumeration(const Vector& x, const Vector& g, const Matrix& h,
                                   double w) {
  auto q_of_u = [&](const Vector& u) {
    Vector d = u - x;
    return g.dot(d) + 0.5 * d.dot(h * d) + w * (u.lpNorm<1>() - x.lpNorm<1>());
  };
  double best = q_of_u(x);  // d = 0
  const int signs[3] = {-1, 0, 1};
  for (int s0 : signs) {
    for (int s1 : signs) {
      // stationarity of the smooth part + w * sign on the free coordinates
      std::vector<Index> free;
      if (s0 != 0) free.push_back(0);
      if (s1 != 0) free.push_back(1);
      Vector u = Vector::Zero(2);
      if (!free.empty()) {
        Matrix hf(free.size(), free.size());
        Vector rhs(free.size());
        double sgn[2] = {double(s0), double(s1)};
        for (size_t a = 0; a < free.size(); ++a) {
          for (size_t b = 0; b < free.size(); ++b) hf(a, b) = h(free[a], free[b]);
          double coupling = 0.0;
          for (Index j = 0; j < 2; ++j)
            if ((j == 0 && s0 == 0) || (j == 1 && s1 == 0)) coupling += h(free[a], j) * (-x[j]);
          rhs[a] = -g[free[a]] - coupling - w * sgn[free[a]];
        }
        Vector uf = hf.ldlt().solve(rhs);
        for (size_t a = 0; a < free.size(); ++a) u[free[a]] = x[free[a]] + uf[a];
        if (s0 != 0 && u[0] * s0 < 0) continue;  // pattern infeasible
        if (s1 != 0 && u[1] * s1 < 0) continue;
      }
      best = std::min(best, q_of_u(u));
    }
  }
  return best;
}

// Golden-section minimization of a unimodal scalar function on [lo, hi],
// finished with one parabolic interpolation through well-separated samples
// (golden section alone resolves a flat quadratic minimum only to about
// sqrt(eps); the parabola recovers full precision for quadratic slices).
template <typename F>
double golden_section(F&& f, double lo, double hi, int iters = 120) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int i = 0; i < iters; ++i) {
    if (f(c) < f(d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  double t = 0.5 * (a + b);
  double h = 0.05 * (hi - lo);
  double t0 = std::clamp(t, lo + h, hi - h);
  double fm = f(t0 - h), f0 = f(t0), fp = f(t0 + h);
  double denom = fp - 2 * f0 + fm;
  if (denom > 0) {
    double vertex = t0 - 0.5 * h * (fp - fm) / denom;
    if (vertex >= lo && vertex <= hi && f(vertex) <= f0 + 1e-9 * (1 + std::abs(f0)))
      return vertex;
  }
  return t;
}

// Dense Gram matrix A^T A + (1/2C) I of the dual problem, built from
// scratch (A has columns b_i a_i).
inline Matrix dense_dual_hessian(const isqa::Dataset& ds, double C) {
  Index l = ds.n_examples();
  Matrix a_dense = Matrix::Zero(ds.n_features(), l);
  for (Index i = 0; i < l; ++i) {
    Vector row = Vector::Zero(ds.n_features());
    ds.features.add_scaled_row(i, ds.labels[i], row);
    a_dense.col(i) = row;
  }
  return a_dense.transpose() * a_dense + Matrix::Identity(l, l) / (2.0 * C);
}

}  // namespace testsupport
