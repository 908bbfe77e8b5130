#pragma once

// Symmetric eigensolvers for the deformed Laplacians: a deterministic
// shift-invert Lanczos with full reorthogonalization and deflation restarts
// (finds the lowest eigenpairs of a sparse PSD matrix, multiplicities
// included), a dense fallback for cross-checks, and the small/large
// spectral-split selection (largest relative gap inside a t-dependent
// window, acceptance ratio >= 10).

#include <array>

#include <Eigen/SparseCholesky>

#include "torusflow/witten.hpp"

namespace torusflow {

struct eig_pairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns match values
};

namespace detail {

// deterministic pseudo-random-ish start vector, varies with restart count
inline Eigen::VectorXd lanczos_start(int n, int restart) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    double a = std::sin(0.7310 * (i + 1) + 1.37 * (restart + 1));
    double b = std::cos(1.9113 * (i + 1) * 0.001 + 0.41 * restart);
    v[i] = a + 0.5 * b + 0.25;
  }
  return v;
}

}  // namespace detail

// Lowest k eigenpairs of sparse symmetric PSD S by block inverse subspace
// iteration with (S + cI)^{-1} and Rayleigh–Ritz extraction.  The block
// carries a buffer beyond k, so clustered eigenvalues and multiplicities
// converge together; iteration is fully deterministic.
inline eig_pairs lowest_eigenpairs(const spmat& S, int k, double shift_c = 1e-6) {
  const int n = static_cast<int>(S.rows());
  if (k <= 0) throw config_error("eigenpair count must be positive");
  k = std::min(k, n);
  const int b = std::min(n, std::max(2 * k, k + 6));

  spmat A = S;
  for (int i = 0; i < n; ++i) A.coeffRef(i, i) += shift_c;
  Eigen::SimplicialLDLT<spmat> solver;
  solver.compute(A);
  if (solver.info() != Eigen::Success)
    throw compute_error("sparse factorization failed in eigensolver");

  Eigen::MatrixXd X(n, b);
  for (int c = 0; c < b; ++c) X.col(c) = detail::lanczos_start(n, c);
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    X = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
  }

  Eigen::VectorXd ritz(b), prev = Eigen::VectorXd::Constant(b, 1e300);
  Eigen::MatrixXd Y, SX;
  const int max_iter = 500;
  for (int iter = 0; iter < max_iter; ++iter) {
    Y = solver.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Y = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
    // Rayleigh–Ritz with S itself (eigenvalues measured directly)
    SX = S * Y;
    Eigen::MatrixXd T = Y.transpose() * SX;
    T = 0.5 * (T + T.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    ritz = es.eigenvalues();
    X = Y * es.eigenvectors();

    // convergence of the k requested pairs: direct residuals
    bool ok = true;
    double scale = std::max(std::fabs(ritz[b - 1]), 1.0);
    for (int i = 0; i < k && ok; ++i) {
      if (std::fabs(ritz[i] - prev[i]) > 1e-11 * scale + 1e-9 * std::fabs(ritz[i])) ok = false;
    }
    prev = ritz;
    if (!ok && iter + 1 < max_iter) continue;
    // Ritz-value movement settled: verify residuals before accepting
    Eigen::MatrixXd R = S * X.leftCols(k) - X.leftCols(k) * ritz.head(k).asDiagonal();
    bool resid_ok = true;
    for (int i = 0; i < k; ++i) {
      double tol = 1e-10 * scale + 1e-9 * std::fabs(ritz[i]);
      if (R.col(i).norm() > tol) {
        resid_ok = false;
        break;
      }
    }
    if (resid_ok) {
      eig_pairs out;
      out.values = ritz.head(k);
      out.vectors = X.leftCols(k);
      return out;
    }
    if (iter + 1 >= max_iter) break;
  }
  throw compute_error("subspace iteration failed to converge the requested eigenpairs");
}

// Dense cross-check engine (small grids only).
inline eig_pairs dense_spectrum(const spmat& S) {
  Eigen::MatrixXd D(S);
  D = 0.5 * (D + D.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  eig_pairs out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  return out;
}

struct degree_split {
  Eigen::VectorXd eigenvalues;  // computed lowest ones, ascending
  Eigen::MatrixXd vectors;      // matching columns
  int small_count = 0;
  double threshold = 0.0;
  double gap_ratio = 0.0;
  bool accepted = false;
};

// Numerical-zero resolution for Laplacian eigenvalues: Rayleigh quotients of
// kernel vectors land at ~eps_mach * ||S||; the operators here have norm
// <= ~5e4 at the grids/deformations in range, so 1e-11 upper-bounds that
// noise.  Eigenvalues below it are numerically zero, and gap ratios computed
// against the floor are finite lower bounds for the true separation.
inline constexpr double kEigZero = 1e-11;

// Select the small/large split among the computed lowest eigenvalues:
// the largest relative gap whose span intersects [1e-6·max(t,1), 10·max(t,1)];
// accepted when the ratio is >= 10.
inline degree_split select_split(const Eigen::VectorXd& evals, const Eigen::MatrixXd& evecs,
                                 double t) {
  degree_split d;
  d.eigenvalues = evals;
  d.vectors = evecs;
  const int m = static_cast<int>(evals.size());
  double scale = std::max(t, 1.0);
  double lo = 1e-6 * scale, hi = 10.0 * scale;
  double best = 0.0;
  int best_i = -1;
  for (int i = 0; i + 1 < m; ++i) {
    double a = std::max(evals[i], 0.0), b = evals[i + 1];
    if (b <= 0) continue;
    if (b < lo || a > hi) continue;  // gap does not intersect the window
    double ratio = b / std::max(a, kEigZero);
    if (ratio > best) {
      best = ratio;
      best_i = i;
    }
  }
  if (best_i >= 0) {
    d.small_count = best_i + 1;
    d.gap_ratio = best;
    d.threshold = std::sqrt(std::max(evals[best_i], kEigZero) * evals[best_i + 1]);
    d.accepted = best >= 10.0;
  } else {
    // no separating gap found: all computed eigenvalues are large
    d.small_count = 0;
    d.gap_ratio = (evals[0] > lo) ? evals[0] / lo : 0.0;
    d.threshold = lo;
    d.accepted = evals[0] > hi;  // clearly no small part
  }
  return d;
}

struct spectral_split {
  double t = 0.0;
  int N = 0;
  std::array<degree_split, 3> deg;
  bool accepted = false;
};

// Compute the split for all three degrees.  want[k] = how many eigenvalues
// to resolve per degree (at least the expected small count plus a margin).
inline spectral_split compute_split(const witten_model& m, double t,
                                    const std::array<int, 3>& want, bool use_dense = false) {
  spectral_split s;
  s.t = t;
  s.N = m.grid.N;
  for (int k = 0; k < 3; ++k) {
    spmat S = m.laplacian(k, t);
    eig_pairs ep;
    if (use_dense) {
      eig_pairs full = dense_spectrum(S);
      int cnt = std::min<int>(want[k], full.values.size());
      ep.values = full.values.head(cnt);
      ep.vectors = full.vectors.leftCols(cnt);
    } else {
      ep = lowest_eigenpairs(S, want[k]);
    }
    s.deg[k] = select_split(ep.values, ep.vectors, t);
  }
  s.accepted = s.deg[0].accepted && s.deg[1].accepted && s.deg[2].accepted;
  return s;
}

}  // namespace torusflow
