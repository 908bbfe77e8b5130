#pragma once

// Rest points of X: Newton search from a uniform seed grid, deduplication
// modulo Z^n, and hyperbolic classification (Morse index = number of
// eigenvalues with positive real part, counted with multiplicity).  The
// unstable frame is an orthonormal, deterministically ordered and signed
// basis of the invariant subspace for {Re λ > 0}.

#include <algorithm>

#include "torusflow/system.hpp"

namespace torusflow {

inline constexpr double kHyperbolicTol = 1e-7;
inline constexpr double kNewtonTol = 1e-12;
inline constexpr double kDedupRadius = 1e-6;

struct rest_point {
  vec position;                  // in [0,1)^n
  mat jacobian;                  // D_x(X)
  Eigen::VectorXcd eigenvalues;  // sorted: Re desc, then Im desc
  int morse_index = 0;
  bool hyperbolic = false;
  mat unstable_frame;            // n × morse_index, orthonormal
  double frame_residual = 0.0;   // ‖(I−ΠΠᵀ)JΠ‖
  int orientation = +1;          // o_x: sign attached to the frame order
};

namespace detail {

inline void sort_eigs(Eigen::VectorXcd& ev) {
  std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  for (int i = 0; i < ev.size(); ++i) ev[i] = v[i];
}

// Deterministic sign/phase normalization of an eigenvector column.
inline void canonicalize_real(Eigen::VectorXd& v) {
  int imax = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::fabs(v[i]) > std::fabs(v[imax])) imax = i;
  if (v[imax] < 0) v = -v;
}

}  // namespace detail

// Classify a converged root at wrapped position p.
inline rest_point classify_rest_point(const field_system& sys, const vec& p) {
  rest_point r;
  r.position = wrap_point(p);
  r.jacobian = sys.jacobian_at(r.position);
  Eigen::EigenSolver<mat> es(r.jacobian);
  if (es.info() != Eigen::Success) throw compute_error("eigensolve failed at rest point");
  r.eigenvalues = es.eigenvalues();
  detail::sort_eigs(r.eigenvalues);

  double min_re = 1e300;
  int idx = 0;
  for (int i = 0; i < r.eigenvalues.size(); ++i) {
    min_re = std::min(min_re, std::fabs(r.eigenvalues[i].real()));
    if (r.eigenvalues[i].real() > 0) ++idx;
  }
  r.morse_index = idx;
  r.hyperbolic = min_re > kHyperbolicTol;

  // unstable frame: eigenvector route (complex pairs contribute Re v, Im v),
  // deterministically ordered by (Re λ desc, Im λ desc) and sign-normalized.
  std::vector<std::pair<std::complex<double>, Eigen::VectorXcd>> uns;
  for (int i = 0; i < r.eigenvalues.size(); ++i) {
    std::complex<double> lam = es.eigenvalues()[i];
    if (lam.real() > 0 && lam.imag() >= 0) uns.emplace_back(lam, es.eigenvectors().col(i));
  }
  std::sort(uns.begin(), uns.end(), [](const auto& a, const auto& b) {
    if (a.first.real() != b.first.real()) return a.first.real() > b.first.real();
    return a.first.imag() > b.first.imag();
  });
  std::vector<Eigen::VectorXd> cols;
  for (auto& [lam, v] : uns) {
    if (lam.imag() > 0) {
      // rotate phase so the largest-magnitude entry is real positive
      int imax = 0;
      for (int i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
      std::complex<double> ph = v[imax] / std::abs(v[imax]);
      Eigen::VectorXcd w = v / ph;
      cols.push_back(w.real());
      cols.push_back(w.imag());
    } else {
      Eigen::VectorXd w = v.real();
      detail::canonicalize_real(w);
      cols.push_back(w);
    }
  }
  if (!cols.empty()) {
    mat A(sys.n, static_cast<int>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) A.col(c) = cols[c];
    Eigen::HouseholderQR<mat> qr(A);
    mat Q = qr.householderQ() * mat::Identity(sys.n, A.cols());
    mat R = qr.matrixQR().topRows(A.cols()).triangularView<Eigen::Upper>();
    for (int c = 0; c < Q.cols(); ++c)
      if (R(c, c) < 0) Q.col(c) = -Q.col(c);
    r.unstable_frame = Q;
    mat JP = r.jacobian * Q;
    r.frame_residual = (JP - Q * (Q.transpose() * JP)).norm();
  } else {
    r.unstable_frame = mat(sys.n, 0);
    r.frame_residual = 0.0;
  }
  if (static_cast<int>(cols.size()) != r.morse_index && r.hyperbolic)
    throw compute_error("unstable eigenvector count does not match Morse index (defective case)");
  if (r.hyperbolic && r.frame_residual > 1e-8)
    throw compute_error("unstable frame is not invariant to tolerance (defective Jacobian?)");
  return r;
}

// Newton iteration with damping; returns true when converged to a root.
inline bool newton_root(const field_system& sys, vec& p, int max_iter = 200) {
  vec x = p;
  for (int it = 0; it < max_iter; ++it) {
    vec f = sys.X_at(wrap_point(x));
    double fn = f.norm();
    mat J = sys.jacobian_at(wrap_point(x));
    Eigen::FullPivLU<mat> lu(J);
    if (!lu.isInvertible()) {
      // singular Jacobian: stop here; caller decides whether x is a root
      p = wrap_point(x);
      return fn <= kNewtonTol;
    }
    vec step = lu.solve(f);
    double sn = step.norm();
    if (sn > 0.25) step *= 0.25 / sn;  // damp far-field jumps
    x -= step;
    if (fn <= 1e-14 && sn <= 1e-13) break;
  }
  p = wrap_point(x);
  return sys.X_at(p).norm() <= kNewtonTol;
}

// All rest points from a uniform seed grid, deduplicated, classified,
// sorted by Morse index then position.
inline std::vector<rest_point> find_rest_points(const field_system& sys, int seed_grid = 32) {
  if (seed_grid < 2) throw config_error("seed grid must be at least 2");
  std::vector<vec> roots;
  int total = 1;
  for (int i = 0; i < sys.n; ++i) total *= seed_grid;
  for (int idx = 0; idx < total; ++idx) {
    vec p(sys.n);
    int rem = idx;
    for (int i = 0; i < sys.n; ++i) {
      p[i] = double(rem % seed_grid) / seed_grid;
      rem /= seed_grid;
    }
    if (!newton_root(sys, p)) continue;
    bool dup = false;
    for (const vec& q : roots)
      if (torus_dist(p, q) < kDedupRadius) {
        dup = true;
        break;
      }
    if (!dup) roots.push_back(p);
  }
  std::vector<rest_point> out;
  out.reserve(roots.size());
  for (const vec& p : roots) out.push_back(classify_rest_point(sys, p));
  std::sort(out.begin(), out.end(), [](const rest_point& a, const rest_point& b) {
    if (a.morse_index != b.morse_index) return a.morse_index < b.morse_index;
    for (int i = 0; i < a.position.size(); ++i)
      if (a.position[i] != b.position[i]) return a.position[i] < b.position[i];
    return false;
  });
  return out;
}

}  // namespace torusflow
