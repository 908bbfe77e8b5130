#pragma once

// Deformed differential D_k(t) = d_k + t·W_k where W is the discrete
// wedge-with-ω operator, and its Laplacians.  Everything is expressed in
// mass-orthonormal coordinates: with diagonal Hodge masses M_k, the maps
//   B0(t) = M1^{1/2} D0(t) M0^{-1/2},  B1(t) = M2^{1/2} D1(t) M1^{-1/2}
// give exactly symmetric PSD Laplacians
//   S0 = B0ᵀB0,  S1 = B0B0ᵀ + B1ᵀB1,  S2 = B1B1ᵀ
// whose eigenvalues equal those of the mass-adjoint Laplacians Δ_k(t).
// Each S_k(t) = S_k(0) + t·A_k + t²·C_k exactly (polynomial in t with
// fixed coefficient matrices, assembled once).

#include "torusflow/dec.hpp"

namespace torusflow {

struct witten_model {
  dec_grid grid;
  // orthonormal-coordinate pieces: P = differential part, Q = wedge part
  spmat P0, Q0;  // (2N²)×(N²)
  spmat P1, Q1;  // (N²)×(2N²)

  spmat B0(double t) const { return P0 + t * Q0; }
  spmat B1(double t) const { return P1 + t * Q1; }

  spmat laplacian(int k, double t) const {
    spmat b0 = B0(t), b1 = B1(t);
    switch (k) {
      case 0:
        return spmat(b0.transpose()) * b0;
      case 1:
        return b0 * spmat(b0.transpose()) + spmat(b1.transpose()) * b1;
      case 2:
        return b1 * spmat(b1.transpose());
      default:
        throw config_error("degree must be 0, 1, or 2");
    }
  }

  int dim(int k) const {
    switch (k) {
      case 0:
      case 2:
        return grid.n_vert();
      case 1:
        return grid.n_edge();
      default:
        throw config_error("degree must be 0, 1, or 2");
    }
  }

  // polynomial coefficients S_k(t) = S_k(0) + t·A_k + t²·C_k
  void poly_coeffs(int k, spmat& S0, spmat& A, spmat& C) const {
    spmat p0t = P0.transpose(), q0t = Q0.transpose();
    spmat p1t = P1.transpose(), q1t = Q1.transpose();
    switch (k) {
      case 0:
        S0 = p0t * P0;
        A = p0t * Q0 + q0t * P0;
        C = q0t * Q0;
        return;
      case 1:
        S0 = P0 * p0t + p1t * P1;
        A = P0 * q0t + Q0 * p0t + p1t * Q1 + q1t * P1;
        C = Q0 * q0t + q1t * Q1;
        return;
      case 2:
        S0 = P1 * p1t;
        A = P1 * q1t + Q1 * p1t;
        C = Q1 * q1t;
        return;
      default:
        throw config_error("degree must be 0, 1, or 2");
    }
  }
};

// Assemble the model for a closed one-form on the N×N grid.
// W0 u (edge e) = ω_c(e) · (u(tail)+u(head))/2      (ω_c = midpoint edge sample)
// W1 w (face f) = (h/2)[ω₁(c)(w_{ey,left}+w_{ey,right}) − ω₂(c)(w_{ex,bottom}+w_{ex,top})]
// with c the face center; both are the midpoint-consistent discrete ω∧·.
inline witten_model build_witten(int N, const closed_one_form& omega) {
  witten_model m;
  m.grid = build_dec(N);
  const dec_grid& g = m.grid;
  const double h = g.h;

  std::vector<triplet> w0, w1;
  w0.reserve(4 * N * N);
  w1.reserve(4 * N * N);
  vec p(2);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      p << (i + 0.5) * h, j * h;
      double wx = omega.components(p)[0];  // ω₁ at ex midpoint
      w0.emplace_back(g.ex(i, j), g.vidx(i, j), 0.5 * h * wx);
      w0.emplace_back(g.ex(i, j), g.vidx(i + 1, j), 0.5 * h * wx);
      p << i * h, (j + 0.5) * h;
      double wy = omega.components(p)[1];  // ω₂ at ey midpoint
      w0.emplace_back(g.ey(i, j), g.vidx(i, j), 0.5 * h * wy);
      w0.emplace_back(g.ey(i, j), g.vidx(i, j + 1), 0.5 * h * wy);

      p << (i + 0.5) * h, (j + 0.5) * h;
      vec wc = omega.components(p);  // at face center
      w1.emplace_back(g.fidx(i, j), g.ey(i, j), 0.5 * h * wc[0]);
      w1.emplace_back(g.fidx(i, j), g.ey(i + 1, j), 0.5 * h * wc[0]);
      w1.emplace_back(g.fidx(i, j), g.ex(i, j), -0.5 * h * wc[1]);
      w1.emplace_back(g.fidx(i, j), g.ex(i, j + 1), -0.5 * h * wc[1]);
    }
  spmat W0(g.n_edge(), g.n_vert()), W1(g.n_face(), g.n_edge());
  W0.setFromTriplets(w0.begin(), w0.end());
  W1.setFromTriplets(w1.begin(), w1.end());

  // orthonormal coordinates: B0 = (1/h)(d0 + tW0), B1 = (1/h)(d1 + tW1)
  m.P0 = (1.0 / h) * g.d0;
  m.Q0 = (1.0 / h) * W0;
  m.P1 = (1.0 / h) * g.d1;
  m.Q1 = (1.0 / h) * W1;
  return m;
}

}  // namespace torusflow
