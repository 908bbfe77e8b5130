#pragma once

// Discrete de Rham model of T^2 on a periodic N×N grid with spacing
// h = 1/N.  Cochains: C0 = vertices (N^2), C1 = edges (2N^2: all x-edges
// first, then y-edges), C2 = faces (N^2).  d0, d1 are the signed incidence
// operators (d1·d0 = 0 exactly).  Hodge inner products are diagonal with
// the continuum normalization
//    M0 = h^2·I,  M1 = I,  M2 = h^{-2}·I,
// under the identification (0-form: vertex value, 1-form: edge integral,
// 2-form: face integral), so Laplacian eigenvalues approximate continuum
// ones.  Cochains are mapped to piecewise forms by the lowest-order
// interpolation (bilinear / edge elements / piecewise constant).

#include <Eigen/Sparse>

#include "torusflow/torus.hpp"

namespace torusflow {

using spmat = Eigen::SparseMatrix<double>;
using triplet = Eigen::Triplet<double>;

struct dec_grid {
  int N = 0;
  double h = 0.0;
  spmat d0;  // (2N^2) × (N^2)
  spmat d1;  // (N^2) × (2N^2)

  int n_vert() const { return N * N; }
  int n_edge() const { return 2 * N * N; }
  int n_face() const { return N * N; }

  int vidx(int i, int j) const { return mod(i) + N * mod(j); }
  int ex(int i, int j) const { return mod(i) + N * mod(j); }            // v(i,j) -> v(i+1,j)
  int ey(int i, int j) const { return N * N + mod(i) + N * mod(j); }    // v(i,j) -> v(i,j+1)
  int fidx(int i, int j) const { return mod(i) + N * mod(j); }

  int mod(int k) const {
    int r = k % N;
    return r < 0 ? r + N : r;
  }

  vec vertex_pos(int i, int j) const {
    vec p(2);
    p << mod(i) * h, mod(j) * h;
    return p;
  }
};

inline dec_grid build_dec(int N) {
  if (N < 8) throw config_error("grid size must be at least 8");
  dec_grid g;
  g.N = N;
  g.h = 1.0 / N;
  std::vector<triplet> t0, t1;
  t0.reserve(4 * N * N);
  t1.reserve(4 * N * N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      t0.emplace_back(g.ex(i, j), g.vidx(i + 1, j), 1.0);
      t0.emplace_back(g.ex(i, j), g.vidx(i, j), -1.0);
      t0.emplace_back(g.ey(i, j), g.vidx(i, j + 1), 1.0);
      t0.emplace_back(g.ey(i, j), g.vidx(i, j), -1.0);
      // face boundary, counterclockwise: ex(i,j), ey(i+1,j), -ex(i,j+1), -ey(i,j)
      t1.emplace_back(g.fidx(i, j), g.ex(i, j), 1.0);
      t1.emplace_back(g.fidx(i, j), g.ey(i + 1, j), 1.0);
      t1.emplace_back(g.fidx(i, j), g.ex(i, j + 1), -1.0);
      t1.emplace_back(g.fidx(i, j), g.ey(i, j), -1.0);
    }
  g.d0.resize(2 * N * N, N * N);
  g.d0.setFromTriplets(t0.begin(), t0.end());
  g.d1.resize(N * N, 2 * N * N);
  g.d1.setFromTriplets(t1.begin(), t1.end());

  spmat z = g.d1 * g.d0;
  z.prune(0.0);
  if (z.nonZeros() != 0) throw compute_error("incidence assembly broken: d1*d0 != 0");
  return g;
}

// Sample a smooth one-form into edge cochains by the midpoint rule:
// cochain(e) = h · (component at edge midpoint).
inline Eigen::VectorXd sample_one_form(const dec_grid& g, const closed_one_form& w) {
  Eigen::VectorXd c(g.n_edge());
  vec p(2);
  for (int j = 0; j < g.N; ++j)
    for (int i = 0; i < g.N; ++i) {
      p << (i + 0.5) * g.h, j * g.h;
      c[g.ex(i, j)] = g.h * w.components(p)[0];
      p << i * g.h, (j + 0.5) * g.h;
      c[g.ey(i, j)] = g.h * w.components(p)[1];
    }
  return c;
}

// Sample a 0-form (vertex values) and a 2-form density (face integrals).
inline Eigen::VectorXd sample_zero_form(const dec_grid& g, const expr_ptr& f) {
  Eigen::VectorXd c(g.n_vert());
  vec p(2);
  for (int j = 0; j < g.N; ++j)
    for (int i = 0; i < g.N; ++i) {
      p << i * g.h, j * g.h;
      c[g.vidx(i, j)] = eval_value(f, p);
    }
  return c;
}

// Whitney-type interpolation of cochains at an arbitrary point (wrapped):
// bilinear for 0-cochains; lowest-order edge elements for 1-cochains
// (returns the 1-form components, i.e. edge cochain / h blended across the
// cell); piecewise-constant density for 2-cochains (face value / h^2).
inline double interp_zero(const dec_grid& g, const Eigen::VectorXd& u, const vec& x) {
  double gx = wrap01(x[0]) * g.N, gy = wrap01(x[1]) * g.N;
  int i = static_cast<int>(std::floor(gx)), j = static_cast<int>(std::floor(gy));
  double fx = gx - i, fy = gy - j;
  return u[g.vidx(i, j)] * (1 - fx) * (1 - fy) + u[g.vidx(i + 1, j)] * fx * (1 - fy) +
         u[g.vidx(i, j + 1)] * (1 - fx) * fy + u[g.vidx(i + 1, j + 1)] * fx * fy;
}

inline vec interp_one(const dec_grid& g, const Eigen::VectorXd& w, const vec& x) {
  double gx = wrap01(x[0]) * g.N, gy = wrap01(x[1]) * g.N;
  int i = static_cast<int>(std::floor(gx)), j = static_cast<int>(std::floor(gy));
  double fx = gx - i, fy = gy - j;
  vec out(2);
  out[0] = (w[g.ex(i, j)] * (1 - fy) + w[g.ex(i, j + 1)] * fy) / g.h;
  out[1] = (w[g.ey(i, j)] * (1 - fx) + w[g.ey(i + 1, j)] * fx) / g.h;
  return out;
}

inline double interp_two(const dec_grid& g, const Eigen::VectorXd& q, const vec& x) {
  double gx = wrap01(x[0]) * g.N, gy = wrap01(x[1]) * g.N;
  int i = static_cast<int>(std::floor(gx)), j = static_cast<int>(std::floor(gy));
  return q[g.fidx(i, j)] / (g.h * g.h);
}

}  // namespace torusflow
