#pragma once

// Twisted Betti numbers of the torus and the rest-point count inequalities.
// beta is computed two independent ways — a character-basis closed form and
// the near-kernel dimension of the deformed discrete Laplacian — and the two
// must agree.

#include <string>
#include <vector>

#include "torusflow/spectral.hpp"
#include "torusflow/torus.hpp"
#include "torusflow/witten.hpp"

namespace torusflow {

struct betti_table {
  vec xi;                  // real cohomology class (dx-basis coefficients)
  double t_used = 0.0;
  std::vector<int> betti;  // beta_q, q = 0..n
  int grid = 0;            // discrete model resolution used by the spectral route
};

// Closed form on T^n: in the character basis the twisted differential acts by
// wedge with (2*pi*i*m + t*xi); for real t*xi this vanishes only at m = 0 with
// t*xi = 0, so beta_q = C(n,q) when t*xi = 0 and 0 otherwise.
inline std::vector<int> betti_closed_form(const vec& xi, double t) {
  const int n = static_cast<int>(xi.size());
  std::vector<int> b(n + 1, 0);
  if (t * xi.norm() == 0.0) {
    int c = 1;
    for (int q = 0; q <= n; ++q) {
      b[q] = c;
      c = c * (n - q) / (q + 1);
    }
  }
  return b;
}

// Spectral route: eigenvalue counts of the deformed Laplacian below a fixed
// order-one threshold.  Exponentially small kernel candidates sit many orders
// below it; the first genuine eigenvalue of the torus model sits above it for
// every shipped (xi, t).
inline std::vector<int> betti_spectral(const vec& xi, double t, int N) {
  if (xi.size() != 2) throw config_error("spectral Betti route runs on the 2-torus model");
  if (t != 0.0 && xi.norm() != 0.0 && std::fabs(t) * xi.norm() < 1e-3)
    throw config_error("twist too weak to separate from the kernel threshold");
  closed_one_form form;
  form.harmonic = xi;
  witten_model m = build_witten(N, form);
  const double threshold = 1.0;
  std::vector<int> b(3, 0);
  for (int q = 0; q <= 2; ++q) {
    int want = std::min(m.dim(q), 8);
    eig_pairs ep = lowest_eigenpairs(m.laplacian(q, t), want);
    int cnt = 0;
    for (int i = 0; i < ep.values.size(); ++i)
      if (ep.values[i] < threshold) ++cnt;
    if (cnt == want)
      throw compute_error("near-kernel threshold did not separate the spectrum");
    b[q] = cnt;
  }
  return b;
}

// Both routes, cross-checked; disagreement indicates a model bug.
inline betti_table twisted_betti(const vec& xi, double t, int N = 24) {
  if (t == 0.0 && xi.norm() != 0.0)
    throw config_error("nonzero twist class requires t != 0");
  betti_table out;
  out.xi = xi;
  out.t_used = t;
  out.grid = N;
  std::vector<int> a = betti_closed_form(xi, t);
  std::vector<int> b = betti_spectral(xi, t, N);
  if (a != b) throw compute_error("Betti routes disagree: closed form vs spectral kernel count");
  out.betti = a;
  return out;
}

// ----------------------------------------------------------------------------
// Rest-point count inequalities in the standard signed form.

struct inequality_row {
  int r = 0;
  long long lhs = 0;  // sum_{k<=r} (-1)^{r-k} n_k
  long long rhs = 0;  // same alternating sum of beta
  bool ok = false;
};

struct inequality_report {
  std::vector<inequality_row> rows;
  long long euler_n = 0, euler_beta = 0;
  bool euler_equal = false;  // required whenever the twist class vanishes
  bool pass = false;
};

inline inequality_report novikov_inequalities(const std::vector<int>& nk,
                                              const betti_table& bt) {
  if (nk.size() != bt.betti.size())
    throw config_error("grading length mismatch between rest-point counts and Betti table");
  const int n = static_cast<int>(nk.size()) - 1;
  inequality_report rep;
  rep.pass = true;
  for (int r = 0; r <= n; ++r) {
    inequality_row row;
    row.r = r;
    for (int k = 0; k <= r; ++k) {
      long long sgn = ((r - k) % 2 == 0) ? 1 : -1;
      row.lhs += sgn * nk[k];
      row.rhs += sgn * bt.betti[k];
    }
    row.ok = row.lhs >= row.rhs;
    rep.pass = rep.pass && row.ok;
    rep.rows.push_back(row);
  }
  for (int k = 0; k <= n; ++k) {
    long long sgn = (k % 2 == 0) ? 1 : -1;
    rep.euler_n += sgn * nk[k];
    rep.euler_beta += sgn * bt.betti[k];
  }
  rep.euler_equal = rep.euler_n == rep.euler_beta;
  rep.pass = rep.pass && rep.euler_equal;
  return rep;
}

}  // namespace torusflow
