#pragma once

// Rotation pairing of a nowhere-vanishing planar field with a closed
// one-form: (1/2π)∫ ω ∧ dθ_X, where θ_X = atan2(X₂, X₁).
//
// θ is sampled at the corners of a uniform n_q×n_q grid; principal-value
// differences along edges give its 1-cochain, which must be closed cell by
// cell (a nonzero boundary sum means the direction field winds inside one
// cell: a zero of X, or rotation too fast for the grid).  ω is reduced to
// exact edge integrals of its representative (harmonic part + potential
// difference).  The wedge of the two 1-cochains is integrated per cell with
// lowest-order edge elements.  Edge-element interpolation commutes with the
// incidence operators, so for closed cochains the quadrature reproduces the
// cohomological pairing exactly — the result carries no O(h²) truncation
// term, only rounding.

#include <cmath>
#include <limits>
#include <string>

#include "torusflow/system.hpp"

namespace torusflow {

struct rinv_options {
  int probe_n = 256;               // resolution of the zero-free precondition scan
  double min_speed = 1e-6;         // minimum |X| allowed on the probe grid
  double cell_winding_tol = 1e-9;  // boundary sum of θ-differences per cell
};

inline double r_invariant(const field_system& sys, const closed_one_form& omega,
                          int n_q = 512, const rinv_options& opt = {}) {
  if (sys.n != 2) throw config_error("rotation pairing requires a two-dimensional field");
  if (n_q < 8) throw config_error("rotation quadrature grid must be at least 8");

  // The pairing is defined for nowhere-vanishing fields; the regularized
  // extension to fields with zeros is not implemented.
  {
    const int P = opt.probe_n;
    double mn = std::numeric_limits<double>::infinity();
    vec worst = vec::Zero(2), p(2);
    for (int j = 0; j < P; ++j)
      for (int i = 0; i < P; ++i) {
        p << static_cast<double>(i) / P, static_cast<double>(j) / P;
        double s = sys.X_at(p).norm();
        if (s < mn) {
          mn = s;
          worst = p;
        }
      }
    if (mn < opt.min_speed)
      throw config_error("field speed drops to " + std::to_string(mn) + " near (" +
                         std::to_string(worst[0]) + ", " + std::to_string(worst[1]) +
                         "); rotation pairing needs a nowhere-vanishing field "
                         "(regularization near zeros is not implemented)");
  }

  const int K = n_q;
  const double h = 1.0 / K;
  Eigen::MatrixXd th(K, K), pot = Eigen::MatrixXd::Zero(K, K);
  {
    vec p(2);
    for (int j = 0; j < K; ++j)
      for (int i = 0; i < K; ++i) {
        p << i * h, j * h;
        vec X = sys.X_at(p);
        th(i, j) = std::atan2(X[1], X[0]);
        if (omega.potential) pot(i, j) = eval_value(omega.potential, p);
      }
  }
  const double a1 = omega.harmonic.size() > 0 ? omega.harmonic[0] : 0.0;
  const double a2 = omega.harmonic.size() > 1 ? omega.harmonic[1] : 0.0;
  auto pv = [](double d) { return d - kTwoPi * std::round(d / kTwoPi); };

  double acc = 0.0;
  for (int j = 0; j < K; ++j) {
    const int jp = (j + 1) % K;
    for (int i = 0; i < K; ++i) {
      const int ip = (i + 1) % K;
      const double tb = pv(th(ip, j) - th(i, j));
      const double tt = pv(th(ip, jp) - th(i, jp));
      const double tl = pv(th(i, jp) - th(i, j));
      const double tr = pv(th(ip, jp) - th(ip, j));
      const double wind = tb + tr - tt - tl;
      if (std::abs(wind) > opt.cell_winding_tol)
        throw compute_error("direction field winds inside the quadrature cell at (" +
                            std::to_string(i * h) + ", " + std::to_string(j * h) +
                            "): a zero of the field or unresolved rotation; "
                            "increase the quadrature grid");
      const double wb = a1 * h + pot(ip, j) - pot(i, j);
      const double wt = a1 * h + pot(ip, jp) - pot(i, jp);
      const double wl = a2 * h + pot(i, jp) - pot(i, j);
      const double wr = a2 * h + pot(ip, jp) - pot(ip, j);
      acc += 0.5 * (wb + wt) * 0.5 * (tl + tr) - 0.5 * (wl + wr) * 0.5 * (tb + tt);
    }
  }
  return acc / kTwoPi;
}

}  // namespace torusflow
