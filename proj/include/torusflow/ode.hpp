#pragma once

// Flow integration on the torus.  States are tracked as lifts in R^n (the
// field is 1-periodic, so it is evaluated at the wrapped point); the lift,
// the running integral of ω along the path, the arclength, and optionally
// the variational frame V(t) solving dV/dt = DX·V are advanced together by
// an embedded Dormand–Prince 5(4) step with PI error control.

#include <functional>

#include "torusflow/system.hpp"

namespace torusflow {

struct flow_options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h_init = 1e-3;
  double h_min = 1e-13;
  double h_max = 0.25;
  bool variational = false;
};

struct flow_state {
  double t = 0.0;       // elapsed (unsigned) integration time
  vec lift;             // position lift in R^n
  double omega_int = 0.0;  // ∫ ω along the traversed path
  double arclen = 0.0;
  mat V;                // variational frame (n×n) when enabled

  vec wrapped() const { return wrap_point(lift); }
};

// callback per accepted step; return false to stop integration early
using step_callback = std::function<bool(const flow_state& prev, const flow_state& cur)>;

namespace detail {

struct packed_rhs {
  const field_system& sys;
  double dir;
  bool variational;
  int n;

  int size() const { return n + 2 + (variational ? n * n : 0); }

  void operator()(const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    vec x(n);
    for (int i = 0; i < n; ++i) x[i] = wrap01(y[i]);
    vec Xv(n);
    mat J;
    if (variational) {
      J.resize(n, n);
      for (int i = 0; i < n; ++i) {
        jet j = eval_jet(sys.X[i], x, 1);
        Xv[i] = j.v;
        for (int k = 0; k < n; ++k) J(i, k) = j.g[k];
      }
    } else {
      Xv = sys.X_at(x);
    }
    dy.resize(size());
    for (int i = 0; i < n; ++i) dy[i] = dir * Xv[i];
    dy[n] = dir * sys.omega.apply(x, Xv);  // d/dt ∫ω = ω(dy/dt)
    dy[n + 1] = Xv.norm();                 // arclength is direction-independent
    if (variational) {
      Eigen::Map<const mat> V(y.data() + n + 2, n, n);
      Eigen::Map<mat> dV(dy.data() + n + 2, n, n);
      dV = dir * (J * V);
    }
  }
};

}  // namespace detail

// Integrate for time T ≥ 0 in direction dir = ±1 from wrapped point p0
// (V starts at the identity when enabled).  Returns the final state; the
// callback sees every accepted step.
inline flow_state integrate_flow(const field_system& sys, const vec& p0, double T, int dir,
                                 const flow_options& opt = {},
                                 const step_callback& on_step = {}) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw config_error("integration time must be finite and >= 0");
  if (dir != 1 && dir != -1) throw config_error("direction must be +1 or -1");
  const int n = sys.n;
  detail::packed_rhs rhs{sys, double(dir), opt.variational, n};
  const int m = rhs.size();

  Eigen::VectorXd y(m);
  for (int i = 0; i < n; ++i) y[i] = p0[i];
  y[n] = 0.0;
  y[n + 1] = 0.0;
  if (opt.variational) {
    Eigen::Map<mat> V(y.data() + n + 2, n, n);
    V.setIdentity();
  }

  // Dormand–Prince 5(4) coefficients
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  Eigen::VectorXd k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), ytmp(m), ynew(m), yerr(m);
  rhs(y, k1);

  double t = 0.0;
  double h = std::min(opt.h_init, std::max(T, 1e-300));
  double prev_err = 1.0;

  auto make_state = [&](double tt, const Eigen::VectorXd& yy) {
    flow_state s;
    s.t = tt;
    s.lift = yy.head(n);
    s.omega_int = yy[n];
    s.arclen = yy[n + 1];
    if (opt.variational) s.V = Eigen::Map<const mat>(yy.data() + n + 2, n, n);
    return s;
  };

  flow_state cur = make_state(0.0, y);
  while (t < T) {
    if (h > T - t) h = T - t;
    ytmp = y + h * a21 * k1;
    rhs(ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(ynew, k7);
    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = 0.0;
    for (int i = 0; i < m; ++i) {
      double scale = opt.abs_tol + opt.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      double q = yerr[i] / scale;
      err += q * q;
    }
    err = std::sqrt(err / m);

    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      flow_state next = make_state(t, y);
      if (on_step && !on_step(cur, next)) return next;
      cur = std::move(next);
      // PI controller
      double fac = 0.9 * std::pow(err > 1e-30 ? err : 1e-30, -0.7 / 5.0) *
                   std::pow(prev_err > 1e-30 ? prev_err : 1e-30, 0.4 / 5.0);
      fac = std::min(5.0, std::max(0.2, fac));
      h = std::min(opt.h_max, h * fac);
      prev_err = err;
    } else {
      double fac = std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
      h *= fac;
    }
    if (h < opt.h_min)
      throw compute_error("ODE step size underflow at t=" + std::to_string(t) +
                          " (last good point retained at that time)");
  }
  return cur;
}

// Densely sampled trajectory: wrapped samples plus lift/ω bookkeeping.
struct trajectory {
  std::vector<flow_state> steps;  // every accepted step, in order
};

inline trajectory sample_flow(const field_system& sys, const vec& p0, double T, int dir,
                              const flow_options& opt = {}) {
  trajectory tr;
  integrate_flow(sys, p0, T, dir, opt, [&](const flow_state& prev, const flow_state& cur) {
    if (tr.steps.empty()) tr.steps.push_back(prev);
    tr.steps.push_back(cur);
    return true;
  });
  return tr;
}

}  // namespace torusflow
