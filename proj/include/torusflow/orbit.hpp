#pragma once

// Closed-trajectory detection: recurrence scan from a coarse grid (forward
// and backward, so attracting and repelling orbits are both reachable),
// Newton refinement of the first-return map on a transverse section,
// variational monodromy with its section projection, signs, and iterate
// enumeration under a cost cutoff.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "torusflow/ode.hpp"
#include "torusflow/series.hpp"
#include "torusflow/system.hpp"

namespace torusflow {

struct closed_orbit {
  vec base;        // a point on the orbit, wrapped
  double time_period = 0.0;
  ivec winding;
  mat monodromy;   // (n-1)x(n-1) return-map differential on the section quotient
  bool nondegenerate = true;
  int epsilon = 0;     // sign det(monodromy - I)
  int period = 1;      // covering multiplicity p
  int primitive = -1;  // index of the underlying primitive orbit in the list
  double cost = 0.0;   // -(omega over the loop), >= 0 for Lyapunov omega
};

struct orbit_options {
  int grid = 6;              // scan starts per axis
  double t_settle = 20.0;    // transient discarded before watching for returns
  double t_record = 40.0;    // window in which a first return must appear
  double delta = 1e-3;       // recurrence ball
  double newton_tol = 1e-11;
  int newton_max = 30;
  double fd_step = 1e-6;     // probe offset for the return-map Jacobian
  double nct_tol = 1e-7;     // minimal eigenvalue distance to the unit circle
  double t_max = 200.0;      // hard time ceiling for iterate enumeration
  flow_options flow;
};

struct orbit_search {
  std::vector<closed_orbit> list;
  bool complete = true;
  std::vector<std::string> warnings;
};

namespace detail {

// orthonormal basis of the hyperplane orthogonal to n (n x (n-1))
inline mat section_basis(const vec& normal) {
  const int n = normal.size();
  mat A(n, n);
  A.col(0) = normal;
  for (int j = 1; j < n; ++j) A.col(j) = vec::Unit(n, (j - 1) % n);
  Eigen::HouseholderQR<mat> qr(A);
  mat Q = qr.householderQ();
  // fix the sign so Q.col(0) == normalized normal
  if (Q.col(0).dot(normal) < 0.0) Q = -Q;
  return Q.rightCols(n - 1);
}

struct crossing {
  bool ok = false;
  flow_state state;  // lift at the section crossing
};

// Flow from the lift p0 for roughly t_est in direction dir, then solve
// <L - plane_pt, n> = 0 by Newton in time.  The section is transverse at the
// base by construction (its normal is the flow direction there); tangency at
// the far crossing aborts the candidate instead of rotating the section.
inline crossing cross_section(const field_system& sys, const vec& p0, double t_est, int dir,
                              const vec& plane_pt, const vec& normal,
                              const flow_options& fopt) {
  crossing out;
  if (!(t_est > 0.0)) return out;
  flow_state st = integrate_flow(sys, p0, t_est, dir, fopt);
  for (int it = 0; it < 16; ++it) {
    double g = normal.dot(st.lift - plane_pt);
    vec X = sys.X_at(st.wrapped());
    double gp = dir * normal.dot(X);  // dL/dt along the run direction
    if (std::fabs(gp) < 1e-8 * X.norm()) return out;  // tangent crossing
    double dt = -g / gp;
    if (std::fabs(g) <= 1e-13 * (1.0 + plane_pt.norm())) {
      out.ok = true;
      out.state = st;
      out.state.t = st.t;
      return out;
    }
    flow_state nxt = integrate_flow(sys, st.lift, std::fabs(dt), dt >= 0 ? dir : -dir, fopt);
    nxt.t = st.t + dt;
    nxt.omega_int += st.omega_int;
    nxt.arclen += st.arclen;
    st = nxt;
  }
  return out;
}

struct refined_orbit {
  bool ok = false;
  vec base;        // converged lift of the section point
  double T = 0.0;  // first-return time
  ivec winding;
};

// Newton on the first-return displacement in section coordinates.  Runs in
// the direction the candidate was detected (where the orbit attracts and the
// return map contracts); `wind` is the forward-oriented class either way.
inline refined_orbit refine_orbit(const field_system& sys, const vec& q0, double t_est, int dir,
                                  const ivec& wind, const orbit_options& opt) {
  const int n = sys.n;
  refined_orbit out;
  vec s = q0;  // lift of the section base point
  vec w(n);
  for (int i = 0; i < n; ++i) w[i] = dir * wind[i];  // displacement along the run

  vec normal = sys.X_at(wrap_point(s));
  double nx = normal.norm();
  if (nx == 0.0) return out;
  normal /= nx;
  mat Q = section_basis(normal);

  double T = t_est;
  for (int it = 0; it < opt.newton_max; ++it) {
    crossing c = cross_section(sys, s, T, dir, s + w, normal, opt.flow);
    if (!c.ok) return out;
    T = c.state.t;
    vec F = Q.transpose() * (c.state.lift - s - w);
    if (F.norm() <= opt.newton_tol) {
      out.ok = true;
      out.base = s;
      out.T = T;
      out.winding = wind;
      return out;
    }
    mat J(n - 1, n - 1);
    for (int j = 0; j < n - 1; ++j) {
      vec sp = s + opt.fd_step * Q.col(j);
      crossing cj = cross_section(sys, sp, T, dir, sp + w, normal, opt.flow);
      if (!cj.ok) return out;
      J.col(j) = (Q.transpose() * (cj.state.lift - sp - w) - F) / opt.fd_step;
    }
    Eigen::FullPivLU<mat> lu(J);
    if (!lu.isInvertible()) return out;
    vec dy = lu.solve(-F);
    if (!dy.allFinite() || dy.norm() > 0.2) return out;  // fell out of the basin
    s += Q * dy;
  }
  return out;
}

// finite-difference return-map Jacobian on the section (cross-check oracle)
inline mat return_map_jacobian_fd(const field_system& sys, const vec& base, double T,
                                  const ivec& wind, double h, const flow_options& fopt) {
  const int n = sys.n;
  vec w(n);
  for (int i = 0; i < n; ++i) w[i] = wind[i];
  vec normal = sys.X_at(wrap_point(base)).normalized();
  mat Q = section_basis(normal);
  mat J(n - 1, n - 1);
  for (int j = 0; j < n - 1; ++j) {
    vec sp = base + h * Q.col(j);
    vec sm = base - h * Q.col(j);
    crossing cp = cross_section(sys, sp, T, +1, sp + w, normal, fopt);
    crossing cm = cross_section(sys, sm, T, +1, sm + w, normal, fopt);
    if (!cp.ok || !cm.ok) throw compute_error("return-map probe lost the section");
    // probes measure R(s) - s, so the identity is restored below
    J.col(j) = Q.transpose() * ((cp.state.lift - sp) - (cm.state.lift - sm)) / (2.0 * h);
  }
  return J + mat::Identity(n - 1, n - 1);
}

inline double unit_circle_gap(const mat& M) {
  Eigen::EigenSolver<mat> es(M);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    gap = std::min(gap, std::fabs(std::abs(es.eigenvalues()[i]) - 1.0));
  return gap;
}

}  // namespace detail

// Detect closed trajectories with loop cost <= R (and T <= t_max), including
// iterates of every primitive found.  The sign of an iterate is the exact
// matrix identity sign det(M^k - I) on the primitive monodromy M.
inline orbit_search find_closed_orbits(const field_system& sys, double R,
                                       const orbit_options& opt = {}) {
  const int n = sys.n;
  orbit_search out;
  int nct_drops = 0, newton_drops = 0;

  struct primitive_rec {
    vec base;  // lift
    double T;
    ivec winding;
    mat monodromy;
    std::vector<vec> loop;  // sampled lifts along one period
  };
  std::vector<primitive_rec> prims;

  auto on_known_orbit = [&](const vec& p) {
    for (const auto& pr : prims) {
      for (std::size_t i = 0; i + 1 < pr.loop.size(); ++i) {
        vec a = pr.loop[i];
        vec v = pr.loop[i + 1] - a;
        vec u = torus_diff(wrap_point(p), wrap_point(a));
        double vv = v.squaredNorm();
        double t = vv > 0.0 ? std::clamp(u.dot(v) / vv, 0.0, 1.0) : 0.0;
        if ((u - t * v).norm() < 1e-3) return true;
      }
    }
    return false;
  };

  auto consider = [&](const vec& q0, double t_est, int dir, const ivec& wind) {
    if (on_known_orbit(q0)) return;
    detail::refined_orbit ref = detail::refine_orbit(sys, q0, t_est, dir, wind, opt);
    if (!ref.ok) {
      ++newton_drops;
      return;
    }
    if (on_known_orbit(ref.base)) return;

    // one variational pass over the period: loop samples + monodromy; the
    // step ceiling keeps chord gaps small enough for segment-based dedup
    flow_options fopt = opt.flow;
    fopt.variational = true;
    fopt.h_max = std::min(opt.flow.h_max, std::max(ref.T / 200.0, 1e-3));
    primitive_rec pr;
    pr.base = ref.base;
    pr.T = ref.T;
    pr.winding = ref.winding;
    pr.loop.push_back(ref.base);
    flow_state fin = integrate_flow(sys, ref.base, ref.T, +1, fopt,
                                    [&](const flow_state&, const flow_state& cur) {
                                      pr.loop.push_back(cur.lift);
                                      return true;
                                    });
    vec closure = fin.lift - ref.base;
    for (int i = 0; i < n; ++i) closure[i] -= ref.winding[i];
    if (closure.norm() > 1e-7) {
      ++newton_drops;
      return;
    }
    vec Xb = sys.X_at(wrap_point(ref.base)).normalized();
    mat Q = detail::section_basis(Xb);
    mat P = mat::Identity(n, n) - Xb * Xb.transpose();
    pr.monodromy = Q.transpose() * P * fin.V * Q;

    if (detail::unit_circle_gap(pr.monodromy) <= opt.nct_tol) {
      ++nct_drops;
      return;
    }
    prims.push_back(std::move(pr));
  };

  // recurrence scan, forward and backward
  for (int dir : {+1, -1}) {
    for (int gx = 0; gx < opt.grid; ++gx) {
      for (int gy = 0; gy < (n > 1 ? opt.grid : 1); ++gy) {
        vec p0 = vec::Zero(n);
        p0[0] = (gx + 0.5) / opt.grid;
        if (n > 1) p0[1] = (gy + 0.5) / opt.grid;
        flow_state settled = integrate_flow(sys, p0, opt.t_settle, dir, opt.flow);
        if (sys.X_at(settled.wrapped()).norm() < 1e-8) continue;  // fell into a rest point
        vec q0 = settled.lift;
        vec q0w = wrap_point(q0);
        bool left_ball = false, found = false;
        double t_hit = 0.0;
        vec hit_lift;
        // near-return check against each step SEGMENT: integration steps are
        // far longer than the recurrence ball, so endpoint checks would miss
        integrate_flow(sys, q0, opt.t_record, dir, opt.flow,
                       [&](const flow_state& prev, const flow_state& cur) {
                         vec u0 = torus_diff(prev.wrapped(), q0w);
                         vec dv = cur.lift - prev.lift;  // in-step lift displacement
                         vec u1 = u0 + dv;
                         if (!left_ball) {
                           if (u1.norm() > 2.0 * opt.delta) left_ball = true;
                           return true;
                         }
                         double vv = dv.squaredNorm();
                         double f = vv > 0.0 ? std::clamp(-u0.dot(dv) / vv, 0.0, 1.0) : 0.0;
                         if ((u0 + f * dv).norm() < opt.delta) {
                           found = true;
                           t_hit = prev.t + f * (cur.t - prev.t);
                           hit_lift = prev.lift + f * dv;
                           return false;
                         }
                         if (sys.X_at(cur.wrapped()).norm() < 1e-8) return false;
                         return true;
                       });
        if (!found) continue;
        vec alpha = (hit_lift - q0) * double(dir);  // forward-oriented class
        ivec wind(n);
        bool nonzero = false;
        for (int i = 0; i < n; ++i) {
          wind[i] = static_cast<int>(std::lround(alpha[i]));
          nonzero = nonzero || wind[i] != 0;
        }
        if (!nonzero) continue;  // trivial recurrence near a rest point
        consider(q0w, t_hit, dir, wind);
      }
    }
  }

  if (nct_drops > 0) {
    out.complete = false;
    out.warnings.push_back(std::to_string(nct_drops) +
                           " degenerate candidate(s) dropped: monodromy eigenvalue within "
                           "tolerance of the unit circle");
  }
  if (newton_drops > 0)
    out.warnings.push_back(std::to_string(newton_drops) +
                           " near-return candidate(s) did not refine to a closed orbit");

  // iterate enumeration per primitive under the cost cutoff
  bool ceiling_warned = false;
  for (const auto& pr : prims) {
    double c0 = loop_cost(sys.omega, pr.winding);
    if (c0 <= 1e-12) {
      out.complete = false;
      out.warnings.push_back("orbit with nonpositive loop cost: cutoff cannot truncate, "
                             "enumerating to the time ceiling only");
    }
    int prim_index = static_cast<int>(out.list.size());
    mat Mk = mat::Identity(n - 1, n - 1);
    for (int k = 1;; ++k) {
      double cost_k = c0 * k;
      if (c0 > 1e-12 && cost_k > R + 1e-12) break;
      if (pr.T * k > opt.t_max) {
        if (c0 > 1e-12 && !ceiling_warned) {
          out.warnings.push_back("time ceiling truncated iterates below the cost cutoff");
          ceiling_warned = true;
        }
        out.complete = false;
        break;
      }
      Mk = Mk * pr.monodromy;
      closed_orbit ob;
      ob.base = wrap_point(pr.base);
      ob.time_period = pr.T * k;
      ob.winding.resize(n);
      for (int i = 0; i < n; ++i) ob.winding[i] = pr.winding[i] * k;
      ob.monodromy = Mk;
      ob.nondegenerate = detail::unit_circle_gap(Mk) > opt.nct_tol;
      double det = (Mk - mat::Identity(n - 1, n - 1)).determinant();
      ob.epsilon = det > 0 ? +1 : -1;
      ob.period = k;
      ob.primitive = prim_index;
      ob.cost = cost_k;
      if (!ob.nondegenerate) {
        out.complete = false;
        out.warnings.push_back("iterate " + std::to_string(k) +
                               " degenerate: dropped from the enumeration");
        continue;
      }
      out.list.push_back(std::move(ob));
    }
  }
  return out;
}

// Aggregate closed orbits into the rational counting function per class.
inline orbit_counting build_orbit_counting(const orbit_search& found, double R) {
  orbit_counting cf;
  cf.cutoff = R;
  cf.complete = found.complete;
  for (const auto& ob : found.list) {
    if (ob.cost > R + 1e-12) continue;
    cf.entries[to_key(ob.winding)] += rational(ob.epsilon, ob.period);
  }
  return cf;
}

}  // namespace torusflow
