#pragma once

// Weighted integration of interpolated cochains over unstable manifolds.
//
// For a hyperbolic rest point x with orientation o_x, the map sends a
// k-cochain (k = unstable dimension of x) to
//
//   Int_x(a) = o_x · ∫_{W⁻(x)} e^{-t·h_x} a ,
//
// where h_x is the cost potential along the manifold: h_x(p) = -∫ω from x
// to p inside W⁻(x), h_x(x) = 0, nondecreasing along the flow for a
// Lyapunov pair.  The potential drop is evaluated in closed form from the
// lift (harmonic part × displacement + periodic potential difference), and
// the ω-integral accumulated by the flow must agree with it along every
// ray — that cross-check is enforced here.
//
// Quadrature by unstable dimension:
//   0: the value of the interpolated 0-cochain at x.
//   1: two rays seeded at ±δ·f0; each is an oriented line integral of
//      e^{-t·h}⟨a, X̂⟩ in arclength (the +f0 ray enters positively, the
//      -f0 ray negatively), with the rest point itself as the s = 0 node.
//   2: rays seeded on the δ-circle u(φ) = cosφ·f0 + sinφ·f1, integrated in
//      (angle × flow time).  The angular derivative ∂φP = V(t)·δu'(φ) is
//      transported by the stored variational frame, ∂tP = X(P), and the
//      chart (φ,t) is negatively oriented against (f0,f1) — the Jacobian
//      det[u' | Âu] = -uᵀÂu is negative when the symmetrized linearization
//      is positive definite (checked; the circle must be a flow section).
//      The enclosed δ-disk is added analytically: o_x·σ_f·ρ(x)·πδ², with
//      σ_f the orientation sign of the frame in ambient coordinates.
//
// Rays are truncated once the weight e^{-t·h} falls below a floor, or when
// the trajectory has collapsed onto a rest point; the discarded tail is
// estimated and must stay below a tolerance.  The assembled matrices map
// small eigenvectors (orthonormal coordinates, converted to cochains by
// M^{-1/2}) to rest-point coefficients; rows follow the order of the
// rest-point list, matching the instanton-complex strata.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "torusflow/dec.hpp"
#include "torusflow/manifolds.hpp"
#include "torusflow/rest_points.hpp"
#include "torusflow/spectral.hpp"
#include "torusflow/witten.hpp"

namespace torusflow {

struct intmap_options {
  double weight_floor = 1e-12;  // drop ray nodes once e^{-t·h} falls below
  double tail_tol = 1e-8;       // allowed estimate of a discarded tail
  double h_check_tol = 1e-6;    // flow-accumulated ∫ω vs closed-form drop
  double speed_floor = 1e-7;    // |X| below which a ray has hit a rest point
  double section_margin = 1e-8; // relative PD margin for the seed-circle check
};

// Cochain-independent quadrature data for one rest point.  Applying it to a
// cochain of degree = dim is a plain weighted sum of interpolated values.
struct patch_rule {
  int rp = -1;        // index into the rest-point list
  int dim = 0;        // unstable dimension = cochain degree
  double t = 0.0;     // deformation parameter baked into the weights
  vec center;         // rest-point position
  struct node {
    double px = 0.0, py = 0.0;  // wrapped evaluation point
    double coeff = 0.0;         // quadrature coefficient
    double tx = 0.0, ty = 0.0;  // dim 1 only: unit tangent for the pairing
  };
  std::vector<node> nodes;
  double h_residual = 0.0;  // max |flow ∫ω − closed-form drop| over nodes
  double tail_bound = 0.0;  // max discarded-tail estimate over rays
};

inline double apply_patch_rule(const dec_grid& g, const patch_rule& r,
                               const Eigen::VectorXd& cochain) {
  double acc = 0.0;
  vec p(2), tau(2);
  switch (r.dim) {
    case 0:
      for (const auto& nd : r.nodes) {
        p << nd.px, nd.py;
        acc += nd.coeff * interp_zero(g, cochain, p);
      }
      break;
    case 1:
      for (const auto& nd : r.nodes) {
        p << nd.px, nd.py;
        tau << nd.tx, nd.ty;
        acc += nd.coeff * interp_one(g, cochain, p).dot(tau);
      }
      break;
    case 2:
      for (const auto& nd : r.nodes) {
        p << nd.px, nd.py;
        acc += nd.coeff * interp_two(g, cochain, p);
      }
      break;
    default:
      throw config_error("patch rule degree out of range");
  }
  return acc;
}

namespace detail {

// Closed-form cost potential: h = -∫ω from the rest-point lift to the node
// lift.  Exact for a closed form — only the endpoints and the lift matter.
struct cost_eval {
  const closed_one_form& omega;
  vec x_lift;
  double pot_at_x = 0.0;

  cost_eval(const closed_one_form& om, const vec& xl) : omega(om), x_lift(xl) {
    if (omega.potential) pot_at_x = eval_value(omega.potential, wrap_point(x_lift));
  }
  double operator()(const vec& lift) const {
    double s = 0.0;
    if (omega.harmonic.size() > 0) s += omega.harmonic.dot(lift - x_lift);
    if (omega.potential) s += eval_value(omega.potential, wrap_point(lift)) - pot_at_x;
    return -s;
  }
};

// smallest |Re λ| over all rest points: contraction time scale for tails
inline double slowest_rate(const std::vector<rest_point>& rps) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rps)
    for (int i = 0; i < r.eigenvalues.size(); ++i)
      m = std::min(m, std::abs(r.eigenvalues[i].real()));
  return (std::isfinite(m) && m > 0) ? m : 1.0;
}

}  // namespace detail

// Build the quadrature rule for one unstable patch at deformation t.
// `delta` must be the seed radius the patch was grown with.
inline patch_rule build_patch_rule(const field_system& sys, const manifold_patch& patch,
                                   const std::vector<rest_point>& rps, double t, double delta,
                                   const intmap_options& opt = {}) {
  if (patch.side != manifold_side::unstable)
    throw config_error("integration rules are built over unstable patches");
  if (patch.dim != patch.x.morse_index)
    throw config_error("patch dimension does not match the unstable index");
  if (!(t > 0)) throw config_error("deformation parameter must be positive");

  patch_rule rule;
  rule.dim = patch.dim;
  rule.t = t;
  rule.center = patch.x.position;
  const double o_x = patch.x.orientation;
  const double tau_slow = detail::slowest_rate(rps);

  if (patch.dim == 0) {
    patch_rule::node nd;
    nd.px = patch.x.position[0];
    nd.py = patch.x.position[1];
    nd.coeff = o_x;
    rule.nodes.push_back(nd);
    return rule;
  }

  if (patch.dim == 2) {
    // seed circle must be a section of the outgoing flow
    mat A = patch.x.jacobian;
    mat S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<mat> es(S);
    double lam_min = es.eigenvalues().minCoeff();
    if (lam_min <= opt.section_margin * A.norm())
      throw compute_error(
          "seed circle around (" + std::to_string(patch.x.position[0]) + ", " +
          std::to_string(patch.x.position[1]) +
          ") is not a section of the unstable flow (symmetrized linearization "
          "not positive definite); the angle×time quadrature does not apply");
  }

  struct ray_tail {
    bool stopped = false;
    double measure = 0.0;
  };

  const mat& frame = patch.x.unstable_frame;
  const double dphi = patch.dim == 2 ? kTwoPi / patch.rays.size() : 0.0;

  for (const auto& ray : patch.rays) {
    const auto& steps = ray.traj.steps;
    if (steps.empty()) throw compute_error("unstable ray carries no flow samples");
    // rest-point lift on this ray's branch of the covering
    vec x_lift = steps.front().lift - delta * ray.seed_dir;
    detail::cost_eval cost(sys.omega, x_lift);

    double ray_sign = 1.0;
    vec uprime;
    if (patch.dim == 1) {
      ray_sign = ray.seed_dir.dot(frame.col(0)) > 0 ? 1.0 : -1.0;
    } else {
      uprime = -std::sin(ray.angle) * frame.col(0) + std::cos(ray.angle) * frame.col(1);
    }

    // gather kept nodes along the ray: (value-independent data, weights)
    struct knode {
      vec pos;       // wrapped
      double s;      // arclength (dim 1) or flow time (dim 2)
      double w;      // e^{-t·h}
      vec tan;       // dim 1: unit tangent; dim 2: ∂φP
      double jac;    // dim 2: det[∂φP | X]
    };
    std::vector<knode> kept;
    kept.reserve(steps.size() + 1);

    if (patch.dim == 1) {
      // the rest point itself opens the ray
      knode k0;
      k0.pos = patch.x.position;
      k0.s = 0.0;
      k0.w = 1.0;
      k0.tan = ray.seed_dir;
      k0.jac = 0.0;
      kept.push_back(std::move(k0));
    }

    ray_tail tail;
    double seed_leg = cost(steps.front().lift);  // exact drop over the seed segment
    if (seed_leg < -1e-9)
      throw compute_error("cost potential negative at a seed point: ω is not "
                          "Lyapunov for this field");
    const double T_budget = steps.back().t;

    for (const auto& st : steps) {
      if (patch.dim == 2 && st.V.size() != 4)
        throw compute_error("two-dimensional patch lacks variational data");
      double h_exact = cost(st.lift);
      // stored channel: drop = seed leg (closed form) − flow-accumulated ∫ω
      double h_stored = seed_leg - st.omega_int;
      rule.h_residual = std::max(rule.h_residual, std::abs(h_stored - h_exact));
      if (h_exact < -1e-9)
        throw compute_error("cost potential negative along an unstable ray: ω is "
                            "not Lyapunov for this field");
      double h = std::max(h_exact, 0.0);
      double w = std::exp(-t * h);
      vec pw = wrap_point(st.lift);
      vec X = sys.X_at(pw);
      double speed = X.norm();

      if (w < opt.weight_floor) {
        // discarded tail: local sweep rate times a bounded horizon; the
        // weight is monotone nonincreasing beyond this point
        double horizon = std::min(T_budget - st.t, 10.0);
        double rate = speed;
        if (patch.dim == 2) rate = std::max(1.0, (st.V * (delta * uprime)).norm() * speed);
        tail.measure = w * rate * horizon;
        tail.stopped = true;
        break;
      }

      knode kn;
      kn.pos = pw;
      kn.w = w;
      if (patch.dim == 1) {
        kn.s = delta + st.arclen;
        kn.tan = speed > 0 ? vec(X / speed) : ray.seed_dir;
        kn.jac = 0.0;
      } else {
        kn.s = st.t;
        kn.tan = st.V * (delta * uprime);
        kn.jac = kn.tan[0] * X[1] - kn.tan[1] * X[0];
      }
      kept.push_back(std::move(kn));

      if (speed < opt.speed_floor) {
        // collapsed onto a rest point: remaining arclength ≤ |X|/|Re λ|
        double rem = speed / tau_slow * 4.0;
        double rate = patch.dim == 2 ? std::max(1.0, kept.back().tan.norm()) : 1.0;
        tail.measure = w * rate * rem;
        tail.stopped = true;
        break;
      }
    }

    if (!tail.stopped) {
      const auto& last = steps.back();
      vec Xl = sys.X_at(wrap_point(last.lift));
      double wl = kept.empty() ? 1.0 : kept.back().w;
      throw compute_error("unstable ray still carries weight " + std::to_string(wl) +
                          " and speed " + std::to_string(Xl.norm()) +
                          " at the flow budget; increase the budget or the "
                          "deformation parameter");
    }
    if (tail.measure > opt.tail_tol)
      throw compute_error("discarded ray tail estimate " + std::to_string(tail.measure) +
                          " exceeds the tolerance; increase the flow budget");
    rule.tail_bound = std::max(rule.tail_bound, tail.measure);

    // fold trapezoidal weights into per-node coefficients
    const size_t m = kept.size();
    if (m < 2) continue;
    for (size_t i = 0; i < m; ++i) {
      double left = i > 0 ? kept[i].s - kept[i - 1].s : 0.0;
      double right = i + 1 < m ? kept[i + 1].s - kept[i].s : 0.0;
      double trap = 0.5 * (left + right);
      patch_rule::node nd;
      nd.px = kept[i].pos[0];
      nd.py = kept[i].pos[1];
      if (patch.dim == 1) {
        nd.coeff = o_x * ray_sign * kept[i].w * trap;
        nd.tx = kept[i].tan[0];
        nd.ty = kept[i].tan[1];
      } else {
        // (φ,t) chart is negatively oriented against the frame
        nd.coeff = -o_x * dphi * kept[i].w * trap * kept[i].jac;
      }
      if (nd.coeff != 0.0) rule.nodes.push_back(nd);
    }
  }

  if (patch.dim == 2) {
    // analytic seed-disk contribution: o_x·σ_f·ρ(x)·πδ²
    double sigma_f = frame(0, 0) * frame(1, 1) - frame(0, 1) * frame(1, 0) >= 0 ? 1.0 : -1.0;
    patch_rule::node nd;
    nd.px = patch.x.position[0];
    nd.py = patch.x.position[1];
    nd.coeff = o_x * sigma_f * M_PI * delta * delta;
    rule.nodes.push_back(nd);
  }

  if (rule.h_residual > opt.h_check_tol)
    throw compute_error("flow-accumulated ∫ω deviates from the closed-form potential "
                        "drop by " + std::to_string(rule.h_residual) +
                        " along an unstable ray");
  return rule;
}

// Seed unstable patches for every rest point and build their rules.  The
// flow step cap is tightened with t so the trapezoidal quadrature resolves
// the weight's decay scale; rules are grid-independent and reusable across
// refinements at the same t.
inline std::vector<patch_rule> build_patch_rules(const field_system& sys,
                                                 const std::vector<rest_point>& rps, double t,
                                                 manifold_options mopt = {},
                                                 const intmap_options& opt = {}) {
  mopt.flow.h_max = std::min(mopt.flow.h_max, 0.05 / std::max(t, 1.0));
  std::vector<patch_rule> rules;
  rules.reserve(rps.size());
  for (size_t i = 0; i < rps.size(); ++i) {
    manifold_patch patch = seed_invariant_manifold(sys, rps[i], manifold_side::unstable, mopt);
    patch_rule r = build_patch_rule(sys, patch, rps, t, mopt.delta, opt);
    r.rp = static_cast<int>(i);
    rules.push_back(std::move(r));
  }
  return rules;
}

// Integration-map matrices: rows = rest points of unstable dimension k (in
// list order, matching the instanton-complex strata), columns = small
// eigenvectors of the degree-k deformed Laplacian, converted from
// orthonormal coordinates to cochains by M_k^{-1/2} = (1/h, 1, h).
struct integration_map {
  double t = 0.0;
  int N = 0;
  std::array<std::vector<int>, 3> rows;  // rest-point ids per degree
  std::array<mat, 3> matrices;
  double h_residual = 0.0;
  double tail_bound = 0.0;
};

inline Eigen::VectorXd small_to_cochain(const dec_grid& g, int k, const Eigen::VectorXd& v) {
  switch (k) {
    case 0: return v / g.h;
    case 1: return v;
    case 2: return v * g.h;
    default: throw config_error("cochain degree out of range");
  }
}

inline integration_map build_integration_map(const dec_grid& g, const spectral_split& split,
                                             const std::vector<rest_point>& rps,
                                             const std::vector<patch_rule>& rules) {
  if (rules.size() != rps.size())
    throw config_error("one quadrature rule per rest point is required");
  integration_map im;
  im.t = split.t;
  im.N = split.N;
  for (const auto& r : rules) {
    if (std::abs(r.t - split.t) > 1e-12 * std::max(1.0, split.t))
      throw config_error("quadrature rules were built at a different deformation");
    im.h_residual = std::max(im.h_residual, r.h_residual);
    im.tail_bound = std::max(im.tail_bound, r.tail_bound);
  }
  for (size_t i = 0; i < rps.size(); ++i) im.rows[rps[i].morse_index].push_back(static_cast<int>(i));
  for (int k = 0; k < 3; ++k) {
    const int nr = static_cast<int>(im.rows[k].size());
    const int nc = split.deg[k].small_count;
    im.matrices[k].resize(nr, nc);
    for (int c = 0; c < nc; ++c) {
      Eigen::VectorXd u = small_to_cochain(g, k, split.deg[k].vectors.col(c));
      for (int r = 0; r < nr; ++r)
        im.matrices[k](r, c) = apply_patch_rule(g, rules[im.rows[k][r]], u);
    }
  }
  return im;
}

// Chain-map defect of the integration map: for each degree k and each small
// eigenvector v, compare the integral of the deformed differential applied
// to the cochain of v against the instanton-complex differential applied to
// the integrated coefficients.  Frobenius norm over the orthonormal small
// basis, per degree and combined.
struct chain_residual_report {
  std::array<double, 2> by_degree{{0.0, 0.0}};
  double frobenius = 0.0;
};

inline chain_residual_report chain_residual(const dec_grid& g, const witten_model& wm,
                                            const spectral_split& split,
                                            const std::vector<rest_point>& rps,
                                            const std::vector<patch_rule>& rules,
                                            const std::vector<mat>& deltas,
                                            const integration_map& im) {
  chain_residual_report rep;
  double t = split.t;
  double acc2 = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& rows_up = im.rows[k + 1];
    const int nr = static_cast<int>(rows_up.size());
    const int nc = split.deg[k].small_count;
    if (nr == 0 || nc == 0) continue;
    mat lhs(nr, nc);
    spmat B = k == 0 ? wm.B0(t) : wm.B1(t);
    for (int c = 0; c < nc; ++c) {
      // deformed differential on the cochain of v: M_{k+1}^{-1/2}·B_k(t)·v
      Eigen::VectorXd ortho = split.deg[k].vectors.col(c);
      Eigen::VectorXd Du = small_to_cochain(g, k + 1, Eigen::VectorXd(B * ortho));
      for (int r = 0; r < nr; ++r) lhs(r, c) = apply_patch_rule(g, rules[rows_up[r]], Du);
    }
    mat rhs = deltas[k] * im.matrices[k];
    double d2 = (lhs - rhs).squaredNorm();
    rep.by_degree[k] = std::sqrt(d2);
    acc2 += d2;
  }
  rep.frobenius = std::sqrt(acc2);
  return rep;
}

}  // namespace torusflow
