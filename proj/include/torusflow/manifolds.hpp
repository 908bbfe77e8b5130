#pragma once

// Invariant-manifold ray seeding and ball-volume growth estimation.
//
// The unstable (or stable) manifold of a hyperbolic rest point is sampled by
// rays: seeds on a small sphere of the relevant eigenspace, flowed with the
// variational frame.  Volume of the intrinsic radius-r ball is accumulated
// from the Jacobian of the (angle, flow-time) parametrization, with the ray
// parameter delta + arclength standing in for the intrinsic radius.

#include <cmath>
#include <vector>

#include "torusflow/ode.hpp"
#include "torusflow/rest_points.hpp"
#include "torusflow/system.hpp"

namespace torusflow {

enum class manifold_side { unstable, stable };

struct manifold_options {
  double delta = 1e-3;     // seed sphere radius
  double t_budget = 50.0;  // per-ray flow time
  int angular_rays = 96;   // seeds for a 2-dimensional manifold
  flow_options flow;       // variational flag is managed internally
};

struct manifold_ray {
  double angle = 0.0;  // parameter on the seed sphere (2-dim case)
  vec seed_dir;        // unit direction in the eigenspace
  trajectory traj;
};

struct manifold_patch {
  rest_point x;
  manifold_side side = manifold_side::unstable;
  int dim = 0;  // dimension of the manifold
  std::vector<manifold_ray> rays;
};

// Reverse the field (x -> -X(x)); used to expose the stable frame of a rest
// point as the unstable frame of the reversed system.
inline field_system reversed_system(const field_system& sys) {
  field_system rev = sys;
  for (auto& c : rev.X) c = make_unary(expr_kind::neg, c);
  rev.name = sys.name + "_reversed";
  return rev;
}

inline manifold_patch seed_invariant_manifold(const field_system& sys, const rest_point& x,
                                              manifold_side side,
                                              const manifold_options& opt = {}) {
  if (!x.hyperbolic) throw config_error("invariant manifold seeding requires a hyperbolic rest point");
  if (sys.n != 2) throw config_error("manifold seeding implemented for dimension 2");
  manifold_patch patch;
  patch.x = x;
  patch.side = side;

  mat frame;  // n × dim, orthonormal
  int dir = 1;
  if (side == manifold_side::unstable) {
    patch.dim = x.morse_index;
    frame = x.unstable_frame;
  } else {
    patch.dim = sys.n - x.morse_index;
    // stable frame of X = unstable frame of -X at the same point
    rest_point flipped = classify_rest_point(reversed_system(sys), x.position);
    frame = flipped.unstable_frame;
    dir = -1;
  }
  if (patch.dim == 0) return patch;  // the manifold is the point itself

  flow_options fo = opt.flow;
  fo.variational = true;

  std::vector<std::pair<double, vec>> seeds;  // (angle, unit dir in R^n)
  if (patch.dim == 1) {
    vec v = frame.col(0);
    seeds.push_back({0.0, v});
    seeds.push_back({M_PI, vec(-v)});
  } else {
    for (int i = 0; i < opt.angular_rays; ++i) {
      double phi = kTwoPi * (i + 0.5) / opt.angular_rays;
      vec v = std::cos(phi) * frame.col(0) + std::sin(phi) * frame.col(1);
      seeds.push_back({phi, v});
    }
  }

  for (auto& [phi, v] : seeds) {
    manifold_ray ray;
    ray.angle = phi;
    ray.seed_dir = v;
    vec p0 = wrap_point(vec(x.position + opt.delta * v));
    ray.traj = sample_flow(sys, p0, opt.t_budget, dir, fo);
    patch.rays.push_back(std::move(ray));
  }
  return patch;
}

struct growth_estimate {
  int morse_index = 0;
  double C = 0.0;         // fitted exponential rate of log Vol(B(r)) ~ C r + b
  double b = 0.0;
  double residual = 0.0;  // rms deviation of the fit on the fitted range
  bool eg_pass = false;
  bool partial = false;  // a ray exhausted its budget while still travelling
  std::vector<double> radii;
  std::vector<double> vols;
};

// Volume growth of intrinsic balls in the unstable manifold.
inline growth_estimate estimate_growth(const field_system& sys, const rest_point& x,
                                       double r_max, const manifold_options& opt = {}) {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw config_error("r_max must be positive");
  growth_estimate est;
  est.morse_index = x.morse_index;
  const int bins = 32;
  est.radii.resize(bins);
  est.vols.assign(bins, 0.0);
  for (int i = 0; i < bins; ++i) est.radii[i] = r_max * (i + 1) / bins;
  if (x.morse_index == 0) {  // zero-dimensional manifold: Vol == 0
    est.eg_pass = true;
    return est;
  }

  manifold_patch patch = seed_invariant_manifold(sys, x, manifold_side::unstable, opt);
  const double dphi = (patch.dim == 2) ? kTwoPi / opt.angular_rays : 1.0;

  for (const auto& ray : patch.rays) {
    const auto& steps = ray.traj.steps;
    if (steps.size() < 2) continue;
    // per-step density: 1-dim ball volume is arclength; 2-dim integrates
    // |d_phi P x d_s P| with d_phi P = V * (delta * tangent), d_s P = X(P)
    vec tphi(2);
    if (patch.dim == 2) {
      // derivative of the seed circle w.r.t. angle
      double phi = ray.angle;
      tphi = opt.delta * (-std::sin(phi) * x.unstable_frame.col(0) +
                          std::cos(phi) * x.unstable_frame.col(1));
    }
    auto density = [&](const flow_state& s) {
      if (patch.dim == 1) return 1.0;  // d(vol)/d(arclen)
      vec a = s.V * tphi;
      vec b2 = sys.X_at(s.wrapped());
      double cross = std::fabs(a[0] * b2[1] - a[1] * b2[0]);
      double speed = b2.norm();
      if (speed < 1e-300) return 0.0;
      return cross / speed;  // per unit arclength
    };
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
      double ds = steps[k + 1].arclen - steps[k].arclen;
      if (ds <= 0.0) continue;
      double inc = 0.5 * (density(steps[k]) + density(steps[k + 1])) * ds * dphi;
      double r = opt.delta + 0.5 * (steps[k].arclen + steps[k + 1].arclen);
      if (r > r_max) break;
      int bin = std::min(bins - 1, static_cast<int>(std::floor(r / r_max * bins)));
      est.vols[bin] += inc;
    }
    // budget exhausted while the ray is still travelling (not parked at a
    // rest point, not yet past r_max)
    const flow_state& last = steps.back();
    double tail_speed = sys.X_at(last.wrapped()).norm();
    if (last.arclen + opt.delta < r_max && tail_speed > 1e-6 &&
        last.t >= opt.t_budget * (1.0 - 1e-9))
      est.partial = true;
  }
  // cumulative volumes
  for (int i = 1; i < bins; ++i) est.vols[i] += est.vols[i - 1];

  // least-squares fit of log Vol ~ C r + b on the largest half of radii
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int i = bins / 2; i < bins; ++i) {
    if (est.vols[i] <= 0.0) continue;
    double lx = est.radii[i], ly = std::log(est.vols[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    double det = m * sxx - sx * sx;
    est.C = (m * sxy - sx * sy) / det;
    est.b = (sy * sxx - sx * sxy) / det;
    double rss = 0;
    for (int i = bins / 2; i < bins; ++i) {
      if (est.vols[i] <= 0.0) continue;
      double dev = std::log(est.vols[i]) - (est.C * est.radii[i] + est.b);
      rss += dev * dev;
    }
    est.residual = std::sqrt(rss / m);
    est.eg_pass = std::isfinite(est.C) && est.residual <= 0.5;
  }
  return est;
}

}  // namespace torusflow
