#pragma once

// Flat torus T^n = R^n / Z^n: wrapped points, lifted paths, closed
// one-forms (harmonic part + exact potential), and integer homotopy
// classes.  Points are stored reduced to [0,1)^n; paths are tracked as
// lifts in R^n so winding is never reconstructed after the fact.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "torusflow/common.hpp"
#include "torusflow/expr.hpp"
#include "torusflow/jet.hpp"

namespace torusflow {

using vec = Eigen::VectorXd;
using ivec = Eigen::VectorXi;
using mat = Eigen::MatrixXd;
using cvec = Eigen::VectorXcd;

inline vec wrap_point(const vec& x) {
  vec y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = wrap01(x[i]);
  return y;
}

// signed shortest-representative difference a − b, each component in [−1/2, 1/2)
inline vec torus_diff(const vec& a, const vec& b) {
  vec d(a.size());
  for (int i = 0; i < a.size(); ++i) {
    double r = a[i] - b[i];
    r -= std::floor(r + 0.5);
    d[i] = r;
  }
  return d;
}

// distance on the torus (per-coordinate shortest representative)
inline double torus_dist(const vec& a, const vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    double d = dist_mod1(a[i], b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Closed one-form  ω = Σ a_i dx_i + df  with f 1-periodic (possibly absent).
// The cohomology class in the dx-basis is exactly `harmonic`.
struct closed_one_form {
  vec harmonic;        // a ∈ R^n
  expr_ptr potential;  // f, may be null (pure harmonic form)

  int dim() const { return static_cast<int>(harmonic.size()); }

  double potential_at(const vec& x) const {
    return potential ? eval_value(potential, x) : 0.0;
  }

  // components ω_i(x) = a_i + ∂_i f(x)
  vec components(const vec& x) const {
    vec w = harmonic;
    if (potential) w += eval_gradient(potential, x);
    return w;
  }

  // ω(v) at x
  double apply(const vec& x, const vec& v) const { return components(x).dot(v); }
};

// ⟨a, winding⟩: the exact period of ω over a loop of the given class.
inline double pair_form_class(const closed_one_form& omega, const ivec& winding) {
  if (winding.size() != omega.harmonic.size())
    throw config_error("homotopy class dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < winding.size(); ++i) s += omega.harmonic[i] * winding[i];
  return s;
}

// Exact integral of ω along a lifted path: ⟨a, Δlift⟩ + f(end) − f(start).
// Only the endpoints of the lift matter because ω is closed.
inline double lifted_path_integral(const closed_one_form& omega, const vec& lift_start,
                                   const vec& lift_end) {
  double s = omega.harmonic.dot(lift_end - lift_start);
  if (omega.potential) {
    s += eval_value(omega.potential, wrap_point(lift_end)) -
         eval_value(omega.potential, wrap_point(lift_start));
  }
  return s;
}

// Integral of ω along a densely sampled curve given by wrapped points.
// The lift is reconstructed incrementally; consecutive samples must differ
// by < 0.5 in every coordinate or the lift is ambiguous.
inline double path_omega_integral(const closed_one_form& omega,
                                  const std::vector<vec>& samples, vec* lift_end_out = nullptr) {
  if (samples.size() < 2) throw config_error("path needs at least two samples");
  vec lift = samples.front();
  vec prev = samples.front();
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const vec& cur = samples[k];
    for (int i = 0; i < cur.size(); ++i) {
      double d = cur[i] - prev[i];
      d -= std::round(d);  // shortest representative of the increment
      if (std::fabs(d) >= 0.5 - 1e-12)
        throw compute_error("path sampling too coarse: lift ambiguous");
      lift[i] += d;
    }
    prev = cur;
  }
  if (lift_end_out) *lift_end_out = lift;
  return lifted_path_integral(omega, samples.front(), lift);
}

}  // namespace torusflow
