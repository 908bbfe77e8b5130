#pragma once

// Dense-grid check of the descent property of the one-form against the field:
// omega(X) <= 0 everywhere, vanishing only at rest points, plus a fitted
// quadratic slack constant (reported, never hard-failed).

#include <vector>

#include "torusflow/rest_points.hpp"
#include "torusflow/system.hpp"

namespace torusflow {

struct lyapunov_report {
  bool is_lyapunov = false;   // omega(X) <= tol on the whole grid
  double max_value = 0.0;     // sup of omega(X) over the grid
  double fitted_c = 0.0;      // inf of -omega(X)/dist^2 away from rest points
  int grid = 0;
  std::vector<vec> violations;  // grid points with omega(X) > tol (capped)
};

inline lyapunov_report check_lyapunov(const field_system& sys,
                                      const std::vector<rest_point>& rest_points,
                                      int grid = 128) {
  if (grid < 8) throw config_error("lyapunov grid must be at least 8");
  lyapunov_report rep;
  rep.grid = grid;
  const int n = sys.n;
  const double tol = 1e-10;
  const double near_radius = 0.05;  // quadratic slack fitted outside this radius

  double worst = -std::numeric_limits<double>::infinity();
  double c_fit = std::numeric_limits<double>::infinity();
  std::vector<int> idx(n, 0);
  vec p(n);
  bool done = false;
  while (!done) {
    for (int d = 0; d < n; ++d) p[d] = static_cast<double>(idx[d]) / grid;
    double v = sys.omega_X(p);
    worst = std::max(worst, v);
    if (v > tol && rep.violations.size() < 32) rep.violations.push_back(p);
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& rp : rest_points) dist = std::min(dist, torus_dist(p, rp.position));
    if (rest_points.empty()) {
      c_fit = std::min(c_fit, -v);  // no rest points: slack is the constant bound
    } else if (dist >= near_radius) {
      c_fit = std::min(c_fit, -v / (dist * dist));
    }
    // advance multi-index
    done = true;
    for (int d = 0; d < n; ++d) {
      if (++idx[d] < grid) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
  }
  rep.max_value = worst;
  rep.fitted_c = std::isfinite(c_fit) ? c_fit : 0.0;
  rep.is_lyapunov = worst <= tol;
  return rep;
}

}  // namespace torusflow
