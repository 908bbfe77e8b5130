// Lyapunov property grid checks, invariant-manifold ray seeding, and
// ball-volume growth estimation.
//
// Oracles: exact constant/gradient identities for the descent property, the
// torus area (= 1) for the source's 2-dimensional unstable manifold, summed
// ray arclengths for 1-dimensional ones, and long-time convergence of rays
// onto the rest-point set.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "torusflow/lyapunov.hpp"
#include "torusflow/manifolds.hpp"
#include "torusflow/system.hpp"

using namespace torusflow;

namespace {

field_system load_sys(const std::string& name) {
  return load_system(std::string(TORUSFLOW_SYSTEMS_DIR) + "/" + name + ".sys");
}

double dist_to_any(const vec& p, const std::vector<rest_point>& rps) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rp : rps) best = std::min(best, torus_dist(p, rp.position));
  return best;
}

}  // namespace

TEST_CASE("descent property holds for gradient examples") {
  for (const char* name : {"grad_cosp", "single_orbit"}) {
    field_system sys = load_sys(name);
    auto rps = find_rest_points(sys);
    lyapunov_report rep = check_lyapunov(sys, rps, 128);
    INFO(name);
    REQUIRE(rep.is_lyapunov);
    REQUIRE(rep.max_value <= 1e-10);
    REQUIRE(rep.violations.empty());
    REQUIRE(rep.fitted_c > 0.0);
  }
}

TEST_CASE("descent property for a rest-point-free field with constant slack") {
  field_system sys = load_sys("two_orbits");  // omega = -dx1, omega(X) = -1
  lyapunov_report rep = check_lyapunov(sys, {}, 64);
  REQUIRE(rep.is_lyapunov);
  REQUIRE(rep.max_value == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(rep.fitted_c == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("sign violation is detected and reported") {
  field_system sys;
  sys.n = 2;
  sys.name = "drift";
  sys.X = {parse_expression("1"), parse_expression("0")};
  sys.omega.harmonic = vec(2);
  sys.omega.harmonic << 1.0, 0.0;  // omega(X) = +1 everywhere
  lyapunov_report rep = check_lyapunov(sys, {}, 32);
  REQUIRE_FALSE(rep.is_lyapunov);
  REQUIRE(rep.max_value == Catch::Approx(1.0).margin(1e-12));
  REQUIRE_FALSE(rep.violations.empty());
}

TEST_CASE("saddle rays leave along the unstable eigendirection and land on rest points") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  // saddle at (0, 1/2): unstable along x1
  const rest_point* saddle = nullptr;
  for (const auto& rp : rps)
    if (rp.morse_index == 1 && torus_dist(rp.position, (vec(2) << 0.0, 0.5).finished()) < 1e-8)
      saddle = &rp;
  REQUIRE(saddle != nullptr);

  manifold_patch patch = seed_invariant_manifold(sys, *saddle, manifold_side::unstable);
  REQUIRE(patch.dim == 1);
  REQUIRE(patch.rays.size() == 2);
  for (const auto& ray : patch.rays) {
    REQUIRE(std::fabs(ray.seed_dir[1]) < 1e-8);  // eigendirection is e1
    const auto& last = ray.traj.steps.back();
    REQUIRE(dist_to_any(last.wrapped(), rps) < 1e-3);
  }
  // the two rays leave in opposite directions
  REQUIRE(patch.rays[0].seed_dir.dot(patch.rays[1].seed_dir) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("stable-side rays of a saddle flow backward to the source") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  const rest_point* saddle = nullptr;
  const rest_point* source = nullptr;
  for (const auto& rp : rps) {
    if (rp.morse_index == 2) source = &rp;
    if (rp.morse_index == 1 && torus_dist(rp.position, (vec(2) << 0.0, 0.5).finished()) < 1e-8)
      saddle = &rp;
  }
  REQUIRE(saddle != nullptr);
  REQUIRE(source != nullptr);

  manifold_patch patch = seed_invariant_manifold(sys, *saddle, manifold_side::stable);
  REQUIRE(patch.dim == 1);
  REQUIRE(patch.rays.size() == 2);
  for (const auto& ray : patch.rays) {
    REQUIRE(std::fabs(ray.seed_dir[0]) < 1e-8);  // stable eigendirection is e2
    const auto& last = ray.traj.steps.back();
    REQUIRE(torus_dist(last.wrapped(), source->position) < 1e-3);
  }
}

TEST_CASE("index-0 manifold is the point itself") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  REQUIRE(rps[0].morse_index == 0);
  manifold_patch patch = seed_invariant_manifold(sys, rps[0], manifold_side::unstable);
  REQUIRE(patch.dim == 0);
  REQUIRE(patch.rays.empty());

  growth_estimate est = estimate_growth(sys, rps[0], 2.0);
  REQUIRE(est.eg_pass);
  for (double v : est.vols) REQUIRE(v == 0.0);
}

TEST_CASE("source rays cover the torus and land on the rest-point set") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  const rest_point* source = nullptr;
  for (const auto& rp : rps)
    if (rp.morse_index == 2) source = &rp;
  REQUIRE(source != nullptr);

  manifold_options opt;
  opt.angular_rays = 16;
  manifold_patch patch = seed_invariant_manifold(sys, *source, manifold_side::unstable, opt);
  REQUIRE(patch.dim == 2);
  REQUIRE(patch.rays.size() == 16);
  for (const auto& ray : patch.rays)
    REQUIRE(dist_to_any(ray.traj.steps.back().wrapped(), rps) < 1e-3);
}

TEST_CASE("volume growth of a 1-dimensional unstable manifold saturates") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  const rest_point* saddle = nullptr;
  for (const auto& rp : rps)
    if (rp.morse_index == 1 && torus_dist(rp.position, (vec(2) << 0.0, 0.5).finished()) < 1e-8)
      saddle = &rp;

  growth_estimate est = estimate_growth(sys, *saddle, 3.0);
  REQUIRE_FALSE(est.partial);
  // both rays run from the saddle to the sink: total length ~ 1
  REQUIRE(est.vols.back() == Catch::Approx(1.0).margin(0.05));
  // monotone cumulative volumes
  for (std::size_t i = 1; i < est.vols.size(); ++i) REQUIRE(est.vols[i] >= est.vols[i - 1]);
  // saturated: fitted growth rate near zero on the largest radii
  REQUIRE(std::fabs(est.C) < 0.2);
  REQUIRE(est.eg_pass);
}

TEST_CASE("volume growth of the source's 2-dimensional manifold reaches the torus area") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  const rest_point* source = nullptr;
  for (const auto& rp : rps)
    if (rp.morse_index == 2) source = &rp;

  manifold_options opt;
  opt.angular_rays = 160;
  growth_estimate est = estimate_growth(sys, *source, 3.0, opt);
  REQUIRE_FALSE(est.partial);
  // the unstable manifold fills the torus exactly once: area -> 1
  REQUIRE(est.vols.back() == Catch::Approx(1.0).margin(0.05));
  REQUIRE(std::fabs(est.C) < 0.3);  // sub-linear log-volume at saturation
  REQUIRE(est.eg_pass);
}

TEST_CASE("exhausted budget is flagged as partial") {
  field_system sys = load_sys("grad_cosp");
  auto rps = find_rest_points(sys);
  const rest_point* source = nullptr;
  for (const auto& rp : rps)
    if (rp.morse_index == 2) source = &rp;

  manifold_options opt;
  opt.angular_rays = 8;
  opt.t_budget = 0.05;  // rays are still mid-flight
  growth_estimate est = estimate_growth(sys, *source, 3.0, opt);
  REQUIRE(est.partial);
}
