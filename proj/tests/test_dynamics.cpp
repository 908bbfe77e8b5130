#include <catch2/catch_amalgamated.hpp>

#include "torusflow/ode.hpp"
#include "torusflow/rest_points.hpp"

using namespace torusflow;

static const std::string kSys = TORUSFLOW_SYSTEMS_DIR;

namespace {

field_system reversed(const field_system& sys) {
  field_system r = sys;
  for (int i = 0; i < r.n; ++i) r.X[i] = make_unary(expr_kind::neg, sys.X[i]);
  return r;
}

}  // namespace

TEST_CASE("constant field integrates exactly") {
  field_system sys = parse_system("dim = 2\nfield.1 = 1\nfield.2 = 0\nomega.harmonic = 1,0");
  vec p0 = vec::Zero(2);
  flow_state end = integrate_flow(sys, p0, 2.5, +1);
  REQUIRE(end.lift[0] == Catch::Approx(2.5).epsilon(1e-12));
  REQUIRE(end.lift[1] == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(end.wrapped()[0] == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(end.omega_int == Catch::Approx(2.5).epsilon(1e-12));  // omega = dx1
  REQUIRE(end.arclen == Catch::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("gradient flow descends to the minimum") {
  field_system sys = load_system(kSys + "/grad_cosp.sys");
  vec p0(2);
  p0 << 0.25, 0.25;
  flow_state end = integrate_flow(sys, p0, 50.0, +1);
  REQUIRE(torus_dist(end.wrapped(), (vec(2) << 0.5, 0.5).finished()) < 1e-8);
  // omega = df decreases along the flow: total integral = f(end) - f(start) < 0
  double f0 = std::cos(kTwoPi * 0.25) * 2;
  double f1 = std::cos(kTwoPi * 0.5) * 2;
  REQUIRE(end.omega_int == Catch::Approx(f1 - f0).margin(1e-8));
}

TEST_CASE("time reversal returns to the start") {
  // bounded-expansion system so the group-property check is well conditioned:
  // backward integration amplifies endpoint error by at most e^{‖DX‖·T} ≈ 1e2
  field_system sys = load_system(kSys + "/two_orbits.sys");
  vec p0(2);
  p0 << 0.37, 0.81;
  flow_state fwd = integrate_flow(sys, p0, 0.75, +1);
  flow_state back = integrate_flow(sys, fwd.wrapped(), 0.75, -1);
  REQUIRE(torus_dist(back.wrapped(), p0) < 1e-9);  // 10x the ODE tolerance
  // omega integral reverses sign
  REQUIRE(back.omega_int == Catch::Approx(-fwd.omega_int).margin(1e-9));
}

TEST_CASE("lift is additive over concatenated intervals") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  vec p0(2);
  p0 << 0.0, 0.3;
  flow_state a = integrate_flow(sys, p0, 1.7, +1);
  flow_state b = integrate_flow(sys, a.wrapped(), 2.3, +1);
  flow_state whole = integrate_flow(sys, p0, 4.0, +1);
  // b's lift starts from the wrapped point; add a's integer offset back
  vec total = a.lift + (b.lift - a.wrapped());
  REQUIRE((total - whole.lift).norm() < 1e-9);
  REQUIRE(a.omega_int + b.omega_int == Catch::Approx(whole.omega_int).margin(1e-9));
}

TEST_CASE("variational frame reproduces the known transverse multiplier") {
  // along x2=0 of X=(1, sinp(x2)): dv/dt = 2π cosp(0) v = 2π v over one period
  field_system sys = load_system(kSys + "/two_orbits.sys");
  flow_options opt;
  opt.variational = true;
  vec p0 = vec::Zero(2);
  flow_state end = integrate_flow(sys, p0, 1.0, +1, opt);
  REQUIRE(end.V(1, 1) == Catch::Approx(std::exp(kTwoPi)).epsilon(1e-7));
  REQUIRE(end.V(0, 0) == Catch::Approx(1.0).epsilon(1e-10));
  REQUIRE(end.V(1, 0) == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("step underflow reports an error") {
  // field with a strong divisor spike: 1/(small + distance-like factor)
  field_system sys = parse_system(
      "dim = 2\nfield.1 = 1/(0.0001 + (1 - cosp(x1))^2)\nfield.2 = 0\nomega.harmonic = 0,0");
  vec p0(2);
  p0 << 0.4, 0.0;
  flow_options opt;
  opt.h_min = 1e-6;  // force underflow quickly near the spike at x1=0
  REQUIRE_THROWS_AS(integrate_flow(sys, p0, 50.0, +1, opt), compute_error);
}

TEST_CASE("rest points of the exact gradient system") {
  field_system sys = load_system(kSys + "/grad_cosp.sys");
  auto rps = find_rest_points(sys);
  REQUIRE(rps.size() == 4);
  // sorted by morse index: (0), (1), (1), (2)
  REQUIRE(rps[0].morse_index == 0);
  REQUIRE(rps[1].morse_index == 1);
  REQUIRE(rps[2].morse_index == 1);
  REQUIRE(rps[3].morse_index == 2);
  // half-integer lattice positions within 1e-10
  auto at = [&](const rest_point& r, double x, double y) {
    vec q(2);
    q << x, y;
    return torus_dist(r.position, q) < 1e-10;
  };
  REQUIRE(at(rps[0], 0.5, 0.5));  // minimum of f is the sink of -grad... index 0
  REQUIRE(at(rps[3], 0.0, 0.0));  // maximum: source, index 2
  REQUIRE((at(rps[1], 0.0, 0.5) || at(rps[1], 0.5, 0.0)));
  REQUIRE((at(rps[2], 0.0, 0.5) || at(rps[2], 0.5, 0.0)));
  for (auto& r : rps) {
    REQUIRE(r.hyperbolic);
    REQUIRE(r.frame_residual <= 1e-8);
    REQUIRE(r.unstable_frame.cols() == r.morse_index);
    // -grad flow of f: eigenvalues of D(-grad f) = -Hess f: at the source both
    // +4π², at the sink both -4π²... sign check via morse index only.
    REQUIRE(r.eigenvalues.size() == 2);
  }
  // eigenvalues at the source are exactly +(2π)² each (Hessian of -cosp sum)
  REQUIRE(rps[3].eigenvalues[0].real() == Catch::Approx(kTwoPi * kTwoPi).epsilon(1e-9));
}

TEST_CASE("rest-point-free fields report none") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  REQUIRE(find_rest_points(sys).empty());
  field_system rot = load_system(kSys + "/rotating.sys");
  REQUIRE(find_rest_points(rot).empty());
}

TEST_CASE("degenerate root is reported non-hyperbolic") {
  field_system sys = parse_system(
      "dim = 2\nfield.1 = sinp(x1)^2\nfield.2 = sinp(x2)\nomega.harmonic = 0,0");
  auto rps = find_rest_points(sys);
  bool found = false;
  for (auto& r : rps) {
    if (torus_dist(r.position, vec::Zero(2)) < 1e-4) {
      found = true;
      REQUIRE_FALSE(r.hyperbolic);
    }
  }
  REQUIRE(found);
}

TEST_CASE("single_orbit system: two rest points matching the analytic construction") {
  field_system sys = load_system(kSys + "/single_orbit.sys");
  auto rps = find_rest_points(sys);
  REQUIRE(rps.size() == 2);
  int counts[3] = {0, 0, 0};
  for (auto& r : rps) {
    REQUIRE(r.hyperbolic);
    counts[r.morse_index]++;
  }
  // no sink: every trajectory off the stable manifold falls onto the orbit
  REQUIRE(counts[0] == 0);
  REQUIRE(counts[1] == 1);
  REQUIRE(counts[2] == 1);

  // rest points sit on x2 = 1/4 where sinp(x1) = 5/6
  double st = std::asin(5.0 / 6.0) / kTwoPi;
  auto near_rp = [&](double x, double y, int index) {
    for (auto& r : rps) {
      vec q(2);
      q << x, y;
      if (torus_dist(r.position, q) < 1e-9) return r.morse_index == index;
    }
    return false;
  };
  REQUIRE(near_rp(st, 0.25, 2));          // source
  REQUIRE(near_rp(0.5 - st, 0.25, 1));    // saddle
}

TEST_CASE("index sum and reversal laws") {
  for (const char* f : {"grad_cosp.sys", "single_orbit.sys"}) {
    field_system sys = load_system(kSys + "/" + f);
    auto rps = find_rest_points(sys);
    int chi = 0;
    for (auto& r : rps) chi += (r.morse_index % 2 == 0) ? 1 : -1;
    REQUIRE(chi == 0);  // Euler characteristic of T^2

    field_system rev = reversed(sys);
    auto rrps = find_rest_points(rev);
    REQUIRE(rrps.size() == rps.size());
    for (auto& r : rps) {
      bool matched = false;
      for (auto& q : rrps)
        if (torus_dist(r.position, q.position) < 1e-8) {
          matched = true;
          REQUIRE(r.morse_index + q.morse_index == 2);
        }
      REQUIRE(matched);
    }
  }
}

TEST_CASE("lyapunov sign identity for the shipped systems") {
  // single_orbit is built so omega(X) = -|omega|^2 exactly
  field_system sys = load_system(kSys + "/single_orbit.sys");
  for (double u = 0.05; u < 1.0; u += 0.13)
    for (double v = 0.03; v < 1.0; v += 0.11) {
      vec p(2);
      p << u, v;
      double wx = sys.omega_X(p);
      double n2 = sys.omega.components(p).squaredNorm();
      REQUIRE(wx == Catch::Approx(-n2).margin(1e-12));
    }
}
