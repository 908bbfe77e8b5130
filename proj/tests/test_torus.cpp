#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "torusflow/system.hpp"

using namespace torusflow;

static const std::string kSys = TORUSFLOW_SYSTEMS_DIR;

TEST_CASE("system file loads with all parts") {
  field_system sys = parse_system(R"(
# comment
dim = 2
field.1 = 6.283185307179586*sinp(x1)
field.2 = 6.283185307179586*sinp(x2)
omega.harmonic = 0.5, -1.25
omega.potential = cosp(x1) + cosp(x2)
eta.harmonic = 0.3, 1+0.25i
eta.potential = 0.1*sinp(x2)
)");
  REQUIRE(sys.n == 2);
  REQUIRE(sys.omega.harmonic[0] == 0.5);
  REQUIRE(sys.omega.harmonic[1] == -1.25);
  REQUIRE(sys.eta.has_value());
  REQUIRE(sys.eta->harmonic[0] == std::complex<double>(0.3, 0.0));
  REQUIRE(sys.eta->harmonic[1] == std::complex<double>(1.0, 0.25));
  vec p(2);
  p << 0.25, 0.0;
  REQUIRE(sys.X_at(p)[0] == Catch::Approx(kTwoPi).epsilon(1e-15));
  REQUIRE(sys.X_at(p)[1] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("loader rejects malformed systems") {
  auto bad = [](const char* text) { REQUIRE_THROWS_AS(parse_system(text), config_error); };
  bad("field.1 = x1");                                        // missing dim
  bad("dim = 2\nfield.1 = 1\nomega.harmonic = 0,0");          // missing field.2
  bad("dim = 2\nfield.1 = 1\nfield.2 = 1");                   // missing omega
  bad("dim = 4\nfield.1 = 1");                                // dim out of range
  bad("dim = 2\nfield.1 = 1\nfield.2 = 1\nfield.3 = 1\nomega.harmonic = 0,0");
  bad("dim = 2\nfield.1 = x3\nfield.2 = 1\nomega.harmonic = 0,0");   // var beyond dim
  bad("dim = 2\nfield.1 = sin(x1)\nfield.2 = 1\nomega.harmonic = 0,0");  // not periodic
  bad("dim = 2\nfield.1 = 1/sinp(x1)\nfield.2 = 1\nomega.harmonic = 0,0");  // divisor zero
  bad("dim = 2\nfield.1 = 1\nfield.2 = 1\nomega.harmonic = 0");   // wrong length
  bad("dim = 2\nfield.1 = 1\nfield.2 = 1\nomega.harmonic = 0,1i");  // complex omega
  bad("dim = 2\nfield.1 = 1 +\nfield.2 = 1\nomega.harmonic = 0,0");  // parse error
  bad("dim = 2\nbogus = 1");                                  // unknown key
  // safe divisor loads fine
  REQUIRE_NOTHROW(
      parse_system("dim = 2\nfield.1 = 1/(2 + cosp(x1))\nfield.2 = 1\nomega.harmonic = 0,0"));
}

TEST_CASE("shipped system files load") {
  for (const char* f :
       {"grad_cosp.sys", "two_orbits.sys", "single_orbit.sys", "rotating.sys",
        "rotating_exact.sys"}) {
    field_system sys = load_system(kSys + "/" + f);
    REQUIRE(sys.n == 2);
  }
  REQUIRE_THROWS_AS(load_system(kSys + "/does_not_exist.sys"), config_error);
}

TEST_CASE("class pairing is the inner product with the harmonic part") {
  closed_one_form w;
  w.harmonic = vec(2);

  w.harmonic << 1, 0;
  ivec g(2);
  g << 3, -2;
  REQUIRE(pair_form_class(w, g) == 3.0);

  w.harmonic << 0, 0;
  REQUIRE(pair_form_class(w, g) == 0.0);

  w.harmonic << 0.5, 1.25;
  g << 2, 2;
  REQUIRE(pair_form_class(w, g) == 3.5);

  // additivity (group homomorphism on Z^n)
  std::mt19937 rng(5150u);
  std::uniform_int_distribution<int> wind(-5, 5);
  for (int k = 0; k < 100; ++k) {
    ivec a(2), b(2);
    a << wind(rng), wind(rng);
    b << wind(rng), wind(rng);
    REQUIRE(pair_form_class(w, a + b) ==
            Catch::Approx(pair_form_class(w, a) + pair_form_class(w, b)).margin(1e-14));
  }
}

TEST_CASE("path integrals of closed forms") {
  // omega = dx1 over a straight lifted segment (0,0) -> (1,0)
  closed_one_form w;
  w.harmonic = vec(2);
  w.harmonic << 1, 0;
  std::vector<vec> seg;
  for (int k = 0; k <= 10; ++k) {
    vec p(2);
    p << wrap01(k / 10.0), 0.0;
    seg.push_back(p);
  }
  REQUIRE(path_omega_integral(w, seg) == Catch::Approx(1.0).margin(1e-14));

  // exact form over any closed loop: telescoping, ~0
  closed_one_form ex;
  ex.harmonic = vec::Zero(2);
  ex.potential = parse_expression("0.3*sinp(x1)*cosp(x2)");
  std::vector<vec> loop;
  for (int k = 0; k <= 200; ++k) {
    double t = k / 200.0;
    vec p(2);
    p << wrap01(2 * t + 0.1 * std::sin(kTwoPi * t)), wrap01(-t + 0.05 * std::cos(2 * kTwoPi * t) - 0.05);
    loop.push_back(p);
  }
  loop.back() = loop.front();  // exact closure
  REQUIRE(path_omega_integral(ex, loop) == Catch::Approx(0.0).margin(1e-12));

  // omega = 2dx1 + d(0.1 sinp(x2)) over a lifted path (0,0) -> (1.5, 0.25)
  closed_one_form mix;
  mix.harmonic = vec(2);
  mix.harmonic << 2, 0;
  mix.potential = parse_expression("0.1*sinp(x2)");
  std::vector<vec> path;
  for (int k = 0; k <= 60; ++k) {
    double t = k / 60.0;
    vec p(2);
    p << wrap01(1.5 * t), wrap01(0.25 * t);
    path.push_back(p);
  }
  REQUIRE(path_omega_integral(mix, path) == Catch::Approx(3.1).margin(1e-12));

  // coarse sampling with ambiguous lift -> error
  std::vector<vec> coarse;
  vec p0(2), p1(2);
  p0 << 0.0, 0.0;
  p1 << 0.5, 0.0;
  coarse = {p0, p1};
  REQUIRE_THROWS_AS(path_omega_integral(w, coarse), compute_error);
}

TEST_CASE("closed-loop integral depends only on the winding") {
  closed_one_form w;
  w.harmonic = vec(2);
  w.harmonic << 0.8, -1.3;
  w.potential = parse_expression("0.2*cosp(x1)*sinp(x2) + 0.05*cosp(x2)");
  std::mt19937 rng(31337u);
  std::uniform_int_distribution<int> wind(-3, 3);
  std::uniform_real_distribution<double> amp(-0.2, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    int w1 = wind(rng), w2 = wind(rng);
    double a1 = amp(rng), a2 = amp(rng);
    std::vector<vec> loop;
    int Nsamp = 400;
    for (int k = 0; k <= Nsamp; ++k) {
      double t = double(k) / Nsamp;
      vec p(2);
      p << wrap01(w1 * t + a1 * std::sin(kTwoPi * t)),
          wrap01(w2 * t + a2 * std::sin(2 * kTwoPi * t));
      loop.push_back(p);
    }
    loop.back() = loop.front();
    ivec g(2);
    g << w1, w2;
    REQUIRE(path_omega_integral(w, loop) ==
            Catch::Approx(pair_form_class(w, g)).margin(1e-10));
  }
}

TEST_CASE("wrapped distance and lift integral consistency") {
  vec a(2), b(2);
  a << 0.95, 0.1;
  b << 0.05, 0.9;
  REQUIRE(torus_dist(a, b) == Catch::Approx(std::sqrt(0.01 + 0.04)).epsilon(1e-12));

  closed_one_form w;
  w.harmonic = vec(2);
  w.harmonic << 2, 3;
  w.potential = parse_expression("0.1*sinp(x1)");
  vec l0(2), l1(2);
  l0 << 0.2, 0.4;
  l1 << 3.2, -1.6;
  double direct = lifted_path_integral(w, l0, l1);
  double hand = 2.0 * 3.0 + 3.0 * (-2.0) + 0.1 * std::sin(kTwoPi * 0.2) -
                0.1 * std::sin(kTwoPi * 0.2);
  REQUIRE(direct == Catch::Approx(hand).margin(1e-14));
}
