#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <string>

#include "torusflow/orbit.hpp"
#include "torusflow/system.hpp"

using namespace torusflow;

static const std::string kSys = TORUSFLOW_SYSTEMS_DIR;

namespace {

using sig = std::pair<class_key, int>;  // (winding, covering period)

std::set<sig> signatures(const orbit_search& s) {
  std::set<sig> out;
  for (const auto& ob : s.list) out.insert({to_key(ob.winding), ob.period});
  return out;
}

}  // namespace

TEST_CASE("two-orbit flow: primitives match the transverse oracle") {
  // transverse dynamics dy/dt = sin(2*pi*y) over one x1 loop: rest at y = 0
  // (repelling, multiplier e^{2pi}) and y = 1/2 (attracting, e^{-2pi})
  field_system sys = load_system(kSys + "/two_orbits.sys");
  orbit_search found = find_closed_orbits(sys, 1.5);
  REQUIRE(found.complete);
  REQUIRE(found.warnings.empty());
  REQUIRE(found.list.size() == 2);

  const closed_orbit* rep = nullptr;
  const closed_orbit* att = nullptr;
  for (const auto& ob : found.list) {
    double y = ob.base[1];
    if (std::min(y, 1.0 - y) < 0.1) rep = &ob;
    if (std::fabs(y - 0.5) < 0.1) att = &ob;
  }
  REQUIRE(rep != nullptr);
  REQUIRE(att != nullptr);

  for (const closed_orbit* ob : {rep, att}) {
    REQUIRE(ob->time_period == Catch::Approx(1.0).epsilon(1e-8));
    REQUIRE(ob->winding == (ivec(2) << 1, 0).finished());
    REQUIRE(ob->period == 1);
    REQUIRE(ob->nondegenerate);
    REQUIRE(ob->cost == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(ob->monodromy.rows() == 1);
  }
  REQUIRE(std::fabs(rep->monodromy(0, 0) - std::exp(kTwoPi)) < 1e-5);
  REQUIRE(std::fabs(att->monodromy(0, 0) - std::exp(-kTwoPi)) < 1e-5);
  REQUIRE(rep->epsilon == +1);
  REQUIRE(att->epsilon == -1);
}

TEST_CASE("variational monodromy agrees with the finite-difference return map") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  orbit_search found = find_closed_orbits(sys, 1.5);
  REQUIRE(found.list.size() == 2);
  for (const auto& ob : found.list) {
    mat fd = detail::return_map_jacobian_fd(sys, ob.base, ob.time_period, ob.winding, 1e-6,
                                            flow_options{});
    // mixed tolerance: the centered-difference probe carries an absolute
    // noise floor from integrator endpoint error, so a strict relative bound
    // is unattainable for strongly contracting return maps
    REQUIRE(std::fabs(fd(0, 0) - ob.monodromy(0, 0)) <
            1e-5 * std::max(1.0, std::fabs(ob.monodromy(0, 0))));
  }
}

TEST_CASE("iterates carry powered monodromy and the exact sign identity") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  orbit_search found = find_closed_orbits(sys, 10.0);
  REQUIRE(found.complete);
  REQUIRE(found.list.size() == 20);  // two families, k = 1..10

  for (const auto& ob : found.list) {
    REQUIRE(ob.time_period == Catch::Approx(double(ob.period)).epsilon(1e-8));
    REQUIRE(ob.winding[0] == ob.period);
    REQUIRE(ob.winding[1] == 0);
    REQUIRE(ob.cost == Catch::Approx(double(ob.period)).margin(1e-10));

    // the sign identity recomputed from the primitive's monodromy
    const closed_orbit& prim = found.list[ob.primitive];
    REQUIRE(prim.period == 1);
    mat Mk = mat::Identity(1, 1);
    for (int k = 0; k < ob.period; ++k) Mk = Mk * prim.monodromy;
    REQUIRE((Mk - ob.monodromy).norm() < 1e-9 * Mk.norm());
    double det = (Mk - mat::Identity(1, 1)).determinant();
    REQUIRE(ob.epsilon == (det > 0 ? +1 : -1));

    // scalar oracle: e^{2 pi k} - 1 > 0 and e^{-2 pi k} - 1 < 0
    if (prim.monodromy(0, 0) > 1.0)
      REQUIRE(ob.epsilon == +1);
    else
      REQUIRE(ob.epsilon == -1);
  }
}

TEST_CASE("orbit enumeration is finite and monotone in the cutoff") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  orbit_search lo = find_closed_orbits(sys, 3.0);
  orbit_search hi = find_closed_orbits(sys, 10.0);
  REQUIRE(lo.list.size() == 6);
  REQUIRE(hi.list.size() == 20);
  std::set<sig> slo = signatures(lo), shi = signatures(hi);
  for (const auto& s : slo) REQUIRE(shi.count(s) == 1);
}

TEST_CASE("zeta counting cancels exactly for the symmetric two-orbit flow") {
  field_system sys = load_system(kSys + "/two_orbits.sys");
  orbit_counting cf = build_orbit_counting(find_closed_orbits(sys, 10.0), 10.0);
  REQUIRE(cf.complete);
  REQUIRE(cf.entries.size() == 10);  // classes (k,0), each an exact rational zero
  for (int k = 1; k <= 10; ++k) {
    ivec g(2);
    g << k, 0;
    REQUIRE(zeta_counting(cf, g) == rational(0));
  }
  ivec none(2);
  none << 0, 1;
  REQUIRE(zeta_counting(cf, none) == rational(0));  // empty class: empty sum
}

TEST_CASE("shifted transverse zeros still cancel") {
  // dy/dt = 0.2 + sin(2*pi*y): two simple zeros, one attracting one repelling,
  // both orbits winding (1,0)
  field_system sys =
      parse_system("dim = 2\nfield.1 = 1\nfield.2 = 0.2 + sinp(x2)\nomega.harmonic = -1,0");
  orbit_search found = find_closed_orbits(sys, 2.0);
  REQUIRE(found.list.size() == 4);  // two families, k = 1..2
  orbit_counting cf = build_orbit_counting(found, 2.0);
  for (int k = 1; k <= 2; ++k) {
    ivec g(2);
    g << k, 0;
    REQUIRE(zeta_counting(cf, g) == rational(0));
  }
}

TEST_CASE("gradient flow has no closed orbits") {
  field_system sys = load_system(kSys + "/grad_cosp.sys");
  orbit_search found = find_closed_orbits(sys, 10.0);
  REQUIRE(found.list.empty());
  REQUIRE(found.complete);
}

TEST_CASE("translation flow is reported as degenerate, not counted") {
  field_system sys = parse_system("dim = 2\nfield.1 = 1\nfield.2 = 0\nomega.harmonic = -1,0");
  orbit_search found = find_closed_orbits(sys, 5.0);
  REQUIRE(found.list.empty());
  REQUIRE_FALSE(found.complete);
  bool mentioned = false;
  for (const auto& w : found.warnings) mentioned = mentioned || w.find("degenerate") != std::string::npos;
  REQUIRE(mentioned);
}

TEST_CASE("asymmetric system: single attracting orbit and its log-series") {
  field_system sys = load_system(kSys + "/single_orbit.sys");
  orbit_search found = find_closed_orbits(sys, 25.0);
  REQUIRE(found.complete);
  REQUIRE(found.list.size() == 25);  // one primitive, iterates to cost 25

  const closed_orbit& prim = found.list[0];
  REQUIRE(prim.period == 1);
  REQUIRE(prim.time_period == Catch::Approx(1.0).epsilon(1e-7));
  REQUIRE(prim.winding == (ivec(2) << -1, 0).finished());
  REQUIRE(std::fabs(prim.base[1]) < 1e-6);
  // multiplier is exactly e^{-2pi} by construction of the rotation profile
  REQUIRE(std::fabs(prim.monodromy(0, 0) - std::exp(-kTwoPi)) < 1e-9);
  REQUIRE(prim.epsilon == -1);

  orbit_counting cf = build_orbit_counting(found, 25.0);
  for (int k = 1; k <= 3; ++k) {
    ivec g(2);
    g << -k, 0;
    REQUIRE(zeta_counting(cf, g) == rational(-1, k));  // a nonvanishing counting function
  }

  dirichlet_series zs = laplace(cf, sys.omega);
  for (double t : {1.0, 2.0, 4.0}) {
    double oracle = std::log(1.0 - std::exp(-t));
    REQUIRE(std::fabs(eval(zs, t).real() - oracle) < 1e-10);
  }
}
