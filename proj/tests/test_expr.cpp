#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "torusflow/expr.hpp"
#include "torusflow/jet.hpp"

using namespace torusflow;

namespace {

// Random well-formed expressions in x1..x3.  Denominators are kept away
// from zero by construction (square plus positive constant).
expr_ptr random_expr(std::mt19937& rng, int depth) {
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_int_distribution<int> var(1, 3);
  if (depth <= 0) {
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) return make_number(coef(rng));
    return make_var(var(rng));
  }
  switch (std::uniform_int_distribution<int>(0, 11)(rng)) {
    case 0:
      return make_binary(expr_kind::add, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 1:
      return make_binary(expr_kind::sub, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 2:
    case 3:
      return make_binary(expr_kind::mul, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 4: {
      expr_ptr den = make_binary(
          expr_kind::add, make_pow(random_expr(rng, depth - 1), 2),
          make_number(std::uniform_real_distribution<double>(0.5, 2.0)(rng)));
      return make_binary(expr_kind::divide, random_expr(rng, depth - 1), den);
    }
    case 5:
      return make_pow(random_expr(rng, depth - 1), std::uniform_int_distribution<int>(0, 4)(rng));
    case 6:
      return make_unary(expr_kind::neg, random_expr(rng, depth - 1));
    case 7:
      return make_unary(expr_kind::sin, random_expr(rng, depth - 1));
    case 8:
      return make_unary(expr_kind::cos, random_expr(rng, depth - 1));
    case 9:
      return make_unary(expr_kind::sinp, random_expr(rng, depth - 1));
    case 10:
      return make_unary(expr_kind::cosp, random_expr(rng, depth - 1));
    default: {
      if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) return make_number(coef(rng));
      return make_var(var(rng));
    }
  }
}

bool tame(double v) { return std::isfinite(v) && std::fabs(v) < 1.0e6; }

}  // namespace

TEST_CASE("gradient matches central finite differences on random expressions") {
  std::mt19937 rng(20260816u);
  std::uniform_real_distribution<double> pt(-2.0, 2.0);
  int done = 0, attempts = 0;
  while (done < 1000 && attempts < 20000) {
    ++attempts;
    expr_ptr e = random_expr(rng, 4);
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x[i] = pt(rng);
    double v;
    Eigen::VectorXd g;
    try {
      v = eval_value(e, x);
      g = eval_gradient(e, x);
    } catch (const compute_error&) {
      continue;
    }
    if (!tame(v)) continue;
    bool usable = true;
    for (int i = 0; i < 3 && usable; ++i) usable = tame(g[i]);
    if (!usable) continue;

    bool skip = false;
    for (int i = 0; i < 3 && !skip; ++i) {
      double h = 1.0e-5 * (1.0 + std::fabs(x[i]));
      auto central = [&](double step) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        return (eval_value(e, xp) - eval_value(e, xm)) / (2.0 * step);
      };
      double fd;
      try {
        // Richardson-extrapolated central difference (4th order)
        fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
      } catch (const compute_error&) {
        skip = true;
        break;
      }
      if (!tame(fd)) {
        skip = true;
        break;
      }
      double tol = 1.0e-6 * (1.0 + std::fabs(g[i]));
      if (std::fabs(fd - g[i]) > tol) {
        INFO("expression: " << print_expression(e));
        INFO("at x = (" << x[0] << ", " << x[1] << ", " << x[2] << "), component " << i);
        REQUIRE(std::fabs(fd - g[i]) <= tol);
      }
    }
    if (!skip) ++done;
  }
  REQUIRE(done == 1000);
}

TEST_CASE("hessian matches central finite differences of the gradient") {
  std::mt19937 rng(77130u);
  std::uniform_real_distribution<double> pt(-2.0, 2.0);
  int done = 0, attempts = 0;
  while (done < 300 && attempts < 8000) {
    ++attempts;
    expr_ptr e = random_expr(rng, 3);
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x[i] = pt(rng);
    Eigen::MatrixXd H;
    try {
      H = eval_hessian(e, x);
    } catch (const compute_error&) {
      continue;
    }
    if (!H.allFinite() || H.cwiseAbs().maxCoeff() > 1.0e6) continue;

    REQUIRE((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);  // exactly symmetric

    bool skip = false;
    for (int j = 0; j < 3 && !skip; ++j) {
      double h = 1.0e-5 * (1.0 + std::fabs(x[j]));
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      Eigen::VectorXd gp, gm;
      try {
        gp = eval_gradient(e, xp);
        gm = eval_gradient(e, xm);
      } catch (const compute_error&) {
        skip = true;
        break;
      }
      if (!gp.allFinite() || !gm.allFinite()) {
        skip = true;
        break;
      }
      for (int i = 0; i < 3; ++i) {
        double fd = (gp[i] - gm[i]) / (2.0 * h);
        if (!tame(fd)) {
          skip = true;
          break;
        }
        double tol = 5.0e-4 * (1.0 + std::fabs(H(i, j)));
        if (std::fabs(fd - H(i, j)) > tol) {
          INFO("expression: " << print_expression(e));
          REQUIRE(std::fabs(fd - H(i, j)) <= tol);
        }
      }
    }
    if (!skip) ++done;
  }
  REQUIRE(done == 300);
}

TEST_CASE("hand-computed jet of a mixed expression") {
  expr_ptr e = parse_expression("sinp(x1)*x2^3 + exp(x2/2) - x1/x2");
  Eigen::VectorXd x(2);
  x << 0.3, 1.7;
  const double tp = 2.0 * std::acos(-1.0);
  double s = std::sin(tp * 0.3), c = std::cos(tp * 0.3);
  double ex = std::exp(0.85);
  double c3 = 1.7 * 1.7 * 1.7;

  double v = s * c3 + ex - 0.3 / 1.7;
  double g1 = tp * c * c3 - 1.0 / 1.7;
  double g2 = 3.0 * s * 1.7 * 1.7 + 0.5 * ex + 0.3 / (1.7 * 1.7);
  double h11 = -tp * tp * s * c3;
  double h12 = tp * c * 3.0 * 1.7 * 1.7 + 1.0 / (1.7 * 1.7);
  double h22 = 6.0 * s * 1.7 + 0.25 * ex - 2.0 * 0.3 / c3;

  REQUIRE(eval_value(e, x) == Catch::Approx(v).epsilon(1e-14));
  Eigen::VectorXd g = eval_gradient(e, x);
  REQUIRE(g[0] == Catch::Approx(g1).epsilon(1e-13));
  REQUIRE(g[1] == Catch::Approx(g2).epsilon(1e-13));
  Eigen::MatrixXd H = eval_hessian(e, x);
  REQUIRE(H(0, 0) == Catch::Approx(h11).epsilon(1e-13));
  REQUIRE(H(0, 1) == Catch::Approx(h12).epsilon(1e-13));
  REQUIRE(H(1, 0) == Catch::Approx(h12).epsilon(1e-13));
  REQUIRE(H(1, 1) == Catch::Approx(h22).epsilon(1e-13));
}

TEST_CASE("print-parse round trip preserves structure") {
  std::mt19937 rng(424242u);
  for (int k = 0; k < 1000; ++k) {
    expr_ptr e = random_expr(rng, 4);
    std::string s1 = print_expression(e);
    expr_ptr back;
    INFO("printed: " << s1);
    REQUIRE_NOTHROW(back = parse_expression(s1));
    REQUIRE(structurally_equal(e, back));
    REQUIRE(print_expression(back) == s1);
  }
}

TEST_CASE("grammar structure and associativity") {
  auto shape = [](const char* s) { return print_expression(parse_expression(s)); };

  // precedence: * binds tighter than +, ^ tighter than *
  expr_ptr e = parse_expression("2*x1 + 3");
  REQUIRE(e->kind == expr_kind::add);
  REQUIRE(e->a->kind == expr_kind::mul);

  e = parse_expression("x1 - x2 - x3");  // left associative
  REQUIRE(e->kind == expr_kind::sub);
  REQUIRE(e->a->kind == expr_kind::sub);
  REQUIRE(e->b->kind == expr_kind::var);
  REQUIRE(e->b->var == 3);

  e = parse_expression("2*x1^3");
  REQUIRE(e->kind == expr_kind::mul);
  REQUIRE(e->b->kind == expr_kind::pow);
  REQUIRE(e->b->exponent == 3);

  // leading unary minus applies to the whole first term
  e = parse_expression("-x1^2*x2 + 5");
  REQUIRE(e->kind == expr_kind::add);
  REQUIRE(e->a->kind == expr_kind::neg);
  REQUIRE(e->a->a->kind == expr_kind::mul);

  // parenthesized subexpressions
  REQUIRE(shape("(x1 + x2)*x3") == "(x1 + x2)*x3");
  REQUIRE(shape("x1^(-2)") == "x1^(-2)");
  REQUIRE(shape("x1^-2") == "x1^(-2)");

  // function application
  e = parse_expression("sinp(x1 + x2)");
  REQUIRE(e->kind == expr_kind::sinp);
  REQUIRE(e->a->kind == expr_kind::add);

  REQUIRE(max_variable(parse_expression("sin(x2)*x4 + 1")) == 4);
  REQUIRE(max_variable(parse_expression("3.5")) == 0);
}

TEST_CASE("parse errors carry positions") {
  auto fails = [](const char* s) {
    REQUIRE_THROWS_AS(parse_expression(s), parse_error);
  };
  fails("");
  fails("1 +");
  fails("(x1");
  fails("x1 )");
  fails("tan(x1)");
  fails("x0 + 1");
  fails("x1 ^ x2");
  fails("x1^2.5");
  fails("x1 @ x2");
  fails("1 2");

  try {
    parse_expression("1 +\n  tan(x1)");
    FAIL("expected parse_error");
  } catch (const parse_error& pe) {
    REQUIRE(pe.pos.line == 2);
    REQUIRE(pe.pos.col == 3);
    REQUIRE(std::string(pe.what()).find("tan") != std::string::npos);
  }

  try {
    parse_expression("x1 + (x2");
    FAIL("expected parse_error");
  } catch (const parse_error& pe) {
    REQUIRE(pe.pos.line == 1);
    REQUIRE(pe.pos.col == 9);
  }

  // parse errors are configuration errors, not runtime compute errors
  REQUIRE_THROWS_AS(parse_expression("tan(x1)"), config_error);
}

TEST_CASE("evaluation guards") {
  Eigen::VectorXd x2(2);
  x2 << 0.0, 1.0;
  REQUIRE_THROWS_AS(eval_value(parse_expression("1/x1"), x2), compute_error);
  REQUIRE_THROWS_AS(eval_value(parse_expression("x1^(-2)"), x2), compute_error);
  REQUIRE_THROWS_AS(eval_gradient(parse_expression("1/x1"), x2), compute_error);
  REQUIRE_THROWS_AS(eval_value(parse_expression("x3"), x2), config_error);
  Eigen::VectorXd x5(5);
  x5.setZero();
  REQUIRE_THROWS_AS(eval_jet(parse_expression("x1"), x5, 0), config_error);

  // integer powers are computed by repeated multiplication: exact on exact input
  Eigen::VectorXd t(1);
  t << 2.0;
  REQUIRE(eval_value(parse_expression("x1^3"), t) == 8.0);
  REQUIRE(eval_value(parse_expression("x1^0"), t) == 1.0);
  t << 0.5;
  REQUIRE(eval_value(parse_expression("x1^(-2)"), t) == 4.0);
}

TEST_CASE("periodic combinators") {
  std::mt19937 rng(9090u);
  std::uniform_real_distribution<double> pt(-10.0, 10.0);
  expr_ptr sp = parse_expression("sinp(x1)");
  expr_ptr cp = parse_expression("cosp(x1)");
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd u(1), u1(1);
    u << pt(rng);
    u1 << u[0] + 1.0;
    REQUIRE(eval_value(sp, u) == Catch::Approx(eval_value(sp, u1)).margin(1e-12));
    REQUIRE(eval_value(cp, u) == Catch::Approx(eval_value(cp, u1)).margin(1e-12));
    double s = eval_value(sp, u), c = eval_value(cp, u);
    REQUIRE(s * s + c * c == Catch::Approx(1.0).epsilon(1e-14));
  }
  // quarter-period values
  Eigen::VectorXd q(1);
  q << 0.25;
  REQUIRE(eval_value(sp, q) == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(eval_value(cp, q) == Catch::Approx(0.0).margin(1e-15));
}
