#pragma once

// Forward-mode evaluation of expressions: value, gradient, and symmetric
// Hessian in one recursive pass.  Dimension is runtime but capped at
// kMaxDim; all storage is fixed-capacity, no allocation per evaluation.

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "torusflow/common.hpp"
#include "torusflow/expr.hpp"

namespace torusflow {

inline constexpr int kMaxDim = 4;

// Truncated second-order jet: f, df, d2f at a point.  `order` selects how
// many derivative levels are maintained (0 = value only, 1 = +gradient,
// 2 = +Hessian); levels above `order` are untouched garbage.
struct jet {
  int n = 0;
  int order = 0;
  double v = 0.0;
  std::array<double, kMaxDim> g{};
  std::array<double, kMaxDim * kMaxDim> h{};  // row-major, symmetric

  double hess(int i, int j) const { return h[i * kMaxDim + j]; }
  double& hess(int i, int j) { return h[i * kMaxDim + j]; }
};

namespace detail {

inline jet jet_const(double v, int n, int order) {
  jet r;
  r.n = n;
  r.order = order;
  r.v = v;
  if (order >= 1)
    for (int i = 0; i < n; ++i) r.g[i] = 0.0;
  if (order >= 2)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r.hess(i, j) = 0.0;
  return r;
}

inline jet jet_var(int idx, double v, int n, int order) {
  jet r = jet_const(v, n, order);
  if (order >= 1) r.g[idx] = 1.0;
  return r;
}

inline jet jet_add(const jet& a, const jet& b, double sb) {
  jet r = a;
  r.v += sb * b.v;
  if (r.order >= 1)
    for (int i = 0; i < r.n; ++i) r.g[i] += sb * b.g[i];
  if (r.order >= 2)
    for (int i = 0; i < r.n; ++i)
      for (int j = 0; j < r.n; ++j) r.hess(i, j) += sb * b.hess(i, j);
  return r;
}

inline jet jet_mul(const jet& a, const jet& b) {
  jet r = a;
  r.v = a.v * b.v;
  if (r.order >= 1)
    for (int i = 0; i < r.n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  if (r.order >= 2)
    for (int i = 0; i < r.n; ++i)
      for (int j = i; j < r.n; ++j) {
        double v = a.hess(i, j) * b.v + a.v * b.hess(i, j) + a.g[i] * b.g[j] +
                   a.g[j] * b.g[i];
        r.hess(i, j) = v;
        r.hess(j, i) = v;  // keep the Hessian exactly symmetric
      }
  return r;
}

// f(u) with f' = d1, f'' = d2 at u.v: standard chain rule through second
// order, h_f = f' h_u + f'' g_u g_u^T.
inline jet jet_chain(const jet& u, double f, double d1, double d2) {
  jet r = u;
  r.v = f;
  if (r.order >= 1)
    for (int i = 0; i < r.n; ++i) r.g[i] = d1 * u.g[i];
  if (r.order >= 2)
    for (int i = 0; i < r.n; ++i)
      for (int j = i; j < r.n; ++j) {
        double v = d1 * u.hess(i, j) + d2 * u.g[i] * u.g[j];
        r.hess(i, j) = v;
        r.hess(j, i) = v;
      }
  return r;
}

inline jet jet_recip(const jet& b) {
  if (b.v == 0.0) throw compute_error("division by zero in expression evaluation");
  double iv = 1.0 / b.v;
  return jet_chain(b, iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline double ipow(double x, int k) {
  double r = 1.0, p = x;
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) r *= p;
    p *= p;
  }
  return r;
}

inline jet jet_pow(const jet& a, int k) {
  if (k == 0) return jet_const(1.0, a.n, a.order);
  if (k < 0) {
    if (a.v == 0.0) throw compute_error("zero raised to a negative power");
    jet inv = jet_recip(a);
    return jet_pow(inv, -k);
  }
  double f = ipow(a.v, k);
  double d1 = k * ipow(a.v, k - 1);
  double d2 = (k >= 2) ? static_cast<double>(k) * (k - 1) * ipow(a.v, k - 2) : 0.0;
  return jet_chain(a, f, d1, d2);
}

inline jet eval_rec(const expr_node* e, const double* x, int n, int order) {
  switch (e->kind) {
    case expr_kind::number:
      return jet_const(e->number, n, order);
    case expr_kind::var:
      if (e->var > n) throw config_error("variable index exceeds dimension");
      return jet_var(e->var - 1, x[e->var - 1], n, order);
    case expr_kind::neg: {
      jet a = eval_rec(e->a.get(), x, n, order);
      return jet_chain(a, -a.v, -1.0, 0.0);
    }
    case expr_kind::add:
      return jet_add(eval_rec(e->a.get(), x, n, order), eval_rec(e->b.get(), x, n, order), 1.0);
    case expr_kind::sub:
      return jet_add(eval_rec(e->a.get(), x, n, order), eval_rec(e->b.get(), x, n, order), -1.0);
    case expr_kind::mul:
      return jet_mul(eval_rec(e->a.get(), x, n, order), eval_rec(e->b.get(), x, n, order));
    case expr_kind::divide:
      return jet_mul(eval_rec(e->a.get(), x, n, order),
                     jet_recip(eval_rec(e->b.get(), x, n, order)));
    case expr_kind::pow:
      return jet_pow(eval_rec(e->a.get(), x, n, order), e->exponent);
    case expr_kind::sin: {
      jet a = eval_rec(e->a.get(), x, n, order);
      double s = std::sin(a.v), c = std::cos(a.v);
      return jet_chain(a, s, c, -s);
    }
    case expr_kind::cos: {
      jet a = eval_rec(e->a.get(), x, n, order);
      double s = std::sin(a.v), c = std::cos(a.v);
      return jet_chain(a, c, -s, -c);
    }
    case expr_kind::exp: {
      jet a = eval_rec(e->a.get(), x, n, order);
      double v = std::exp(a.v);
      return jet_chain(a, v, v, v);
    }
    case expr_kind::sinp: {
      jet a = eval_rec(e->a.get(), x, n, order);
      double s = std::sin(kTwoPi * a.v), c = std::cos(kTwoPi * a.v);
      return jet_chain(a, s, kTwoPi * c, -kTwoPi * kTwoPi * s);
    }
    case expr_kind::cosp: {
      jet a = eval_rec(e->a.get(), x, n, order);
      double s = std::sin(kTwoPi * a.v), c = std::cos(kTwoPi * a.v);
      return jet_chain(a, c, -kTwoPi * s, -kTwoPi * kTwoPi * c);
    }
  }
  throw compute_error("unreachable expression kind");
}

inline double eval_value_rec(const expr_node* e, const double* x, int n) {
  switch (e->kind) {
    case expr_kind::number:
      return e->number;
    case expr_kind::var:
      if (e->var > n) throw config_error("variable index exceeds dimension");
      return x[e->var - 1];
    case expr_kind::neg:
      return -eval_value_rec(e->a.get(), x, n);
    case expr_kind::add:
      return eval_value_rec(e->a.get(), x, n) + eval_value_rec(e->b.get(), x, n);
    case expr_kind::sub:
      return eval_value_rec(e->a.get(), x, n) - eval_value_rec(e->b.get(), x, n);
    case expr_kind::mul:
      return eval_value_rec(e->a.get(), x, n) * eval_value_rec(e->b.get(), x, n);
    case expr_kind::divide: {
      double b = eval_value_rec(e->b.get(), x, n);
      if (b == 0.0) throw compute_error("division by zero in expression evaluation");
      return eval_value_rec(e->a.get(), x, n) / b;
    }
    case expr_kind::pow: {
      double a = eval_value_rec(e->a.get(), x, n);
      int k = e->exponent;
      if (k < 0) {
        if (a == 0.0) throw compute_error("zero raised to a negative power");
        return 1.0 / ipow(a, -k);
      }
      return ipow(a, k);
    }
    case expr_kind::sin:
      return std::sin(eval_value_rec(e->a.get(), x, n));
    case expr_kind::cos:
      return std::cos(eval_value_rec(e->a.get(), x, n));
    case expr_kind::exp:
      return std::exp(eval_value_rec(e->a.get(), x, n));
    case expr_kind::sinp:
      return std::sin(kTwoPi * eval_value_rec(e->a.get(), x, n));
    case expr_kind::cosp:
      return std::cos(kTwoPi * eval_value_rec(e->a.get(), x, n));
  }
  throw compute_error("unreachable expression kind");
}

}  // namespace detail

inline double eval_value(const expr_ptr& e, const Eigen::VectorXd& x) {
  return detail::eval_value_rec(e.get(), x.data(), static_cast<int>(x.size()));
}

inline double eval_value(const expr_ptr& e, const double* x, int n) {
  return detail::eval_value_rec(e.get(), x, n);
}

inline jet eval_jet(const expr_ptr& e, const Eigen::VectorXd& x, int order) {
  int n = static_cast<int>(x.size());
  if (n > kMaxDim) throw config_error("dimension exceeds supported maximum");
  return detail::eval_rec(e.get(), x.data(), n, order);
}

inline Eigen::VectorXd eval_gradient(const expr_ptr& e, const Eigen::VectorXd& x) {
  jet j = eval_jet(e, x, 1);
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) g[i] = j.g[i];
  return g;
}

inline Eigen::MatrixXd eval_hessian(const expr_ptr& e, const Eigen::VectorXd& x) {
  jet j = eval_jet(e, x, 2);
  Eigen::MatrixXd h(x.size(), x.size());
  for (int i = 0; i < x.size(); ++i)
    for (int k = 0; k < x.size(); ++k) h(i, k) = j.hess(i, k);
  return h;
}

}  // namespace torusflow
