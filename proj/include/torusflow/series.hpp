#pragma once

// Counting functions over homotopy classes and their truncated Dirichlet
// series (Laplace transforms).  Counting arithmetic is exact: integers for
// connection counts, rationals for closed-orbit sums; only series evaluation
// uses floating point.

#include <boost/rational.hpp>

#include <complex>
#include <limits>
#include <map>
#include <vector>

#include "torusflow/common.hpp"
#include "torusflow/torus.hpp"

namespace torusflow {

using rational = boost::rational<long long>;
using class_key = std::vector<int>;  // winding vector, lexicographically ordered

inline class_key to_key(const ivec& w) {
  class_key k(w.size());
  for (int i = 0; i < w.size(); ++i) k[i] = w[i];
  return k;
}

inline ivec from_key(const class_key& k) {
  ivec w(static_cast<int>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) w[static_cast<int>(i)] = k[i];
  return w;
}

// Signed connection counts for one ordered rest-point pair, aggregated by
// winding.  Zero aggregates are kept: an explicit cancellation is data.
struct instanton_counting {
  int from = -1, to = -1;  // rest-point ids (index difference 1)
  std::map<class_key, long long> entries;
  double cutoff = 0.0;  // complete for classes of cost <= cutoff
  bool complete = true;
};

// epsilon/p sums over closed orbits, aggregated by winding.
struct orbit_counting {
  std::map<class_key, rational> entries;
  double cutoff = 0.0;
  bool complete = true;
};

inline rational zeta_counting(const orbit_counting& z, const ivec& gamma) {
  auto it = z.entries.find(to_key(gamma));
  return it == z.entries.end() ? rational(0) : it->second;
}

// ----------------------------------------------------------------------------
// Dirichlet series with real exponents (costs) and real coefficients.

struct series_term {
  double lambda = 0.0;  // exponent (cost)
  double coeff = 0.0;
};

struct dirichlet_series {
  std::vector<series_term> terms;  // strictly increasing lambda after aggregation
  double cutoff = 0.0;             // complete for lambda <= cutoff
  bool finite_complete = false;    // the underlying counting data is exhausted
};

namespace detail {
inline void aggregate_terms(std::vector<series_term>& ts) {
  std::sort(ts.begin(), ts.end(),
            [](const series_term& a, const series_term& b) { return a.lambda < b.lambda; });
  std::vector<series_term> out;
  for (const auto& t : ts) {
    if (!out.empty() &&
        std::fabs(t.lambda - out.back().lambda) <= 1e-12 * std::max(1.0, std::fabs(t.lambda)))
      out.back().coeff += t.coeff;
    else
      out.push_back(t);
  }
  ts = std::move(out);
}
}  // namespace detail

// Cost of a free homotopy class of loops: minus the loop integral of omega
// (the potential part cancels on loops).
inline double loop_cost(const closed_one_form& omega, const ivec& gamma) {
  return -pair_form_class(omega, gamma);
}

// Laplace transform of an orbit counting function.
inline dirichlet_series laplace(const orbit_counting& cf, const closed_one_form& omega) {
  dirichlet_series s;
  s.cutoff = cf.cutoff;
  // "provably finite" only in the exact case: all class costs coincide, so a
  // complete enumeration below the cutoff exhausts the series
  s.finite_complete = cf.complete && omega.harmonic.norm() == 0.0;
  for (const auto& [key, val] : cf.entries) {
    series_term t;
    t.lambda = loop_cost(omega, from_key(key));
    t.coeff = boost::rational_cast<double>(val);
    s.terms.push_back(t);
  }
  detail::aggregate_terms(s.terms);
  return s;
}

// Evaluate sum c_i e^{-z lambda_i}, Kahan-compensated in ascending |lambda|.
inline std::complex<double> eval(const dirichlet_series& s, std::complex<double> z) {
  std::vector<int> order(s.terms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::fabs(s.terms[a].lambda) < std::fabs(s.terms[b].lambda);
  });
  std::complex<double> sum = 0.0, comp = 0.0;
  for (int i : order) {
    std::complex<double> term = s.terms[i].coeff * std::exp(-z * s.terms[i].lambda);
    std::complex<double> y = term - comp;
    std::complex<double> t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Twisted evaluation directly from the counting data: sum over classes of
// value(gamma) * e^{-(xi1(gamma) + z*xi2(gamma))}, where xi1, xi2 act as
// constant covectors on winding vectors.
inline std::complex<double> eval_twisted(const orbit_counting& cf, const vec& xi1,
                                         const vec& xi2, std::complex<double> z) {
  std::vector<series_term> ts;
  std::vector<double> shift;
  for (const auto& [key, val] : cf.entries) {
    ivec g = from_key(key);
    double l1 = 0.0, l2 = 0.0;
    for (int i = 0; i < g.size(); ++i) {
      l1 += xi1[i] * g[i];
      l2 += xi2[i] * g[i];
    }
    ts.push_back({l2, boost::rational_cast<double>(val)});
    shift.push_back(l1);
  }
  std::vector<int> order(ts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::fabs(ts[a].lambda) < std::fabs(ts[b].lambda); });
  std::complex<double> sum = 0.0, comp = 0.0;
  for (int i : order) {
    std::complex<double> term = ts[i].coeff * std::exp(-shift[i] - z * ts[i].lambda);
    std::complex<double> y = term - comp;
    std::complex<double> t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// ----------------------------------------------------------------------------
// Abscissa-of-convergence estimate from truncated data.

struct abscissa_report {
  double rho = -std::numeric_limits<double>::infinity();
  bool entire = false;  // finite exhausted series: converges everywhere
  bool caveat = true;   // always an estimate from truncation, not a proof
};

inline abscissa_report abscissa_estimate(const dirichlet_series& s) {
  abscissa_report rep;
  if (s.finite_complete) {
    rep.entire = true;
    return rep;
  }
  if (s.terms.size() < 8)
    throw config_error("abscissa estimate requires at least 8 series terms");
  // limsup over the tail of log|partial coefficient sums| / lambda_N
  double acc = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(s.terms.size());
  for (int i = 0; i < n; ++i) {
    acc += s.terms[i].coeff;
    if (i >= n / 2 && s.terms[i].lambda > 0.0 && std::fabs(acc) > 0.0)
      best = std::max(best, std::log(std::fabs(acc)) / s.terms[i].lambda);
  }
  rep.rho = best;
  return rep;
}

}  // namespace torusflow
