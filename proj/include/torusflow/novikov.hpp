#pragma once

// The cochain complex generated by rest points, graded by unstable
// dimension, with differentials given by signed connection counts.  The
// delta-squared identity is checked coefficientwise in exact integer
// arithmetic over winding classes.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "torusflow/instanton.hpp"
#include "torusflow/rest_points.hpp"
#include "torusflow/series.hpp"
#include "torusflow/system.hpp"

namespace torusflow {

struct novikov_complex {
  int n = 0;                             // ambient dimension (top grading)
  std::vector<rest_point> points;
  std::vector<std::vector<int>> strata;  // strata[k] = ids of unstable dimension k
  // counting function for every adjacent-index pair (u of index k+1, v of index k)
  std::map<std::pair<int, int>, instanton_counting> pairs;
  double cutoff = 0.0;
  bool complete = true;
  std::vector<std::string> warnings;

  std::vector<int> gradings() const {
    std::vector<int> nk(n + 1, 0);
    for (int k = 0; k <= n; ++k) nk[k] = static_cast<int>(strata[k].size());
    return nk;
  }
};

// Run the shooting search for every adjacent-index pair below the cutoff.
inline novikov_complex assemble_complex(const field_system& sys,
                                        const std::vector<rest_point>& rps, double R,
                                        const instanton_options& opt = {}) {
  novikov_complex cx;
  cx.n = sys.n;
  cx.points = rps;
  cx.cutoff = R;
  cx.strata.assign(sys.n + 1, {});
  for (std::size_t i = 0; i < rps.size(); ++i) {
    if (!rps[i].hyperbolic)
      throw config_error("complex assembly requires hyperbolic rest points");
    cx.strata[rps[i].morse_index].push_back(static_cast<int>(i));
  }
  for (int k = 0; k + 1 <= sys.n; ++k) {
    for (int u : cx.strata[k + 1]) {
      for (int v : cx.strata[k]) {
        auto found = find_instantons(sys, rps, u, v, R, opt);
        if (!found.complete) cx.complete = false;
        for (const auto& w : found.warnings) cx.warnings.push_back(w);
        cx.pairs[{u, v}] = build_instanton_counting(found, u, v, R);
      }
    }
  }
  return cx;
}

// Assemble from precomputed counting functions; every adjacent pair must be present.
inline novikov_complex assemble_complex(
    const field_system& sys, const std::vector<rest_point>& rps,
    const std::map<std::pair<int, int>, instanton_counting>& pair_counts, double R) {
  novikov_complex cx;
  cx.n = sys.n;
  cx.points = rps;
  cx.cutoff = R;
  cx.strata.assign(sys.n + 1, {});
  for (std::size_t i = 0; i < rps.size(); ++i)
    cx.strata[rps[i].morse_index].push_back(static_cast<int>(i));
  for (int k = 0; k + 1 <= sys.n; ++k) {
    for (int u : cx.strata[k + 1]) {
      for (int v : cx.strata[k]) {
        auto it = pair_counts.find({u, v});
        if (it == pair_counts.end())
          throw config_error("missing counting data for an adjacent rest-point pair");
        cx.pairs[{u, v}] = it->second;
        if (!it->second.complete) cx.complete = false;
      }
    }
  }
  return cx;
}

// Dirichlet series for one differential entry.
inline dirichlet_series entry_series(const novikov_complex& cx, int u, int v,
                                     const closed_one_form& omega) {
  auto it = cx.pairs.find({u, v});
  if (it == cx.pairs.end()) throw config_error("no counting data for the requested pair");
  return laplace(it->second, omega, cx.points[u], cx.points[v]);
}

// Numeric differential matrices at real parameter t: delta[k] maps grading k
// to grading k+1; rows run over the index-(k+1) stratum, columns over index k.
inline std::vector<mat> delta_matrices(const novikov_complex& cx, const closed_one_form& omega,
                                       double t) {
  std::vector<mat> ds;
  for (int k = 0; k + 1 <= cx.n; ++k) {
    mat d(cx.strata[k + 1].size(), cx.strata[k].size());
    for (std::size_t r = 0; r < cx.strata[k + 1].size(); ++r) {
      for (std::size_t c = 0; c < cx.strata[k].size(); ++c) {
        auto s = entry_series(cx, cx.strata[k + 1][r], cx.strata[k][c], omega);
        d(static_cast<int>(r), static_cast<int>(c)) = eval(s, t).real();
      }
    }
    ds.push_back(std::move(d));
  }
  return ds;
}

// ----------------------------------------------------------------------------
// delta-squared: for every (u,w) with index gap 2, the winding-class
// convolution sum over the middle stratum must vanish in integer arithmetic.

struct delta_squared_violation {
  int u = -1, w = -1;
  ivec winding;
  long long coeff = 0;
  double cost = 0.0;
};

struct delta_squared_report {
  bool pass = true;
  int pairs_checked = 0;
  int coefficients_checked = 0;
  double r_eff = 0.0;  // exponent range actually certified
  std::vector<delta_squared_violation> violations;
};

inline delta_squared_report check_delta_squared(const novikov_complex& cx,
                                                const closed_one_form& omega) {
  delta_squared_report rep;
  // the convolution of two series each complete below R is only trustworthy
  // below R minus the largest exponent appearing in any factor
  double max_single = 0.0;
  for (const auto& [key, cf] : cx.pairs) {
    for (const auto& [cls, cnt] : cf.entries) {
      double cost = instanton_class_cost(omega, cx.points[key.first], cx.points[key.second],
                                         from_key(cls));
      max_single = std::max(max_single, cost);
    }
  }
  rep.r_eff = cx.cutoff - max_single;

  for (int k = 0; k + 2 <= cx.n; ++k) {
    for (int u : cx.strata[k + 2]) {
      for (int w : cx.strata[k]) {
        ++rep.pairs_checked;
        std::map<class_key, long long> conv;
        for (int v : cx.strata[k + 1]) {
          const auto& top = cx.pairs.at({u, v}).entries;
          const auto& bot = cx.pairs.at({v, w}).entries;
          for (const auto& [b, cb] : top) {
            for (const auto& [g, cg] : bot) {
              class_key sum(b.size());
              for (std::size_t i = 0; i < b.size(); ++i) sum[i] = b[i] + g[i];
              conv[sum] += cb * cg;
            }
          }
        }
        for (const auto& [cls, coeff] : conv) {
          double cost =
              instanton_class_cost(omega, cx.points[u], cx.points[w], from_key(cls));
          if (cost > rep.r_eff + 1e-12) continue;
          ++rep.coefficients_checked;
          if (coeff != 0) {
            rep.pass = false;
            rep.violations.push_back({u, w, from_key(cls), coeff, cost});
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace torusflow
