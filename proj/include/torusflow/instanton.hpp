#pragma once

// Heteroclinic connections between hyperbolic rest points of adjacent
// unstable dimension: shooting from the unstable sphere, fate-driven
// bracketing with bisection refinement on the shooting angle, exact
// winding/cost bookkeeping, and orientation-transport signs via the
// variational flow.

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "torusflow/ode.hpp"
#include "torusflow/rest_points.hpp"
#include "torusflow/series.hpp"
#include "torusflow/system.hpp"

namespace torusflow {

struct instanton {
  int from = -1, to = -1;  // ids into the rest-point list
  ivec winding;
  double omega_value = 0.0;  // exact class integral of ω (≤ 0 for Lyapunov ω)
  double path_omega = 0.0;   // numeric ∫ω along the stored seed→arrival path
  int sign = 0;
  vec seed;                  // shooting point lift: from.position + δ·seed_dir
  vec seed_dir;              // unit direction in the unstable subspace
  double shoot_angle = 0.0;  // parameter of seed_dir when the unstable sphere is a circle
  int arrival_sector = 0;    // side of the stable axis at capture entry (dedup key)
  double arrival_dist = 0.0;
  trajectory path;  // variational-enabled lifted trajectory, seed → arrival
};

struct instanton_options {
  double delta = 1e-3;       // seeding offset and wrong-endpoint detection ball
  double arrive_tol = 1e-9;  // refinement target at the far end
  int scan_rays = 360;       // angular scan resolution on a 2-dim unstable sphere
  int bisect_max = 60;
  int subdivide_max = 48;    // fate-subdivision depth before giving up a bracket
  double t_budget = 50.0;    // per-ray flow-time budget
  double capture = 0.02;     // side-classification neighborhood of saddles
  // internal: rays whose ω-drop exceeds this can no longer reach any
  // connection inside the cutoff (ω decreases strictly along the flow)
  double cost_stop = std::numeric_limits<double>::infinity();
  flow_options flow;
};

struct instanton_search {
  std::vector<instanton> list;
  bool complete = true;
  std::vector<std::string> warnings;
};

// cost of a from→to class: −∫ω over any path of that class (≥ 0 for Lyapunov ω)
inline double instanton_class_cost(const closed_one_form& omega, const rest_point& from,
                                   const rest_point& to, const ivec& winding) {
  vec end = to.position;
  for (int i = 0; i < winding.size(); ++i) end[i] += winding[i];
  return -lifted_path_integral(omega, from.position, end);
}

namespace detail {

// Terminal fate of one shooting ray.  Fates drive the bracketing: a
// connection to some saddle separates any two rays of different fate,
// while a mere graze of a capture ball leaves the final class unchanged.
enum class ray_kind {
  hit,          // reached arrive_tol of the target
  side,         // crossed the target's capture ball, exited along ±(unstable axis)
  near_saddle,  // crossed the capture ball of a different saddle
  endpoint,     // reached a rest point (winding of the arrival recorded)
  cutoff,       // ω dropped below every admissible connection
  budget        // flow-time budget exhausted undecided
};

struct ray_outcome {
  ray_kind kind = ray_kind::budget;
  int id = -1;        // ball crossed (side/near_saddle) or rest point reached (endpoint)
  int side = 0;       // ±1 exit side for side/near_saddle
  int final_id = -2;  // rest point ultimately reached (-2: cut off / undecided)
  class_key wind;     // winding of the final arrival, empty if none
  int sector = 0;     // stable-axis side at target capture entry (dedup key)
  flow_state end;
  std::vector<flow_state> steps;  // stored only when requested
};

inline bool same_fate(const ray_outcome& a, const ray_outcome& b) {
  return a.kind == b.kind && a.id == b.id && a.side == b.side && a.final_id == b.final_id &&
         a.wind == b.wind;
}

// true when both rays end at the same rest point in the same deck class
inline bool same_final(const ray_outcome& a, const ray_outcome& b) {
  return a.final_id >= 0 && a.final_id == b.final_id && a.wind == b.wind;
}

// unstable and stable axes of every saddle, computed once per search
struct saddle_axes {
  std::vector<int> ids;
  std::vector<vec> u_axis, s_axis;
};

inline saddle_axes collect_saddle_axes(const std::vector<rest_point>& rps, int from_id) {
  saddle_axes ax;
  for (std::size_t r = 0; r < rps.size(); ++r) {
    if (static_cast<int>(r) == from_id || rps[r].morse_index != 1) continue;
    ax.ids.push_back(static_cast<int>(r));
    ax.u_axis.push_back(rps[r].unstable_frame.col(0));
    Eigen::EigenSolver<mat> es(rps[r].jacobian);
    int best = 0;
    for (int i = 1; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i].real() < es.eigenvalues()[best].real()) best = i;
    vec s = es.eigenvectors().col(best).real();
    ax.s_axis.push_back(s.normalized());
  }
  return ax;
}

// Flow one shooting ray until its fate is decided.  The first capture ball
// crossed is recorded, but the ray keeps flowing to its final rest point so
// ball grazes can be told apart from genuine separatrix crossings.
inline ray_outcome shoot_ray(const field_system& sys, const std::vector<rest_point>& rps,
                             const saddle_axes& ax, int from_id, int to_id,
                             const vec& seed_dir, const instanton_options& opt,
                             bool keep_path) {
  const rest_point& from = rps[from_id];
  const rest_point& to = rps[to_id];
  vec p0 = from.position + opt.delta * seed_dir;  // unwrapped: lift bookkeeping stays exact

  ray_outcome out;
  flow_options fopt = opt.flow;
  fopt.variational = keep_path;  // frames only needed on the stored final run
  int inside = -1;               // index into ax while within some capture ball
  int cross_id = -1;             // first ball crossed end to end
  bool done = false;
  auto finish_at = [&](int rp, const flow_state& cur) {
    vec alpha = cur.lift - rps[rp].position;
    out.wind.resize(alpha.size());
    for (int i = 0; i < alpha.size(); ++i) out.wind[i] = static_cast<int>(std::lround(alpha[i]));
    out.final_id = rp;
    if (cross_id < 0) {
      out.kind = ray_kind::endpoint;
      out.id = rp;
    }
    out.end = cur;
    done = true;
  };
  auto cb = [&](const flow_state& prev, const flow_state& cur) {
    if (keep_path) {
      if (out.steps.empty()) out.steps.push_back(prev);
      out.steps.push_back(cur);
    }
    vec w = cur.wrapped();
    if (torus_dist(w, to.position) <= opt.arrive_tol) {
      out.kind = ray_kind::hit;
      out.id = to_id;
      out.end = cur;
      done = true;
      return false;
    }
    if (inside >= 0) {
      int rp = ax.ids[inside];
      double d = torus_dist(w, rps[rp].position);
      if (d <= opt.arrive_tol) {  // converged into a saddle that is not the target
        finish_at(rp, cur);
        return false;
      }
      if (d >= opt.capture) {
        if (cross_id < 0) {
          cross_id = rp;
          out.kind = rp == to_id ? ray_kind::side : ray_kind::near_saddle;
          out.id = rp;
          out.side =
              torus_diff(w, rps[rp].position).dot(ax.u_axis[inside]) >= 0.0 ? +1 : -1;
        }
        inside = -1;  // keep flowing to the final rest point
      }
      return true;
    }
    if (cur.omega_int < -opt.cost_stop) {
      if (cross_id < 0) out.kind = ray_kind::cutoff;
      out.end = cur;
      done = true;
      return false;
    }
    for (std::size_t a = 0; a < ax.ids.size(); ++a) {
      if (torus_dist(w, rps[ax.ids[a]].position) < opt.capture) {
        inside = static_cast<int>(a);
        if (ax.ids[a] == to_id)
          out.sector =
              torus_diff(w, rps[ax.ids[a]].position).dot(ax.s_axis[a]) >= 0.0 ? +1 : -1;
        return true;
      }
    }
    for (std::size_t r = 0; r < rps.size(); ++r) {
      if (static_cast<int>(r) == from_id || static_cast<int>(r) == to_id) continue;
      if (rps[r].morse_index == 1) continue;  // saddles are handled by capture balls
      if (torus_dist(w, rps[r].position) < opt.delta) {
        finish_at(static_cast<int>(r), cur);
        return false;
      }
    }
    return true;
  };
  flow_state fin = integrate_flow(sys, p0, opt.t_budget, +1, fopt, cb);
  if (!done) {
    out.kind = ray_kind::budget;
    out.final_id = -2;
    out.end = fin;
  }
  return out;
}

inline vec angle_dir(const mat& frame, double phi) {
  return std::cos(phi) * frame.col(0) + std::sin(phi) * frame.col(1);
}

}  // namespace detail

// Orientation-transport sign.  The from-frame is pushed forward by the
// variational flow to the arrival point (within arrive_tol of `to`, where
// the to-frame itself is valid); the sign is det[X | to-frame] expressed in
// the transported from-frame.  Columns are normalized first — a positive
// rescaling that leaves the sign alone but keeps benign stiffness of the
// transport from looking like a transversality failure.  o_from/o_to flip it.
inline int instanton_sign(const field_system& sys, const rest_point& from, const rest_point& to,
                          const instanton& inst, int o_from = +1, int o_to = +1) {
  const auto& steps = inst.path.steps;
  if (steps.size() < 3 || steps.front().V.size() == 0)
    throw config_error("instanton sign needs a stored variational path");
  const flow_state& arr = steps.back();
  const mat& Va = arr.V;
  vec Xa = sys.X_at(arr.wrapped());
  if (Xa.norm() == 0.0) throw compute_error("instanton arrival sits on a rest point");

  const int k_to = to.morse_index;
  mat B = Va * from.unstable_frame;  // transported from-frame, n × (k_to+1)
  for (int j = 0; j < B.cols(); ++j) {
    double nb = B.col(j).norm();
    if (!(nb > 0.0) || !std::isfinite(nb))
      throw compute_error("variational transport degenerate along the instanton");
    B.col(j) /= nb;
  }

  mat D(sys.n, 1 + k_to);
  D.col(0) = Xa.normalized();
  for (int j = 0; j < k_to; ++j) D.col(1 + j) = to.unstable_frame.col(j);

  Eigen::JacobiSVD<mat> svdB(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double condB = svdB.singularValues()(0) / svdB.singularValues().tail(1)(0);
  if (!std::isfinite(condB) || condB > 1e6)
    throw compute_error("instanton sign frame ill-conditioned (transversality failure)");

  // coordinates of D in the from-frame; residual checks containment
  mat C = svdB.solve(D);
  if ((B * C - D).norm() > 1e-6 * D.norm() + 1e-9)
    throw compute_error("instanton frame does not lie in the transported unstable tangent");
  Eigen::JacobiSVD<mat> svdC(C);
  double condC = svdC.singularValues()(0) / svdC.singularValues().tail(1)(0);
  if (!std::isfinite(condC) || condC > 1e6)
    throw compute_error("instanton sign frame ill-conditioned (transversality failure)");
  double det = C.determinant();
  if (det == 0.0) throw compute_error("instanton sign determinant vanished");
  return (det > 0 ? +1 : -1) * o_from * o_to;
}

// Shooting search for all connections from `from_id` to `to_id` with cost
// −∫ω ≤ R.  Unstable dimension 1 → the two rays; dimension 2 → angular scan
// whose brackets are subdivided wherever ray fates differ, then bisected on
// the target's exit side.  Completeness rests on the scan resolving every
// pair of neighboring connections; unresolved brackets are reported.
inline instanton_search find_instantons(const field_system& sys,
                                        const std::vector<rest_point>& rps, int from_id,
                                        int to_id, double R,
                                        const instanton_options& opt = {}) {
  if (from_id < 0 || to_id < 0 || from_id >= static_cast<int>(rps.size()) ||
      to_id >= static_cast<int>(rps.size()))
    throw config_error("rest point id out of range");
  const rest_point& from = rps[from_id];
  const rest_point& to = rps[to_id];
  if (!from.hyperbolic || !to.hyperbolic)
    throw config_error("instanton endpoints must be hyperbolic");
  if (from.morse_index - to.morse_index != 1)
    throw config_error("instanton endpoints must have unstable dimensions differing by 1");
  if (from.morse_index > 2)
    throw config_error("shooting search supports unstable dimension <= 2");

  instanton_options ropt = opt;
  ropt.cost_stop = std::min(opt.cost_stop, R + 1.0);
  detail::saddle_axes ax = detail::collect_saddle_axes(rps, from_id);

  instanton_search out;

  auto finalize = [&](const vec& dir, double phi, const detail::ray_outcome& run) {
    instanton inst;
    inst.from = from_id;
    inst.to = to_id;
    inst.seed_dir = dir;
    inst.shoot_angle = phi;
    inst.seed = from.position + opt.delta * dir;
    inst.path.steps = run.steps;
    inst.path_omega = run.end.omega_int;
    inst.arrival_dist = torus_dist(run.end.wrapped(), to.position);
    inst.arrival_sector = run.sector;
    vec alpha_real = run.end.lift - to.position;
    ivec alpha(sys.n);
    for (int i = 0; i < sys.n; ++i) alpha[i] = static_cast<int>(std::lround(alpha_real[i]));
    inst.winding = alpha;
    inst.omega_value = -instanton_class_cost(sys.omega, from, to, alpha);
    inst.sign = instanton_sign(sys, from, to, inst, from.orientation, to.orientation);
    out.list.push_back(std::move(inst));
  };

  if (from.morse_index == 1) {
    // one-dimensional unstable sphere: exactly two rays; arrival refinement
    // happens by flowing into the attracting endpoint until arrive_tol
    for (int s : {+1, -1}) {
      vec dir = double(s) * from.unstable_frame.col(0);
      auto run = detail::shoot_ray(sys, rps, ax, from_id, to_id, dir, ropt, true);
      if (run.kind == detail::ray_kind::hit) {
        detail::ray_outcome labeled = run;
        labeled.sector = s;  // the two rays are distinct connections by construction
        finalize(dir, s > 0 ? 0.0 : kTwoPi / 2.0, labeled);
      } else if (run.kind == detail::ray_kind::budget) {
        out.complete = false;
        out.warnings.push_back("ray budget exhausted before the endpoint was decided");
      }
    }
  } else if (sys.n == 2) {
    // Unstable dimension 2 on the 2-torus: the target is a saddle whose
    // stable manifold is one-dimensional, so every from→to connection IS one
    // of its two stable rays.  Shooting those rays backward in time makes the
    // search exact enumeration: each backward ray either converges into
    // `from` (exactly one connection, winding read off the lift), reaches a
    // different rest point, or exceeds the cost cutoff.  An angular scan
    // cannot do this job in general — when every forward ray spirals onto
    // the same attracting orbit until the cost cutoff, all scan fates agree
    // and the separatrix is invisible at any finite resolution.
    int tpos = -1;
    for (std::size_t a = 0; a < ax.ids.size(); ++a)
      if (ax.ids[a] == to_id) tpos = static_cast<int>(a);
    if (tpos < 0) throw compute_error("target saddle missing from the axis table");
    const vec& s_dir = ax.s_axis[tpos];

    flow_options fopt = ropt.flow;
    fopt.variational = true;
    for (int s : {+1, -1}) {
      vec q0 = to.position + opt.delta * double(s) * s_dir;
      std::vector<flow_state> back;
      int fate = 0;  // 0 undecided, 1 landed at from, 2 other endpoint, 3 cutoff, 4 saddle
      auto cb = [&](const flow_state& prev, const flow_state& cur) {
        if (back.empty()) back.push_back(prev);
        back.push_back(cur);
        vec w = cur.wrapped();
        if (torus_dist(w, from.position) <= opt.arrive_tol) {
          fate = 1;
          return false;
        }
        if (cur.omega_int > ropt.cost_stop) {  // backward ∫ω = accumulated cost
          fate = 3;
          return false;
        }
        for (std::size_t r = 0; r < rps.size(); ++r) {
          int ri = static_cast<int>(r);
          if (ri == from_id || ri == to_id) continue;
          if (rps[r].morse_index != 1 && torus_dist(w, rps[r].position) < opt.delta) {
            fate = 2;
            return false;
          }
          if (rps[r].morse_index == 1 && torus_dist(w, rps[r].position) <= opt.arrive_tol) {
            fate = 4;
            return false;
          }
        }
        return true;
      };
      integrate_flow(sys, q0, ropt.t_budget, -1, fopt, cb);
      if (fate == 4) {
        out.complete = false;
        out.warnings.push_back("stable ray runs backward into another saddle (non-generic)");
        continue;
      }
      if (fate == 0) {
        out.complete = false;
        out.warnings.push_back("backward ray budget exhausted before the endpoint was decided");
        continue;
      }
      if (fate != 1) continue;  // other endpoint, or every connection here exceeds the cutoff

      // Reverse into a forward seed→arrival path.  Lifts shift by the landing
      // deck so the path starts at `from`'s own representative; ∫ω, time and
      // arclength re-zero at the new start; the forward variational transport
      // over the whole path is the inverse of the final backward one, and the
      // per-step frames follow by the chain rule V_fwd(j) = V_bwd(j)·V_bwd(K)⁻¹.
      const flow_state& bl = back.back();
      ivec deck(sys.n);
      for (int i = 0; i < sys.n; ++i)
        deck[i] = static_cast<int>(std::lround(bl.lift[i] - from.position[i]));
      mat vk_inv = bl.V.partialPivLu().inverse();
      if (!vk_inv.allFinite())
        throw compute_error("variational transport degenerate along the backward ray");
      const double total_omega = bl.omega_int, total_t = bl.t, total_arc = bl.arclen;

      detail::ray_outcome run;
      run.kind = detail::ray_kind::hit;
      run.id = to_id;
      run.final_id = to_id;
      run.sector = s;
      run.steps.reserve(back.size());
      for (std::size_t j = back.size(); j-- > 0;) {
        flow_state st = back[j];
        for (int i = 0; i < sys.n; ++i) st.lift[i] -= double(deck[i]);
        st.t = total_t - st.t;
        st.omega_int -= total_omega;
        st.arclen = total_arc - st.arclen;
        st.V = st.V * vk_inv;
        run.steps.push_back(std::move(st));
      }
      run.end = run.steps.back();

      // seed direction: where the forward path leaves the δ-ball of `from`
      vec dir = s_dir;  // fallback, overwritten below
      for (const auto& st : run.steps) {
        vec d = torus_diff(st.wrapped(), from.position);
        if (d.norm() >= 0.5 * opt.delta) {
          dir = d.normalized();
          break;
        }
      }
      double phi = std::atan2(dir.dot(from.unstable_frame.col(1)),
                              dir.dot(from.unstable_frame.col(0)));
      finalize(dir, phi, run);
    }
  } else {
    // higher-dimensional unstable sphere: scan the circle of directions
    const int M = std::max(opt.scan_rays, 8);
    auto probe = [&](double phi, bool keep) {
      return detail::shoot_ray(sys, rps, ax, from_id, to_id,
                               detail::angle_dir(from.unstable_frame, phi), ropt, keep);
    };
    auto land = [&](double phi) {
      auto kept = probe(phi, true);
      if (kept.kind == detail::ray_kind::hit)
        finalize(detail::angle_dir(from.unstable_frame, phi), phi, kept);
    };

    std::vector<detail::ray_outcome> scan(M);
    std::vector<double> phis(M);
    for (int j = 0; j < M; ++j) {
      phis[j] = kTwoPi * (j + 0.5) / M;
      scan[j] = probe(phis[j], false);
      if (scan[j].kind == detail::ray_kind::hit) land(phis[j]);
    }

    struct bracket {
      double a, b;
      detail::ray_outcome fa, fb;
      int depth;
    };
    std::vector<bracket> work;
    for (int j = 0; j < M; ++j) {
      int j2 = (j + 1) % M;
      if (scan[j].kind == detail::ray_kind::hit || scan[j2].kind == detail::ray_kind::hit)
        continue;
      if (!detail::same_fate(scan[j], scan[j2]))
        work.push_back({phis[j], phis[j] + kTwoPi / M, scan[j], scan[j2], 0});
    }

    bool budget_warned = false, depth_warned = false;
    while (!work.empty()) {
      bracket br = work.back();
      work.pop_back();
      if (detail::same_fate(br.fa, br.fb)) continue;
      if (br.fa.kind == detail::ray_kind::budget || br.fb.kind == detail::ray_kind::budget) {
        out.complete = false;
        if (!budget_warned)
          out.warnings.push_back("flow budget exhausted inside a bracket; list may be partial");
        budget_warned = true;
        continue;
      }
      if (br.fa.kind == detail::ray_kind::side && br.fb.kind == detail::ray_kind::side &&
          br.fa.side != br.fb.side) {
        // both ends cross the target's ball on opposite sides: bisect to a hit
        double lo = br.a, hi = br.b;
        int side_lo = br.fa.side;
        bool done = false;
        for (int it = 0; it < opt.bisect_max && !done; ++it) {
          double mid = 0.5 * (lo + hi);
          auto run = probe(mid, false);
          if (run.kind == detail::ray_kind::hit) {
            land(mid);
            done = true;
          } else if (run.kind == detail::ray_kind::side) {
            (run.side == side_lo ? lo : hi) = mid;
          } else {
            double alt = lo + 0.382 * (hi - lo);
            auto run2 = probe(alt, false);
            if (run2.kind == detail::ray_kind::hit) {
              land(alt);
              done = true;
            } else if (run2.kind == detail::ray_kind::side) {
              (run2.side == side_lo ? lo : hi) = alt;
            } else {
              out.complete = false;
              out.warnings.push_back("bracket abandoned: probes lost the target's neighborhood");
              done = true;
            }
          }
        }
        if (!done) {
          out.complete = false;
          out.warnings.push_back("bisection depth exhausted before reaching arrival tolerance");
        }
        continue;
      }
      if (br.fa.kind == detail::ray_kind::near_saddle &&
          br.fb.kind == detail::ray_kind::near_saddle && br.fa.id == br.fb.id &&
          br.fa.side != br.fb.side)
        continue;  // tightly brackets a connection to a different saddle
      if (detail::same_final(br.fa, br.fb))
        continue;  // capture-ball graze: the deck class did not change across it
      if (br.b - br.a < 1e-12)
        continue;  // below angular resolution: flanks a separatrix into another rest point
      if (br.depth >= opt.subdivide_max) {
        out.complete = false;
        if (!depth_warned)
          out.warnings.push_back("fate subdivision depth exhausted; list may be partial");
        depth_warned = true;
        continue;
      }
      double mid = 0.5 * (br.a + br.b);
      auto fm = probe(mid, false);
      if (fm.kind == detail::ray_kind::hit) {
        land(mid);
        continue;
      }
      work.push_back({br.a, mid, br.fa, fm, br.depth + 1});
      work.push_back({mid, br.b, fm, br.fb, br.depth + 1});
    }
  }

  // merge duplicates (same winding and arrival sector), keep the closest arrival
  std::map<std::pair<class_key, int>, instanton> dedup;
  for (auto& inst : out.list) {
    auto key = std::make_pair(to_key(inst.winding), inst.arrival_sector);
    auto it = dedup.find(key);
    if (it == dedup.end() || inst.arrival_dist < it->second.arrival_dist)
      dedup[key] = std::move(inst);
  }
  out.list.clear();
  for (auto& [key, inst] : dedup) {
    if (-inst.omega_value <= R + 1e-12) out.list.push_back(std::move(inst));
  }
  return out;
}

// Aggregate a search result into a signed counting function over windings.
inline instanton_counting build_instanton_counting(const instanton_search& found, int from_id,
                                                   int to_id, double R) {
  instanton_counting cf;
  cf.from = from_id;
  cf.to = to_id;
  cf.cutoff = R;
  cf.complete = found.complete;
  for (const auto& inst : found.list) cf.entries[to_key(inst.winding)] += inst.sign;
  return cf;
}

// Laplace transform of an instanton counting function: exponents are exact
// class costs, coefficients the signed integer counts.
inline dirichlet_series laplace(const instanton_counting& cf, const closed_one_form& omega,
                                const rest_point& from, const rest_point& to) {
  dirichlet_series s;
  s.cutoff = cf.cutoff;
  s.finite_complete = cf.complete && omega.harmonic.norm() == 0.0;
  for (const auto& [key, count] : cf.entries) {
    series_term t;
    t.lambda = instanton_class_cost(omega, from, to, from_key(key));
    t.coeff = static_cast<double>(count);
    s.terms.push_back(t);
  }
  detail::aggregate_terms(s.terms);
  return s;
}

}  // namespace torusflow
