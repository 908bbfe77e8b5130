#pragma once

// System-definition files: a torus dimension, the vector field X, a closed
// one-form ω, and an optional complex twist η.  Text format, one `key = value`
// per line, '#' starts a comment:
//
//   dim = 2
//   field.1 = <expr>
//   field.2 = <expr>
//   omega.harmonic = a1, a2
//   omega.potential = <expr>          (optional)
//   eta.harmonic = 0.5, 1+0.25i      (optional, complex entries allowed)
//   eta.potential = <expr>            (optional)
//
// Loading verifies: every referenced variable is within `dim`; every field
// component and potential is 1-periodic (sampled on a 17^n grid, tolerance
// 1e-9); every expression evaluates finitely on that grid (catches divisors
// that vanish on the domain).

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "torusflow/torus.hpp"

namespace torusflow {

struct twist_form {
  cvec harmonic;
  expr_ptr potential;  // may be null

  std::complex<double> pair_class(const ivec& winding) const {
    std::complex<double> s = 0.0;
    for (int i = 0; i < winding.size(); ++i) s += harmonic[i] * double(winding[i]);
    return s;
  }
};

struct field_system {
  int n = 0;
  std::vector<expr_ptr> X;  // n components
  closed_one_form omega;
  std::optional<twist_form> eta;
  std::string name;  // file stem, for report labeling

  vec X_at(const vec& x) const {
    vec v(n);
    for (int i = 0; i < n; ++i) v[i] = eval_value(X[i], x);
    return v;
  }

  // D_x(X): row i = gradient of component i
  mat jacobian_at(const vec& x) const {
    mat J(n, n);
    for (int i = 0; i < n; ++i) J.row(i) = eval_gradient(X[i], x).transpose();
    return J;
  }

  // ω(X)(x)
  double omega_X(const vec& x) const { return omega.apply(x, X_at(x)); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::complex<double> parse_complex_entry(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) throw config_error("empty numeric entry");
  const char* p = s.c_str();
  char* end = nullptr;
  double first = std::strtod(p, &end);
  if (end == p) throw config_error("malformed numeric entry '" + s + "'");
  while (*end == ' ') ++end;
  if (*end == '\0') return {first, 0.0};
  if (*end == 'i' && *(end + 1) == '\0') return {0.0, first};
  if (*end == '+' || *end == '-') {
    const char* q = end;
    char* end2 = nullptr;
    double second = std::strtod(q, &end2);
    while (*end2 == ' ') ++end2;
    if (end2 != q && *end2 == 'i' && *(end2 + 1) == '\0') return {first, second};
  }
  throw config_error("malformed numeric entry '" + s + "'");
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Sample f on a 17^n grid: checks finiteness and 1-periodicity in each
// coordinate direction.
inline void check_periodic_finite(const expr_ptr& f, int n, const std::string& what) {
  const int G = 17;
  const double tol = 1e-9;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= G;
  vec x(n), xs(n);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int i = 0; i < n; ++i) {
      x[i] = double(rem % G) / G;
      rem /= G;
    }
    double v;
    try {
      v = eval_value(f, x);
    } catch (const compute_error& e) {
      throw config_error(what + ": expression not evaluable on check grid (" + e.what() + ")");
    }
    if (!std::isfinite(v)) throw config_error(what + ": expression not finite on check grid");
    for (int i = 0; i < n; ++i) {
      xs = x;
      xs[i] += 1.0;
      double vs;
      try {
        vs = eval_value(f, xs);
      } catch (const compute_error& e) {
        throw config_error(what + ": expression not evaluable on check grid (" + e.what() + ")");
      }
      if (std::fabs(vs - v) > tol)
        throw config_error(what + ": not 1-periodic in x" + std::to_string(i + 1) +
                           " (checked on 17^n grid)");
    }
  }
}

}  // namespace detail

inline field_system parse_system(const std::string& text, const std::string& name = "") {
  int n = 0;
  std::vector<std::pair<int, expr_ptr>> fields;
  std::optional<vec> omega_h;
  expr_ptr omega_pot;
  std::optional<cvec> eta_h;
  expr_ptr eta_pot;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("system file line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key == "dim") {
      n = std::atoi(val.c_str());
      if (n < 2 || n > 3)
        throw config_error("dim must be 2 or 3 (line " + std::to_string(lineno) + ")");
    } else if (key.rfind("field.", 0) == 0) {
      int idx = std::atoi(key.c_str() + 6);
      if (idx < 1) throw config_error("bad field index in '" + key + "'");
      try {
        fields.emplace_back(idx, parse_expression(val));
      } catch (const parse_error& pe) {
        throw config_error(key + ": " + pe.what());
      }
    } else if (key == "omega.harmonic" || key == "eta.harmonic") {
      auto entries = detail::split_commas(val);
      if (key[0] == 'o') {
        vec a(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
          std::complex<double> c = detail::parse_complex_entry(entries[i]);
          if (c.imag() != 0.0) throw config_error("omega.harmonic must be real");
          a[i] = c.real();
        }
        omega_h = a;
      } else {
        cvec a(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i)
          a[i] = detail::parse_complex_entry(entries[i]);
        eta_h = a;
      }
    } else if (key == "omega.potential" || key == "eta.potential") {
      try {
        (key[0] == 'o' ? omega_pot : eta_pot) = parse_expression(val);
      } catch (const parse_error& pe) {
        throw config_error(key + ": " + pe.what());
      }
    } else {
      throw config_error("unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
    }
  }

  if (n == 0) throw config_error("system file missing 'dim'");
  field_system sys;
  sys.n = n;
  sys.name = name;
  sys.X.resize(n);
  std::vector<bool> seen(n, false);
  for (auto& [idx, e] : fields) {
    if (idx > n) throw config_error("field." + std::to_string(idx) + " exceeds dim");
    if (seen[idx - 1]) throw config_error("duplicate field." + std::to_string(idx));
    seen[idx - 1] = true;
    sys.X[idx - 1] = e;
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i]) throw config_error("missing field." + std::to_string(i + 1));

  if (!omega_h) throw config_error("system file missing 'omega.harmonic'");
  if (omega_h->size() != n) throw config_error("omega.harmonic length must equal dim");
  sys.omega.harmonic = *omega_h;
  sys.omega.potential = omega_pot;

  if (eta_h || eta_pot) {
    twist_form tw;
    tw.harmonic = eta_h ? *eta_h : cvec::Zero(n);
    if (tw.harmonic.size() != n) throw config_error("eta.harmonic length must equal dim");
    tw.potential = eta_pot;
    sys.eta = tw;
  }

  for (int i = 0; i < n; ++i) {
    if (max_variable(sys.X[i]) > n)
      throw config_error("field." + std::to_string(i + 1) + " references variable beyond dim");
    detail::check_periodic_finite(sys.X[i], n, "field." + std::to_string(i + 1));
  }
  if (omega_pot) {
    if (max_variable(omega_pot) > n)
      throw config_error("omega.potential references variable beyond dim");
    detail::check_periodic_finite(omega_pot, n, "omega.potential");
  }
  if (eta_pot) {
    if (max_variable(eta_pot) > n)
      throw config_error("eta.potential references variable beyond dim");
    detail::check_periodic_finite(eta_pot, n, "eta.potential");
  }
  return sys;
}

inline field_system load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open system file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path;
  std::size_t slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return parse_system(ss.str(), stem);
}

}  // namespace torusflow
