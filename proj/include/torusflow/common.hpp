#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace torusflow {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Raised for malformed input: bad expression text, inconsistent system files,
// out-of-range parameters.  CLI maps this to exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a numerical procedure cannot certify its result (Newton stall,
// rejected spectral split, non-hyperbolic data, ...).  CLI maps this to exit
// code 3 after emitting whatever partial report exists.
struct compute_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fold a coordinate into [0, 1).
inline double wrap01(double x) {
  double y = x - std::floor(x);
  return (y >= 1.0) ? 0.0 : y;  // guard against floor rounding at 1-eps
}

// Distance of two reals modulo 1, in [0, 1/2].
inline double dist_mod1(double a, double b) {
  double d = std::fabs(wrap01(a) - wrap01(b));
  return std::min(d, 1.0 - d);
}

// Compensated (Kahan) accumulator; used wherever long sums feed tolerances.
struct kahan_sum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

// Worker cap for the few internally parallel loops.  NOVIKOV_THREADS limits
// it; unset means single-threaded (deterministic merge order either way).
inline unsigned worker_count() {
  if (const char* env = std::getenv("NOVIKOV_THREADS")) {
    long k = std::atol(env);
    if (k >= 1) return static_cast<unsigned>(k);
  }
  return 1;
}

// Chunked parallel map: f(i) for i in [0, n).  Results are merged in index
// order by the caller; this only schedules.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
  unsigned w = worker_count();
  if (w <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &f] {
      for (std::size_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace torusflow
