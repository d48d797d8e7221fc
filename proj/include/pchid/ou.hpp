#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "pchid/rng.hpp"

namespace pchid {

// ---------------------------------------------------------------------------
// Error function, |err| < 1e-10 on [-6, 6]. Maclaurin-type series around 0,
// Lentz continued fraction for the complementary function at large |x|.
inline double erf_impl(double x) {
  const double ax = std::abs(x);
  const double sign = x < 0.0 ? -1.0 : 1.0;
  if (ax < 3.0) {
    // erf(x) = (2/sqrt(pi)) e^{-x^2} sum_n (2x^2)^n x / (2n+1)!!
    const double x2 = x * x;
    double term = ax;
    double sum = ax;
    for (int n = 1; n < 200; ++n) {
      term *= 2.0 * x2 / (2.0 * n + 1.0);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sign * 1.1283791670955125738961589 * std::exp(-x2) * sum;
  }
  // erfc(x) sqrt(pi) e^{x^2} = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  // evaluated bottom-up at fixed depth, ample for x >= 3
  double tail = 0.0;
  for (int n = 60; n >= 1; --n) tail = (0.5 * n) / (ax + tail);
  const double erfc =
      std::exp(-ax * ax) * 0.5641895835477562869481 / (ax + tail);
  return sign * (1.0 - erfc);
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature, absolute tolerance.
namespace detail_quad {
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a,
                       double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  // non-finite integrand (the as-printed hitting density overflows near 0):
  // subdividing cannot help, report the divergence as-is
  if (!std::isfinite(left + right + whole)) return left + right;
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail_quad

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-9, int max_depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = detail_quad::simpson(f, a, b, fa, fm, fb);
  return detail_quad::adaptive(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// ---------------------------------------------------------------------------
// The goal-pull process ds = eps (g - s) dt + sigma dW.

struct OuParams {
  double epsilon = 1.0;  // goal-pull coefficient
  double sigma = 1.0;    // noise scale
  double s0 = 1.0;       // start
  double g = 0.0;        // goal

  void validate() const {
    if (sigma <= 0.0) throw std::invalid_argument("OuParams: sigma must be > 0");
    if (epsilon < 0.0) throw std::invalid_argument("OuParams: epsilon must be >= 0");
  }
};

struct FhtEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t sample_count = 0;   // hitting paths only
  double hit_fraction = 0.0;      // within the horizon
};

// Euler-Maruyama path including s0; length horizon/dt + 1 samples.
inline std::vector<double> simulate_ou(const OuParams& p, double dt,
                                       double horizon, std::uint64_t seed) {
  p.validate();
  if (dt <= 0.0) throw std::invalid_argument("simulate_ou: dt must be > 0");
  Rng rng(seed);
  const std::size_t steps = static_cast<std::size_t>(horizon / dt);
  std::vector<double> path;
  path.reserve(steps + 1);
  double s = p.s0;
  path.push_back(s);
  const double sqrt_dt = std::sqrt(dt);
  for (std::size_t i = 0; i < steps; ++i) {
    s += p.epsilon * (p.g - s) * dt + p.sigma * sqrt_dt * rng.normal();
    path.push_back(s);
  }
  return path;
}

// Closed form E(s_t) = g + (s0 - g) e^{-eps t}.
inline double mean_state(const OuParams& p, double t) {
  if (t < 0.0) throw std::invalid_argument("mean_state: t must be >= 0");
  return p.g + (p.s0 - p.g) * std::exp(-p.epsilon * t);
}

struct NormalizedStart {
  double s0_tilde = 0.0;   // sqrt(2 eps)/sigma * (s0 - g)
  double time_scale = 0.0; // t_tilde = time_scale * t
};

inline NormalizedStart normalize(const OuParams& p) {
  p.validate();
  if (p.epsilon <= 0.0)
    throw std::invalid_argument("normalize: epsilon must be > 0");
  return {std::sqrt(2.0 * p.epsilon) / p.sigma * (p.s0 - p.g), p.epsilon};
}

// First-hitting-time density of the normalized process, exactly as the
// source formula prints it: the final exponential carries a positive sign.
// That sign makes the density non-normalizable near 0; see
// fht_density_corrected and the discrepancy handling in the analysis CLI.
inline double fht_density_as_printed(double s0_tilde, double t_tilde) {
  if (t_tilde <= 0.0) throw std::invalid_argument("fht_density: t must be > 0");
  if (s0_tilde <= 0.0) throw std::invalid_argument("fht_density: s0 must be > 0");
  const double e = std::exp(-t_tilde);
  const double one_m = 1.0 - std::exp(-2.0 * t_tilde);
  return std::sqrt(2.0 / 3.14159265358979323846) * s0_tilde * e /
         std::pow(one_m, 1.5) *
         std::exp(s0_tilde * s0_tilde * e * e / (2.0 * one_m));
}

// Same expression with the standard negative sign in the exponential.
inline double fht_density_corrected(double s0_tilde, double t_tilde) {
  if (t_tilde <= 0.0) throw std::invalid_argument("fht_density: t must be > 0");
  if (s0_tilde <= 0.0) throw std::invalid_argument("fht_density: s0 must be > 0");
  const double e = std::exp(-t_tilde);
  const double one_m = 1.0 - std::exp(-2.0 * t_tilde);
  return std::sqrt(2.0 / 3.14159265358979323846) * s0_tilde * e /
         std::pow(one_m, 1.5) *
         std::exp(-s0_tilde * s0_tilde * e * e / (2.0 * one_m));
}

inline double fht_density(double s0_tilde, double t_tilde) {
  return fht_density_as_printed(s0_tilde, t_tilde);
}

// E[tau_tilde] = sqrt(pi/2) Int_{-s0}^0 (1 + erf(t/sqrt 2)) e^{t^2/2} dt.
inline double fht_expectation(double s0_tilde) {
  if (s0_tilde < 0.0)
    throw std::invalid_argument("fht_expectation: s0 must be >= 0");
  if (s0_tilde == 0.0) return 0.0;
  const auto integrand = [](double t) {
    return (1.0 + erf_impl(t / 1.4142135623730950488)) * std::exp(0.5 * t * t);
  };
  return std::sqrt(3.14159265358979323846 / 2.0) *
         adaptive_simpson(integrand, -s0_tilde, 0.0, 1e-9);
}

// Monte Carlo first hitting times of the normalized process
// ds = -s dt + sqrt(2) dW from s0 > 0 down to 0. Per-path seeding keeps the
// result independent of the thread count. Sub-step hits are placed by
// linear interpolation of the sign change.
inline std::vector<double> mc_fht_samples(double s0_tilde, std::size_t n_paths,
                                          double dt, double horizon,
                                          std::uint64_t seed,
                                          std::size_t n_threads = 0) {
  if (s0_tilde <= 0.0) throw std::invalid_argument("mc_fht: s0 must be > 0");
  if (n_threads == 0)
    n_threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<double> hits(n_paths, -1.0);  // -1 marks "never hit"
  const double sqrt2dt = std::sqrt(2.0 * dt);
  const std::size_t max_steps = static_cast<std::size_t>(horizon / dt);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t path = begin; path < end; ++path) {
      Rng rng(Rng::derive(seed, path));
      double s = s0_tilde;
      for (std::size_t i = 0; i < max_steps; ++i) {
        const double next = s - s * dt + sqrt2dt * rng.normal();
        if (next <= 0.0) {
          const double frac = s / (s - next);
          hits[path] = (static_cast<double>(i) + frac) * dt;
          break;
        }
        s = next;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t chunk = (n_paths + n_threads - 1) / n_threads;
  for (std::size_t t = 0; t < n_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n_paths, begin + chunk);
    if (begin < end) pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();
  return hits;
}

inline FhtEstimate summarize_fht(const std::vector<double>& samples) {
  FhtEstimate est;
  double sum = 0.0;
  for (double s : samples) {
    if (s < 0.0) continue;
    sum += s;
    ++est.sample_count;
  }
  est.hit_fraction =
      samples.empty() ? 0.0
                      : static_cast<double>(est.sample_count) / samples.size();
  if (est.sample_count == 0) return est;
  est.mean = sum / static_cast<double>(est.sample_count);
  double var = 0.0;
  for (double s : samples)
    if (s >= 0.0) var += (s - est.mean) * (s - est.mean);
  if (est.sample_count > 1) {
    var /= static_cast<double>(est.sample_count - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(est.sample_count));
  }
  return est;
}

inline FhtEstimate mc_fht_normalized(double s0_tilde, std::size_t n_paths,
                                     double dt, double horizon,
                                     std::uint64_t seed) {
  return summarize_fht(mc_fht_samples(s0_tilde, n_paths, dt, horizon, seed));
}

// Kolmogorov-Smirnov statistic of hitting samples against a density given
// pointwise; the model CDF is accumulated by trapezoid on the sorted
// sample grid.
inline double ks_statistic_vs_density(
    std::vector<double> samples,
    const std::function<double(double)>& density) {
  samples.erase(std::remove_if(samples.begin(), samples.end(),
                               [](double s) { return s < 0.0; }),
                samples.end());
  if (samples.empty()) throw std::invalid_argument("ks: no hitting samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  double cdf = 0.0;
  double prev_t = 0.0, prev_f = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = samples[i];
    const double f = density(t);
    cdf += 0.5 * (f + prev_f) * (t - prev_t);
    prev_t = t;
    prev_f = f;
    const double emp_lo = static_cast<double>(i) / n;
    const double emp_hi = static_cast<double>(i + 1) / n;
    ks = std::max(ks, std::max(std::abs(cdf - emp_lo), std::abs(cdf - emp_hi)));
  }
  return ks;
}

}  // namespace pchid
