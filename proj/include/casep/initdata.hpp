#pragma once

// Initial height data: the viable approximation A^eps of a smooth profile,
// i.i.d. random configurations, and the spin lift to J > 1.
//
// A^eps f on the lattice eps Z (site k <-> macroscopic point k eps), in units
// of eps^{1/2}:
//   * h(0) is the even integer nearest to f(0) / eps^{1/2}, so all outputs
//     share one parity class and pointwise max/min stay viable;
//   * inside [-M, M] the sites are cut into blocks of L steps (L the even
//     integer nearest eps^{-3/4}, length about eps^{1/4}) anchored at 0. A
//     block on steps [a, b) takes |s| steps of sign(s), then oscillates with
//     increments (-1)^k. The signed
//     count s is the smallest one whose block increment equals the target
//     (f(b eps) - f(a eps)) / eps^{1/2} rounded to the achievable values
//     (spacing 2) with a per-block dither, so rounding errors of consecutive
//     blocks cancel instead of accumulating;
//   * outside [-M, M] the increments are (-1)^k.
// For a fixed block, s is nondecreasing in the target and the oscillation
// phase is global, so g' >= f' implies every increment of A g dominates that
// of A f.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/profile.hpp"
#include "casep/rng.hpp"

namespace casep {

struct ApproxParams {
  double epsilon = 0.0;
  double delta_prime = 0.0;
  double cutoff = 1.0;            // M
  std::int64_t block_steps = 1;   // L
  std::int64_t cutoff_steps = 0;  // floor(M / eps) rounded down to even
};

// Smallest integer M >= 1 with (1+|x|)^{-delta'}(|f(x)| + |f'(x)|) < 2 eps^{1/2}
// for M <= |x| <= extent, scanned on a grid of spacing 1/16. M beyond the
// extent is reported as ceil(extent).
inline double approx_cutoff(const SmoothProfile& f, double eps, double delta_prime, double extent) {
  const double bound = 2.0 * std::sqrt(eps);
  double last_fail = 0.0;
  const int n = static_cast<int>(std::ceil(extent * 16.0));
  for (int i = 0; i <= n; ++i) {
    const double r = i / 16.0;
    for (double x : {r, -r}) {
      const double q = (std::fabs(f(x)) + std::fabs(f.derivative(x))) /
                       std::pow(1.0 + std::fabs(x), delta_prime);
      if (!(q < bound)) last_fail = std::max(last_fail, r);
    }
  }
  return std::max(1.0, std::ceil(last_fail + (last_fail > 0 ? 1e-12 : 0.0)));
}

inline ApproxParams approx_params(const SmoothProfile& f, double eps, Window height_window,
                                  double delta_prime = -1) {
  if (!(eps > 0.0 && eps <= 1.0)) throw OutOfRange("approximation requires 0 < eps <= 1");
  if (!f.certified()) throw NotInC1Delta("profile '" + f.name + "' is not certified");
  if (delta_prime < 0) delta_prime = 0.5 * (1.0 + f.delta);
  if (!(delta_prime > f.delta && delta_prime < 1.0))
    throw OutOfRange("delta_prime must lie in (delta, 1)");
  const double extent =
      eps * static_cast<double>(std::max(std::abs(height_window.lo), std::abs(height_window.hi)));
  ApproxParams p;
  p.epsilon = eps;
  p.delta_prime = delta_prime;
  p.cutoff = approx_cutoff(f, eps, delta_prime, extent + 1.0);
  p.block_steps = std::max<std::int64_t>(2, 2 * std::llround(0.5 * std::pow(eps, -0.75)));
  // Even, so the last (clipped) block has even length and a zero target stays exact.
  p.cutoff_steps = 2 * static_cast<std::int64_t>(std::floor(p.cutoff / eps / 2.0 + 1e-9));
  return p;
}

namespace detail {

inline int parity_sign(std::int64_t k) { return (k % 2 == 0) ? 1 : -1; }

// Sum of (-1)^k for k in [p, b).
inline std::int64_t oscillation_sum(std::int64_t p, std::int64_t b) {
  return ((b - p) % 2 == 0) ? 0 : parity_sign(p);
}

// Dither in [0, 1) for block j: the Weyl sequence j / golden ratio mod 1.
inline double block_dither(std::int64_t j) {
  const double x = static_cast<double>(j) * 0.6180339887498949;
  return x - std::floor(x);
}

// Signed slope count for the block of steps [a, b) and target increment T.
// Achievable increments are -n, -n+2, ..., n; T is rounded down after adding
// 2 * dither, which is unbiased when the dither is uniform.
inline std::int64_t block_count(std::int64_t a, std::int64_t b, double target, double dither) {
  const std::int64_t n = b - a;
  double v = 2.0 * std::floor((target + static_cast<double>(n)) / 2.0 + dither) - static_cast<double>(n);
  v = std::clamp(v, -static_cast<double>(n), static_cast<double>(n));
  const auto want = static_cast<std::int64_t>(v);
  for (std::int64_t s = -n; s <= n; ++s) {
    const std::int64_t m = s < 0 ? -s : s;
    if (s + oscillation_sum(a + m, b) == want) return s;
  }
  return 0;  // unreachable: every value in the parity class is attained
}

// Increment d[k] = h(k+1) - h(k) for step k, in units of one lattice step.
inline void fill_block(std::vector<int>& d, std::int64_t offset, std::int64_t a, std::int64_t b,
                       std::int64_t s) {
  const std::int64_t m = s < 0 ? -s : s;
  const int sign = s < 0 ? -1 : 1;
  for (std::int64_t k = a; k < b; ++k)
    d[static_cast<std::size_t>(k - offset)] = (k < a + m) ? sign : parity_sign(k);
}

}  // namespace detail

// A^eps f on the given height window (which must contain 0), with the
// block/cutoff parameters fixed by `p`.
inline HeightFunction approx_viable(const SmoothProfile& f, const ApproxParams& p,
                                    Window height_window) {
  if (!height_window.contains(0) || height_window.size() < 2)
    throw OutOfRange("approximation window must contain the origin and one bond");
  const double eps = p.epsilon;
  const double unit = std::sqrt(eps);
  const std::int64_t lo = height_window.lo, hi = height_window.hi;
  const std::int64_t L = p.block_steps, Ms = p.cutoff_steps;
  // d[k - lo] is the increment on step k, for k in [lo, hi).
  std::vector<int> d(static_cast<std::size_t>(hi - lo), 0);
  for (std::int64_t k = lo; k < hi; ++k) d[static_cast<std::size_t>(k - lo)] = detail::parity_sign(k);

  auto do_block = [&](std::int64_t a, std::int64_t b) {
    const double target = (f(static_cast<double>(b) * eps) - f(static_cast<double>(a) * eps)) / unit;
    const std::int64_t j = a >= 0 ? a / L : -((-a + L - 1) / L);
    const std::int64_t s = detail::block_count(a, b, target, detail::block_dither(j));
    // Blocks are computed in full and clipped to the window.
    std::vector<int> tmp(static_cast<std::size_t>(b - a));
    detail::fill_block(tmp, a, a, b, s);
    for (std::int64_t k = std::max(a, lo); k < std::min(b, hi); ++k)
      d[static_cast<std::size_t>(k - lo)] = tmp[static_cast<std::size_t>(k - a)];
  };
  for (std::int64_t a = 0; a < std::min(Ms, hi); a += L) do_block(a, std::min(a + L, Ms));
  for (std::int64_t b = 0; b > std::max(-Ms, lo); b -= L) do_block(std::max(b - L, -Ms), b);

  HeightFunction h;
  h.window = height_window;
  h.spin_max = 1;
  h.values.assign(height_window.size(), 0);
  const Height h0 = 2 * static_cast<Height>(std::llround(f(0.0) / (2.0 * unit)));
  const std::size_t i0 = height_window.index(0);
  h.values[i0] = h0;
  for (std::size_t i = i0; i + 1 < h.values.size(); ++i) h.values[i + 1] = h.values[i] + d[i];
  for (std::size_t i = i0; i > 0; --i) h.values[i - 1] = h.values[i] - d[i - 1];
  return h;
}

inline HeightFunction approx_viable(const SmoothProfile& f, double eps, Window height_window,
                                    double delta_prime = -1) {
  return approx_viable(f, approx_params(f, eps, height_window, delta_prime), height_window);
}

// A^eps of a pair with a common cutoff M = max(M_f, M_g), as required for the
// difference-monotonicity property.
inline std::pair<HeightFunction, HeightFunction> approx_viable_pair(const SmoothProfile& f,
                                                                    const SmoothProfile& g,
                                                                    double eps, Window height_window,
                                                                    double delta_prime = -1) {
  ApproxParams pf = approx_params(f, eps, height_window, delta_prime);
  const ApproxParams pg = approx_params(g, eps, height_window, delta_prime);
  pf.cutoff = std::max(pf.cutoff, pg.cutoff);
  pf.cutoff_steps = std::max(pf.cutoff_steps, pg.cutoff_steps);
  return {approx_viable(f, pf, height_window), approx_viable(g, pf, height_window)};
}

// eps^{1/2} h(x / eps) / unit with linear interpolation between sites; `unit`
// undoes the spin lift (2 for even J).
inline double rescaled_value(const HeightFunction& h, double eps, double x, double unit = 1.0) {
  const double s = x / eps;
  const double lo = static_cast<double>(h.window.lo), hi = static_cast<double>(h.window.hi);
  const double tol = 1e-9 * std::max(1.0, std::fabs(s));
  if (s < lo - tol || s > hi + tol) throw GridUncovered("point outside the height window");
  const double sc = std::clamp(s, lo, hi);
  const auto k = static_cast<Site>(std::floor(sc));
  const double w = sc - static_cast<double>(k);
  const double a = static_cast<double>(h.at(k));
  const double b = k < h.window.hi ? static_cast<double>(h.at(k + 1)) : a;
  return std::sqrt(eps) * (a + w * (b - a)) / unit;
}

// --- lift to J > 1 ---------------------------------------------------------

// A J = 1 viable height is viable for odd J as is, and for even J after
// doubling. Returns the lifted height and sets spin_max = J.
inline int spin_lift_factor(int J) { return J % 2 == 1 ? 1 : 2; }

inline HeightFunction lift_to_spin(HeightFunction h, int J) {
  if (J < 1) throw OutOfRange("J must be >= 1");
  if (h.spin_max != 1) throw OutOfRange("lift expects a J = 1 height function");
  const int m = spin_lift_factor(J);
  for (auto& v : h.values) v *= m;
  h.origin_current *= m;
  h.spin_max = J;
  return h;
}

// --- random data -----------------------------------------------------------

// i.i.d. Bernoulli(rho) occupancies on the configuration window, height
// anchored at h(0) = 0. rho = 0 and rho = 1 are accepted (degenerate laws).
inline HeightFunction bernoulli_height(double rho, Window config_window, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw OutOfRange("rho must lie in [0,1]");
  Rng rng(seed);
  std::vector<int> occ(config_window.size());
  for (auto& v : occ) v = rng.uniform() < rho ? 1 : 0;
  return height_from_config(Configuration(config_window, 1, std::move(occ)), 0);
}

// Monotone coupling of Bernoulli(rho_low) and Bernoulli(rho_high) through one
// uniform per site: eta_low <= eta_high pointwise, so the height difference
// is nondecreasing.
inline std::pair<HeightFunction, HeightFunction> ordered_bernoulli_pair(double rho_low,
                                                                        double rho_high,
                                                                        Window config_window,
                                                                        std::uint64_t seed) {
  if (!(rho_low >= 0.0 && rho_low <= rho_high && rho_high <= 1.0))
    throw OutOfRange("need 0 <= rho_low <= rho_high <= 1");
  Rng rng(seed);
  std::vector<int> a(config_window.size()), b(config_window.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = rng.uniform();
    a[i] = u < rho_low ? 1 : 0;
    b[i] = u < rho_high ? 1 : 0;
  }
  return {height_from_config(Configuration(config_window, 1, std::move(a)), 0),
          height_from_config(Configuration(config_window, 1, std::move(b)), 0)};
}

// i.i.d. Binomial(J, rho) occupancies, height anchored at 0.
inline HeightFunction product_height(double rho, int J, Window config_window, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw OutOfRange("rho must lie in [0,1]");
  if (J < 1) throw OutOfRange("J must be >= 1");
  Rng rng(seed);
  std::vector<int> occ(config_window.size());
  for (auto& v : occ) {
    v = 0;
    for (int j = 0; j < J; ++j) v += rng.uniform() < rho ? 1 : 0;
  }
  return height_from_config(Configuration(config_window, J, std::move(occ)), 0);
}

// Alternating occupancies (1,0,1,0,... with eta(x) = 1 for even x): the flat
// J = 1 profile h(x) in {0, 1} up to the anchor.
inline HeightFunction flat_height(Window config_window) {
  std::vector<int> occ(config_window.size());
  for (std::size_t i = 0; i < occ.size(); ++i)
    occ[i] = ((config_window.lo + static_cast<Site>(i)) % 2 == 0) ? 1 : 0;
  return height_from_config(Configuration(config_window, 1, std::move(occ)), 0);
}

}  // namespace casep
