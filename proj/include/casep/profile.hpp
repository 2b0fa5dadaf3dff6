#pragma once

// Smooth macroscopic profiles f with derivative f', the C^1_delta norm
//   |f(0)| + sup_x (1+|x|)^{-delta} (|f'(x)| + |int_0^x |f'(u)| du|)
// and the profile constructions used to build ordered initial data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "casep/errors.hpp"

namespace casep {

struct C1Grid {
  double extent = 4096.0;    // certify on [-extent, extent]
  double cell = 0.25;        // quadrature cell width
  double tol = 1e-10;        // adaptive Simpson tolerance per cell
  double overflow = 1e12;    // norms above this are reported as infinite
  double growth_factor = 2;  // far-field sup / near-field sup above this => unbounded
};

namespace detail {

struct Simpson {
  const std::function<double(double)>& g;
  bool failed = false;

  double run(double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = g(a), fm = g(m), fb = g(b);
    return step(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4 * fm + fb), tol, 30);
  }

  double step(double a, double b, double fa, double fm, double fb, double whole, double tol,
              int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = g(lm), frm = g(rm);
    const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    const double diff = left + right - whole;
    if (!std::isfinite(diff)) {
      failed = true;
      return 0.0;
    }
    // Depth exhaustion happens at jump discontinuities of the integrand;
    // the remaining interval is then below 2^-30 of the cell.
    if (depth <= 0) return left + right;
    if (std::fabs(diff) <= 15 * tol) return left + right + diff / 15.0;
    return step(a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           step(m, b, fm, frm, fb, right, tol / 2, depth - 1);
  }
};

}  // namespace detail

// Integral of g over [a, b] by adaptive Simpson on cells of width `cell`.
inline double integrate(const std::function<double(double)>& g, double a, double b,
                        double cell = 0.25, double tol = 1e-10) {
  if (a == b) return 0.0;
  const double sign = a < b ? 1.0 : -1.0;
  if (a > b) std::swap(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / cell)));
  const double w = (b - a) / n;
  detail::Simpson s{g};
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += s.run(a + i * w, a + (i + 1) * w, tol);
  if (s.failed) throw QuadratureFailure("adaptive quadrature did not converge");
  return sign * total;
}

struct SmoothProfile {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  double delta = 0.5;
  // C^1_delta norm from the last certify(); +inf if not in the space, NaN if
  // never certified.
  double c1_norm = std::numeric_limits<double>::quiet_NaN();
  C1Grid grid;

  double operator()(double x) const { return f(x); }
  double derivative(double x) const { return df(x); }
  bool certified() const { return std::isfinite(c1_norm); }
};

// Quadrature evaluation of the C^1_delta norm on grid.extent. Returns +inf
// when the weighted quantity exceeds grid.overflow or keeps growing towards
// the edge of the grid (sup over the outer half exceeds growth_factor times
// the sup over |x| <= extent / 32).
inline double c1_delta_norm(const SmoothProfile& p) {
  if (!p.f || !p.df) throw QuadratureFailure("profile has no evaluation callables");
  const C1Grid& g = p.grid;
  const double f0 = p.f(0.0);
  if (!std::isfinite(f0)) throw QuadratureFailure("f(0) is not finite");
  const std::function<double(double)> abs_df = [&](double u) { return std::fabs(p.df(u)); };

  double sup_near = 0.0, sup_far = 0.0, sup_all = 0.0;
  const int cells = static_cast<int>(std::ceil(g.extent / g.cell));
  const double near_edge = g.extent / 32.0;
  for (int side : {1, -1}) {
    double variation = 0.0;
    for (int i = 0; i <= cells; ++i) {
      const double x = side * i * g.cell;
      if (i > 0) variation += integrate(abs_df, x - side * g.cell, x, g.cell, g.tol) * side;
      const double d = p.df(x);
      if (!std::isfinite(d)) throw QuadratureFailure("f' is not finite at x = " + std::to_string(x));
      const double q = (std::fabs(d) + std::fabs(variation)) / std::pow(1.0 + std::fabs(x), p.delta);
      sup_all = std::max(sup_all, q);
      if (std::fabs(x) <= near_edge) sup_near = std::max(sup_near, q);
      if (std::fabs(x) >= g.extent / 2) sup_far = std::max(sup_far, q);
    }
  }
  const double norm = std::fabs(f0) + sup_all;
  if (norm > g.overflow) return std::numeric_limits<double>::infinity();
  if (sup_far > g.growth_factor * std::max(sup_near, 1e-300) && sup_far > 1e-12)
    return std::numeric_limits<double>::infinity();
  return norm;
}

// Computes and stores the norm; throws NotInC1Delta when infinite.
inline SmoothProfile& certify(SmoothProfile& p) {
  p.c1_norm = c1_delta_norm(p);
  if (!std::isfinite(p.c1_norm))
    throw NotInC1Delta("profile '" + p.name + "' is not in C^1_delta for delta = " +
                       std::to_string(p.delta));
  return p;
}

inline SmoothProfile make_profile(std::string name, std::function<double(double)> f,
                                  std::function<double(double)> df, double delta,
                                  C1Grid grid = {}) {
  if (!(delta > 0.0 && delta < 1.0)) throw OutOfRange("delta must lie in (0,1)");
  SmoothProfile p{std::move(name), std::move(f), std::move(df), delta};
  p.grid = grid;
  certify(p);
  return p;
}

// --- presets ---------------------------------------------------------------

inline SmoothProfile zero_profile(double delta = 0.5) {
  return make_profile("zero", [](double) { return 0.0; }, [](double) { return 0.0; }, delta);
}

// amplitude * tanh(x / width)
inline SmoothProfile tanh_profile(double amplitude = 1.0, double width = 1.0, double delta = 0.5) {
  return make_profile(
      "tanh", [=](double x) { return amplitude * std::tanh(x / width); },
      [=](double x) {
        const double c = std::cosh(x / width);
        return amplitude / (width * c * c);
      },
      delta);
}

// amplitude * sin(omega x) * exp(-x^2 / (2 sigma^2))
inline SmoothProfile sin_damped_profile(double amplitude = 1.0, double omega = 2.0,
                                        double sigma = 2.0, double delta = 0.5) {
  return make_profile(
      "sin_damped",
      [=](double x) { return amplitude * std::sin(omega * x) * std::exp(-x * x / (2 * sigma * sigma)); },
      [=](double x) {
        const double e = std::exp(-x * x / (2 * sigma * sigma));
        return amplitude * e * (omega * std::cos(omega * x) - x / (sigma * sigma) * std::sin(omega * x));
      },
      delta);
}

// amplitude * sin(omega x). Not in C^1_delta for delta < 1 on all of R; on a
// finite grid it certifies for delta close to 1.
inline SmoothProfile sin_profile(double amplitude = 1.0, double omega = 1.0, double delta = 0.99) {
  return make_profile(
      "sin", [=](double x) { return amplitude * std::sin(omega * x); },
      [=](double x) { return amplitude * omega * std::cos(omega * x); }, delta);
}

// Piecewise-linear interpolation of samples (xs strictly increasing), constant
// outside [xs.front(), xs.back()]. The derivative is the slope of the segment
// containing x (right-continuous).
inline SmoothProfile tabulated_profile(std::vector<double> xs, std::vector<double> ys,
                                       double delta = 0.5) {
  if (xs.size() < 2 || xs.size() != ys.size())
    throw OutOfRange("tabulated profile needs >= 2 matching samples");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw OutOfRange("tabulated abscissae must increase strictly");
  auto locate = [xs](double x) -> std::ptrdiff_t {
    if (x < xs.front() || x >= xs.back()) return -1;
    return std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1;
  };
  auto f = [xs, ys, locate](double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto i = static_cast<std::size_t>(locate(x));
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + w * (ys[i + 1] - ys[i]);
  };
  auto df = [xs, ys, locate](double x) {
    const auto i = locate(x);
    if (i < 0) return 0.0;
    const auto k = static_cast<std::size_t>(i);
    return (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
  };
  C1Grid grid;
  grid.cell = std::min(grid.cell, 0.5 * (xs.back() - xs.front()) / static_cast<double>(xs.size()));
  grid.tol = 1e-8;
  return make_profile("tabulated", f, df, delta, grid);
}

// --- order constructions ---------------------------------------------------

// Antiderivative of a bounded integrand, tabulated on [-extent, extent] with
// integration continued on demand outside.
class Antiderivative {
 public:
  Antiderivative(std::function<double(double)> g, double extent = 64.0, double step = 1.0 / 64)
      : g_(std::move(g)), extent_(extent), step_(step) {
    const int n = static_cast<int>(std::ceil(extent / step));
    right_.assign(static_cast<std::size_t>(n) + 1, 0.0);
    left_.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
      right_[i] = right_[i - 1] + integrate(g_, (i - 1) * step, i * step, step, 1e-12);
      left_[i] = left_[i - 1] + integrate(g_, -i * step, -(i - 1) * step, step, 1e-12);
    }
  }

  double operator()(double x) const {
    const double n = static_cast<double>(right_.size() - 1);
    if (x >= 0) {
      const double k = std::min(std::floor(x / step_), n);
      return right_[static_cast<std::size_t>(k)] + integrate(g_, k * step_, x, step_, 1e-12);
    }
    const double k = std::min(std::floor(-x / step_), n);
    return -left_[static_cast<std::size_t>(k)] - integrate(g_, x, -k * step_, step_, 1e-12);
  }

 private:
  std::function<double(double)> g_;
  double extent_;
  double step_;
  std::vector<double> right_;  // int_0^{i step} g
  std::vector<double> left_;   // int_{-i step}^0 g
};

// r(x) = int_0^x max(f'(u), g'(u)) du; r - f and r - g are nondecreasing.
inline SmoothProfile dominating_profile(const SmoothProfile& f, const SmoothProfile& g) {
  if (!f.certified()) throw NotInC1Delta("first profile is not certified in C^1_delta");
  if (!g.certified()) throw NotInC1Delta("second profile is not certified in C^1_delta");
  auto fd = f.df, gd = g.df;
  auto slope = [fd, gd](double u) { return std::max(fd(u), gd(u)); };
  auto anti = std::make_shared<Antiderivative>(slope);
  SmoothProfile r{"dominating(" + f.name + "," + g.name + ")",
                  [anti](double x) { return (*anti)(x); }, slope, std::max(f.delta, g.delta)};
  r.grid = f.grid;
  certify(r);
  return r;
}

// s(u) = u^2 / (1+u)^{2-gamma} for u > 0, else 0: C^1, s(0) = s'(0) = 0,
// s(u) ~ u^gamma as u -> infinity.
struct TailRamp {
  double gamma;
  double value(double u) const { return u <= 0 ? 0.0 : u * u / std::pow(1 + u, 2 - gamma); }
  double slope(double u) const {
    return u <= 0 ? 0.0 : u * std::pow(1 + u, gamma - 3) * (2 + gamma * u);
  }
};

struct EnvelopePair {
  SmoothProfile upper;
  SmoothProfile lower;
};

// upper = target + 1/(2N) + s(|x| - N), lower = target - 1/(2N) - s(|x| - N)
// with tail exponent gamma = (delta + delta_prime) / 2. On [-N, N] both lie
// within 1/(2N) of the target; outside they open up like |x|^gamma.
inline EnvelopePair envelope_pair(const SmoothProfile& target, int N, double delta_prime = -1) {
  if (N < 1) throw OutOfRange("envelope index N must be >= 1");
  if (!target.certified()) throw NotInC1Delta("target is not certified in C^1_delta");
  if (delta_prime < 0) delta_prime = 0.5 * (1.0 + target.delta);
  if (!(delta_prime > target.delta && delta_prime < 1))
    throw OutOfRange("delta_prime must lie in (delta, 1)");
  const double gamma = 0.5 * (target.delta + delta_prime);
  const double shift = 0.5 / N;
  const TailRamp ramp{gamma};
  const double n = N;
  auto f = target.f;
  auto df = target.df;
  auto bump = [ramp, n](double x) { return ramp.value(std::fabs(x) - n); };
  auto bump_slope = [ramp, n](double x) {
    return (x >= 0 ? 1.0 : -1.0) * ramp.slope(std::fabs(x) - n);
  };
  auto mk = [&](double sign, const char* tag) {
    SmoothProfile p{target.name + tag,
                    [=](double x) { return f(x) + sign * (shift + bump(x)); },
                    [=](double x) { return df(x) + sign * bump_slope(x); }, delta_prime};
    p.grid = target.grid;
    certify(p);
    return p;
  };
  return {mk(1.0, "+env"), mk(-1.0, "-env")};
}

}  // namespace casep
