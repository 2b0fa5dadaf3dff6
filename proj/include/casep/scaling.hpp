#pragma once

// Weak-asymmetry rescaling, the Hopf-Cole transform and the residual of the
// discrete stochastic heat equation.
//
// Microscopic height h(tau, k), microscopic time tau, site k. Macroscopic
// coordinates t = eps^2 tau, x = eps k. The rescaled field is
//   h^eps(t, x) = a_eps h(eps^-2 t, eps^-1 x) + sign * b_eps t,
//   a_eps = eps^{1/2}, b_eps = eps^-1 / 2 + 1/24.
//
// Hopf-Cole, exact convention. For right/left rates p, q with p + q = 1,
// s = p - q, and increments h(k) - h(k-1) = 2 eta(k) - 1:
//   Z(tau, k) = exp(lambda h(tau, k) + nu tau),
//   lambda = atanh(s), nu = 1 - sqrt(1 - s^2), D = sqrt(1 - s^2),
// solves dZ = D Delta Z dtau + dM exactly, Delta f(k) = (f(k+1)+f(k-1)-2f(k))/2.
// For s = 0 the transform degenerates and Z = h (dh = Delta h dtau + dM).
//
// Paper convention: lambda = eps^{1/2}, nu tau = c_eps t with
// c_eps = eps^-1 / 2 - 1/24, D = (1 + 2 eps^{1/2})^{1/2}. It is kept for
// comparison; its residual is not centered under these rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "casep/coupled.hpp"
#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/profile.hpp"
#include "casep/stats.hpp"

namespace casep {

enum class DriftSign { plus, minus };
enum class HopfColeConvention { exact, paper };

struct ScalingParams {
  double epsilon = 0.04;
  DriftSign drift_sign = DriftSign::plus;
  HopfColeConvention convention = HopfColeConvention::exact;
  // Model asymmetry p - q. NaN means sqrt(eps) (ASEP under the rescaling).
  double asymmetry = std::numeric_limits<double>::quiet_NaN();

  double a() const { return std::sqrt(epsilon); }
  double b() const { return 0.5 / epsilon + 1.0 / 24.0; }
  double c() const { return 0.5 / epsilon - 1.0 / 24.0; }
  double sign() const { return drift_sign == DriftSign::plus ? 1.0 : -1.0; }
  double s() const { return std::isnan(asymmetry) ? std::sqrt(epsilon) : asymmetry; }
  bool linear() const { return convention == HopfColeConvention::exact && s() == 0.0; }

  double lambda() const {
    return convention == HopfColeConvention::exact ? std::atanh(s()) : std::sqrt(epsilon);
  }
  // Per unit of microscopic time.
  double nu() const {
    if (convention == HopfColeConvention::exact) return 1.0 - std::sqrt(1.0 - s() * s());
    return c() * epsilon * epsilon;
  }
  double diffusion() const {
    if (convention == HopfColeConvention::exact) return std::sqrt(1.0 - s() * s());
    return std::sqrt(1.0 + 2.0 * std::sqrt(epsilon));
  }

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw OutOfRange("scaling requires 0 < eps <= 1");
    if (!(std::fabs(s()) < 1.0)) throw OutOfRange("asymmetry must lie in (-1, 1)");
  }
};

// Row-major space-time field: values[j * xs.size() + i] at (times[j], xs[i]).
struct Field {
  std::vector<double> times;
  std::vector<double> xs;
  std::vector<double> values;

  double at(std::size_t j, std::size_t i) const { return values[j * xs.size() + i]; }
  double& at(std::size_t j, std::size_t i) { return values[j * xs.size() + i]; }
  std::vector<double> row(std::size_t j) const {
    return {values.begin() + static_cast<std::ptrdiff_t>(j * xs.size()),
            values.begin() + static_cast<std::ptrdiff_t>((j + 1) * xs.size())};
  }
};

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t replica = 0;
};

struct RescaledField : Field {
  ScalingParams params;
  Provenance source;
  std::vector<double> micro_times;   // tau_j = eps^-2 t_j
  std::vector<double> micro_height;  // h(tau_j, x_i / eps), same layout as values
};

struct HopfColeField : Field {
  ScalingParams params;
  Provenance source;
  std::vector<double> micro_times;
  std::vector<double> log_values;  // exponent of Z (equal to Z in the linear case)
};

namespace detail {

// Linear interpolation of a height function at real site s.
inline double height_at(const HeightFunction& h, double s) {
  const double lo = static_cast<double>(h.window.lo), hi = static_cast<double>(h.window.hi);
  const double tol = 1e-9 * std::max(1.0, std::fabs(s));
  if (s < lo - tol || s > hi + tol) throw GridUncovered("site outside the height window");
  const double sc = std::clamp(s, lo, hi);
  const auto k = static_cast<Site>(std::floor(sc));
  const double w = sc - static_cast<double>(k);
  const double a = static_cast<double>(h.at(k));
  const double b = k < h.window.hi ? static_cast<double>(h.at(k + 1)) : a;
  return a + w * (b - a);
}

inline std::size_t find_snapshot(const Trajectory& traj, double tau) {
  for (std::size_t j = 0; j < traj.snapshot_times.size(); ++j) {
    const double s = traj.snapshot_times[j];
    if (std::fabs(s - tau) <= 1e-9 * std::max(1.0, std::fabs(tau))) return j;
  }
  throw GridUncovered("no snapshot at microscopic time " + std::to_string(tau));
}

}  // namespace detail

// Rescales a replica onto the macroscopic grid (times x positions). Every
// requested time must be a recorded snapshot (eps^-2 t up to 1e-9 relative);
// positions are interpolated linearly between sites.
inline RescaledField rescale_field(const Trajectory& traj, std::size_t replica,
                                   const ScalingParams& params, const std::vector<double>& times,
                                   const std::vector<double>& xs) {
  params.validate();
  const double eps = params.epsilon;
  RescaledField out;
  out.params = params;
  out.source = {traj.seed, replica};
  out.times = times;
  out.xs = xs;
  out.values.resize(times.size() * xs.size());
  out.micro_height.resize(out.values.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double tau = times[j] / (eps * eps);
    const std::size_t sj = detail::find_snapshot(traj, tau);
    if (replica >= traj.snapshots[sj].size()) throw OutOfRange("replica index out of range");
    const HeightFunction& h = traj.snapshots[sj].heights[replica];
    out.micro_times.push_back(traj.snapshot_times[sj]);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double hm = detail::height_at(h, xs[i] / eps);
      out.micro_height[j * xs.size() + i] = hm;
      out.at(j, i) = params.a() * hm + params.sign() * params.b() * times[j];
    }
  }
  return out;
}

// All snapshots and all height sites of a replica, at full resolution.
inline RescaledField rescale_field(const Trajectory& traj, std::size_t replica,
                                   const ScalingParams& params) {
  if (traj.snapshots.empty()) throw GridUncovered("trajectory has no snapshots");
  const Window w = traj.snapshots.front().heights.at(replica).window;
  std::vector<double> times, xs;
  for (double tau : traj.snapshot_times) times.push_back(tau * params.epsilon * params.epsilon);
  for (Site k = w.lo; k <= w.hi; ++k) xs.push_back(static_cast<double>(k) * params.epsilon);
  return rescale_field(traj, replica, params, times, xs);
}

// Z = exp(lambda h_micro + nu tau) (exact), exp(eps^{1/2} h_micro + c_eps t)
// (paper) or h_micro (exact, zero asymmetry). The microscopic height is taken
// from the field's provenance data, so the wiring does not depend on the
// drift sign used for the rescaled values.
inline HopfColeField hopf_cole(const RescaledField& field) {
  const ScalingParams& p = field.params;
  HopfColeField z;
  z.params = p;
  z.source = field.source;
  z.times = field.times;
  z.xs = field.xs;
  z.micro_times = field.micro_times;
  z.values.resize(field.values.size());
  z.log_values.resize(field.values.size());
  const double lam = p.lambda(), nu = p.nu();
  const std::size_t nx = field.xs.size();
  for (std::size_t j = 0; j < field.times.size(); ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double hm = field.micro_height[j * nx + i];
      if (p.linear()) {
        z.log_values[j * nx + i] = hm;
        z.values[j * nx + i] = hm;
      } else {
        const double e = lam * hm + nu * field.micro_times[j];
        z.log_values[j * nx + i] = e;
        z.values[j * nx + i] = std::exp(e);
      }
    }
  }
  return z;
}

// Delta f(i) = (f(i+1) + f(i-1) - 2 f(i)) / 2 on interior points; the output
// has two fewer entries.
inline std::vector<double> discrete_laplacian(const std::vector<double>& f) {
  if (f.size() < 3) return {};
  std::vector<double> out(f.size() - 2);
  for (std::size_t i = 1; i + 1 < f.size(); ++i)
    out[i - 1] = 0.5 * (f[i + 1] + f[i - 1] - 2.0 * f[i]);
  return out;
}

// Periodic Laplacian (used for the summation-by-parts identity).
inline std::vector<double> discrete_laplacian_periodic(const std::vector<double>& f) {
  const std::size_t n = f.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = 0.5 * (f[(i + 1) % n] + f[(i + n - 1) % n] - 2.0 * f[i]);
  return out;
}

struct MartingaleResidual {
  std::vector<double> micro_times;   // snapshot times tau_j
  std::vector<Site> sites;           // interior sites k (xs / eps)
  std::vector<double> values;        // M(tau_j, k), row-major [j][site]
  std::vector<double> increments;    // M(tau_{j+1}) - M(tau_j), row-major [j][site]
  Provenance source;

  double at(std::size_t j, std::size_t i) const { return values[j * sites.size() + i]; }
  double increment(std::size_t j, std::size_t i) const { return increments[j * sites.size() + i]; }
  std::size_t site_index(Site k) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i] == k) return i;
    throw OutOfRange("site " + std::to_string(k) + " not in residual");
  }
};

// M(tau, k) = Z(tau, k) - Z(0, k) - int_0^tau D Delta Z(s, k) ds with the time
// integral by the trapezoid rule over snapshots. Z must be on consecutive
// lattice sites; the residual lives on the interior sites. Throws
// QuadratureTooCoarse if any snapshot gap exceeds dt_max (microscopic time).
inline MartingaleResidual martingale_residual(const HopfColeField& z, double dt_max = 0.1) {
  const double eps = z.params.epsilon;
  const std::size_t nx = z.xs.size(), nt = z.micro_times.size();
  if (nx < 3) throw GridUncovered("residual needs at least three sites");
  if (nt < 1) throw GridUncovered("residual needs at least one snapshot");
  for (std::size_t i = 1; i < nx; ++i)
    if (std::fabs((z.xs[i] - z.xs[i - 1]) / eps - 1.0) > 1e-6)
      throw ResolutionMismatch("residual requires Z at consecutive lattice sites");
  for (std::size_t j = 1; j < nt; ++j)
    if (z.micro_times[j] - z.micro_times[j - 1] > dt_max * (1 + 1e-12))
      throw QuadratureTooCoarse("snapshot gap " +
                                std::to_string(z.micro_times[j] - z.micro_times[j - 1]) +
                                " exceeds dt_max " + std::to_string(dt_max));
  const double D = z.params.linear() ? 1.0 : z.params.diffusion();
  MartingaleResidual m;
  m.source = z.source;
  m.micro_times = z.micro_times;
  for (std::size_t i = 1; i + 1 < nx; ++i) m.sites.push_back(std::llround(z.xs[i] / eps));
  const std::size_t ni = m.sites.size();
  m.values.assign(nt * ni, 0.0);
  m.increments.assign(nt > 0 ? (nt - 1) * ni : 0, 0.0);
  std::vector<double> lap_prev = discrete_laplacian(z.row(0));
  for (std::size_t j = 1; j < nt; ++j) {
    const std::vector<double> lap = discrete_laplacian(z.row(j));
    const double dt = z.micro_times[j] - z.micro_times[j - 1];
    for (std::size_t i = 0; i < ni; ++i) {
      const double dz = z.at(j, i + 1) - z.at(j - 1, i + 1);
      const double drift = D * 0.5 * (lap[i] + lap_prev[i]) * dt;
      m.increments[(j - 1) * ni + i] = dz - drift;
      m.values[j * ni + i] = m.values[(j - 1) * ni + i] + dz - drift;
    }
    lap_prev = lap;
  }
  return m;
}

// Per-trajectory cross bracket rate: sum_j dM1_j(x) dM2_j(y) / (tau_end - tau_0).
inline double bracket_rate(const MartingaleResidual& m1, const MartingaleResidual& m2, Site x,
                           Site y) {
  if (m1.micro_times != m2.micro_times)
    throw ResolutionMismatch("residuals have different snapshot times");
  const std::size_t ix = m1.site_index(x), iy = m2.site_index(y);
  const std::size_t n1 = m1.sites.size(), n2 = m2.sites.size();
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < m1.micro_times.size(); ++j)
    acc += m1.increments[j * n1 + ix] * m2.increments[j * n2 + iy];
  const double T = m1.micro_times.back() - m1.micro_times.front();
  if (!(T > 0)) throw GridUncovered("residual spans zero time");
  return acc / T;
}

// Ensemble average of bracket_rate over residual pairs (one pair per
// trajectory) with its standard error.
inline Estimate bracket_cross_estimator(const std::vector<MartingaleResidual>& first,
                                        const std::vector<MartingaleResidual>& second, Site x,
                                        Site y) {
  if (first.size() != second.size()) throw OutOfRange("residual ensembles differ in size");
  if (first.size() < 30) throw EnsembleTooSmall("bracket estimator needs >= 30 trajectories");
  RunningStats s;
  for (std::size_t r = 0; r < first.size(); ++r) s.push(bracket_rate(first[r], second[r], x, y));
  return s.mean_estimate();
}

// Var u(t, x) for du = D u'' dt + sigma dW (space-time white noise) from flat
// data: sigma^2 int_0^t int p_{t-s}(y)^2 dy ds, p_r the heat kernel of D d^2/dy^2
// (variance 2 D r). Both integrals by quadrature; the substitution
// r = u^2 removes the endpoint singularity.
inline double edwards_wilkinson_variance(double t, double diffusion = 0.5, double noise = 1.0) {
  if (!(t >= 0.0)) throw OutOfRange("time must be nonnegative");
  if (!(diffusion > 0.0)) throw OutOfRange("diffusion must be positive");
  if (t == 0.0) return 0.0;
  const double pi = std::acos(-1.0);
  auto kernel_sq = [&](double r) {
    const double var = 2.0 * diffusion * r;
    const double half = 12.0 * std::sqrt(var);
    return integrate(
        [var, pi](double y) {
          const double p = std::exp(-y * y / (2 * var)) / std::sqrt(2 * pi * var);
          return p * p;
        },
        -half, half, half / 16, 1e-13);
  };
  // 2u k(u^2) tends to 1 / sqrt(2 pi D) as u -> 0.
  const double at_zero = 1.0 / std::sqrt(2 * pi * diffusion);
  const double outer = integrate([&](double u) { return u == 0.0 ? at_zero : 2.0 * u * kernel_sq(u * u); },
                                 0.0, std::sqrt(t), std::sqrt(t) / 16, 1e-12);
  return noise * noise * outer;
}

}  // namespace casep
