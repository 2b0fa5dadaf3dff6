#pragma once

// Norms, variation estimators and ordering checks over recorded data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "casep/coupled.hpp"
#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/stats.hpp"

namespace casep {

// Samples v[i] of a function at x0 + i dx.
struct GridFunction {
  double x0 = 0.0;
  double dx = 1.0;
  std::vector<double> v;

  double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
  double x_max() const { return x(v.size() - 1); }
  std::size_t size() const { return v.size(); }
};

// Rescaled height eps^{1/2} h(x / eps) on the lattice eps Z of the window.
inline GridFunction rescaled_grid(const HeightFunction& h, double eps, double unit = 1.0) {
  GridFunction g;
  g.x0 = static_cast<double>(h.window.lo) * eps;
  g.dx = eps;
  g.v.reserve(h.values.size());
  for (Height v : h.values) g.v.push_back(std::sqrt(eps) * static_cast<double>(v) / unit);
  return g;
}

struct NormParams {
  double alpha = 0.25;
  double delta = 0.5;
  double p = 0.0;  // 0 selects max(1/alpha, 1/(1-delta)) + 1
  int r_max = 8;   // finest dyadic level 2^-r_max
  double overflow = 1e12;

  NormParams() = default;
  NormParams(double a, double d, double p_, int r = 8) : alpha(a), delta(d), p(p_), r_max(r) {
    validate();
  }

  double p_floor() const { return std::max(1.0 / alpha, 1.0 / (1.0 - delta)); }

  void validate() {
    if (!(alpha > 0 && alpha < 1)) throw OutOfRange("alpha must lie in (0,1)");
    if (!(delta > 0 && delta < 1)) throw OutOfRange("delta must lie in (0,1)");
    if (p == 0.0) p = p_floor() + 1.0;
    if (!(p > p_floor()))
      throw OutOfRange("moment exponent p must exceed max(1/alpha, 1/(1-delta)) = " +
                       std::to_string(p_floor()));
    if (r_max < 0) throw OutOfRange("r_max must be >= 0");
  }
};

namespace detail {

// Offset in grid steps of a dyadic distance 2^-r, or 0 if not a whole number
// of steps.
inline std::size_t dyadic_offset(double dx, int r) {
  const double steps = std::ldexp(1.0, -r) / dx;
  const double k = std::round(steps);
  if (k < 1 || std::fabs(steps - k) > 1e-9 * std::max(1.0, steps)) return 0;
  return static_cast<std::size_t>(k);
}

// Log-log slope of sup |f| over dyadic shells 2^j <= |x| < 2^{j+1}; nullopt
// with fewer than four populated shells.
inline std::optional<double> shell_growth(const GridFunction& f) {
  std::map<int, double> shells;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double ax = std::fabs(f.x(i));
    if (ax < 1.0) continue;
    const int j = static_cast<int>(std::floor(std::log2(ax)));
    shells[j] = std::max(shells[j], std::fabs(f.v[i]));
  }
  std::vector<double> lx, ly;
  for (auto [j, s] : shells) {
    if (s <= 0) continue;
    lx.push_back(j * std::log(2.0));
    ly.push_back(std::log(s));
  }
  if (lx.size() < 4) return std::nullopt;
  return linear_fit(lx, ly).slope;
}

}  // namespace detail

// sup_x |f(x)| / (1+|x|)^delta
//   + sup over grid pairs y = x + 2^-r, r <= r_max, of
//     |f(x) - f(y)| / ((1+|x|)^delta |x-y|^alpha).
// Levels whose offset is not a whole number of grid steps are skipped (a
// level finer than the grid spacing contributes nothing). Returns +inf when
// the value exceeds params.overflow or when sup |f| grows across dyadic shells
// faster than |x|^{(1+delta)/2}.
inline double weighted_holder_norm(const GridFunction& f, const NormParams& params) {
  if (f.size() == 0) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  double sup0 = 0.0, sup1 = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    sup0 = std::max(sup0, std::fabs(f.v[i]) / std::pow(1.0 + std::fabs(f.x(i)), params.delta));
  for (int r = 0; r <= params.r_max; ++r) {
    const std::size_t k = detail::dyadic_offset(f.dx, r);
    if (k == 0 || k >= f.size()) continue;
    const double dist = std::pow(static_cast<double>(k) * f.dx, params.alpha);
    for (std::size_t i = 0; i + k < f.size(); ++i) {
      const double w = std::pow(1.0 + std::fabs(f.x(i)), params.delta) * dist;
      sup1 = std::max(sup1, std::fabs(f.v[i + k] - f.v[i]) / w);
    }
  }
  const double norm = sup0 + sup1;
  if (!std::isfinite(norm) || norm > params.overflow) return inf;
  if (auto g = detail::shell_growth(f); g && *g > 0.5 * (1.0 + params.delta)) return inf;
  return norm;
}

enum class DyadicSampling {
  exact,        // every dyadic point must be a grid point
  lattice_step  // value at the grid point at or left of each dyadic point
};

// Q_N = sum_{k = floor(2^N a)}^{floor(2^N b) - 1} (Y((k+1) 2^-N) - Y(k 2^-N))^2.
inline double dyadic_qvar(const GridFunction& Y, int N, double a = 0.0, double b = 1.0,
                          DyadicSampling sampling = DyadicSampling::exact) {
  if (N < 0 || N > 40) throw OutOfRange("dyadic level out of range");
  if (!(b > a)) throw OutOfRange("need a < b");
  if (Y.size() == 0) throw GridUncovered("empty grid function");
  const double h = std::ldexp(1.0, -N);
  const auto k0 = static_cast<std::int64_t>(std::floor(std::ldexp(a, N)));
  const auto k1 = static_cast<std::int64_t>(std::floor(std::ldexp(b, N)));
  auto sample = [&](std::int64_t k) {
    const double x = static_cast<double>(k) * h;
    const double s = (x - Y.x0) / Y.dx;
    const double tol = 1e-9 * std::max(1.0, std::fabs(s));
    if (s < -tol || s > static_cast<double>(Y.size() - 1) + tol)
      throw GridUncovered("dyadic point " + std::to_string(x) + " outside the grid");
    double idx;
    if (sampling == DyadicSampling::exact) {
      idx = std::round(s);
      if (std::fabs(s - idx) > tol)
        throw ResolutionMismatch("dyadic point " + std::to_string(x) + " is not a grid point");
    } else {
      idx = std::floor(s + tol);
    }
    return Y.v[static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(Y.size() - 1)))];
  };
  double q = 0.0;
  double prev = sample(k0);
  for (std::int64_t k = k0; k < k1; ++k) {
    const double next = sample(k + 1);
    q += (next - prev) * (next - prev);
    prev = next;
  }
  return q;
}

enum class PVariationMode { automatic, exact, dyadic };

inline constexpr std::size_t kPVariationExactLimit = (std::size_t{1} << 12) + 1;

// Max over dyadic sub-partitions (every 2^j-th point, j = 0, 1, ...) of
// sum |increments|^p. A lower bound for the exact value.
inline double p_variation_dyadic(std::span<const double> y, double p) {
  double best = 0.0;
  for (std::size_t stride = 1; stride < y.size(); stride *= 2) {
    double s = 0.0;
    std::size_t i = 0;
    for (; i + stride < y.size(); i += stride) s += std::pow(std::fabs(y[i + stride] - y[i]), p);
    if (i + 1 < y.size()) s += std::pow(std::fabs(y.back() - y[i]), p);
    best = std::max(best, s);
  }
  return best;
}

// sup over partitions of the grid of sum |increments|^p, by dynamic
// programming over ordered partitions: best[j] = max_i best[i] + |y_j - y_i|^p.
inline double p_variation(std::span<const double> y, double p,
                          PVariationMode mode = PVariationMode::automatic) {
  if (!(p >= 1.0)) throw OutOfRange("p-variation requires p >= 1");
  if (y.size() < 2) return 0.0;
  if (mode == PVariationMode::exact && y.size() > kPVariationExactLimit)
    throw GridTooLarge("exact p-variation is limited to 2^12 + 1 points");
  if (mode == PVariationMode::dyadic ||
      (mode == PVariationMode::automatic && y.size() > kPVariationExactLimit))
    return p_variation_dyadic(y, p);
  std::vector<double> best(y.size(), 0.0);
  double answer = 0.0;
  for (std::size_t j = 1; j < y.size(); ++j) {
    double b = 0.0;
    for (std::size_t i = 0; i < j; ++i) b = std::max(b, best[i] + std::pow(std::fabs(y[j] - y[i]), p));
    best[j] = b;
    answer = std::max(answer, b);
  }
  return answer;
}

// --- reports ---------------------------------------------------------------

struct Quantity {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string comparison;  // how estimate is tested against threshold, e.g. "<=", "|z|<=3"
  bool pass = true;
  double x = std::numeric_limits<double>::quiet_NaN();
  double y = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

struct Violation {
  double time = 0.0;
  Site site = 0;
  std::size_t lower = 0;
  std::size_t upper = 1;
};

struct EstimatorReport {
  std::string name;
  std::vector<Quantity> quantities;
  std::map<std::string, std::string> metadata;
  std::optional<Violation> violation;

  bool pass() const {
    if (violation) return false;
    return std::all_of(quantities.begin(), quantities.end(), [](const Quantity& q) { return q.pass; });
  }

  Quantity& add(Quantity q) {
    quantities.push_back(std::move(q));
    return quantities.back();
  }
};

namespace detail {
inline std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

// Columns: quantity,x,y,t,estimate,stderr,n
inline void write_report_csv(std::ostream& os, const std::vector<EstimatorReport>& reports,
                             bool header = true) {
  if (header) os << "quantity,x,y,t,estimate,stderr,n\n";
  for (const auto& r : reports)
    for (const auto& q : r.quantities)
      os << r.name << '.' << q.name << ',' << detail::csv_num(q.x) << ',' << detail::csv_num(q.y)
         << ',' << detail::csv_num(q.t) << ',' << detail::csv_num(q.estimate) << ','
         << detail::csv_num(q.se) << ',' << q.n << '\n';
}

inline nlohmann::json verdict_json(const EstimatorReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& q : r.quantities) {
    nlohmann::json c{{"check", r.name + "." + q.name}, {"pass", q.pass},
                     {"estimate", q.estimate},         {"stderr", q.se},
                     {"comparison", q.comparison}};
    c["threshold"] = std::isnan(q.threshold) ? nlohmann::json(nullptr) : nlohmann::json(q.threshold);
    checks.push_back(std::move(c));
  }
  nlohmann::json out{{"check", r.name}, {"pass", r.pass()}, {"checks", checks}};
  if (r.violation)
    out["violation"] = {{"time", r.violation->time},
                        {"site", r.violation->site},
                        {"replicas", {r.violation->lower, r.violation->upper}}};
  if (!r.metadata.empty()) out["metadata"] = r.metadata;
  return out;
}

// --- moment bounds ---------------------------------------------------------

// Empirical L^p norms of an ensemble of rescaled initial fields (common grid)
// against C (1+|x|)^delta and C (1+|x|)^delta |x-y|^alpha for dyadic
// |x-y| = 2^-r <= 1. Every `stride`-th grid point is used as x. Reports the
// worst ratio of each kind; pass iff both are <= 1.
inline EstimatorReport moment_bound_check(const std::vector<GridFunction>& ensemble,
                                          const NormParams& params, double C,
                                          std::size_t stride = 1) {
  if (ensemble.size() < 100) throw EnsembleTooSmall("moment check needs >= 100 fields");
  if (!(C > 0)) throw OutOfRange("C must be positive");
  const GridFunction& g0 = ensemble.front();
  for (const auto& g : ensemble)
    if (g.size() != g0.size() || g.x0 != g0.x0 || g.dx != g0.dx)
      throw WindowMismatch("ensemble fields must share a grid");
  const double p = params.p;
  const double n = static_cast<double>(ensemble.size());
  auto lp = [&](auto&& value) {
    double acc = 0.0;
    for (const auto& g : ensemble) acc += std::pow(std::fabs(value(g)), p);
    return std::pow(acc / n, 1.0 / p);
  };
  stride = std::max<std::size_t>(1, stride);
  double worst_point = 0.0, worst_pair = 0.0, at_point = 0.0, at_pair = 0.0, pair_dist = 0.0;
  for (std::size_t i = 0; i < g0.size(); i += stride) {
    const double x = g0.x(i);
    const double wx = std::pow(1.0 + std::fabs(x), params.delta);
    const double r0 = lp([i](const GridFunction& g) { return g.v[i]; }) / (C * wx);
    if (r0 > worst_point) {
      worst_point = r0;
      at_point = x;
    }
    for (int r = 0; r <= params.r_max; ++r) {
      const std::size_t k = detail::dyadic_offset(g0.dx, r);
      if (k == 0 || i + k >= g0.size()) continue;
      const double d = static_cast<double>(k) * g0.dx;
      const double r1 = lp([i, k](const GridFunction& g) { return g.v[i + k] - g.v[i]; }) /
                        (C * wx * std::pow(d, params.alpha));
      if (r1 > worst_pair) {
        worst_pair = r1;
        at_pair = x;
        pair_dist = d;
      }
    }
  }
  EstimatorReport rep;
  rep.name = "moment_bound";
  rep.metadata["alpha"] = std::to_string(params.alpha);
  rep.metadata["delta"] = std::to_string(params.delta);
  rep.metadata["p"] = std::to_string(p);
  rep.metadata["C"] = std::to_string(C);
  rep.metadata["ensemble"] = std::to_string(ensemble.size());
  Quantity q1{"worst_point_ratio", worst_point, 0.0, 1.0, "<=", worst_point <= 1.0};
  q1.x = at_point;
  q1.n = ensemble.size();
  Quantity q2{"worst_pair_ratio", worst_pair, 0.0, 1.0, "<=", worst_pair <= 1.0};
  q2.x = at_pair;
  q2.y = at_pair + pair_dist;
  q2.n = ensemble.size();
  rep.add(q1);
  rep.add(q2);
  return rep;
}

// --- ordering checks -------------------------------------------------------

enum class OrderingKind { M, A, monotone_difference };

inline const char* to_string(OrderingKind k) {
  switch (k) {
    case OrderingKind::M: return "M";
    case OrderingKind::A: return "A";
    case OrderingKind::monotone_difference: return "monotone_difference";
  }
  return "?";
}

namespace detail {
inline std::optional<Site> ordering_violation(const CoupledState& s, OrderingKind kind,
                                              std::size_t lo, std::size_t hi) {
  switch (kind) {
    case OrderingKind::M: return first_order_violation(s.heights[lo], s.heights[hi]);
    case OrderingKind::A: return first_order_violation(s.replicas[lo], s.replicas[hi]);
    case OrderingKind::monotone_difference:
      return first_difference_decrease(s.heights[lo], s.heights[hi]);
  }
  return std::nullopt;
}
}  // namespace detail

// Verifies the ordering of replicas (lower, upper) at every snapshot. Throws
// PreconditionNotMet if it does not hold at the first snapshot.
inline EstimatorReport ordering_check(const Trajectory& traj, OrderingKind kind,
                                      std::size_t lower = 0, std::size_t upper = 1) {
  if (traj.snapshots.empty()) throw PreconditionNotMet("trajectory has no snapshots");
  if (traj.snapshots.front().size() < 2) throw PreconditionNotMet("need at least two replicas");
  if (lower >= traj.snapshots.front().size() || upper >= traj.snapshots.front().size())
    throw OutOfRange("replica index out of range");
  if (detail::ordering_violation(traj.snapshots.front(), kind, lower, upper))
    throw PreconditionNotMet(std::string("initial data do not satisfy ordering ") + to_string(kind));
  EstimatorReport rep;
  rep.name = std::string("ordering_") + to_string(kind);
  std::size_t checked = 0;
  for (std::size_t j = 0; j < traj.snapshots.size(); ++j) {
    if (auto v = detail::ordering_violation(traj.snapshots[j], kind, lower, upper)) {
      rep.violation = Violation{traj.snapshot_times[j], *v, lower, upper};
      break;
    }
    ++checked;
  }
  Quantity q{"snapshots_violating", rep.violation ? 1.0 : 0.0, 0.0, 0.0, "==", !rep.violation};
  q.n = checked;
  rep.add(q);
  rep.metadata["seed"] = std::to_string(traj.seed);
  return rep;
}

// Stitches single-replica trajectories with identical snapshot times into one
// multi-replica trajectory (used for uncoupled negative controls).
inline Trajectory combine_replicas(const std::vector<Trajectory>& parts) {
  if (parts.empty()) throw OutOfRange("nothing to combine");
  Trajectory out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].snapshot_times != out.snapshot_times)
      throw WindowMismatch("trajectories have different snapshot times");
    for (std::size_t j = 0; j < out.snapshots.size(); ++j) {
      const auto& s = parts[p].snapshots[j];
      out.snapshots[j].replicas.insert(out.snapshots[j].replicas.end(), s.replicas.begin(),
                                       s.replicas.end());
      out.snapshots[j].heights.insert(out.snapshots[j].heights.end(), s.heights.begin(),
                                      s.heights.end());
    }
    out.initial_current.insert(out.initial_current.end(), parts[p].initial_current.begin(),
                               parts[p].initial_current.end());
  }
  return out;
}

}  // namespace casep
