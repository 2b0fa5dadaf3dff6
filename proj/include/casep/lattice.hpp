#pragma once

// Lattice state: occupancy configurations on a finite window, their height
// functions, and the viability / order operations on heights.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "casep/errors.hpp"

namespace casep {

using Site = std::int64_t;
using Height = std::int64_t;

enum class BoundaryMode { periodic, frozen };

inline const char* to_string(BoundaryMode m) {
  return m == BoundaryMode::periodic ? "periodic" : "frozen";
}

// Closed integer interval [lo, hi].
struct Window {
  Site lo = 0;
  Site hi = -1;

  static Window symmetric(Site half_width) { return {-half_width, half_width}; }

  std::size_t size() const { return hi >= lo ? static_cast<std::size_t>(hi - lo + 1) : 0; }
  bool contains(Site x) const { return x >= lo && x <= hi; }
  std::size_t index(Site x) const { return static_cast<std::size_t>(x - lo); }
  friend bool operator==(const Window&, const Window&) = default;
};

// Occupancy field eta on a window, values in {0, ..., spin_max}.
struct Configuration {
  Window window;
  int spin_max = 1;
  std::vector<int> occupancy;  // occupancy[i] is eta(window.lo + i)
  BoundaryMode boundary = BoundaryMode::frozen;

  Configuration() = default;
  Configuration(Window w, int J, std::vector<int> occ,
                BoundaryMode mode = BoundaryMode::frozen)
      : window(w), spin_max(J), occupancy(std::move(occ)), boundary(mode) {
    validate();
  }

  int at(Site x) const { return occupancy[window.index(x)]; }
  int& at(Site x) { return occupancy[window.index(x)]; }

  std::int64_t particle_count() const {
    std::int64_t n = 0;
    for (int v : occupancy) n += v;
    return n;
  }

  void validate() const {
    if (spin_max < 1) throw OutOfRange("spin_max must be >= 1");
    if (occupancy.size() != window.size())
      throw WindowMismatch("occupancy size does not match window");
    for (std::size_t i = 0; i < occupancy.size(); ++i)
      if (occupancy[i] < 0 || occupancy[i] > spin_max)
        throw OutOfRange("occupancy out of {0..J} at site " +
                         std::to_string(window.lo + static_cast<Site>(i)));
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// Integer height profile over the sites [window.lo, window.hi]. A
// configuration on [a, b] has heights on [a-1, b]:
//   h(x) - h(x-1) = 2 eta(x) - J.
// origin_current is twice the signed particle flux through the bond (0,1)
// (right crossings positive). Under this increment convention a right
// crossing lowers h(0) by 2, so h_t(0) = h_0(0) - origin_current.
struct HeightFunction {
  Window window;
  int spin_max = 1;
  std::vector<Height> values;
  std::int64_t origin_current = 0;

  Height at(Site x) const { return values[window.index(x)]; }
  Height& at(Site x) { return values[window.index(x)]; }

  // Window of the configuration this height function encodes.
  Window config_window() const { return {window.lo + 1, window.hi}; }

  friend bool operator==(const HeightFunction&, const HeightFunction&) = default;
};

struct ViabilityReport {
  bool is_viable = true;
  // Index i of the first bond (values[i], values[i+1]) whose increment is
  // not in {-J, -J+2, ..., J}.
  std::optional<std::size_t> first_violation;
};

inline bool viable_increment(Height d, int J) {
  return d >= -J && d <= J && ((d + J) % 2 == 0);
}

// Left-to-right scan; reports the first failing bond.
inline ViabilityReport check_viable(std::span<const Height> values, int J) {
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    if (!viable_increment(values[i + 1] - values[i], J)) return {false, i};
  return {true, std::nullopt};
}

inline ViabilityReport check_viable(const HeightFunction& h) {
  return check_viable(std::span<const Height>(h.values), h.spin_max);
}

inline HeightFunction height_from_config(const Configuration& cfg, Height origin_value) {
  cfg.validate();
  HeightFunction h;
  h.window = {cfg.window.lo - 1, cfg.window.hi};
  h.spin_max = cfg.spin_max;
  if (!h.window.contains(0))
    throw OutOfRange("height window must contain the origin");
  h.values.assign(h.window.size(), 0);
  for (std::size_t i = 1; i < h.values.size(); ++i)
    h.values[i] = h.values[i - 1] + 2 * cfg.occupancy[i - 1] - cfg.spin_max;
  const Height shift = origin_value - h.at(0);
  for (auto& v : h.values) v += shift;
  return h;
}

inline Configuration config_from_height(const HeightFunction& h, int J,
                                        BoundaryMode mode = BoundaryMode::frozen) {
  const auto report = check_viable(std::span<const Height>(h.values), J);
  if (!report.is_viable) {
    const Site site = h.window.lo + static_cast<Site>(*report.first_violation);
    throw NonViable(site, "increment at bond " + std::to_string(*report.first_violation) +
                              " (site " + std::to_string(site) + ") is not viable for J=" +
                              std::to_string(J));
  }
  Configuration cfg;
  cfg.window = h.config_window();
  cfg.spin_max = J;
  cfg.boundary = mode;
  cfg.occupancy.resize(cfg.window.size());
  for (std::size_t i = 0; i < cfg.occupancy.size(); ++i)
    cfg.occupancy[i] = static_cast<int>((h.values[i + 1] - h.values[i] + J) / 2);
  return cfg;
}

namespace detail {
template <class Op>
HeightFunction pointwise(const HeightFunction& a, const HeightFunction& b, Op op) {
  if (a.window != b.window || a.spin_max != b.spin_max)
    throw WindowMismatch("height functions differ in window or spin");
  HeightFunction r = a;
  r.origin_current = 0;
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = op(a.values[i], b.values[i]);
  return r;
}
}  // namespace detail

// Pointwise max / min. Viability is preserved when both inputs share the
// parity class of the lattice; the result is checked and NonViable thrown
// otherwise (e.g. inputs differing by an odd constant for J = 1).
inline HeightFunction viable_max(const HeightFunction& a, const HeightFunction& b) {
  auto r = detail::pointwise(a, b, [](Height x, Height y) { return std::max(x, y); });
  if (auto rep = check_viable(r); !rep.is_viable)
    throw NonViable(r.window.lo + static_cast<Site>(*rep.first_violation),
                    "max of inputs with incompatible parity");
  return r;
}

inline HeightFunction viable_min(const HeightFunction& a, const HeightFunction& b) {
  auto r = detail::pointwise(a, b, [](Height x, Height y) { return std::min(x, y); });
  if (auto rep = check_viable(r); !rep.is_viable)
    throw NonViable(r.window.lo + static_cast<Site>(*rep.first_violation),
                    "min of inputs with incompatible parity");
  return r;
}

// Pointwise comparisons used by the ordering checks.
inline std::optional<Site> first_order_violation(const HeightFunction& lower,
                                                 const HeightFunction& upper) {
  if (lower.window != upper.window) throw WindowMismatch("ordering on different windows");
  for (std::size_t i = 0; i < lower.values.size(); ++i)
    if (lower.values[i] > upper.values[i]) return lower.window.lo + static_cast<Site>(i);
  return std::nullopt;
}

inline std::optional<Site> first_order_violation(const Configuration& lower,
                                                 const Configuration& upper) {
  if (lower.window != upper.window) throw WindowMismatch("ordering on different windows");
  for (std::size_t i = 0; i < lower.occupancy.size(); ++i)
    if (lower.occupancy[i] > upper.occupancy[i]) return lower.window.lo + static_cast<Site>(i);
  return std::nullopt;
}

// First site x where (upper - lower)(x) < (upper - lower)(x-1).
inline std::optional<Site> first_difference_decrease(const HeightFunction& lower,
                                                     const HeightFunction& upper) {
  if (lower.window != upper.window) throw WindowMismatch("difference on different windows");
  for (std::size_t i = 1; i < lower.values.size(); ++i) {
    const Height d1 = upper.values[i] - lower.values[i];
    const Height d0 = upper.values[i - 1] - lower.values[i - 1];
    if (d1 < d0) return lower.window.lo + static_cast<Site>(i);
  }
  return std::nullopt;
}

}  // namespace casep
