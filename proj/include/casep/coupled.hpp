#pragma once

// Basic coupling: k replicas driven by one shared stream of clock rings and
// uniform marks. A ring on the directed bond x -> y moves a particle in
// replica r iff mark < b(dir, eta_r(x), eta_r(y)) / c, where c >= max b is
// the clock rate (1 by default).

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "casep/clock.hpp"
#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/rate_model.hpp"

namespace casep {

struct CoupledState {
  std::vector<Configuration> replicas;
  std::vector<HeightFunction> heights;
  double time = 0.0;
  std::uint64_t event_count = 0;

  std::size_t size() const { return replicas.size(); }
};

// Builds the coupled state from viable initial heights sharing a window and J.
inline CoupledState make_coupled_state(std::span<const HeightFunction> initials,
                                       BoundaryMode mode) {
  if (initials.empty()) throw OutOfRange("need at least one replica");
  CoupledState st;
  for (const auto& h : initials) {
    if (h.window != initials.front().window || h.spin_max != initials.front().spin_max)
      throw WindowMismatch("replicas must share window and J");
    st.replicas.push_back(config_from_height(h, h.spin_max, mode));
    st.heights.push_back(h);
  }
  return st;
}

// Debug invariant: heights equal height_from_config(config) anchored at
// h_0(0) - origin_current. `initial_origin` holds each replica's h_0(0).
inline bool heights_consistent(const CoupledState& st, std::span<const Height> initial_origin,
                               std::span<const std::int64_t> initial_current) {
  for (std::size_t r = 0; r < st.size(); ++r) {
    const Height origin =
        initial_origin[r] - (st.heights[r].origin_current - initial_current[r]);
    HeightFunction expect = height_from_config(st.replicas[r], origin);
    if (expect.values != st.heights[r].values) return false;
  }
  return true;
}

// Applies one ring to every replica; returns a bitmask of replicas that
// jumped (bit r for replica r < 64).
inline std::uint64_t apply_event(CoupledState& st, const ClockEvent& ev, const BondSet& bonds,
                                 const RateModel& model, double clock_rate = 1.0) {
  if (ev.time < st.time) throw StaleEvent("event time precedes state time");
  const DirectedBond& b = bonds[ev.bond];
  const std::size_t xs = b.source_index;
  const std::size_t xt = b.target_index;
  const bool wrap = b.wrap;
  // Moving one particle rightward across the bond lowers h(left) by 2.
  const bool rightward = b.rightward;
  const Height dh = rightward ? -2 : 2;
  const std::size_t hl = b.left_height_index;
  const bool origin_bond = b.origin;
  const int J = model.spin_max();
  const double* table = model.table();
  const int n = J + 1;
  const int dir_row = (b.dir > 0 ? 1 : 0) * n;

  const double mark = ev.mark * clock_rate;
  std::uint64_t fired = 0;
  for (std::size_t r = 0; r < st.replicas.size(); ++r) {
    int* occ = st.replicas[r].occupancy.data();
    const int s = occ[xs];
    const int t = occ[xt];
    if (mark < table[(dir_row + s) * n + t]) {
      occ[xs] = s - 1;
      occ[xt] = t + 1;
      Height* h = st.heights[r].values.data();
      h[hl] += dh;
      if (wrap) h[0] += dh;
      if (origin_bond) st.heights[r].origin_current += rightward ? 2 : -2;
      if (r < 64) fired |= (std::uint64_t{1} << r);
    }
  }
  st.time = ev.time;
  ++st.event_count;
  return fired;
}

struct EvolveOptions {
  BoundaryMode boundary = BoundaryMode::frozen;
  Scheduler scheduler = Scheduler::bond_queue;
  // Recomputes every height function from its configuration after each event
  // and throws on mismatch. O(n k) per event.
  bool verify_each_event = false;
  // Rate of every directed-bond clock; must be >= model.max_rate(). Setting it
  // to max_rate() skips rings that no replica could act on.
  double clock_rate = 1.0;
};

// Runs the coupled process up to `horizon`, calling on_snapshot(state) at
// every requested time (state reflects all events with time <= t) and
// on_event(state, event, fired_mask) after every ring.
template <class SnapshotFn, class EventFn>
void run_coupled(CoupledState& st, const RateModel& model, double horizon,
                 std::span<const double> snapshot_times, std::uint64_t seed,
                 const EvolveOptions& opt, SnapshotFn&& on_snapshot, EventFn&& on_event) {
  if (st.replicas.empty()) throw OutOfRange("no replicas");
  if (model.spin_max() != st.replicas.front().spin_max)
    throw WindowMismatch("model J differs from configuration J");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
    throw OutOfRange("snapshot times must be sorted");
  if (!snapshot_times.empty() && (snapshot_times.front() < st.time || snapshot_times.back() > horizon))
    throw OutOfRange("snapshot times must lie in [start, horizon]");

  if (!(opt.clock_rate >= model.max_rate()))
    throw OutOfRange("clock rate must be at least the largest jump rate");
  const BondSet bonds(st.replicas.front().window, opt.boundary);
  EventStream stream(bonds.size(), seed, opt.scheduler, opt.clock_rate);

  std::vector<Height> origin0;
  std::vector<std::int64_t> current0;
  if (opt.verify_each_event) {
    for (const auto& h : st.heights) {
      origin0.push_back(h.at(0));
      current0.push_back(h.origin_current);
    }
  }

  std::size_t next_snap = 0;
  const double t0 = st.time;
  while (true) {
    ClockEvent ev = stream.next();
    ev.time += t0;
    while (next_snap < snapshot_times.size() && snapshot_times[next_snap] < ev.time) {
      on_snapshot(static_cast<const CoupledState&>(st), snapshot_times[next_snap]);
      ++next_snap;
    }
    if (ev.time > horizon) break;
    const std::uint64_t fired = apply_event(st, ev, bonds, model, opt.clock_rate);
    if (opt.verify_each_event && !heights_consistent(st, origin0, current0))
      throw Error("height bookkeeping diverged from configuration at event " +
                  std::to_string(st.event_count));
    on_event(static_cast<const CoupledState&>(st), ev, fired);
  }
  st.time = horizon;
}

struct ModelDescriptor {
  std::string kind;
  double epsilon = 0.0;
  double q = 0.0;
  int J = 1;
  std::string drift = "right";
};

inline ModelDescriptor describe(const RateModel& m) {
  return {to_string(m.kind()), m.epsilon, m.q, m.spin_max(),
          m.drift == Drift::right ? "right" : "left"};
}

struct Trajectory {
  std::vector<double> snapshot_times;
  std::vector<CoupledState> snapshots;
  std::uint64_t seed = 0;
  ModelDescriptor model;
  BoundaryMode boundary = BoundaryMode::frozen;
  Scheduler scheduler = Scheduler::bond_queue;
  double clock_rate = 1.0;
  std::vector<std::int64_t> initial_current;  // origin_current per replica at t = 0
};

// Evolves the coupled replicas and records snapshots. With no snapshot
// times given, records t = 0 and t = horizon.
inline Trajectory evolve_coupled(std::span<const HeightFunction> initials, const RateModel& model,
                                 double horizon, std::vector<double> snapshot_times,
                                 std::uint64_t seed, const EvolveOptions& opt = {}) {
  if (horizon < 0) throw OutOfRange("negative horizon");
  if (snapshot_times.empty()) {
    snapshot_times.push_back(0.0);
    if (horizon > 0) snapshot_times.push_back(horizon);
  }
  Trajectory traj;
  traj.seed = seed;
  traj.model = describe(model);
  traj.boundary = opt.boundary;
  traj.scheduler = opt.scheduler;
  traj.clock_rate = opt.clock_rate;
  traj.snapshot_times = snapshot_times;
  CoupledState st = make_coupled_state(initials, opt.boundary);
  for (const auto& h : st.heights) traj.initial_current.push_back(h.origin_current);
  run_coupled(
      st, model, horizon, snapshot_times, seed, opt,
      [&](const CoupledState& s, double t) {
        traj.snapshots.push_back(s);
        traj.snapshots.back().time = t;
      },
      [](const CoupledState&, const ClockEvent&, std::uint64_t) {});
  return traj;
}

// 2 (right crossings - left crossings) of the bond (0,1) since the start, at
// each snapshot.
inline std::vector<std::int64_t> current_at_origin(const Trajectory& traj, std::size_t replica) {
  if (replica >= traj.initial_current.size()) throw OutOfRange("replica index out of range");
  std::vector<std::int64_t> out;
  const std::int64_t base = traj.initial_current[replica];
  for (const auto& s : traj.snapshots) out.push_back(s.heights[replica].origin_current - base);
  return out;
}

}  // namespace casep
