#pragma once

// Rate-c Poisson clocks on the directed bonds of a window, with one uniform
// mark per ring (c = 1 unless configured). Two schedulers produce the same
// law:
//   bond_queue     - one clock per directed bond in a binary heap keyed by
//                    the next ring time (classic kinetic Monte Carlo).
//   superposition  - the superposed process of B rate-c clocks is a rate-Bc
//                    Poisson process whose rings pick a bond uniformly; O(1)
//                    per event. Bond and mark come from one 64-bit draw: the
//                    high word of u * B is the bond, the low word the mark
//                    (resolution B * 2^-64).
// The two consume random numbers differently, so a seed reproduces a stream
// only together with its scheduler.

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/rng.hpp"

namespace casep {

enum class Scheduler { bond_queue, superposition };

inline const char* to_string(Scheduler s) {
  return s == Scheduler::bond_queue ? "bond_queue" : "superposition";
}

struct DirectedBond {
  Site source = 0;
  Site target = 0;
  int dir = 1;  // +1 right, -1 left (before wrapping)
  // Cached for the event loop.
  std::uint32_t source_index = 0;
  std::uint32_t target_index = 0;
  std::uint32_t left_height_index = 0;  // index of h(left site) in HeightFunction::values
  bool wrap = false;
  bool rightward = true;
  bool origin = false;  // the bond (0, 1)
};

struct ClockEvent {
  double time = 0.0;
  std::uint32_t bond = 0;  // index into the BondSet
  double mark = 0.0;       // uniform on [0, 1)
};

// Directed nearest-neighbor bonds of a window. Frozen windows have the
// 2(n-1) interior bonds; periodic windows add the two wrap bonds between hi
// and lo.
class BondSet {
 public:
  BondSet() = default;
  BondSet(Window w, BoundaryMode mode) : window_(w), mode_(mode) {
    if (w.size() < 2) throw OutOfRange("window needs at least two sites");
    if (mode == BoundaryMode::periodic && w.size() < 3)
      throw OutOfRange("periodic window needs at least three sites");
    for (Site x = w.lo; x < w.hi; ++x) {
      bonds_.push_back({x, x + 1, +1});
      bonds_.push_back({x + 1, x, -1});
    }
    if (mode == BoundaryMode::periodic) {
      bonds_.push_back({w.hi, w.lo, +1});
      bonds_.push_back({w.lo, w.hi, -1});
    }
    for (auto& b : bonds_) {
      b.wrap = is_wrap(b);
      b.source_index = static_cast<std::uint32_t>(w.index(b.source));
      b.target_index = static_cast<std::uint32_t>(w.index(b.target));
      b.left_height_index = static_cast<std::uint32_t>(left_site(b) - (w.lo - 1));
      b.rightward = b.wrap ? (b.source == w.hi) : (b.target > b.source);
      b.origin = !b.wrap && left_site(b) == 0;
    }
  }

  Window window() const { return window_; }
  BoundaryMode mode() const { return mode_; }
  std::size_t size() const { return bonds_.size(); }
  const DirectedBond& operator[](std::size_t i) const { return bonds_[i]; }

  // Left site of the undirected bond {source, target}; for the wrap bond this
  // is hi.
  Site left_site(const DirectedBond& b) const {
    return is_wrap(b) ? window_.hi : std::min(b.source, b.target);
  }
  bool is_wrap(const DirectedBond& b) const {
    return mode_ == BoundaryMode::periodic &&
           ((b.source == window_.hi && b.target == window_.lo) ||
            (b.source == window_.lo && b.target == window_.hi));
  }

 private:
  Window window_;
  BoundaryMode mode_ = BoundaryMode::frozen;
  std::vector<DirectedBond> bonds_;
};

class EventStream {
 public:
  EventStream(std::size_t bond_count, std::uint64_t seed, Scheduler scheduler,
              double clock_rate = 1.0)
      : rng_(seed), scheduler_(scheduler), bond_count_(bond_count), clock_rate_(clock_rate) {
    if (bond_count == 0) throw OutOfRange("event stream needs at least one bond");
    if (!(clock_rate > 0.0) || !std::isfinite(clock_rate)) throw OutOfRange("clock rate must be positive");
    if (scheduler_ == Scheduler::bond_queue) {
      std::vector<Entry> init;
      init.reserve(bond_count);
      for (std::size_t b = 0; b < bond_count; ++b)
        init.push_back({rng_.exponential(clock_rate_), static_cast<std::uint32_t>(b)});
      queue_ = Queue(std::greater<>{}, std::move(init));
    }
  }

  ClockEvent next() {
    ClockEvent ev;
    if (scheduler_ == Scheduler::bond_queue) {
      const Entry top = queue_.top();
      queue_.pop();
      queue_.push({top.first + rng_.exponential(clock_rate_), top.second});
      ev.time = top.first;
      ev.bond = top.second;
      ev.mark = rng_.uniform();
    } else {
      now_ += rng_.exponential(static_cast<double>(bond_count_) * clock_rate_);
      ev.time = now_;
      const unsigned __int128 p = static_cast<unsigned __int128>(rng_.bits()) * bond_count_;
      ev.bond = static_cast<std::uint32_t>(p >> 64);
      ev.mark = static_cast<double>(static_cast<std::uint64_t>(p) >> 11) * 0x1.0p-53;
    }
    return ev;
  }

  Scheduler scheduler() const { return scheduler_; }
  double clock_rate() const { return clock_rate_; }

 private:
  using Entry = std::pair<double, std::uint32_t>;
  using Queue = std::priority_queue<Entry, std::vector<Entry>, std::greater<>>;

  Rng rng_;
  Scheduler scheduler_;
  std::size_t bond_count_;
  double clock_rate_;
  double now_ = 0.0;
  Queue queue_;
};

}  // namespace casep
