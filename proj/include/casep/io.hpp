#pragma once

// JSON / JSONL persistence of snapshots and trajectories.
//
// Trajectory file (JSONL): one header record
//   {"seed":..,"model":..,"epsilon":..,"J":..,"boundary":..,"q":..,
//    "drift":..,"scheduler":..,"clock_rate":..,"replicas":k}
// followed by one record per (snapshot, replica)
//   {"t":..,"J":..,"origin":..,"window":[lo,hi],"heights":[..],"replica":r}
// where "origin" is the tracked origin current and "window" the height window.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "casep/coupled.hpp"
#include "casep/errors.hpp"
#include "casep/lattice.hpp"

namespace casep {

using json = nlohmann::json;

inline json snapshot_json(const HeightFunction& h, double t) {
  return json{{"t", t},
              {"J", h.spin_max},
              {"origin", h.origin_current},
              {"window", {h.window.lo, h.window.hi}},
              {"heights", h.values}};
}

inline HeightFunction height_from_json(const json& j) {
  HeightFunction h;
  h.spin_max = j.at("J").get<int>();
  h.origin_current = j.at("origin").get<std::int64_t>();
  h.window = {j.at("window").at(0).get<Site>(), j.at("window").at(1).get<Site>()};
  h.values = j.at("heights").get<std::vector<Height>>();
  if (h.values.size() != h.window.size()) throw IoError("heights length does not match window");
  return h;
}

inline json trajectory_header(const Trajectory& traj) {
  const std::size_t k = traj.snapshots.empty() ? traj.initial_current.size()
                                               : traj.snapshots.front().size();
  return json{{"seed", traj.seed},          {"model", traj.model.kind},
              {"epsilon", traj.model.epsilon}, {"q", traj.model.q},
              {"J", traj.model.J},          {"drift", traj.model.drift},
              {"boundary", to_string(traj.boundary)},
              {"scheduler", to_string(traj.scheduler)},
              {"clock_rate", traj.clock_rate},
              {"replicas", k}};
}

inline void write_trajectory_jsonl(std::ostream& os, const Trajectory& traj) {
  os << trajectory_header(traj).dump() << '\n';
  for (const auto& snap : traj.snapshots) {
    for (std::size_t r = 0; r < snap.size(); ++r) {
      json rec = snapshot_json(snap.heights[r], snap.time);
      rec["replica"] = r;
      os << rec.dump() << '\n';
    }
  }
}

inline void write_trajectory_jsonl(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_trajectory_jsonl(os, traj);
  if (!os) throw IoError("write failed: " + path);
}

inline Trajectory read_trajectory_jsonl(std::istream& is) {
  Trajectory traj;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty trajectory file");
  json head;
  try {
    head = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad header: ") + e.what());
  }
  traj.seed = head.at("seed").get<std::uint64_t>();
  traj.model.kind = head.at("model").get<std::string>();
  traj.model.epsilon = head.value("epsilon", 0.0);
  traj.model.q = head.value("q", 0.0);
  traj.model.J = head.at("J").get<int>();
  traj.model.drift = head.value("drift", std::string("right"));
  traj.boundary = head.at("boundary").get<std::string>() == "periodic" ? BoundaryMode::periodic
                                                                      : BoundaryMode::frozen;
  traj.scheduler = head.value("scheduler", std::string("bond_queue")) == "superposition"
                       ? Scheduler::superposition
                       : Scheduler::bond_queue;
  traj.clock_rate = head.value("clock_rate", 1.0);
  const std::size_t k = head.at("replicas").get<std::size_t>();
  if (k == 0) throw IoError("trajectory has zero replicas");

  CoupledState cur;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(std::string("bad record: ") + e.what());
    }
    const std::size_t r = rec.at("replica").get<std::size_t>();
    if (r != cur.size()) throw IoError("replica records out of order");
    HeightFunction h = height_from_json(rec);
    cur.replicas.push_back(config_from_height(h, h.spin_max, traj.boundary));
    cur.heights.push_back(std::move(h));
    cur.time = rec.at("t").get<double>();
    if (cur.size() == k) {
      traj.snapshot_times.push_back(cur.time);
      traj.snapshots.push_back(std::move(cur));
      cur = CoupledState{};
    }
  }
  if (cur.size() != 0) throw IoError("truncated snapshot at end of file");
  if (traj.snapshots.empty()) throw IoError("trajectory has no snapshots");
  // The first record stands in for t = 0 when the file does not say otherwise.
  for (const auto& h : traj.snapshots.front().heights) traj.initial_current.push_back(h.origin_current);
  return traj;
}

inline Trajectory read_trajectory_jsonl(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_trajectory_jsonl(is);
}

}  // namespace casep
