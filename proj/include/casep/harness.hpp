#pragma once

// Experiment configuration, ensemble execution and persistence.
//
// A config is one JSON object (schema_version 1). Times are macroscopic
// (microscopic time = t / eps^2); sites and window sizes are microscopic.
// Trajectory i of an ensemble uses the clock seed derive_seed(master, i);
// random initial data of group g use derive_seed(master, i, 1 + g); under
// "coupling": "independent" replica r >= 1 runs on derive_seed(master, i, 64 + r).
// Per-trajectory results are reduced in index order, so the thread count
// never changes an output byte.
//
// Outputs in the run directory: manifest.json, verdict.json, report.csv,
// trajectories/traj_<i>.jsonl (the first record_trajectories members) and
// timing.json (wall-clock data, excluded from the reproducibility contract).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "casep/coupled.hpp"
#include "casep/diagnostics.hpp"
#include "casep/errors.hpp"
#include "casep/initdata.hpp"
#include "casep/io.hpp"
#include "casep/profile.hpp"
#include "casep/rate_model.hpp"
#include "casep/rng.hpp"
#include "casep/scaling.hpp"
#include "casep/stats.hpp"

namespace casep {

inline constexpr const char* kVersion = "casep 1.0.0";
inline constexpr int kSchemaVersion = 1;

// --- config access ---------------------------------------------------------

namespace cfg {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}
inline std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigInvalid(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigInvalid(join(path, key), "missing field");
  return *it;
}

inline double number(const json& j, const std::string& key, const std::string& path,
                     std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigInvalid(join(path, key), "missing field");
  }
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigInvalid(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigInvalid(join(path, key), "must be finite");
  return d;
}

inline std::int64_t integer(const json& j, const std::string& key, const std::string& path,
                            std::optional<std::int64_t> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigInvalid(join(path, key), "missing field");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigInvalid(join(path, key), "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string text(const json& j, const std::string& key, const std::string& path,
                        std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigInvalid(join(path, key), "missing field");
  }
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigInvalid(join(path, key), "expected a string");
  return v.get<std::string>();
}

inline bool flag(const json& j, const std::string& key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigInvalid(join(path, key), "expected a boolean");
  return j.at(key).get<bool>();
}

inline void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigInvalid(path, what);
}

}  // namespace cfg

// --- parsed config ---------------------------------------------------------

enum class InitialKind { profile, bernoulli, product, flat, max, min };

struct InitialSpec {
  InitialKind kind = InitialKind::flat;
  json profile;          // profile spec (kind == profile)
  double rho = 0.5;      // bernoulli / product
  std::int64_t group = 0;
  std::size_t of[2] = {0, 0};  // max / min operands
};

enum class DiagnosticKind { ordering, qvar, martingale, moment_bound, stationarity, drift, variance };

struct DiagnosticSpec {
  DiagnosticKind kind = DiagnosticKind::ordering;
  std::string name;
  json params;
};

struct ExperimentConfig {
  json raw;  // normalized config (hashed and stored in the manifest)
  std::string name;
  std::string model_type;
  double epsilon = 0.04;
  double q = 0.0;
  int J = 1;
  Drift drift = Drift::right;
  Site half_width = 0;  // configuration window [-L + 1, L], heights on [-L, L]
  BoundaryMode boundary = BoundaryMode::frozen;
  Site observation = 0;  // height sites [-obs, obs] feed the diagnostics
  double horizon = 0.0;  // macroscopic
  std::vector<double> snapshot_micro;  // physical microscopic snapshot times
  std::vector<InitialSpec> initial;
  bool independent = false;
  Scheduler scheduler = Scheduler::superposition;
  bool clock_at_max = true;
  double clock_rate = 1.0;
  std::size_t ensemble = 1;
  std::uint64_t seed = 0;
  std::size_t record_trajectories = 1;
  ScalingParams scaling;
  std::vector<DiagnosticSpec> diagnostics;
  double budget_seconds = 0.0;

  double micro(double t) const { return t / (epsilon * epsilon); }
  Window config_window() const { return {-half_width + 1, half_width}; }
  Window height_window() const { return {-half_width, half_width}; }
};

inline RateModel build_model(const ExperimentConfig& c) {
  if (c.model_type == "asep") return asep_model(c.epsilon, c.drift);
  if (c.model_type == "ssep") return ssep_model();
  return asep_qj_model_normalized(c.q, c.J);
}

// --- profiles ---------------------------------------------------------------

inline SmoothProfile build_profile(const json& p, const std::string& path) {
  const std::string preset = cfg::text(p, "preset", path);
  const double delta = cfg::number(p, "delta", path, preset == "sin" ? 0.99 : 0.5);
  cfg::check(delta > 0 && delta < 1, cfg::join(path, "delta"), "must lie in (0,1)");
  try {
    if (preset == "zero") return zero_profile(delta);
    if (preset == "tanh")
      return tanh_profile(cfg::number(p, "amplitude", path, 1.0), cfg::number(p, "width", path, 1.0), delta);
    if (preset == "sin_damped")
      return sin_damped_profile(cfg::number(p, "amplitude", path, 1.0), cfg::number(p, "omega", path, 2.0),
                                cfg::number(p, "sigma", path, 2.0), delta);
    if (preset == "sin")
      return sin_profile(cfg::number(p, "amplitude", path, 1.0), cfg::number(p, "omega", path, 1.0), delta);
    if (preset == "tabulated") {
      const json& xs = cfg::need(p, "xs", path);
      const json& ys = cfg::need(p, "ys", path);
      cfg::check(xs.is_array() && ys.is_array(), path, "xs and ys must be arrays");
      return tabulated_profile(xs.get<std::vector<double>>(), ys.get<std::vector<double>>(), delta);
    }
    if (preset == "dominating") {
      const json& of = cfg::need(p, "of", path);
      cfg::check(of.is_array() && of.size() == 2, cfg::join(path, "of"), "expected two profiles");
      return dominating_profile(build_profile(of[0], cfg::index(cfg::join(path, "of"), 0)),
                                build_profile(of[1], cfg::index(cfg::join(path, "of"), 1)));
    }
    if (preset == "envelope_upper" || preset == "envelope_lower") {
      auto target = build_profile(cfg::need(p, "target", path), cfg::join(path, "target"));
      const auto N = cfg::integer(p, "N", path);
      cfg::check(N >= 1, cfg::join(path, "N"), "must be >= 1");
      auto env = envelope_pair(target, static_cast<int>(N));
      return preset == "envelope_upper" ? env.upper : env.lower;
    }
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const Error& e) {
    throw ConfigInvalid(path, e.what());
  }
  throw ConfigInvalid(cfg::join(path, "preset"), "unknown preset '" + preset + "'");
}

// --- validation ---------------------------------------------------------------

namespace detail {

inline std::vector<double> snapshot_grid(const json& s, const ExperimentConfig& c) {
  const double tau = c.micro(c.horizon);
  std::vector<double> out{0.0, tau};
  if (s.contains("times")) {
    const json& ts = s.at("times");
    cfg::check(ts.is_array(), "snapshots.times", "expected an array");
    double prev = -1.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      cfg::check(ts[i].is_number(), cfg::index("snapshots.times", i), "expected a number");
      const double t = ts[i].get<double>();
      cfg::check(t >= 0 && t <= c.horizon, cfg::index("snapshots.times", i), "must lie in [0, horizon]");
      cfg::check(t > prev, cfg::index("snapshots.times", i), "snapshot times must be sorted");
      prev = t;
      out.push_back(c.micro(t));
    }
  }
  if (s.contains("every")) {
    const double dt = cfg::number(s, "every", "snapshots");
    cfg::check(dt > 0, "snapshots.every", "must be positive");
    const auto n = static_cast<std::int64_t>(std::floor(c.horizon / dt + 1e-9));
    cfg::check(n <= 100000, "snapshots.every", "too many snapshots");
    for (std::int64_t j = 0; j <= n; ++j) out.push_back(c.micro(static_cast<double>(j) * dt));
  }
  if (s.contains("micro_every")) {
    const double dt = cfg::number(s, "micro_every", "snapshots");
    cfg::check(dt > 0, "snapshots.micro_every", "must be positive");
    const double until = std::min(tau, cfg::number(s, "micro_until", "snapshots", tau));
    cfg::check(until >= 0, "snapshots.micro_until", "must be nonnegative");
    const auto n = static_cast<std::int64_t>(std::floor(until / dt + 1e-9));
    cfg::check(n <= 100000, "snapshots.micro_every", "too many snapshots");
    for (std::int64_t j = 0; j <= n; ++j) out.push_back(static_cast<double>(j) * dt);
  }
  std::sort(out.begin(), out.end());
  std::vector<double> uniq;
  for (double t : out)
    if (uniq.empty() || t - uniq.back() > 1e-9 * std::max(1.0, t)) uniq.push_back(std::min(t, tau));
  return uniq;
}

inline bool has_snapshot(const ExperimentConfig& c, double t) {
  const double tau = c.micro(t);
  return std::any_of(c.snapshot_micro.begin(), c.snapshot_micro.end(), [tau](double s) {
    return std::fabs(s - tau) <= 1e-9 * std::max(1.0, tau);
  });
}

inline std::size_t replica_index(const json& d, const std::string& key, const std::string& path,
                                 const ExperimentConfig& c, std::optional<std::int64_t> fallback) {
  const auto r = cfg::integer(d, key, path, fallback);
  cfg::check(r >= 0 && static_cast<std::size_t>(r) < c.initial.size(), cfg::join(path, key),
             "replica index out of range");
  return static_cast<std::size_t>(r);
}

inline void check_time(const json& d, const std::string& path, const ExperimentConfig& c) {
  const double t = cfg::number(d, "t", path);
  cfg::check(t >= 0 && t <= c.horizon, cfg::join(path, "t"), "must lie in [0, horizon]");
  cfg::check(has_snapshot(c, t), cfg::join(path, "t"), "no snapshot at this time");
}

inline void check_site(Site x, const std::string& path, const ExperimentConfig& c, Site margin) {
  cfg::check(std::llabs(x) <= c.observation - margin, path, "site outside the observation window");
}

inline DiagnosticSpec parse_diagnostic(const json& d, const std::string& path, const ExperimentConfig& c) {
  DiagnosticSpec s;
  s.params = d;
  const std::string kind = cfg::text(d, "kind", path);
  s.name = cfg::text(d, "name", path, kind);
  if (kind == "ordering") {
    s.kind = DiagnosticKind::ordering;
    const std::string o = cfg::text(d, "order", path);
    cfg::check(o == "M" || o == "A" || o == "monotone_difference", cfg::join(path, "order"),
               "expected M, A or monotone_difference");
    replica_index(d, "lower", path, c, 0);
    replica_index(d, "upper", path, c, 1);
  } else if (kind == "qvar") {
    s.kind = DiagnosticKind::qvar;
    replica_index(d, "lower", path, c, 0);
    replica_index(d, "upper", path, c, 1);
    check_time(d, path, c);
    const json& lv = cfg::need(d, "levels", path);
    cfg::check(lv.is_array() && lv.size() == 2 && lv[0].is_number_integer() && lv[1].is_number_integer() &&
                   lv[0].get<int>() >= 0 && lv[1].get<int>() > lv[0].get<int>() && lv[1].get<int>() <= 20,
               cfg::join(path, "levels"), "expected [N_lo, N_hi] with 0 <= N_lo < N_hi <= 20");
    const json& iv = cfg::need(d, "interval", path);
    cfg::check(iv.is_array() && iv.size() == 2 && iv[0].is_number() && iv[1].is_number() &&
                   iv[1].get<double>() > iv[0].get<double>(),
               cfg::join(path, "interval"), "expected [a, b] with a < b");
    const double reach = static_cast<double>(c.observation) * c.epsilon;
    cfg::check(iv[0].get<double>() >= -reach && iv[1].get<double>() <= reach, cfg::join(path, "interval"),
               "interval leaves the observation window");
    cfg::check(d.contains("max_ratio") || d.contains("min_ratio"), path, "need max_ratio or min_ratio");
  } else if (kind == "martingale") {
    s.kind = DiagnosticKind::martingale;
    const double dt_max = cfg::number(d, "dt_max", path, 0.1);
    const double t_end = cfg::number(d, "t", path, c.horizon);
    cfg::check(t_end > 0 && t_end <= c.horizon, cfg::join(path, "t"), "must lie in (0, horizon]");
    cfg::check(has_snapshot(c, t_end), cfg::join(path, "t"), "no snapshot at this time");
    for (std::size_t j = 1; j < c.snapshot_micro.size() && c.snapshot_micro[j - 1] < c.micro(t_end); ++j)
      cfg::check(c.snapshot_micro[j] - c.snapshot_micro[j - 1] <= dt_max * (1 + 1e-12), "snapshots",
                 "snapshot gap exceeds the residual dt_max");
    const json& probes = cfg::need(d, "probes", path);
    cfg::check(probes.is_array(), cfg::join(path, "probes"), "expected an array");
    for (std::size_t i = 0; i < probes.size(); ++i) {
      cfg::check(probes[i].is_number_integer(), cfg::index(cfg::join(path, "probes"), i), "expected a site");
      check_site(probes[i].get<Site>(), cfg::index(cfg::join(path, "probes"), i), c, 1);
    }
    for (const char* key : {"cross", "quadratic"}) {
      if (!d.contains(key)) continue;
      const json& arr = d.at(key);
      const std::string ap = cfg::join(path, key);
      cfg::check(arr.is_array(), ap, "expected an array of [x, y, r1, r2]");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& e = arr[i];
        const std::string ep = cfg::index(ap, i);
        cfg::check(e.is_array() && e.size() == 4, ep, "expected [x, y, r1, r2]");
        for (const auto& v : e) cfg::check(v.is_number_integer(), ep, "expected integers");
        check_site(e[0].get<Site>(), ep, c, 1);
        check_site(e[1].get<Site>(), ep, c, 1);
        for (int k : {2, 3})
          cfg::check(e[k].get<std::int64_t>() >= 0 && e[k].get<std::size_t>() < c.initial.size(), ep,
                     "replica index out of range");
      }
    }
    cfg::check(cfg::integer(d, "min_ensemble", path, 30) >= 0, path, "bad min_ensemble");
    cfg::check(c.ensemble >= 30, "ensemble", "martingale brackets need >= 30 trajectories");
  } else if (kind == "moment_bound") {
    s.kind = DiagnosticKind::moment_bound;
    replica_index(d, "replica", path, c, 0);
    try {
      NormParams(cfg::number(d, "alpha", path), cfg::number(d, "delta", path), cfg::number(d, "p", path, 0.0),
                 static_cast<int>(cfg::integer(d, "r_max", path, 8)));
    } catch (const OutOfRange& e) {
      throw ConfigInvalid(path, e.what());
    }
    cfg::check(cfg::number(d, "C", path) > 0, cfg::join(path, "C"), "must be positive");
    const std::string ex = cfg::text(d, "expect", path, "pass");
    cfg::check(ex == "pass" || ex == "fail", cfg::join(path, "expect"), "expected pass or fail");
    cfg::check(c.ensemble >= 100, "ensemble", "moment check needs >= 100 trajectories");
  } else if (kind == "stationarity") {
    s.kind = DiagnosticKind::stationarity;
    replica_index(d, "replica", path, c, 0);
    check_time(d, path, c);
    const double rho = cfg::number(d, "rho", path);
    cfg::check(rho >= 0 && rho <= 1, cfg::join(path, "rho"), "must lie in [0,1]");
  } else if (kind == "drift" || kind == "variance") {
    s.kind = kind == "drift" ? DiagnosticKind::drift : DiagnosticKind::variance;
    replica_index(d, "replica", path, c, 0);
    check_time(d, path, c);
    const double x = cfg::number(d, "x", path, 0.0);
    check_site(static_cast<Site>(std::llround(x / c.epsilon)), cfg::join(path, "x"), c, 0);
    if (kind == "variance") {
      const json& target = cfg::need(d, "target", path);
      cfg::check(target.is_number() || target == "ew", cfg::join(path, "target"), "expected a number or \"ew\"");
      cfg::check(cfg::number(d, "rel_tol", path) > 0, cfg::join(path, "rel_tol"), "must be positive");
    }
  } else {
    throw ConfigInvalid(cfg::join(path, "kind"), "unknown diagnostic '" + kind + "'");
  }
  return s;
}

}  // namespace detail

// Parses and validates a config. Throws ConfigInvalid with the path of the
// offending field.
inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  cfg::check(j.is_object(), "", "config must be a JSON object");
  c.raw = j;
  cfg::check(cfg::integer(j, "schema_version", "", kSchemaVersion) == kSchemaVersion, "schema_version",
             "unsupported schema version");
  c.name = cfg::text(j, "name", "", "experiment");

  const json& m = cfg::need(j, "model", "");
  c.model_type = cfg::text(m, "type", "model");
  c.epsilon = cfg::number(j, "epsilon", "");
  cfg::check(c.epsilon > 0 && c.epsilon <= 1, "epsilon", "must lie in (0, 1]");
  if (c.model_type == "asep") {
    const std::string d = cfg::text(m, "drift", "model", "right");
    cfg::check(d == "right" || d == "left", "model.drift", "expected right or left");
    c.drift = d == "right" ? Drift::right : Drift::left;
  } else if (c.model_type == "asep_qj") {
    c.q = cfg::number(m, "q", "model");
    cfg::check(c.q > 0 && c.q < 1, "model.q", "must lie in (0,1)");
    const auto J = cfg::integer(m, "J", "model");
    cfg::check(J >= 1 && J <= 16, "model.J", "must lie in [1, 16]");
    c.J = static_cast<int>(J);
  } else if (c.model_type != "ssep") {
    throw ConfigInvalid("model.type", "unknown model '" + c.model_type + "'");
  }

  const json& w = cfg::need(j, "window", "");
  const auto L = cfg::integer(w, "half_width", "window");
  cfg::check(L >= 2 && L <= 50'000'000, "window.half_width", "must lie in [2, 5e7]");
  c.half_width = L;
  const std::string b = cfg::text(w, "boundary", "window");
  cfg::check(b == "frozen" || b == "periodic", "window.boundary", "expected frozen or periodic");
  c.boundary = b == "periodic" ? BoundaryMode::periodic : BoundaryMode::frozen;

  c.horizon = cfg::number(j, "horizon", "");
  cfg::check(c.horizon >= 0, "horizon", "must be nonnegative");
  const RateModel model = build_model(c);
  const double engine_horizon = c.micro(c.horizon) * model.time_scale;
  const auto buffer = static_cast<Site>(std::ceil(4.0 * engine_horizon)) + 8;
  if (c.boundary == BoundaryMode::periodic) {
    c.observation = cfg::integer(j, "observation_half_width", "", L);
    cfg::check(c.observation >= 0 && c.observation <= L, "observation_half_width", "must lie in [0, L]");
  } else {
    c.observation = cfg::integer(j, "observation_half_width", "", std::max<Site>(0, L - buffer));
    cfg::check(c.observation >= 0, "observation_half_width", "must be nonnegative");
    cfg::check(L >= c.observation + buffer, "window.half_width",
               "light-cone rule: need L >= observation half-width + ceil(4 horizon) + 8 = " +
                   std::to_string(c.observation + buffer));
  }

  c.snapshot_micro = detail::snapshot_grid(j.value("snapshots", json::object()), c);

  const json& init = cfg::need(j, "initial", "");
  cfg::check(init.is_array() && !init.empty(), "initial", "need at least one replica");
  cfg::check(init.size() <= 64, "initial", "at most 64 replicas");
  for (std::size_t i = 0; i < init.size(); ++i) {
    const std::string p = cfg::index("initial", i);
    const json& e = init[i];
    InitialSpec s;
    const std::string kind = cfg::text(e, "kind", p);
    s.group = cfg::integer(e, "group", p, static_cast<std::int64_t>(i));
    cfg::check(s.group >= 0 && s.group < 60, cfg::join(p, "group"), "must lie in [0, 60)");
    if (kind == "profile") {
      s.kind = InitialKind::profile;
      s.profile = cfg::need(e, "profile", p);
      build_profile(s.profile, cfg::join(p, "profile"));
    } else if (kind == "bernoulli" || kind == "product") {
      s.kind = kind == "bernoulli" ? InitialKind::bernoulli : InitialKind::product;
      s.rho = cfg::number(e, "rho", p);
      cfg::check(s.rho >= 0 && s.rho <= 1, cfg::join(p, "rho"), "must lie in [0,1]");
    } else if (kind == "flat") {
      s.kind = InitialKind::flat;
    } else if (kind == "max" || kind == "min") {
      s.kind = kind == "max" ? InitialKind::max : InitialKind::min;
      const json& of = cfg::need(e, "of", p);
      cfg::check(of.is_array() && of.size() == 2, cfg::join(p, "of"), "expected two replica indices");
      for (int k = 0; k < 2; ++k) {
        cfg::check(of[k].is_number_integer() && of[k].get<std::int64_t>() >= 0 &&
                       of[k].get<std::size_t>() < i,
                   cfg::join(p, "of"), "operands must be earlier replicas");
        s.of[k] = of[k].get<std::size_t>();
      }
    } else {
      throw ConfigInvalid(cfg::join(p, "kind"), "unknown initial kind '" + kind + "'");
    }
    c.initial.push_back(std::move(s));
  }

  const std::string coupling = cfg::text(j, "coupling", "", "basic");
  cfg::check(coupling == "basic" || coupling == "independent", "coupling", "expected basic or independent");
  c.independent = coupling == "independent";
  const std::string sched = cfg::text(j, "scheduler", "", "superposition");
  cfg::check(sched == "superposition" || sched == "bond_queue", "scheduler", "expected superposition or bond_queue");
  c.scheduler = sched == "superposition" ? Scheduler::superposition : Scheduler::bond_queue;
  if (j.contains("clock_rate") && j.at("clock_rate").is_string()) {
    cfg::check(j.at("clock_rate") == "max", "clock_rate", "expected \"max\" or a number");
    c.clock_at_max = true;
  } else if (j.contains("clock_rate")) {
    c.clock_at_max = false;
    c.clock_rate = cfg::number(j, "clock_rate", "");
    cfg::check(c.clock_rate >= model.max_rate(), "clock_rate", "must be >= the largest jump rate");
  }
  if (c.clock_at_max) c.clock_rate = model.max_rate() > 0 ? model.max_rate() : 1.0;

  const auto n = cfg::integer(j, "ensemble", "", 1);
  cfg::check(n >= 1 && n <= 10'000'000, "ensemble", "must lie in [1, 1e7]");
  c.ensemble = static_cast<std::size_t>(n);
  const json& sv = cfg::need(j, "seed", "");
  cfg::check(sv.is_number_unsigned() || (sv.is_number_integer() && sv.get<std::int64_t>() >= 0), "seed",
             "expected a nonnegative integer");
  c.seed = sv.get<std::uint64_t>();
  const auto rec = cfg::integer(j, "record_trajectories", "", 1);
  cfg::check(rec >= 0, "record_trajectories", "must be nonnegative");
  c.record_trajectories = static_cast<std::size_t>(rec);

  const json sc = j.value("scaling", json::object());
  c.scaling.epsilon = c.epsilon;
  const std::string ds = cfg::text(sc, "drift_sign", "scaling", "plus");
  cfg::check(ds == "plus" || ds == "minus", "scaling.drift_sign", "expected plus or minus");
  c.scaling.drift_sign = ds == "plus" ? DriftSign::plus : DriftSign::minus;
  const std::string conv = cfg::text(sc, "convention", "scaling", "exact");
  cfg::check(conv == "exact" || conv == "paper", "scaling.convention", "expected exact or paper");
  c.scaling.convention = conv == "exact" ? HopfColeConvention::exact : HopfColeConvention::paper;
  if (c.model_type == "asep") {
    c.scaling.asymmetry = (c.drift == Drift::right ? 1.0 : -1.0) * std::sqrt(c.epsilon);
  } else if (c.model_type == "ssep") {
    c.scaling.asymmetry = 0.0;
  }

  if (j.contains("diagnostics")) {
    const json& ds_arr = j.at("diagnostics");
    cfg::check(ds_arr.is_array(), "diagnostics", "expected an array");
    for (std::size_t i = 0; i < ds_arr.size(); ++i)
      c.diagnostics.push_back(detail::parse_diagnostic(ds_arr[i], cfg::index("diagnostics", i), c));
  }
  c.budget_seconds = cfg::number(j, "budget_seconds", "", 0.0);
  return c;
}

// --- initial data ------------------------------------------------------------

// Deterministic parts of the initial data, prepared once per experiment.
struct InitialPlan {
  std::vector<std::optional<HeightFunction>> fixed;
};

inline InitialPlan plan_initial(const ExperimentConfig& c) {
  InitialPlan plan;
  plan.fixed.resize(c.initial.size());
  const Window hw = c.height_window();
  std::vector<std::pair<std::size_t, SmoothProfile>> profiles;
  for (std::size_t i = 0; i < c.initial.size(); ++i)
    if (c.initial[i].kind == InitialKind::profile)
      profiles.emplace_back(i, build_profile(c.initial[i].profile, cfg::index("initial", i) + ".profile"));
  if (!profiles.empty()) {
    // One cutoff for all profile replicas keeps differences of A^eps outputs
    // exactly monotone.
    ApproxParams common = approx_params(profiles.front().second, c.epsilon, hw);
    for (const auto& [i, f] : profiles) {
      const ApproxParams p = approx_params(f, c.epsilon, hw);
      common.cutoff = std::max(common.cutoff, p.cutoff);
      common.cutoff_steps = std::max(common.cutoff_steps, p.cutoff_steps);
    }
    for (const auto& [i, f] : profiles) plan.fixed[i] = lift_to_spin(approx_viable(f, common, hw), c.J);
  }
  for (std::size_t i = 0; i < c.initial.size(); ++i)
    if (c.initial[i].kind == InitialKind::flat)
      plan.fixed[i] = lift_to_spin(flat_height(c.config_window()), c.J);
  return plan;
}

inline std::vector<HeightFunction> build_initials(const ExperimentConfig& c, const InitialPlan& plan,
                                                  std::size_t member) {
  std::vector<HeightFunction> out;
  for (std::size_t i = 0; i < c.initial.size(); ++i) {
    const InitialSpec& s = c.initial[i];
    const std::uint64_t seed = derive_seed(c.seed, member, 1 + static_cast<std::uint64_t>(s.group));
    switch (s.kind) {
      case InitialKind::profile:
      case InitialKind::flat: out.push_back(*plan.fixed[i]); break;
      case InitialKind::bernoulli:
        out.push_back(lift_to_spin(bernoulli_height(s.rho, c.config_window(), seed), c.J));
        break;
      case InitialKind::product: out.push_back(product_height(s.rho, c.J, c.config_window(), seed)); break;
      case InitialKind::max: out.push_back(viable_max(out[s.of[0]], out[s.of[1]])); break;
      case InitialKind::min: out.push_back(viable_min(out[s.of[0]], out[s.of[1]])); break;
    }
  }
  return out;
}

// --- simulation of one member ------------------------------------------------

inline Trajectory simulate_member(const ExperimentConfig& c, const RateModel& model,
                                  const std::vector<HeightFunction>& initials, std::size_t member) {
  EvolveOptions opt;
  opt.boundary = c.boundary;
  opt.scheduler = c.scheduler;
  opt.clock_rate = c.clock_rate;
  const double ts = model.time_scale;
  std::vector<double> engine_times;
  for (double t : c.snapshot_micro) engine_times.push_back(t * ts);
  const double horizon = c.micro(c.horizon) * ts;
  const std::uint64_t seed = derive_seed(c.seed, member);
  Trajectory tr;
  if (!c.independent) {
    tr = evolve_coupled(initials, model, horizon, engine_times, seed, opt);
  } else {
    std::vector<Trajectory> parts;
    for (std::size_t r = 0; r < initials.size(); ++r)
      parts.push_back(evolve_coupled(std::span(&initials[r], 1), model, horizon, engine_times,
                                     r == 0 ? seed : derive_seed(c.seed, member, 64 + r), opt));
    tr = combine_replicas(parts);
  }
  tr.snapshot_times = c.snapshot_micro;
  for (std::size_t j = 0; j < tr.snapshots.size(); ++j) tr.snapshots[j].time = c.snapshot_micro[j];
  return tr;
}

// --- diagnostics ---------------------------------------------------------------

namespace detail {

inline std::size_t snapshot_at(const ExperimentConfig& c, const Trajectory& tr, double t) {
  return find_snapshot(tr, c.micro(t));
}

// Rescaled height eps^{1/2} h / unit on the observation window.
inline GridFunction observed_grid(const ExperimentConfig& c, const HeightFunction& h) {
  const double unit = spin_lift_factor(c.J);
  GridFunction g;
  g.dx = c.epsilon;
  g.x0 = -static_cast<double>(c.observation) * c.epsilon;
  for (Site k = -c.observation; k <= c.observation; ++k)
    g.v.push_back(std::sqrt(c.epsilon) * static_cast<double>(h.at(k)) / unit);
  return g;
}

inline double rescaled_point(const ExperimentConfig& c, const Trajectory& tr, std::size_t replica, double t,
                             double x) {
  const auto f = rescale_field(tr, replica, c.scaling, {t}, {x});
  return f.values[0] / spin_lift_factor(c.J);
}

inline std::vector<double> sample_diagnostic(const ExperimentConfig& c, const DiagnosticSpec& d,
                                             const Trajectory& tr) {
  const json& p = d.params;
  switch (d.kind) {
    case DiagnosticKind::ordering: {
      const std::string o = p.at("order").get<std::string>();
      const OrderingKind k = o == "M" ? OrderingKind::M : o == "A" ? OrderingKind::A : OrderingKind::monotone_difference;
      const auto rep = ordering_check(tr, k, p.value("lower", std::size_t{0}), p.value("upper", std::size_t{1}));
      if (!rep.violation) return {0.0, 0.0, 0.0};
      return {1.0, rep.violation->time, static_cast<double>(rep.violation->site)};
    }
    case DiagnosticKind::qvar: {
      const std::size_t lo = p.value("lower", std::size_t{0}), hi = p.value("upper", std::size_t{1});
      const int n0 = p.at("levels")[0].get<int>(), n1 = p.at("levels")[1].get<int>();
      const double a = p.at("interval")[0].get<double>(), b = p.at("interval")[1].get<double>();
      std::vector<double> out;
      for (double t : {0.0, p.at("t").get<double>()}) {
        const std::size_t j = snapshot_at(c, tr, t);
        GridFunction y = observed_grid(c, tr.snapshots[j].heights[hi]);
        const GridFunction x = observed_grid(c, tr.snapshots[j].heights[lo]);
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] -= x.v[i];
        for (int N = n0; N <= n1; ++N) out.push_back(dyadic_qvar(y, N, a, b, DyadicSampling::lattice_step));
      }
      return out;
    }
    case DiagnosticKind::martingale: {
      const double dt_max = p.value("dt_max", 0.1);
      Site lo = 0, hi = 0;
      auto widen = [&](Site x) {
        lo = std::min(lo, x - 1);
        hi = std::max(hi, x + 1);
      };
      for (const auto& x : p.at("probes")) widen(x.get<Site>());
      for (const char* key : {"cross", "quadratic"})
        if (p.contains(key))
          for (const auto& e : p.at(key)) {
            widen(e[0].get<Site>());
            widen(e[1].get<Site>());
          }
      std::vector<double> xs;
      for (Site k = lo; k <= hi; ++k) xs.push_back(static_cast<double>(k) * c.epsilon);
      const double t_end = c.micro(p.value("t", c.horizon));
      std::vector<double> times;
      for (double tau : tr.snapshot_times)
        if (tau <= t_end * (1 + 1e-9)) times.push_back(tau * c.epsilon * c.epsilon);
      std::vector<std::optional<MartingaleResidual>> res(tr.snapshots.front().size());
      auto residual = [&](std::size_t r) -> const MartingaleResidual& {
        if (!res[r]) res[r] = martingale_residual(hopf_cole(rescale_field(tr, r, c.scaling, times, xs)), dt_max);
        return *res[r];
      };
      const std::size_t r0 = p.value("replica", std::size_t{0});
      std::vector<double> out;
      const MartingaleResidual& m0 = residual(r0);
      for (const auto& x : p.at("probes")) out.push_back(m0.at(m0.micro_times.size() - 1, m0.site_index(x.get<Site>())));
      for (const char* key : {"cross", "quadratic"})
        if (p.contains(key))
          for (const auto& e : p.at(key))
            out.push_back(bracket_rate(residual(e[2].get<std::size_t>()), residual(e[3].get<std::size_t>()),
                                       e[0].get<Site>(), e[1].get<Site>()));
      return out;
    }
    case DiagnosticKind::moment_bound: {
      const std::size_t r = p.value("replica", std::size_t{0});
      return observed_grid(c, tr.snapshots.front().heights[r]).v;
    }
    case DiagnosticKind::stationarity: {
      const std::size_t r = p.value("replica", std::size_t{0});
      const std::size_t j = snapshot_at(c, tr, p.at("t").get<double>());
      const auto& occ = tr.snapshots[j].replicas[r].occupancy;
      const double J = c.J;
      std::vector<double> out(2, 0.0);
      const std::size_t n = occ.size();
      const std::size_t pairs = c.boundary == BoundaryMode::periodic ? n : n - 1;
      for (std::size_t i = 0; i < n; ++i) out[0] += occ[i] / J;
      for (std::size_t i = 0; i < pairs; ++i) out[1] += (occ[i] / J) * (occ[(i + 1) % n] / J);
      out[0] /= static_cast<double>(n);
      out[1] /= static_cast<double>(pairs);
      for (int v : occ) out.push_back(v / J);
      return out;
    }
    case DiagnosticKind::drift:
    case DiagnosticKind::variance: {
      const std::size_t r = p.value("replica", std::size_t{0});
      const double x = p.value("x", 0.0), t = p.at("t").get<double>();
      return {rescaled_point(c, tr, r, t, x) - rescaled_point(c, tr, r, 0.0, x)};
    }
  }
  return {};
}

inline Quantity z_quantity(std::string name, const RunningStats& s, double target, double k) {
  Quantity q{std::move(name), s.mean(), s.se(), k, "|z|<=" + detail::csv_num(k)};
  const double z = s.se() > 0 ? std::fabs(s.mean() - target) / s.se() : (s.mean() == target ? 0.0 : INFINITY);
  q.pass = z <= k;
  q.n = s.count();
  return q;
}

inline EstimatorReport reduce_diagnostic(const ExperimentConfig& c, const DiagnosticSpec& d,
                                         const std::vector<const std::vector<double>*>& samples) {
  const json& p = d.params;
  EstimatorReport rep;
  rep.name = d.name;
  rep.metadata["kind"] = p.at("kind").get<std::string>();
  rep.metadata["epsilon"] = detail::csv_num(c.epsilon);
  rep.metadata["ensemble"] = std::to_string(samples.size());
  rep.metadata["seed"] = std::to_string(c.seed);
  const std::size_t n = samples.size();
  switch (d.kind) {
    case DiagnosticKind::ordering: {
      std::size_t bad = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = *samples[i];
        if (s[0] > 0) {
          if (!rep.violation)
            rep.violation = Violation{s[1], static_cast<Site>(s[2]), p.value("lower", std::size_t{0}),
                                      p.value("upper", std::size_t{1})};
          ++bad;
        }
      }
      Quantity q{"violating_trajectories", static_cast<double>(bad), 0.0, 0.0, "==", bad == 0};
      q.n = n;
      rep.add(q);
      rep.metadata["order"] = p.at("order").get<std::string>();
      break;
    }
    case DiagnosticKind::qvar: {
      const int n0 = p.at("levels")[0].get<int>(), n1 = p.at("levels")[1].get<int>();
      const std::size_t L = static_cast<std::size_t>(n1 - n0 + 1);
      std::vector<RunningStats> init(L), fin(L);
      for (const auto* s : samples)
        for (std::size_t k = 0; k < L; ++k) {
          init[k].push((*s)[k]);
          fin[k].push((*s)[L + k]);
        }
      const double t = p.at("t").get<double>();
      for (std::size_t k = 0; k < L; ++k) {
        Quantity q{"Q_" + std::to_string(n0 + static_cast<int>(k)), fin[k].mean(), fin[k].se()};
        q.comparison = "info";
        q.t = t;
        q.n = n;
        rep.add(q);
      }
      bool nonincreasing = true;
      for (std::size_t k = 1; k < L; ++k) nonincreasing = nonincreasing && fin[k].mean() <= fin[k - 1].mean();
      const double ratio = fin[L - 1].mean() / fin[0].mean();
      const double init_ratio = init[L - 1].mean() / init[0].mean();
      Quantity r0{"initial_ratio", init_ratio};
      r0.comparison = "info";
      r0.t = 0;
      rep.add(r0);
      Quantity rq{"ratio", ratio};
      rq.t = t;
      rq.n = n;
      if (p.contains("max_ratio")) {
        rq.threshold = p.at("max_ratio").get<double>();
        rq.comparison = "<=";
        rq.pass = ratio <= rq.threshold;
      } else {
        rq.threshold = p.at("min_ratio").get<double>();
        rq.comparison = ">=";
        rq.pass = ratio >= rq.threshold;
      }
      rep.add(rq);
      if (p.value("decreasing", false)) {
        Quantity dq{"nonincreasing_in_N", nonincreasing ? 1.0 : 0.0, 0.0, 1.0, "==", nonincreasing};
        rep.add(dq);
      }
      break;
    }
    case DiagnosticKind::martingale: {
      const double k = p.value("k", 3.0);
      std::size_t col = 0;
      auto column = [&](std::size_t idx) {
        RunningStats s;
        for (const auto* v : samples) s.push((*v)[idx]);
        return s;
      };
      for (const auto& x : p.at("probes")) {
        auto q = z_quantity("residual_mean", column(col++), 0.0, k);
        q.x = x.get<double>();
        q.t = p.value("t", c.horizon);
        rep.add(q);
      }
      if (p.contains("cross"))
        for (const auto& e : p.at("cross")) {
          auto q = z_quantity("cross_bracket_r" + std::to_string(e[2].get<int>()) + "_r" +
                                  std::to_string(e[3].get<int>()),
                              column(col++), 0.0, k);
          q.x = e[0].get<double>();
          q.y = e[1].get<double>();
          rep.add(q);
        }
      if (p.contains("quadratic"))
        for (const auto& e : p.at("quadratic")) {
          const RunningStats s = column(col++);
          const double kq = p.value("k_positive", 5.0);
          Quantity q{"quadratic_bracket", s.mean(), s.se(), kq, "z>"};
          q.comparison += detail::csv_num(kq);
          q.pass = s.mean() > kq * s.se();
          q.x = e[0].get<double>();
          q.y = e[1].get<double>();
          q.n = s.count();
          rep.add(q);
        }
      if (n < 30) throw EnsembleTooSmall("bracket estimator needs >= 30 trajectories");
      break;
    }
    case DiagnosticKind::moment_bound: {
      std::vector<GridFunction> fields;
      const double x0 = -static_cast<double>(c.observation) * c.epsilon;
      const double half = p.value("half_width", static_cast<double>(c.observation) * c.epsilon);
      const auto skip = static_cast<std::size_t>(std::llround((-half - x0) / c.epsilon));
      for (const auto* s : samples) {
        GridFunction g;
        g.dx = c.epsilon;
        g.x0 = x0 + static_cast<double>(skip) * c.epsilon;
        g.v.assign(s->begin() + static_cast<std::ptrdiff_t>(skip), s->end() - static_cast<std::ptrdiff_t>(skip));
        fields.push_back(std::move(g));
      }
      const NormParams np(p.at("alpha").get<double>(), p.at("delta").get<double>(), p.value("p", 0.0),
                          p.value("r_max", 8));
      auto inner = moment_bound_check(fields, np, p.at("C").get<double>(), p.value("stride", std::size_t{1}));
      const bool expect_pass = p.value("expect", std::string("pass")) == "pass";
      rep.metadata.insert(inner.metadata.begin(), inner.metadata.end());
      rep.metadata["expect"] = expect_pass ? "pass" : "fail";
      for (auto q : inner.quantities) {
        q.pass = true;
        q.comparison = "info";
        rep.add(q);
      }
      Quantity v{"bound_holds", inner.pass() ? 1.0 : 0.0, 0.0, expect_pass ? 1.0 : 0.0, "==",
                 inner.pass() == expect_pass};
      v.n = n;
      rep.add(v);
      break;
    }
    case DiagnosticKind::stationarity: {
      const double rho = p.at("rho").get<double>();
      const double k = p.value("k", 3.0);
      RunningStats dens, nn;
      for (const auto* s : samples) {
        dens.push((*s)[0]);
        nn.push((*s)[1]);
      }
      const double t = p.at("t").get<double>();
      auto qd = z_quantity("density", dens, rho, k);
      qd.t = t;
      rep.add(qd);
      auto qn = z_quantity("nn_product", nn, rho * rho, k);
      qn.t = t;
      rep.add(qn);
      const std::size_t sites = samples.front()->size() - 2;
      std::size_t inside = 0;
      for (std::size_t i = 0; i < sites; ++i) {
        RunningStats s;
        for (const auto* v : samples) s.push((*v)[2 + i]);
        const double z = s.se() > 0 ? std::fabs(s.mean() - rho) / s.se() : 0.0;
        inside += z <= k ? 1 : 0;
      }
      const double frac = static_cast<double>(inside) / static_cast<double>(sites);
      const double need = p.value("site_fraction", 0.95);
      Quantity qs{"sites_within_band", frac, 0.0, need, ">=", frac >= need};
      qs.t = t;
      qs.n = n;
      rep.add(qs);
      break;
    }
    case DiagnosticKind::drift: {
      RunningStats s;
      for (const auto* v : samples) s.push((*v)[0]);
      auto q = z_quantity("increment_mean", s, 0.0, p.value("k", 3.0));
      q.t = p.at("t").get<double>();
      q.x = p.value("x", 0.0);
      rep.add(q);
      break;
    }
    case DiagnosticKind::variance: {
      RunningStats s;
      for (const auto* v : samples) s.push((*v)[0]);
      const double t = p.at("t").get<double>();
      const double target = p.at("target").is_number()
                                ? p.at("target").get<double>()
                                : edwards_wilkinson_variance(t, p.value("diffusion", 0.5), p.value("noise", 1.0));
      const double tol = p.at("rel_tol").get<double>();
      const double rel = std::fabs(s.variance() / target - 1.0);
      Quantity qv{"variance", s.variance(), s.variance_se(), target, "rel_err<=" + detail::csv_num(tol), rel <= tol};
      qv.t = t;
      qv.x = p.value("x", 0.0);
      qv.n = n;
      rep.add(qv);
      Quantity qs{"skewness", s.skewness(), s.skewness_se(), 3.0, "|z|<=3",
                  std::fabs(s.skewness()) <= 3.0 * s.skewness_se()};
      qs.t = t;
      qs.n = n;
      rep.add(qs);
      break;
    }
  }
  return rep;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline std::string config_hash(const json& raw) { return detail::hex64(detail::fnv1a64(raw.dump())); }

// --- running -------------------------------------------------------------------

struct RunOptions {
  unsigned threads = 1;  // 0 = hardware concurrency
  bool smoke = false;    // shrink the ensemble to smoke_ensemble (default 32)
};

struct RunResult {
  json manifest;
  std::vector<EstimatorReport> reports;
  bool pass = true;
  double wall_seconds = 0.0;
  std::uint64_t events = 0;
};

// Applies the smoke override to a config document.
inline json smoke_config(json j) {
  const std::int64_t small = j.value("smoke_ensemble", std::int64_t{32});
  j["ensemble"] = std::min<std::int64_t>(j.value("ensemble", std::int64_t{1}), small);
  j["smoke"] = true;
  return j;
}

inline RunResult run_experiment(const json& config_json, const std::filesystem::path& out_dir,
                                const RunOptions& opts = {}) {
  const json doc = opts.smoke ? smoke_config(config_json) : config_json;
  const ExperimentConfig c = parse_config(doc);
  const RateModel model = build_model(c);
  const InitialPlan plan = plan_initial(c);
  const auto start = std::chrono::steady_clock::now();

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "trajectories", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const std::size_t n = c.ensemble;
  std::vector<std::vector<std::vector<double>>> samples(n);
  std::vector<std::uint64_t> events(n, 0);
  std::vector<std::string> recorded(std::min(n, c.record_trajectories));

  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const auto initials = build_initials(c, plan, i);
        const Trajectory tr = simulate_member(c, model, initials, i);
        std::uint64_t ev = 0;
        for (const auto& s : tr.snapshots) ev = std::max(ev, s.event_count);
        events[i] = ev;
        for (const auto& d : c.diagnostics) samples[i].push_back(detail::sample_diagnostic(c, d, tr));
        if (i < recorded.size()) {
          std::ostringstream os;
          write_trajectory_jsonl(os, tr);
          recorded[i] = os.str();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  RunResult result;
  for (std::size_t k = 0; k < c.diagnostics.size(); ++k) {
    std::vector<const std::vector<double>*> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(&samples[i][k]);
    result.reports.push_back(detail::reduce_diagnostic(c, c.diagnostics[k], col));
  }
  result.pass = std::all_of(result.reports.begin(), result.reports.end(),
                            [](const EstimatorReport& r) { return r.pass(); });

  std::vector<std::string> outputs{"verdict.json", "report.csv"};
  for (std::size_t i = 0; i < recorded.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "trajectories/traj_%05zu.jsonl", i);
    detail::write_text(out_dir / name, recorded[i]);
    outputs.push_back(name);
  }
  json verdict{{"name", c.name}, {"pass", result.pass}, {"checks", json::array()}};
  for (const auto& r : result.reports) verdict["checks"].push_back(verdict_json(r));
  detail::write_text(out_dir / "verdict.json", verdict.dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(csv, result.reports);
  detail::write_text(out_dir / "report.csv", csv.str());

  json seeds = json::array();
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(derive_seed(c.seed, i));
  result.manifest = json{{"name", c.name},
                         {"version", kVersion},
                         {"schema_version", kSchemaVersion},
                         {"config_hash", config_hash(c.raw)},
                         {"master_seed", c.seed},
                         {"seed_scheme", "trajectory i: derive_seed(master, i); initial group g: "
                                         "derive_seed(master, i, 1 + g)"},
                         {"seeds", seeds},
                         {"ensemble", n},
                         {"config", c.raw},
                         {"outputs", outputs},
                         {"pass", result.pass}};
  detail::write_text(out_dir / "manifest.json", result.manifest.dump(2) + "\n");

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto e : events) result.events += e;
  json timing{{"wall_seconds", result.wall_seconds},
              {"threads", threads},
              {"events", result.events},
              {"events_per_second", result.wall_seconds > 0 ? result.events / result.wall_seconds : 0.0},
              {"budget_seconds", c.budget_seconds}};
  detail::write_text(out_dir / "timing.json", timing.dump(2) + "\n");
  return result;
}

struct ReplayResult {
  RunResult run;
  bool compared = false;  // original outputs were found next to the manifest
  std::vector<std::string> mismatches;
  bool identical() const { return mismatches.empty(); }
};

// Re-runs the config stored in a manifest into out_dir and compares every
// output (and the manifest) byte for byte with the files next to the
// original manifest.
inline ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                           unsigned threads = 1) {
  json manifest;
  try {
    manifest = json::parse(detail::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what());
  }
  if (!manifest.contains("config")) throw IoError("manifest has no config");
  ReplayResult r;
  r.run = run_experiment(manifest.at("config"), out_dir, RunOptions{threads, false});
  const auto src = manifest_path.parent_path();
  if (std::filesystem::equivalent(std::filesystem::absolute(src), std::filesystem::absolute(out_dir))) return r;
  std::vector<std::string> files = manifest.value("outputs", std::vector<std::string>{});
  files.push_back("manifest.json");
  r.compared = true;
  for (const auto& f : files) {
    if (!std::filesystem::exists(src / f)) {
      r.mismatches.push_back(f + " (missing in original)");
      continue;
    }
    if (detail::read_text(src / f) != detail::read_text(out_dir / f)) r.mismatches.push_back(f);
  }
  return r;
}


// --- scenario catalog ------------------------------------------------------------

struct Scenario {
  std::string name;
  json config;
};

inline std::vector<Scenario> scenario_catalog() {
  static const char* const docs[] = {
      R"({
  "schema_version": 1,
  "name": "theorem-mr",
  "description": "Two deterministic A^eps data with their max/min; ordering and martingale brackets of the Hopf-Cole residual",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.04,
  "window": {"half_width": 68, "boundary": "frozen"},
  "observation_half_width": 40,
  "horizon": 0.008,
  "snapshots": {"micro_every": 0.1},
  "initial": [
    {"kind": "profile", "profile": {"preset": "tanh", "amplitude": 1.0, "width": 1.0}},
    {"kind": "profile", "profile": {"preset": "sin_damped", "amplitude": 1.0, "omega": 2.0, "sigma": 2.0}},
    {"kind": "max", "of": [0, 1]},
    {"kind": "min", "of": [0, 1]}
  ],
  "ensemble": 500,
  "seed": 20240501,
  "diagnostics": [
    {"kind": "ordering", "name": "M_min_max", "order": "M", "lower": 3, "upper": 2},
    {"kind": "ordering", "name": "M_min_tanh", "order": "M", "lower": 3, "upper": 0},
    {"kind": "ordering", "name": "M_tanh_max", "order": "M", "lower": 0, "upper": 2},
    {"kind": "martingale", "name": "brackets", "replica": 0, "probes": [-8, -3, 0, 4, 9],
     "cross": [[0, 1, 0, 0], [-3, 4, 0, 0], [0, 1, 0, 1], [2, -2, 0, 1]],
     "quadratic": [[0, 0, 0, 0], [4, 4, 1, 1]]}
  ],
  "budget_seconds": 900
})",
      R"({
  "schema_version": 1,
  "name": "lemma-lem1",
  "description": "Same-limit pair (A^eps of tanh and of its upper envelope) with max/min envelopes",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.04,
  "window": {"half_width": 184, "boundary": "frozen"},
  "observation_half_width": 50,
  "horizon": 0.05,
  "snapshots": {"every": 0.01},
  "initial": [
    {"kind": "profile", "profile": {"preset": "tanh"}},
    {"kind": "profile", "profile": {"preset": "envelope_upper", "N": 8, "target": {"preset": "tanh"}}},
    {"kind": "max", "of": [0, 1]},
    {"kind": "min", "of": [0, 1]}
  ],
  "ensemble": 200,
  "seed": 20240502,
  "diagnostics": [
    {"kind": "ordering", "name": "M_min_max", "order": "M", "lower": 3, "upper": 2},
    {"kind": "ordering", "name": "M_min_first", "order": "M", "lower": 3, "upper": 0},
    {"kind": "ordering", "name": "M_second_max", "order": "M", "lower": 1, "upper": 2},
    {"kind": "ordering", "name": "M_tanh_envelope", "order": "M", "lower": 0, "upper": 1}
  ],
  "budget_seconds": 300
})",
      R"({
  "schema_version": 1,
  "name": "lemma-lem2",
  "description": "Coupled pair with nondecreasing initial difference on a ring: Q_N decay and residual brackets",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.04,
  "window": {"half_width": 400, "boundary": "periodic"},
  "horizon": 0.5,
  "snapshots": {"micro_every": 0.1, "micro_until": 5},
  "initial": [
    {"kind": "profile", "profile": {"preset": "tanh", "amplitude": -25.0, "width": 6.0}},
    {"kind": "profile", "profile": {"preset": "tanh", "amplitude": 25.0, "width": 6.0}}
  ],
  "ensemble": 300,
  "seed": 20240503,
  "diagnostics": [
    {"kind": "ordering", "name": "difference", "order": "monotone_difference", "lower": 0, "upper": 1},
    {"kind": "qvar", "name": "Q_N", "lower": 0, "upper": 1, "levels": [3, 7], "interval": [-15.5, 15.5],
     "t": 0.5, "max_ratio": 0.5, "decreasing": true},
    {"kind": "martingale", "name": "brackets", "t": 0.008, "replica": 0, "probes": [-100, 0, 100],
     "cross": [[0, 1, 0, 0], [0, 1, 0, 1]], "quadratic": [[0, 0, 0, 0]]}
  ],
  "budget_seconds": 1200
})",
      R"({
  "schema_version": 1,
  "name": "prop-prop",
  "description": "Dominating profile of a tanh / damped-sine pair keeps both differences nondecreasing",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.04,
  "window": {"half_width": 184, "boundary": "frozen"},
  "observation_half_width": 50,
  "horizon": 0.05,
  "snapshots": {"every": 0.01},
  "initial": [
    {"kind": "profile", "profile": {"preset": "tanh"}},
    {"kind": "profile", "profile": {"preset": "dominating", "of": [{"preset": "tanh"}, {"preset": "sin_damped"}]}},
    {"kind": "profile", "profile": {"preset": "sin_damped"}}
  ],
  "ensemble": 200,
  "seed": 20240504,
  "diagnostics": [
    {"kind": "ordering", "name": "difference_tanh", "order": "monotone_difference", "lower": 0, "upper": 1},
    {"kind": "ordering", "name": "difference_sin", "order": "monotone_difference", "lower": 2, "upper": 1}
  ],
  "budget_seconds": 300
})",
      R"({
  "schema_version": 1,
  "name": "theorem-mr2",
  "description": "Bernoulli(1/2) data: weighted Hoelder moment bounds hold at alpha = delta = 1/2 and fail at delta = 0.1",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.015625,
  "window": {"half_width": 544, "boundary": "frozen"},
  "observation_half_width": 512,
  "horizon": 0.001,
  "initial": [
    {"kind": "bernoulli", "rho": 0.5, "group": 0},
    {"kind": "bernoulli", "rho": 0.3, "group": 0}
  ],
  "ensemble": 500,
  "smoke_ensemble": 100,
  "seed": 20240505,
  "diagnostics": [
    {"kind": "moment_bound", "name": "moments_half", "replica": 0, "alpha": 0.5, "delta": 0.5, "p": 3.0,
     "r_max": 6, "C": 1.5, "stride": 4, "expect": "pass"},
    {"kind": "moment_bound", "name": "moments_narrow", "replica": 0, "alpha": 0.5, "delta": 0.1, "p": 3.0,
     "r_max": 6, "C": 1.5, "stride": 4, "expect": "fail"},
    {"kind": "ordering", "name": "A_bernoulli", "order": "A", "lower": 1, "upper": 0}
  ],
  "budget_seconds": 120
})",
      R"({
  "schema_version": 1,
  "name": "stationarity",
  "description": "Periodic ASEP from Bernoulli(1/2): density, nearest-neighbour product and drift-free rescaled height",
  "model": {"type": "asep", "drift": "right"},
  "epsilon": 0.04,
  "window": {"half_width": 128, "boundary": "periodic"},
  "horizon": 1.0,
  "initial": [
    {"kind": "bernoulli", "rho": 0.5}
  ],
  "ensemble": 200,
  "seed": 20240506,
  "diagnostics": [
    {"kind": "stationarity", "name": "stationarity", "replica": 0, "t": 1.0, "rho": 0.5},
    {"kind": "drift", "name": "drift", "replica": 0, "t": 1.0, "x": 0.0}
  ],
  "budget_seconds": 300
})",
      R"({
  "schema_version": 1,
  "name": "asep-qj",
  "description": "ASEP(q,J) with q = 0.9, J = 2 (rates normalized by their maximum) from ordered product data",
  "model": {"type": "asep_qj", "q": 0.9, "J": 2},
  "epsilon": 0.04,
  "window": {"half_width": 200, "boundary": "frozen"},
  "observation_half_width": 50,
  "horizon": 0.02,
  "snapshots": {"every": 0.005},
  "initial": [
    {"kind": "product", "rho": 0.3, "group": 0},
    {"kind": "product", "rho": 0.6, "group": 0},
    {"kind": "max", "of": [0, 1]},
    {"kind": "min", "of": [0, 1]}
  ],
  "ensemble": 200,
  "seed": 20240507,
  "diagnostics": [
    {"kind": "ordering", "name": "A_product", "order": "A", "lower": 0, "upper": 1},
    {"kind": "ordering", "name": "M_min_max", "order": "M", "lower": 3, "upper": 2}
  ],
  "budget_seconds": 300
})",
      R"({
  "schema_version": 1,
  "name": "ssep-ew",
  "description": "SSEP from flat data: rescaled height fluctuation against the Edwards-Wilkinson variance",
  "model": {"type": "ssep"},
  "epsilon": 0.01,
  "window": {"half_width": 400, "boundary": "periodic"},
  "horizon": 1.0,
  "initial": [
    {"kind": "flat"}
  ],
  "ensemble": 1000,
  "seed": 20240508,
  "diagnostics": [
    {"kind": "variance", "name": "ew_variance", "replica": 0, "t": 1.0, "x": 0.0, "target": "ew", "rel_tol": 0.15}
  ],
  "budget_seconds": 1800
})"};
  std::vector<Scenario> out;
  for (const char* d : docs) {
    json j = json::parse(d);
    out.push_back({j.at("name").get<std::string>(), std::move(j)});
  }
  return out;
}

inline std::optional<Scenario> find_scenario(const std::string& name) {
  for (auto& s : scenario_catalog())
    if (s.name == name) return s;
  return std::nullopt;
}

}  // namespace casep
