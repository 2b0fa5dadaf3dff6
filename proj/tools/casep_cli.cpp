// casep command line: experiments, scenarios, replay and standalone tools.
//
// Exit status: 0 all checks pass (or a smoke run completed), 1 a check
// failed, 2 invalid input or I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "casep/casep.hpp"

using namespace casep;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<std::int64_t> window;
  std::optional<std::int64_t> ensemble;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* app, Common& c, const std::string& default_out) {
  c.out = default_out;
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--epsilon", c.epsilon, "scaling parameter eps");
  app->add_option("--window", c.window, "window half-width L (sites)");
  app->add_option("--ensemble", c.ensemble, "number of trajectories");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

json apply_overrides(json j, const Common& c) {
  if (c.seed) j["seed"] = *c.seed;
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  if (c.window) j["window"]["half_width"] = *c.window;
  if (c.ensemble) j["ensemble"] = *c.ensemble;
  return j;
}

// Frozen windows default to the light-cone size for the horizon plus 50 observed sites.
std::int64_t default_half_width(const std::string& boundary, double horizon, const Common& c) {
  if (boundary != "frozen") return 200;
  const double eps = c.epsilon.value_or(0.04);
  return 50 + static_cast<std::int64_t>(std::ceil(4.0 * horizon / (eps * eps))) + 8;
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void print_summary(const RunResult& r, const fs::path& out) {
  for (const auto& rep : r.reports) std::printf("%-28s %s\n", rep.name.c_str(), rep.pass() ? "PASS" : "FAIL");
  std::printf("%s: %s (%.1f s, %llu events) -> %s\n", r.manifest.value("name", std::string()).c_str(),
              r.pass ? "PASS" : "FAIL", r.wall_seconds, static_cast<unsigned long long>(r.events),
              out.string().c_str());
}

int run_config(const json& j, const Common& c, bool smoke) {
  const auto r = run_experiment(apply_overrides(j, c), c.out, RunOptions{c.threads, smoke});
  print_summary(r, c.out);
  if (smoke) return 0;
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled exclusion processes under KPZ rescaling"};
  app.require_subcommand(1);

  Common run_c, scen_c, sim_c, cpl_c;

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment config (JSON)");
  run->add_option("config", config_path, "config file")->required();
  bool run_smoke = false;
  run->add_flag("--smoke", run_smoke, "reduced ensemble, exit 0 on completion");
  add_common(run, run_c, "out/run");

  std::string scen_name;
  bool smoke = false, list = false;
  std::string export_dir;
  auto* scen = app.add_subcommand("scenario", "run a catalog scenario");
  scen->add_option("name", scen_name, "scenario name");
  scen->add_flag("--smoke", smoke, "reduced ensemble, exit 0 on completion");
  scen->add_flag("--list", list, "list the catalog");
  scen->add_option("--export", export_dir, "write every scenario config into a directory");
  add_common(scen, scen_c, "");

  std::string manifest_path, replay_out = "out/replay";
  unsigned replay_threads = 1;
  auto* rep = app.add_subcommand("replay", "re-run a manifest and compare outputs byte for byte");
  rep->add_option("manifest", manifest_path, "manifest.json")->required();
  rep->add_option("--out", replay_out, "output directory");
  rep->add_option("--threads", replay_threads, "worker threads (0 = all cores)");

  std::string sim_model = "asep", sim_init = "bernoulli";
  double sim_rho = 0.5, sim_horizon = 0.1;
  std::string sim_boundary = "periodic";
  auto* sim = app.add_subcommand("simulate", "evolve one replica and record trajectories");
  sim->add_option("--model", sim_model, "asep or ssep");
  sim->add_option("--init", sim_init, "bernoulli or flat");
  sim->add_option("--rho", sim_rho, "Bernoulli density");
  sim->add_option("--horizon", sim_horizon, "macroscopic horizon");
  sim->add_option("--boundary", sim_boundary, "frozen or periodic");
  add_common(sim, sim_c, "out/simulate");

  double rho_lo = 0.3, rho_hi = 0.6, cpl_horizon = 0.1;
  std::string cpl_boundary = "periodic";
  auto* cpl = app.add_subcommand("couple", "evolve an ordered Bernoulli pair under the basic coupling");
  cpl->add_option("--rho-low", rho_lo, "lower density");
  cpl->add_option("--rho-high", rho_hi, "upper density");
  cpl->add_option("--horizon", cpl_horizon, "macroscopic horizon");
  cpl->add_option("--boundary", cpl_boundary, "frozen or periodic");
  add_common(cpl, cpl_c, "out/couple");

  std::string traj_path, diag_out = "out/diagnose";
  auto* diag = app.add_subcommand("diagnose", "ordering checks on a recorded trajectory");
  diag->add_option("trajectory", traj_path, "trajectory JSONL")->required();
  diag->add_option("--out", diag_out, "output directory");

  std::string preset = "tanh";
  double ap_eps = 0.04;
  std::int64_t ap_window = 100;
  std::string ap_out;
  auto* ap = app.add_subcommand("approx", "run A^eps on a preset profile and print the height snapshot");
  ap->add_option("--profile", preset, "zero, tanh, sin_damped or sin");
  ap->add_option("--epsilon", ap_eps, "eps");
  ap->add_option("--window", ap_window, "height window half-width (sites)");
  ap->add_option("--out", ap_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_config(read_json(config_path), run_c, run_smoke);

    if (*scen) {
      if (list) {
        for (const auto& s : scenario_catalog())
          std::printf("%-14s %s\n", s.name.c_str(), s.config.value("description", std::string()).c_str());
        return 0;
      }
      if (!export_dir.empty()) {
        fs::create_directories(export_dir);
        for (const auto& s : scenario_catalog()) {
          std::ofstream os(fs::path(export_dir) / (s.name + ".json"));
          os << s.config.dump(2) << "\n";
          if (!os) throw IoError("cannot write " + export_dir);
        }
        return 0;
      }
      const auto s = find_scenario(scen_name);
      if (!s) {
        std::fprintf(stderr, "unknown scenario '%s' (see --list)\n", scen_name.c_str());
        return 2;
      }
      if (scen_c.out.empty()) scen_c.out = "out/" + s->name;
      return run_config(s->config, scen_c, smoke);
    }

    if (*rep) {
      const auto r = replay(manifest_path, replay_out, replay_threads);
      print_summary(r.run, replay_out);
      if (!r.compared) {
        std::printf("replay: original outputs not compared (same directory)\n");
        return 0;
      }
      for (const auto& m : r.mismatches) std::printf("replay mismatch: %s\n", m.c_str());
      std::printf("replay: %s\n", r.identical() ? "byte-identical" : "DIFFERS");
      return r.identical() ? 0 : 1;
    }

    if (*sim) {
      json init = sim_init == "flat" ? json{{"kind", "flat"}} : json{{"kind", "bernoulli"}, {"rho", sim_rho}};
      json j{{"schema_version", kSchemaVersion},
             {"name", "simulate"},
             {"model", {{"type", sim_model}}},
             {"epsilon", 0.04},
             {"window", {{"half_width", default_half_width(sim_boundary, sim_horizon, sim_c)},
                         {"boundary", sim_boundary}}},
             {"horizon", sim_horizon},
             {"initial", json::array({init})},
             {"ensemble", 1},
             {"seed", 1}};
      return run_config(j, sim_c, false);
    }

    if (*cpl) {
      json j{{"schema_version", kSchemaVersion},
             {"name", "couple"},
             {"model", {{"type", "asep"}}},
             {"epsilon", 0.04},
             {"window", {{"half_width", default_half_width(cpl_boundary, cpl_horizon, cpl_c)},
                         {"boundary", cpl_boundary}}},
             {"horizon", cpl_horizon},
             {"snapshots", {{"every", cpl_horizon / 10}}},
             {"initial", json::array({json{{"kind", "bernoulli"}, {"rho", rho_lo}, {"group", 0}},
                                      json{{"kind", "bernoulli"}, {"rho", rho_hi}, {"group", 0}}})},
             {"ensemble", 1},
             {"seed", 1},
             {"diagnostics", json::array({json{{"kind", "ordering"}, {"order", "A"}},
                                          json{{"kind", "ordering"}, {"order", "monotone_difference"}}})}};
      return run_config(j, cpl_c, false);
    }

    if (*diag) {
      const auto tr = read_trajectory_jsonl(traj_path);
      std::vector<EstimatorReport> reports;
      const std::size_t k = tr.snapshots.empty() ? 0 : tr.snapshots.front().size();
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
          if (a == b) continue;
          for (auto kind : {OrderingKind::M, OrderingKind::A, OrderingKind::monotone_difference}) {
            if (detail::ordering_violation(tr.snapshots.front(), kind, a, b)) continue;
            auto r = ordering_check(tr, kind, a, b);
            r.name += "_" + std::to_string(a) + "_" + std::to_string(b);
            reports.push_back(std::move(r));
          }
        }
      fs::create_directories(diag_out);
      json verdict{{"pass", true}, {"checks", json::array()}};
      for (const auto& r : reports) {
        verdict["checks"].push_back(verdict_json(r));
        if (!r.pass()) verdict["pass"] = false;
        std::printf("%-32s %s\n", r.name.c_str(), r.pass() ? "PASS" : "FAIL");
      }
      std::ofstream(fs::path(diag_out) / "verdict.json") << verdict.dump(2) << "\n";
      std::ofstream csv(fs::path(diag_out) / "report.csv");
      write_report_csv(csv, reports);
      return verdict["pass"].get<bool>() ? 0 : 1;
    }

    if (*ap) {
      json spec{{"preset", preset}};
      const auto f = build_profile(spec, "profile");
      const auto h = approx_viable(f, ap_eps, Window{-ap_window, ap_window});
      const std::string text = snapshot_json(h, 0.0).dump() + "\n";
      if (ap_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream os(ap_out);
        os << text;
        if (!os) throw IoError("cannot write " + ap_out);
      }
      return 0;
    }
  } catch (const ConfigInvalid& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
