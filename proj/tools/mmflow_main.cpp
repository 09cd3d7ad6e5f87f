// mmflow command line: validate scenarios, run simulations, render snapshots
// and inspect occupancy distributions.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mmflow/engine.hpp"
#include "mmflow/occupancy.hpp"
#include "mmflow/results_io.hpp"
#include "mmflow/scenario.hpp"
#include "mmflow/svg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;   // validation or parse errors
constexpr int kExitRuntime = 2;   // runtime failure
constexpr int kExitTruncated = 3; // run hit the simulated-time cap

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::stringstream buffer;
  buffer << f.rdbuf();
  return buffer.str();
}

std::optional<mmflow::Scenario> load_scenario(const std::string& path, int& exit_code) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << "\n";
    exit_code = kExitRuntime;
    return std::nullopt;
  }
  mmflow::ParseResult parsed = mmflow::parse_scenario(*text);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) std::cerr << path << ": " << e.where << ": " << e.message << "\n";
    exit_code = kExitInvalid;
    return std::nullopt;
  }
  return std::move(parsed.scenario);
}

int cmd_validate(const std::string& path) {
  int code = kExitOk;
  auto scenario = load_scenario(path, code);
  if (!scenario) return code;
  const auto report = mmflow::validate_network(scenario->network);
  if (!report.empty()) {
    for (const auto& v : report) std::cerr << v.id << ": " << v.message << "\n";
    return kExitInvalid;
  }
  std::cout << "valid: " << scenario->network.nodes().size() << " nodes, "
            << scenario->network.edges().size() << " edges, "
            << scenario->network.commodities().size() << " commodities\n";
  return kExitOk;
}

int cmd_run(const std::string& path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::optional<double> max_sim_time, bool deterministic_transform, bool quiet) {
  int code = kExitOk;
  auto scenario = load_scenario(path, code);
  if (!scenario) return code;
  const auto report = mmflow::validate_network(scenario->network);
  if (!report.empty()) {
    for (const auto& v : report) std::cerr << v.id << ": " << v.message << "\n";
    return kExitInvalid;
  }
  if (seed) scenario->solver.seed = *seed;
  if (max_sim_time) scenario->solver.max_sim_time_s = *max_sim_time;
  if (deterministic_transform) scenario->solver.deterministic_transform = true;
  try {
    mmflow::Simulation sim(*scenario);
    mmflow::ProgressHook progress;
    if (!quiet) {
      progress = [](double t, double in_system) {
        std::cout << "t=" << mmflow::format_number(t) << "s in_system="
                  << mmflow::format_number(in_system) << "\n";
      };
    }
    const mmflow::RunResults results = sim.run(progress);
    mmflow::write_results(*scenario, results, out_dir);
    std::cout << (results.truncated ? "truncated" : "finished") << " at t="
              << mmflow::format_number(results.end_time) << "s after " << results.steps
              << " steps; injected=" << mmflow::format_number(results.total_injected)
              << " exited=" << mmflow::format_number(results.exited_total)
              << " max_residual=" << mmflow::format_number(results.max_residual)
              << " wall=" << mmflow::format_number(results.wall_seconds) << "s\n";
    std::cout << "results written to " << out_dir << "\n";
    return results.truncated ? kExitTruncated : kExitOk;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_snapshot(const std::string& results_dir, double t, const std::string& out_path) {
  try {
    const mmflow::LoadedSnapshot snap = mmflow::load_snapshot(results_dir, t);
    const std::string svg = mmflow::render_network_svg(snap.scenario, snap.edge_mean_density, snap.t);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitRuntime;
    }
    f << svg;
    std::cout << "snapshot of t=" << mmflow::format_number(snap.t) << "s written to " << out_path
              << "\n";
    return kExitOk;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_occupancy(const std::string& preset, long long samples, std::uint64_t seed) {
  mmflow::OccupancyPmf pmf;
  if (preset == "rockavaria2015") {
    pmf = mmflow::OccupancyPmf::rockavaria2015();
  } else {
    std::cerr << "error: unknown preset '" << preset << "' (available: rockavaria2015)\n";
    return kExitInvalid;
  }
  std::cout << "occupancy preset " << preset << "\n";
  for (const auto& e : pmf.entries()) {
    if (pmf.overflow() && e.passengers == pmf.overflow()->second) {
      std::cout << "P(>" << pmf.overflow()->first << ", folded to " << e.passengers << ") = ";
    } else {
      std::cout << "P(" << e.passengers << ") = ";
    }
    if (pmf.exact()) std::cout << e.count << "/" << pmf.total_count() << " = ";
    std::cout << mmflow::format_number(e.probability) << "\n";
  }
  std::cout << "mean = " << mmflow::format_number(pmf.mean()) << " persons/car\n";
  if (samples > 0) {
    mmflow::RngStream rng(seed);
    double sum = 0.0;
    for (long long i = 0; i < samples; ++i) sum += pmf.sample(rng);
    std::cout << "monte carlo mean over " << samples << " draws (seed " << seed
              << ") = " << mmflow::format_number(sum / static_cast<double>(samples)) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"macroscopic multimodal flow simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", results_dir, out_file = "snapshot.svg";
  std::optional<std::uint64_t> seed_override;
  std::optional<double> max_sim_time;
  bool deterministic_transform = false, quiet = false;
  double snapshot_t = 0.0;
  std::string preset = "rockavaria2015";
  long long samples = 0;
  std::uint64_t mc_seed = 1;

  auto* validate = app.add_subcommand("validate", "check a scenario file and its network");
  validate->add_option("scenario", scenario_path, "scenario JSON file")->required();

  auto* run = app.add_subcommand("run", "run a scenario to completion and write result CSVs");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed_override, "override the scenario RNG seed");
  run->add_option("--max-sim-time", max_sim_time, "simulated-time cap in seconds");
  run->add_flag("--deterministic-transform", deterministic_transform,
                "convert at the expected occupancy instead of sampling");
  run->add_flag("--quiet", quiet, "suppress per-minute progress lines");

  auto* snapshot = app.add_subcommand("snapshot", "render an SVG of densities at one time");
  snapshot->add_option("results", results_dir, "results directory from a previous run")->required();
  snapshot->add_option("--t", snapshot_t, "simulated time in seconds")->required();
  snapshot->add_option("--out", out_file, "output SVG path")->required();

  auto* occupancy = app.add_subcommand("occupancy", "print an occupancy distribution");
  occupancy->add_option("--preset", preset, "distribution preset name");
  occupancy->add_option("--samples", samples, "Monte Carlo sample count");
  occupancy->add_option("--seed", mc_seed, "Monte Carlo seed");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(scenario_path);
  if (run->parsed())
    return cmd_run(scenario_path, out_dir, seed_override, max_sim_time, deterministic_transform,
                   quiet);
  if (snapshot->parsed()) return cmd_snapshot(results_dir, snapshot_t, out_file);
  if (occupancy->parsed()) return cmd_occupancy(preset, samples, mc_seed);
  return kExitOk;
}
