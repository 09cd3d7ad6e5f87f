#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmflow/engine.hpp"
#include "mmflow/scenario.hpp"

namespace mmflow {

/// Shortest round-trip decimal representation; locale-free and deterministic.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t settings_hash(const Scenario& sc) {
  return RngStream::fnv1a(serialize_scenario(sc));
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

/// Write the full result bundle: scenario.json (resolved copy), edges.csv,
/// curves.csv, summary.csv, audit.csv and run_meta.json. All of these are
/// byte-deterministic for a given (scenario, seed); wall-clock timing goes to
/// timing.txt, which is informational only.
inline void write_results(const Scenario& sc, const RunResults& results,
                          const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string scenario_text = serialize_scenario(sc);
  const std::string run_id = hex64(RngStream::fnv1a(scenario_text) ^ (results.seed * 0x9e3779b97f4a7c15ull));

  {
    std::ofstream f(out_dir / "scenario.json", std::ios::binary);
    f << scenario_text;
  }

  {
    std::ofstream f(out_dir / "edges.csv", std::ios::binary);
    const int classes = sc.solver.class_count;
    f << "t_s,edge_id,cell_index,rho_total";
    for (int k = 0; k < classes; ++k) f << ",rho_class_" << k;
    f << "\n";
    const auto& edges = sc.network.edges();
    for (const EdgeSnapshot& snap : results.edge_samples) {
      for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& vals = snap.per_edge[e];
        const std::size_t stride = 1 + static_cast<std::size_t>(classes);
        const std::size_t cells = vals.size() / stride;
        for (std::size_t i = 0; i < cells; ++i) {
          f << format_number(snap.t) << ',' << edges[e].id << ',' << i;
          for (std::size_t j = 0; j < stride; ++j) f << ',' << format_number(vals[i * stride + j]);
          f << "\n";
        }
      }
    }
  }

  {
    std::ofstream f(out_dir / "curves.csv", std::ios::binary);
    f << "t_s,commodity,cum_entered,cum_exited\n";
    // Subsample the per-step curves on the configured interval plus the final point.
    for (std::size_t c = 0; c < results.curves.size(); ++c) {
      const auto& curve = results.curves[c];
      double next_t = 0.0;
      for (std::size_t i = 0; i < curve.size(); ++i) {
        const bool last = i + 1 == curve.size();
        if (curve[i].t + 1e-9 >= next_t || last) {
          f << format_number(curve[i].t) << ',' << results.commodity_ids[c] << ','
            << format_number(curve[i].entered) << ',' << format_number(curve[i].exited) << "\n";
          while (curve[i].t + 1e-9 >= next_t) next_t += sc.solver.sample_interval_s;
        }
      }
    }
  }

  {
    std::ofstream f(out_dir / "summary.csv", std::ios::binary);
    f << "commodity,total_persons,mean_travel_time_s,p95_travel_time_s\n";
    for (const CommoditySummary& s : results.summary) {
      f << s.commodity << ',' << format_number(s.total_exited) << ','
        << format_number(s.mean_travel_time_s) << ',' << format_number(s.p95_travel_time_s)
        << "\n";
    }
  }

  {
    std::ofstream f(out_dir / "audit.csv", std::ios::binary);
    f << "t_s,persons_in_system,persons_exited,persons_injected,residual\n";
    for (const AuditRow& row : results.audit) {
      f << format_number(row.t) << ',' << format_number(row.in_system) << ','
        << format_number(row.exited) << ',' << format_number(row.injected) << ','
        << format_number(row.residual) << "\n";
    }
  }

  {
    nlohmann::json meta;
    meta["run_id"] = run_id;
    meta["settings_hash"] = hex64(settings_hash(sc));
    meta["seed"] = results.seed;
    meta["dt_s"] = results.dt;
    meta["steps"] = results.steps;
    meta["simulated_time_s"] = results.end_time;
    meta["truncated"] = results.truncated;
    meta["total_injected"] = results.total_injected;
    meta["person_ledger"] = results.person_ledger;
    meta["exited_total"] = results.exited_total;
    meta["final_in_system"] = results.final_in_system;
    meta["final_backlog"] = results.final_backlog;
    meta["max_audit_residual"] = results.max_residual;
    meta["transform"] = {{"cars_consumed", results.transform.cars_consumed},
                         {"persons_from_cars", results.transform.persons_from_cars},
                         {"sum_sampled_occupancy", results.transform.sum_sampled_occupancy},
                         {"cars_formed", results.transform.cars_formed},
                         {"persons_into_cars", results.transform.persons_into_cars},
                         {"flush_persons", results.transform.flush_persons},
                         {"flush_cars", results.transform.flush_cars}};
    std::ofstream f(out_dir / "run_meta.json", std::ios::binary);
    f << meta.dump(2) << "\n";
  }

  {
    std::ofstream f(out_dir / "timing.txt", std::ios::binary);
    f << "wall_seconds=" << format_number(results.wall_seconds) << "\n";
  }
}

/// What the snapshot renderer needs from a results directory.
struct LoadedSnapshot {
  Scenario scenario;
  double t = 0.0;                                  // sample time actually used
  std::map<std::string, double> edge_mean_density; // edge id -> rho_avg at t
};

/// Load the sample closest to `t` from a results directory written by
/// write_results. Throws when t lies outside the recorded horizon.
inline LoadedSnapshot load_snapshot(const std::filesystem::path& dir, double t) {
  namespace fs = std::filesystem;
  std::ifstream sf(dir / "scenario.json", std::ios::binary);
  if (!sf) throw std::runtime_error("cannot open " + (dir / "scenario.json").string());
  std::stringstream buffer;
  buffer << sf.rdbuf();
  ParseResult parsed = parse_scenario(buffer.str());
  if (!parsed.ok()) throw std::runtime_error("results directory holds an invalid scenario.json");

  std::ifstream ef(dir / "edges.csv", std::ios::binary);
  if (!ef) throw std::runtime_error("cannot open " + (dir / "edges.csv").string());
  std::string line;
  std::getline(ef, line);  // header
  // Pass 1: pick the recorded sample time closest to the request.
  double best_t = 0.0, best_gap = std::numeric_limits<double>::infinity();
  double min_t = std::numeric_limits<double>::infinity(), max_t = -min_t;
  while (std::getline(ef, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    const double row_t = std::stod(line.substr(0, comma));
    min_t = std::min(min_t, row_t);
    max_t = std::max(max_t, row_t);
    const double gap = std::abs(row_t - t);
    if (gap < best_gap) {
      best_gap = gap;
      best_t = row_t;
    }
  }
  if (!std::isfinite(min_t)) throw std::runtime_error("edges.csv holds no samples");
  if (t < min_t - 1e-9 || t > max_t + 1e-9)
    throw std::out_of_range("t=" + format_number(t) + " outside recorded horizon [" +
                            format_number(min_t) + ", " + format_number(max_t) + "]");

  LoadedSnapshot snap;
  snap.scenario = std::move(*parsed.scenario);
  snap.t = best_t;
  std::map<std::string, std::pair<double, long>> acc;
  ef.clear();
  ef.seekg(0);
  std::getline(ef, line);
  while (std::getline(ef, line)) {
    std::istringstream row(line);
    std::string t_field, edge_field, cell_field, rho_field;
    std::getline(row, t_field, ',');
    std::getline(row, edge_field, ',');
    std::getline(row, cell_field, ',');
    std::getline(row, rho_field, ',');
    if (std::stod(t_field) != best_t) continue;
    auto& slot = acc[edge_field];
    slot.first += std::stod(rho_field);
    slot.second += 1;
  }
  for (const auto& [edge, sum_count] : acc)
    snap.edge_mean_density[edge] = sum_count.first / sum_count.second;
  return snap;
}

}  // namespace mmflow
