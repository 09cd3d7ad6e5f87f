#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmflow/engine.hpp"

namespace mmflow {

struct ParseError {
  std::string where;    // JSON path of the offending element
  std::string message;
};

struct ParseResult {
  std::optional<Scenario> scenario;
  std::vector<ParseError> errors;
  bool ok() const { return scenario.has_value() && errors.empty(); }
};

namespace scenario_detail {

using nlohmann::json;

class Parser {
 public:
  ParseResult run(std::string_view text) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& ex) {
      errors_.push_back({"$", std::string("syntax error: ") + ex.what()});
      return {{}, std::move(errors_)};
    }
    Scenario sc = parse_document(doc);
    if (!errors_.empty()) return {{}, std::move(errors_)};
    return {std::move(sc), {}};
  }

 private:
  std::vector<ParseError> errors_;

  void error(const std::string& where, const std::string& message) {
    errors_.push_back({where, message});
  }

  void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) error(where + "." + key, "unknown key");
    }
  }

  double number(const json& obj, const std::string& where, const std::string& key,
                double fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) error(where, "missing required key '" + key + "'");
      return fallback;
    }
    if (!obj[key].is_number()) {
      error(where + "." + key, "expected a number");
      return fallback;
    }
    return obj[key].get<double>();
  }

  int integer(const json& obj, const std::string& where, const std::string& key, int fallback,
              bool required = false) {
    if (!obj.contains(key)) {
      if (required) error(where, "missing required key '" + key + "'");
      return fallback;
    }
    if (!obj[key].is_number_integer()) {
      error(where + "." + key, "expected an integer");
      return fallback;
    }
    return obj[key].get<int>();
  }

  std::string text(const json& obj, const std::string& where, const std::string& key,
                   const std::string& fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) error(where, "missing required key '" + key + "'");
      return fallback;
    }
    if (!obj[key].is_string()) {
      error(where + "." + key, "expected a string");
      return fallback;
    }
    return obj[key].get<std::string>();
  }

  Scenario parse_document(const json& doc) {
    Scenario sc;
    if (!doc.is_object()) {
      error("$", "top level must be an object");
      return sc;
    }
    check_keys(doc, "$",
               {"name", "network", "commodities", "flow", "occupancy", "solver", "closures"});
    sc.name = text(doc, "$", "name", "scenario");

    std::vector<Node> nodes;
    std::vector<Edge> edges;
    if (!doc.contains("network") || !doc["network"].is_object()) {
      error("$", "missing required object 'network'");
    } else {
      const json& net = doc["network"];
      check_keys(net, "network", {"nodes", "edges"});
      if (net.contains("nodes") && net["nodes"].is_array()) {
        int i = 0;
        for (const json& jn : net["nodes"]) nodes.push_back(parse_node(jn, "network.nodes[" + std::to_string(i++) + "]"));
      } else {
        error("network", "missing required array 'nodes'");
      }
      if (net.contains("edges") && net["edges"].is_array()) {
        int i = 0;
        for (const json& je : net["edges"]) edges.push_back(parse_edge(je, "network.edges[" + std::to_string(i++) + "]"));
      } else {
        error("network", "missing required array 'edges'");
      }
    }

    std::vector<Commodity> commodities;
    if (doc.contains("commodities") && doc["commodities"].is_array()) {
      int i = 0;
      for (const json& jc : doc["commodities"])
        commodities.push_back(parse_commodity(jc, "commodities[" + std::to_string(i++) + "]"));
    } else {
      error("$", "missing required array 'commodities'");
    }

    // cross references
    std::set<std::string> node_ids;
    for (const Node& n : nodes) node_ids.insert(n.id);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Edge& e = edges[i];
      const std::string where = "network.edges[" + std::to_string(i) + "]";
      if (!e.from.empty() && !node_ids.count(e.from))
        error(where, "edge '" + e.id + "' references missing node '" + e.from + "'");
      if (!e.to.empty() && !node_ids.count(e.to))
        error(where, "edge '" + e.id + "' references missing node '" + e.to + "'");
    }
    for (std::size_t i = 0; i < commodities.size(); ++i) {
      const Commodity& c = commodities[i];
      const std::string where = "commodities[" + std::to_string(i) + "]";
      if (!c.origin.empty() && !node_ids.count(c.origin))
        error(where, "commodity references missing node '" + c.origin + "'");
      if (!c.destination.empty() && !node_ids.count(c.destination))
        error(where, "commodity references missing node '" + c.destination + "'");
    }

    sc.network = Network(std::move(nodes), std::move(edges), std::move(commodities));

    if (doc.contains("flow")) {
      if (!doc["flow"].is_object()) {
        error("flow", "expected an object");
      } else {
        check_keys(doc["flow"], "flow", {"pedestrian", "vehicle"});
        if (doc["flow"].contains("pedestrian"))
          sc.pedestrian = parse_flow(doc["flow"]["pedestrian"], "flow.pedestrian",
                                     pedestrian_defaults(), "pedestrian_default");
        if (doc["flow"].contains("vehicle"))
          sc.vehicle = parse_flow(doc["flow"]["vehicle"], "flow.vehicle", vehicle_defaults(),
                                  "vehicle_default");
      }
    }
    if (doc.contains("occupancy")) sc.occupancy = parse_occupancy(doc["occupancy"], "occupancy");
    if (doc.contains("solver")) parse_solver(doc["solver"], "solver", sc.solver);
    if (doc.contains("closures")) {
      if (!doc["closures"].is_array()) {
        error("closures", "expected an array");
      } else {
        int i = 0;
        for (const json& jc : doc["closures"]) {
          const std::string where = "closures[" + std::to_string(i++) + "]";
          if (!jc.is_object()) {
            error(where, "expected an object");
            continue;
          }
          check_keys(jc, where, {"edge", "start", "end"});
          ScenarioClosure c;
          c.edge = text(jc, where, "edge", "", true);
          c.start_s = number(jc, where, "start", 0.0);
          c.end_s = number(jc, where, "end", std::numeric_limits<double>::infinity());
          if (!sc.network.find_edge(c.edge))
            error(where, "closure references missing edge '" + c.edge + "'");
          sc.closures.push_back(std::move(c));
        }
      }
    }
    return sc;
  }

  Node parse_node(const json& jn, const std::string& where) {
    Node n;
    if (!jn.is_object()) {
      error(where, "expected an object");
      return n;
    }
    check_keys(jn, where,
               {"id", "kind", "mode", "flow_rate", "vehicle_store", "position"});
    n.id = text(jn, where, "id", "", true);
    const std::string kind = text(jn, where, "kind", "junction");
    if (kind == "entry") {
      n.kind = NodeKind::entry;
    } else if (kind == "exit") {
      n.kind = NodeKind::exit;
    } else if (kind == "parking") {
      n.kind = NodeKind::parking;
    } else if (kind == "junction") {
      n.kind = NodeKind::junction;
    } else {
      error(where + ".kind", "unknown node kind '" + kind + "'");
    }
    if (jn.contains("mode")) {
      const std::string mode = text(jn, where, "mode", "");
      if (mode == "pedestrian") {
        n.mode_at_entry = Mode::pedestrian;
      } else if (mode == "vehicle") {
        n.mode_at_entry = Mode::vehicle;
      } else {
        error(where + ".mode", "unknown mode '" + mode + "'");
      }
    } else if (n.kind == NodeKind::entry) {
      error(where, "entry node needs 'mode'");
    }
    if (jn.contains("flow_rate")) {
      const json& fr = jn["flow_rate"];
      if (fr.is_number()) {
        n.flow_rate_pedestrian = fr.get<double>();
        n.flow_rate_vehicle = fr.get<double>();
      } else if (fr.is_object()) {
        check_keys(fr, where + ".flow_rate", {"pedestrian", "vehicle"});
        if (fr.contains("pedestrian")) n.flow_rate_pedestrian = number(fr, where + ".flow_rate", "pedestrian", 0.0);
        if (fr.contains("vehicle")) n.flow_rate_vehicle = number(fr, where + ".flow_rate", "vehicle", 0.0);
      } else {
        error(where + ".flow_rate", "expected a number or {pedestrian, vehicle}");
      }
      if ((n.flow_rate_pedestrian && *n.flow_rate_pedestrian < 0.0) ||
          (n.flow_rate_vehicle && *n.flow_rate_vehicle < 0.0))
        error(where + ".flow_rate", "flow rate must be >= 0");
    }
    if (jn.contains("vehicle_store")) {
      const double v = number(jn, where, "vehicle_store", 0.0);
      if (v < 0.0) error(where + ".vehicle_store", "must be >= 0");
      n.vehicle_store = v;
    }
    if (jn.contains("position")) {
      const json& p = jn["position"];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        error(where + ".position", "expected [x, y]");
      } else {
        n.position = {{p[0].get<double>(), p[1].get<double>()}};
      }
    }
    return n;
  }

  Edge parse_edge(const json& je, const std::string& where) {
    Edge e;
    if (!je.is_object()) {
      error(where, "expected an object");
      return e;
    }
    check_keys(je, where, {"id", "from", "to", "mode", "length", "width", "lanes", "cells"});
    e.id = text(je, where, "id", "", true);
    e.from = text(je, where, "from", "", true);
    e.to = text(je, where, "to", "", true);
    const std::string mode = text(je, where, "mode", "", true);
    if (mode == "pedestrian") {
      e.mode = Mode::pedestrian;
    } else if (mode == "vehicle") {
      e.mode = Mode::vehicle;
    } else if (!mode.empty()) {
      error(where + ".mode", "unknown mode '" + mode + "'");
    }
    e.length = number(je, where, "length", 0.0, true);
    if (e.mode == Mode::pedestrian) {
      if (je.contains("lanes")) error(where + ".lanes", "pedestrian edges take 'width', not 'lanes'");
      e.width = number(je, where, "width", 0.0, true);
    } else {
      if (je.contains("width")) error(where + ".width", "vehicle edges take 'lanes', not 'width'");
      e.lane_count = integer(je, where, "lanes", 0, true);
    }
    e.cell_count = integer(je, where, "cells", 0);
    if (e.cell_count < 0) error(where + ".cells", "must be >= 1 (or omitted for automatic)");
    return e;
  }

  Commodity parse_commodity(const json& jc, const std::string& where) {
    Commodity c;
    if (!jc.is_object()) {
      error(where, "expected an object");
      return c;
    }
    check_keys(jc, where, {"id", "origin", "destination", "demand"});
    c.id = text(jc, where, "id", "");
    c.origin = text(jc, where, "origin", "", true);
    c.destination = text(jc, where, "destination", "", true);
    if (jc.contains("demand")) {
      if (!jc["demand"].is_array()) {
        error(where + ".demand", "expected an array");
      } else {
        int i = 0;
        for (const json& jr : jc["demand"]) {
          const std::string rw = where + ".demand[" + std::to_string(i++) + "]";
          if (!jr.is_object()) {
            error(rw, "expected an object");
            continue;
          }
          check_keys(jr, rw, {"start", "end", "rate"});
          RateInterval r;
          r.start_s = number(jr, rw, "start", 0.0, true);
          r.end_s = number(jr, rw, "end", 0.0, true);
          r.rate = number(jr, rw, "rate", 0.0, true);
          if (r.rate < 0.0) error(rw + ".rate", "must be >= 0");
          if (r.end_s < r.start_s) error(rw, "end before start");
          c.demand.push_back(r);
        }
        std::sort(c.demand.begin(), c.demand.end(),
                  [](const RateInterval& a, const RateInterval& b) { return a.start_s < b.start_s; });
      }
    }
    return c;
  }

  FlowParams parse_flow(const json& jf, const std::string& where, const FlowParams& defaults,
                        const std::string& preset_name) {
    if (jf.is_string()) {
      const std::string name = jf.get<std::string>();
      if (name == preset_name) return defaults;
      if (name == "pedestrian_default") return pedestrian_defaults();
      if (name == "vehicle_default") return vehicle_defaults();
      error(where, "unknown flow profile '" + name + "'");
      return defaults;
    }
    if (!jf.is_object()) {
      error(where, "expected a profile name or an object");
      return defaults;
    }
    check_keys(jf, where, {"gamma", "rho_max", "vff_mean", "vff_std", "vff_max"});
    FlowParams p;
    p.gamma = number(jf, where, "gamma", defaults.gamma, true);
    p.rho_max = number(jf, where, "rho_max", defaults.rho_max, true);
    p.vff_mean = number(jf, where, "vff_mean", defaults.vff_mean, true);
    p.vff_std = number(jf, where, "vff_std", defaults.vff_std, true);
    p.vff_max = number(jf, where, "vff_max", defaults.vff_max, true);
    if (!(p.gamma > 0.0)) error(where + ".gamma", "must be > 0");
    if (!(p.rho_max > 0.0)) error(where + ".rho_max", "must be > 0");
    if (!(p.vff_mean > 0.0)) error(where + ".vff_mean", "must be > 0");
    if (p.vff_std < 0.0) error(where + ".vff_std", "must be >= 0");
    if (!(p.vff_max >= p.vff_mean)) error(where + ".vff_max", "must be >= vff_mean");
    return p;
  }

  OccupancyPmf parse_occupancy(const json& jo, const std::string& where) {
    if (jo.is_string()) {
      const std::string name = jo.get<std::string>();
      if (name == "rockavaria2015") return OccupancyPmf::rockavaria2015();
      error(where, "unknown occupancy preset '" + name + "'");
      return OccupancyPmf::rockavaria2015();
    }
    if (!jo.is_object()) {
      error(where, "expected a preset name or an object");
      return OccupancyPmf::rockavaria2015();
    }
    check_keys(jo, where, {"counts", "overflow_value", "overflow_count", "probabilities"});
    try {
      if (jo.contains("counts")) {
        if (jo.contains("probabilities")) error(where, "give either counts or probabilities");
        std::vector<std::pair<int, long long>> counts;
        for (const json& pair : jo["counts"]) {
          if (!pair.is_array() || pair.size() != 2) {
            error(where + ".counts", "expected [passengers, count] pairs");
            continue;
          }
          counts.emplace_back(pair[0].get<int>(), pair[1].get<long long>());
        }
        const int overflow_value = integer(jo, where, "overflow_value", 6);
        const long long overflow_count =
            static_cast<long long>(number(jo, where, "overflow_count", 0.0));
        return OccupancyPmf::from_counts(std::move(counts), overflow_value, overflow_count);
      }
      if (jo.contains("probabilities")) {
        std::vector<std::pair<int, double>> probs;
        for (const json& pair : jo["probabilities"]) {
          if (!pair.is_array() || pair.size() != 2) {
            error(where + ".probabilities", "expected [passengers, probability] pairs");
            continue;
          }
          probs.emplace_back(pair[0].get<int>(), pair[1].get<double>());
        }
        return OccupancyPmf::from_probabilities(std::move(probs));
      }
      error(where, "expected counts or probabilities");
    } catch (const std::exception& ex) {
      error(where, ex.what());
    }
    return OccupancyPmf::rockavaria2015();
  }

  void parse_solver(const json& js, const std::string& where, SolverSettings& s) {
    if (!js.is_object()) {
      error(where, "expected an object");
      return;
    }
    check_keys(js, where,
               {"dx_target_pedestrian", "dx_target_vehicle", "cfl_factor", "class_count",
                "theta_close", "routing_interval_s", "transfer_penalty_s", "seed",
                "deterministic_transform", "max_sim_time_s", "sample_interval_s", "done_epsilon"});
    s.dx_target_pedestrian = number(js, where, "dx_target_pedestrian", s.dx_target_pedestrian);
    s.dx_target_vehicle = number(js, where, "dx_target_vehicle", s.dx_target_vehicle);
    s.cfl_factor = number(js, where, "cfl_factor", s.cfl_factor);
    s.class_count = integer(js, where, "class_count", s.class_count);
    s.theta_close = number(js, where, "theta_close", s.theta_close);
    s.routing_interval_s = number(js, where, "routing_interval_s", s.routing_interval_s);
    s.transfer_penalty_s = number(js, where, "transfer_penalty_s", s.transfer_penalty_s);
    if (js.contains("seed")) {
      if (!js["seed"].is_number_unsigned() && !js["seed"].is_number_integer()) {
        error(where + ".seed", "expected an integer");
      } else {
        s.seed = js["seed"].get<std::uint64_t>();
      }
    }
    if (js.contains("deterministic_transform")) {
      if (!js["deterministic_transform"].is_boolean()) {
        error(where + ".deterministic_transform", "expected a boolean");
      } else {
        s.deterministic_transform = js["deterministic_transform"].get<bool>();
      }
    }
    s.max_sim_time_s = number(js, where, "max_sim_time_s", s.max_sim_time_s);
    s.sample_interval_s = number(js, where, "sample_interval_s", s.sample_interval_s);
    s.done_epsilon = number(js, where, "done_epsilon", s.done_epsilon);

    if (!(s.dx_target_pedestrian > 0.0)) error(where + ".dx_target_pedestrian", "must be > 0");
    if (!(s.dx_target_vehicle > 0.0)) error(where + ".dx_target_vehicle", "must be > 0");
    if (!(s.cfl_factor > 0.0) || s.cfl_factor > 1.0) error(where + ".cfl_factor", "must be in (0, 1]");
    if (s.class_count < 1) error(where + ".class_count", "must be >= 1");
    if (!(s.theta_close > 0.0) || s.theta_close > 1.0) error(where + ".theta_close", "must be in (0, 1]");
    if (!(s.routing_interval_s > 0.0)) error(where + ".routing_interval_s", "must be > 0");
    if (s.transfer_penalty_s < 0.0) error(where + ".transfer_penalty_s", "must be >= 0");
    if (s.max_sim_time_s < 0.0) error(where + ".max_sim_time_s", "must be >= 0");
    if (!(s.sample_interval_s > 0.0)) error(where + ".sample_interval_s", "must be > 0");
    if (!(s.done_epsilon > 0.0)) error(where + ".done_epsilon", "must be > 0");
  }
};

}  // namespace scenario_detail

/// Strict scenario parsing: either a fully resolved scenario or the complete
/// list of syntax and semantic errors with their locations. Unknown keys are
/// rejected, never silently ignored.
inline ParseResult parse_scenario(std::string_view text) {
  scenario_detail::Parser parser;
  return parser.run(text);
}

/// Canonical JSON for a scenario; parse(serialize(parse(x))) is semantically
/// identical to parse(x) and serializes to identical bytes.
inline std::string serialize_scenario(const Scenario& sc) {
  using nlohmann::json;
  json doc;
  doc["name"] = sc.name;
  json nodes = json::array();
  for (const Node& n : sc.network.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = to_string(n.kind);
    if (n.kind == NodeKind::entry) jn["mode"] = to_string(n.mode_at_entry);
    if (n.flow_rate_pedestrian || n.flow_rate_vehicle) {
      json fr;
      if (n.flow_rate_pedestrian) fr["pedestrian"] = *n.flow_rate_pedestrian;
      if (n.flow_rate_vehicle) fr["vehicle"] = *n.flow_rate_vehicle;
      jn["flow_rate"] = fr;
    }
    if (n.vehicle_store) jn["vehicle_store"] = *n.vehicle_store;
    if (n.position) jn["position"] = {(*n.position)[0], (*n.position)[1]};
    nodes.push_back(jn);
  }
  json edges = json::array();
  for (const Edge& e : sc.network.edges()) {
    json je;
    je["id"] = e.id;
    je["from"] = e.from;
    je["to"] = e.to;
    je["mode"] = to_string(e.mode);
    je["length"] = e.length;
    if (e.mode == Mode::pedestrian) {
      je["width"] = e.width;
    } else {
      je["lanes"] = e.lane_count;
    }
    if (e.cell_count > 0) je["cells"] = e.cell_count;
    edges.push_back(je);
  }
  doc["network"] = {{"nodes", nodes}, {"edges", edges}};
  json commodities = json::array();
  for (const Commodity& c : sc.network.commodities()) {
    json jc;
    jc["id"] = c.id;
    jc["origin"] = c.origin;
    jc["destination"] = c.destination;
    json demand = json::array();
    for (const RateInterval& r : c.demand)
      demand.push_back({{"start", r.start_s}, {"end", r.end_s}, {"rate", r.rate}});
    jc["demand"] = demand;
    commodities.push_back(jc);
  }
  doc["commodities"] = commodities;
  auto flow_json = [](const FlowParams& p) {
    return json{{"gamma", p.gamma},
                {"rho_max", p.rho_max},
                {"vff_mean", p.vff_mean},
                {"vff_std", p.vff_std},
                {"vff_max", p.vff_max}};
  };
  doc["flow"] = {{"pedestrian", flow_json(sc.pedestrian)}, {"vehicle", flow_json(sc.vehicle)}};
  if (sc.occupancy.exact()) {
    json counts = json::array();
    for (const auto& e : sc.occupancy.entries()) counts.push_back({e.passengers, e.count});
    doc["occupancy"] = {{"counts", counts}};
  } else {
    json probs = json::array();
    for (const auto& e : sc.occupancy.entries()) probs.push_back({e.passengers, e.probability});
    doc["occupancy"] = {{"probabilities", probs}};
  }
  const SolverSettings& s = sc.solver;
  doc["solver"] = {{"dx_target_pedestrian", s.dx_target_pedestrian},
                   {"dx_target_vehicle", s.dx_target_vehicle},
                   {"cfl_factor", s.cfl_factor},
                   {"class_count", s.class_count},
                   {"theta_close", s.theta_close},
                   {"routing_interval_s", s.routing_interval_s},
                   {"transfer_penalty_s", s.transfer_penalty_s},
                   {"seed", s.seed},
                   {"deterministic_transform", s.deterministic_transform},
                   {"max_sim_time_s", s.max_sim_time_s},
                   {"sample_interval_s", s.sample_interval_s},
                   {"done_epsilon", s.done_epsilon}};
  if (!sc.closures.empty()) {
    json closures = json::array();
    for (const auto& c : sc.closures) {
      json jc{{"edge", c.edge}, {"start", c.start_s}};
      if (std::isfinite(c.end_s)) jc["end"] = c.end_s;
      closures.push_back(jc);
    }
    doc["closures"] = closures;
  }
  return doc.dump(2) + "\n";
}

}  // namespace mmflow
