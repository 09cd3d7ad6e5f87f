#pragma once

// Shared scenario builders for the test suites.

#include <string>
#include <vector>

#include "mmflow/engine.hpp"
#include "mmflow/network.hpp"

namespace fixtures {

using namespace mmflow;

// Two car entries feeding a road junction, one parking lot bridging to a
// walkway subgraph, one pedestrian exit. With `with_detour`, an alternative
// (longer) road j1 -> a1 -> p1 exists next to the direct j1 -> p1 road.
inline Network hybrid_network(bool with_detour = false) {
  std::vector<Node> nodes;
  Node e1{"e1", NodeKind::entry};
  e1.mode_at_entry = Mode::vehicle;
  e1.position = {{0.0, 300.0}};
  Node e2{"e2", NodeKind::entry};
  e2.mode_at_entry = Mode::vehicle;
  e2.position = {{0.0, 0.0}};
  Node j1{"j1", NodeKind::junction};
  j1.position = {{200.0, 150.0}};
  Node p1{"p1", NodeKind::parking};
  p1.flow_rate_vehicle = 2.0;
  p1.flow_rate_pedestrian = 6.0;
  p1.position = {{500.0, 150.0}};
  Node w1{"w1", NodeKind::junction};
  w1.position = {{650.0, 150.0}};
  Node x1{"x1", NodeKind::exit};
  x1.position = {{800.0, 150.0}};
  nodes = {e1, e2, j1, p1, w1, x1};

  std::vector<Edge> edges;
  edges.push_back({"r1", "e1", "j1", Mode::vehicle, 250.0, 0.0, 1, 0});
  edges.push_back({"r2", "e2", "j1", Mode::vehicle, 250.0, 0.0, 1, 0});
  edges.push_back({"r3", "j1", "p1", Mode::vehicle, 300.0, 0.0, 2, 0});
  edges.push_back({"f1", "p1", "w1", Mode::pedestrian, 150.0, 4.0, 0, 0});
  edges.push_back({"f2", "w1", "x1", Mode::pedestrian, 150.0, 4.0, 0, 0});
  if (with_detour) {
    Node a1{"a1", NodeKind::junction};
    a1.position = {{350.0, 40.0}};
    nodes.push_back(a1);
    edges.push_back({"r4", "j1", "a1", Mode::vehicle, 200.0, 0.0, 1, 0});
    edges.push_back({"r5", "a1", "p1", Mode::vehicle, 200.0, 0.0, 1, 0});
  }

  std::vector<Commodity> commodities;
  commodities.push_back({"c1", "e1", "x1", {}});
  commodities.push_back({"c2", "e2", "x1", {}});
  return Network(std::move(nodes), std::move(edges), std::move(commodities));
}

// The hybrid network with `total_cars` of demand split over both entries.
inline Scenario hybrid_scenario(double total_cars, std::uint64_t seed,
                                bool deterministic_transform, bool with_detour = false) {
  Scenario sc;
  sc.name = "hybrid";
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  Network base = hybrid_network(with_detour);
  std::vector<Commodity> commodities = base.commodities();
  const double rate = 0.5;  // cars/s per entry
  const double horizon = (total_cars / 2.0) / rate;
  for (auto& c : commodities) c.demand = {{0.0, horizon, rate}};
  sc.network = Network(base.nodes(), base.edges(), std::move(commodities));
  sc.solver.seed = seed;
  sc.solver.deterministic_transform = deterministic_transform;
  sc.solver.max_sim_time_s = 3.0 * 3600.0;
  return sc;
}

// Single pedestrian corridor entry -> exit.
inline Scenario corridor_scenario(double length, double width, double rate, double demand_end,
                                  int class_count = 1) {
  Scenario sc;
  sc.name = "corridor";
  Node in{"in", NodeKind::entry};
  in.mode_at_entry = Mode::pedestrian;
  in.position = {{0.0, 0.0}};
  Node out{"out", NodeKind::exit};
  out.position = {{length, 0.0}};
  Edge walk{"walk", "in", "out", Mode::pedestrian, length, width, 0, 0};
  Commodity c{"c", "in", "out", {{0.0, demand_end, rate}}};
  sc.network = Network({in, out}, {walk}, {c});
  sc.pedestrian.vff_std = 0.0;  // single velocity class by default
  sc.solver.class_count = class_count;
  sc.solver.max_sim_time_s = 4.0 * 3600.0;
  return sc;
}

}  // namespace fixtures
