#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmflow/results_io.hpp"
#include "mmflow/scenario.hpp"
#include "mmflow/svg.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmflow;
namespace fs = std::filesystem;

namespace {

const char* kMinimalScenario = R"({
  "name": "minimal",
  "network": {
    "nodes": [
      {"id": "in", "kind": "entry", "mode": "pedestrian", "position": [0, 0]},
      {"id": "out", "kind": "exit", "position": [100, 0]}
    ],
    "edges": [
      {"id": "walk", "from": "in", "to": "out", "mode": "pedestrian", "length": 100, "width": 2}
    ]
  },
  "commodities": [
    {"origin": "in", "destination": "out", "demand": [{"start": 0, "end": 60, "rate": 0.5}]}
  ]
})";

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("mmflow_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal scenario parses with documented defaults") {
  const ParseResult res = parse_scenario(kMinimalScenario);
  REQUIRE(res.ok());
  const Scenario& sc = *res.scenario;
  CHECK(sc.name == "minimal");
  CHECK(sc.network.nodes().size() == 2);
  CHECK(sc.network.edges().size() == 1);
  CHECK(sc.network.commodities().size() == 1);
  CHECK(sc.network.commodities()[0].id == "in->out");
  CHECK(sc.pedestrian.vff_mean == 1.34);
  CHECK(sc.vehicle.vff_mean == 13.9);
  CHECK(sc.solver.cfl_factor == 0.9);
  CHECK(sc.solver.class_count == 5);
  CHECK(sc.solver.theta_close == 0.99);
  CHECK(sc.solver.transfer_penalty_s == 60.0);
  CHECK(sc.occupancy.mean() == 4333.0 / 1960.0);
  CHECK(validate_network(sc.network).empty());
}

TEST_CASE("missing node references are reported with context") {
  std::string text = kMinimalScenario;
  const auto pos = text.find("\"to\": \"out\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("\"to\": \"out\"").size(), "\"to\": \"n99\"");
  const ParseResult res = parse_scenario(text);
  REQUIRE_FALSE(res.ok());
  bool found = false;
  for (const auto& e : res.errors)
    found |= e.message.find("walk") != std::string::npos &&
             e.message.find("n99") != std::string::npos;
  CHECK(found);
}

TEST_CASE("occupancy preset matches the survey table") {
  std::string text = kMinimalScenario;
  text.insert(text.rfind('}'), R"(, "occupancy": "rockavaria2015")");
  const ParseResult res = parse_scenario(text);
  REQUIRE(res.ok());
  const OccupancyPmf& pmf = res.scenario->occupancy;
  CHECK(pmf.probability(1) == 452.0 / 1960.0);
  CHECK(pmf.probability(2) == 979.0 / 1960.0);
  CHECK(pmf.probability(3) == 273.0 / 1960.0);
  CHECK(pmf.probability(4) == 185.0 / 1960.0);
  CHECK(pmf.probability(5) == 62.0 / 1960.0);
  CHECK(pmf.probability(6) == 9.0 / 1960.0);
}

TEST_CASE("syntax errors carry a location") {
  const ParseResult res = parse_scenario("{ not json");
  REQUIRE_FALSE(res.ok());
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].message.find("syntax error") != std::string::npos);
}

TEST_CASE("out-of-range settings are rejected") {
  std::string text = kMinimalScenario;
  text.insert(text.rfind('}'), R"(, "solver": {"cfl_factor": 1.5, "class_count": 0})");
  const ParseResult res = parse_scenario(text);
  REQUIRE_FALSE(res.ok());
  bool cfl = false, classes = false;
  for (const auto& e : res.errors) {
    cfl |= e.where.find("cfl_factor") != std::string::npos;
    classes |= e.where.find("class_count") != std::string::npos;
  }
  CHECK(cfl);
  CHECK(classes);
}

TEST_CASE("every mutated key name fails to parse") {
  using nlohmann::json;
  REQUIRE(parse_scenario(kMinimalScenario).ok());
  // enumerate all object keys with their JSON paths, then corrupt each in turn
  std::vector<std::string> keys;
  std::function<void(const json&)> collect = [&](const json& j) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        keys.push_back(k);
        collect(v);
      }
    } else if (j.is_array()) {
      for (const auto& v : j) collect(v);
    }
  };
  collect(json::parse(kMinimalScenario));
  REQUIRE(keys.size() > 10);
  std::string base = kMinimalScenario;
  int mutations = 0;
  for (const auto& key : keys) {
    const std::string quoted = "\"" + key + "\"";
    const auto pos = base.find(quoted + ":");
    if (pos == std::string::npos) continue;
    std::string mutated = base;
    mutated[pos + 1] = mutated[pos + 1] == 'z' ? 'q' : 'z';  // corrupt the first character
    const ParseResult res = parse_scenario(mutated);
    INFO("mutated key: " << key);
    CHECK_FALSE(res.ok());
    ++mutations;
  }
  CHECK(mutations > 8);
}

TEST_CASE("serialize then parse is semantically identical") {
  const ParseResult first = parse_scenario(kMinimalScenario);
  REQUIRE(first.ok());
  const std::string text1 = serialize_scenario(*first.scenario);
  const ParseResult second = parse_scenario(text1);
  REQUIRE(second.ok());
  const std::string text2 = serialize_scenario(*second.scenario);
  CHECK(text1 == text2);
  CHECK(nlohmann::json::parse(text1) == nlohmann::json::parse(text2));
}

TEST_CASE("hybrid fixture survives a serialize/parse round trip") {
  Scenario sc = fixtures::hybrid_scenario(100.0, 3, false, true);
  const std::string text = serialize_scenario(sc);
  const ParseResult parsed = parse_scenario(text);
  REQUIRE(parsed.ok());
  CHECK(serialize_scenario(*parsed.scenario) == text);
  CHECK(parsed.scenario->network.edges().size() == sc.network.edges().size());
}

TEST_CASE("zero-demand run still writes a valid bundle") {
  Scenario sc = fixtures::corridor_scenario(100.0, 2.0, 0.0, 0.0);
  const RunResults res = run_scenario(sc);
  const fs::path dir = temp_dir("zero");
  write_results(sc, res, dir);
  for (const char* name :
       {"scenario.json", "edges.csv", "curves.csv", "summary.csv", "audit.csv", "run_meta.json"}) {
    CHECK(fs::exists(dir / name));
  }
  const std::string summary = read_file(dir / "summary.csv");
  CHECK(summary.find("commodity,total_persons,mean_travel_time_s,p95_travel_time_s") == 0);
  const std::string audit = read_file(dir / "audit.csv");
  CHECK(audit.find("t_s,persons_in_system") == 0);
  fs::remove_all(dir);
}

TEST_CASE("identical runs produce byte-identical bundles") {
  Scenario sc = fixtures::hybrid_scenario(60.0, 12345, false);
  const RunResults r1 = run_scenario(sc);
  const RunResults r2 = run_scenario(sc);
  const fs::path d1 = temp_dir("det1"), d2 = temp_dir("det2");
  write_results(sc, r1, d1);
  write_results(sc, r2, d2);
  for (const char* name :
       {"scenario.json", "edges.csv", "curves.csv", "summary.csv", "audit.csv", "run_meta.json"}) {
    INFO(name);
    CHECK(read_file(d1 / name) == read_file(d2 / name));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("steady-state densities survive the CSV round trip") {
  const double rate = 1.2;
  Scenario sc = fixtures::corridor_scenario(100.0, 2.0, rate, 700.0);
  sc.solver.max_sim_time_s = 700.0;  // freeze mid-flow
  const RunResults res = run_scenario(sc);
  const fs::path dir = temp_dir("steady");
  write_results(sc, res, dir);
  const LoadedSnapshot snap = load_snapshot(dir, 650.0);
  const double rho_star =
      oracle::steady_density_for_flux(sc.pedestrian, sc.pedestrian.vff_mean, rate / 2.0);
  REQUIRE(snap.edge_mean_density.count("walk"));
  CHECK(snap.edge_mean_density.at("walk") == Catch::Approx(rho_star).epsilon(0.05));
  fs::remove_all(dir);
}

TEST_CASE("snapshot rendering reflects densities and styling") {
  Scenario sc = fixtures::hybrid_scenario(100.0, 5, false, true);
  // empty network: all edges at the green end of the map
  std::map<std::string, double> empty_density;
  const std::string svg0 = render_network_svg(sc, empty_density, 0.0);
  CHECK(svg0.find("stroke=\"rgb(0,170,0)\"") != std::string::npos);   // all edges green
  CHECK(svg0.find("stroke=\"rgb(255,0,0)\"") == std::string::npos);   // nothing jammed
  CHECK(svg0.find("class=\"road\"") != std::string::npos);
  CHECK(svg0.find("class=\"walkway\"") != std::string::npos);
  CHECK(svg0.find("class=\"parking\"") != std::string::npos);
  CHECK(svg0.find("class=\"legend\"") != std::string::npos);

  // a jammed edge renders at the red end
  std::map<std::string, double> jammed{{"r3", vehicle_defaults().rho_max}};
  const std::string svg1 = render_network_svg(sc, jammed, 10.0);
  CHECK(svg1.find("stroke=\"rgb(255,0,0)\"") != std::string::npos);

  // missing positions are an error
  Scenario no_pos = sc;
  std::vector<Node> nodes = no_pos.network.nodes();
  nodes[0].position.reset();
  no_pos.network = Network(std::move(nodes), sc.network.edges(), sc.network.commodities());
  CHECK_THROWS_AS(render_network_svg(no_pos, empty_density, 0.0), std::invalid_argument);
}

TEST_CASE("in-memory snapshot honors the run horizon") {
  Scenario sc = fixtures::corridor_scenario(100.0, 2.0, 0.5, 30.0);
  Simulation sim(sc);
  for (int i = 0; i < 100; ++i) sim.step();
  const std::string svg = render_snapshot(sc, sim.results(), 5.0);
  CHECK(svg.find("<svg") == 0);
  CHECK_THROWS_AS(render_snapshot(sc, sim.results(), 1e9), std::out_of_range);
}
