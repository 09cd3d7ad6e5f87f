#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmflow/flow_model.hpp"
#include "mmflow/network.hpp"
#include "mmflow/occupancy.hpp"
#include "mmflow/rng.hpp"
#include "mmflow/routing.hpp"
#include "mmflow/solver.hpp"
#include "mmflow/transform.hpp"

namespace mmflow {

struct SolverSettings {
  double dx_target_pedestrian = 2.0;  // meters
  double dx_target_vehicle = 10.0;    // meters
  double cfl_factor = 0.9;
  int class_count = 5;
  double theta_close = 0.99;        // edge closes for routing at theta * rho_max
  double routing_interval_s = 5.0;  // routing table rebuilt at least this often
  double transfer_penalty_s = 60.0;
  std::uint64_t seed = 1;
  bool deterministic_transform = false;
  double max_sim_time_s = 0.0;    // 0 = demand end plus one day
  double sample_interval_s = 1.0;
  double done_epsilon = 1e-6;  // termination threshold, fraction of injected mass
};

/// Scripted closure: the edge is removed from routing and its entrance sealed
/// while t is inside [start_s, end_s). Mass already on the edge drains
/// normally, so conservation is unaffected.
struct ScenarioClosure {
  std::string edge;
  double start_s = 0.0;
  double end_s = std::numeric_limits<double>::infinity();
};

struct Scenario {
  std::string name = "scenario";
  Network network;
  FlowParams pedestrian = pedestrian_defaults();
  FlowParams vehicle = vehicle_defaults();
  OccupancyPmf occupancy = OccupancyPmf::rockavaria2015();
  SolverSettings solver;
  std::vector<ScenarioClosure> closures;
};

struct AuditRow {
  double t = 0.0;
  double in_system = 0.0;  // edges + node staging + parking accumulators
  double exited = 0.0;
  double injected = 0.0;  // person ledger: injected subjects +/- transformation reveals
  double residual = 0.0;  // |in_system + exited - injected| / max(1, injected)
};

struct CurvePoint {
  double t = 0.0;
  double entered = 0.0;  // cumulative, subjects in the origin's mode
  double exited = 0.0;   // cumulative, subjects in the destination's mode
};

struct EdgeSnapshot {
  double t = 0.0;
  // Per edge (network order), per cell: [rho_total, rho_class_0, ..., rho_class_K-1],
  // classes summed over commodities.
  std::vector<std::vector<double>> per_edge;
};

struct CommoditySummary {
  std::string commodity;
  double total_entered = 0.0;
  double total_exited = 0.0;
  double mean_travel_time_s = 0.0;
  double p95_travel_time_s = 0.0;
};

struct TransformTotals {
  double cars_consumed = 0.0;
  double persons_from_cars = 0.0;
  double sum_sampled_occupancy = 0.0;
  double cars_formed = 0.0;
  double persons_into_cars = 0.0;
  double flush_persons = 0.0;
  double flush_cars = 0.0;
};

struct RunResults {
  bool truncated = false;
  double end_time = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  long long steps = 0;
  double max_residual = 0.0;
  double total_injected = 0.0;   // subjects put onto the network
  double person_ledger = 0.0;    // injected adjusted by transformation reveals
  double exited_total = 0.0;
  double final_in_system = 0.0;
  double final_backlog = 0.0;
  std::vector<std::string> commodity_ids;
  std::vector<double> injected_by_commodity;
  std::vector<double> exited_by_commodity;
  std::vector<double> backlog_by_commodity;
  TransformTotals transform;
  std::vector<AuditRow> audit;                     // one row per step
  std::vector<std::vector<CurvePoint>> curves;     // [commodity][step]
  std::vector<EdgeSnapshot> edge_samples;          // subsampled density history
  std::vector<CommoditySummary> summary;
  double wall_seconds = 0.0;  // informational; not part of the deterministic bundle
};

using ProgressHook = std::function<void(double sim_time_s, double in_system)>;

/// Owns the full simulation state and advances it step by step. Single
/// ownership, no concurrent external mutation; every per-step reduction runs
/// in id-sorted order so results are bit-reproducible.
class Simulation {
 public:
  explicit Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    const auto report = validate_network(scenario_.network);
    if (!report.empty()) {
      std::string msg = "invalid network:";
      for (const auto& v : report) msg += "\n  " + v.id + ": " + v.message;
      throw std::invalid_argument(msg);
    }
    const Network& net = scenario_.network;
    const SolverSettings& s = scenario_.solver;
    if (net.edges().empty()) throw std::invalid_argument("simulation: network has no edges");
    if (net.commodities().empty()) throw std::invalid_argument("simulation: no commodities");

    classes_ped_ = discretize_classes(scenario_.pedestrian, s.class_count);
    classes_veh_ = discretize_classes(scenario_.vehicle, s.class_count);
    commodity_count_ = static_cast<int>(net.commodities().size());

    for (const Edge& e : net.edges()) {
      const bool ped = e.mode == Mode::pedestrian;
      int cells = e.cell_count;
      if (cells <= 0) {
        const double target = ped ? s.dx_target_pedestrian : s.dx_target_vehicle;
        cells = std::max(1, static_cast<int>(std::lround(e.length / target)));
      }
      states_.emplace_back(e.mode, e.length, cells, e.cross_section(),
                           static_cast<int>(classes(e.mode).size()), commodity_count_);
    }
    dt_ = max_stable_dt(states_, scenario_.pedestrian, scenario_.vehicle, s.cfl_factor);
    routing_rebuild_steps_ = std::max<long long>(
        1, static_cast<long long>(std::floor(s.routing_interval_s / dt_ + 1e-9)));

    const auto& nodes = net.nodes();
    staging_.assign(nodes.size(), {});
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].kind == NodeKind::parking) {
        staging_[i][0].assign(classes_ped_.size() * commodity_count_, 0.0);
        staging_[i][1].assign(classes_veh_.size() * commodity_count_, 0.0);
        buffers_.emplace(i, ParkingBuffer(nodes[i].id, commodity_count_,
                                          RngStream(s.seed, nodes[i].id),
                                          nodes[i].vehicle_store));
      }
    }

    backlog_.assign(commodity_count_, 0.0);
    injected_.assign(commodity_count_, 0.0);
    exited_.assign(commodity_count_, 0.0);
    entered_cum_.assign(commodity_count_, 0.0);
    for (const Commodity& c : net.commodities()) {
      origin_pos_.push_back(net.node_pos(c.origin));
      origin_mode_.push_back(net.node(c.origin).mode_at_entry);
      destination_pos_.push_back(net.node_pos(c.destination));
      total_demand_ += c.total_demand();
      demand_end_ = std::max(demand_end_, c.demand_end());
    }

    results_.dt = dt_;
    results_.seed = s.seed;
    results_.curves.assign(commodity_count_, {});
    for (const Commodity& c : net.commodities()) results_.commodity_ids.push_back(c.id);
    record_edge_sample(0.0);
    next_sample_t_ = s.sample_interval_s;
  }

  double clock() const { return clock_; }
  double dt() const { return dt_; }
  const Scenario& scenario() const { return scenario_; }
  const EdgeState& edge_state(std::size_t i) const { return states_[i]; }
  const EdgeState& edge_state(std::string_view id) const {
    return states_[scenario_.network.edge_pos(id)];
  }
  double backlog_total() const {
    double s = 0.0;
    for (double b : backlog_) s += b;
    return s;
  }
  double in_system_mass() const {
    double s = 0.0;
    for (const EdgeState& e : states_) s += e.total_mass();
    for (const auto& st : staging_)
      for (const auto& side : st)
        for (double v : side) s += v;
    for (const auto& [pos, b] : buffers_) s += b.total_subjects();
    return s;
  }
  double moving_mass() const {  // everything except parking accumulators
    double s = 0.0;
    for (const EdgeState& e : states_) s += e.total_mass();
    for (const auto& st : staging_)
      for (const auto& side : st)
        for (double v : side) s += v;
    return s;
  }
  double buffered_mass() const {
    double s = 0.0;
    for (const auto& [pos, b] : buffers_) s += b.total_subjects();
    return s;
  }
  const RunResults& results() const { return results_; }

  void step() {
    const Network& net = scenario_.network;
    const SolverSettings& cfg = scenario_.solver;
    const double t = clock_;

    // (a) refresh the routing table when due; scripted closures take effect on
    // the step they activate and force an immediate rebuild
    std::set<std::string> forced;
    for (const auto& c : scenario_.closures)
      if (t >= c.start_s && t < c.end_s) forced.insert(c.edge);
    if (step_index_ % routing_rebuild_steps_ == 0 || !table_valid_ || forced != sealed_) {
      weights_ = compute_edge_weights(net, states_, scenario_.pedestrian, scenario_.vehicle,
                                      cfg.theta_close, &forced);
      table_ = RoutingTable::build(net, weights_, {cfg.transfer_penalty_s}, t);
      sealed_ = std::move(forced);
      table_valid_ = true;
    }

    // Pre-step upstream-cell totals; all supply and face velocities are
    // evaluated against the state at the start of the step.
    const std::size_t ne = net.edges().size();
    std::vector<double> cell0_total(ne), supply(ne);
    for (std::size_t g = 0; g < ne; ++g) {
      cell0_total[g] = states_[g].cell_total(0);
      supply[g] = cell0_supply(states_[g], params(states_[g].mode()));
      if (sealed_.count(net.edges()[g].id)) supply[g] = 0.0;
    }

    std::vector<std::vector<double>> inflow(ne), outflow(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      inflow[e].assign(states_[e].slots(), 0.0);
      outflow[e].assign(states_[e].slots(), 0.0);
    }

    // (c) source injection
    inject_sources(t, supply, inflow);

    // (d)+(e) node transfers: gather parcels, apply caps, ration supply
    struct Parcel {
      std::size_t from_edge;      // or SIZE_MAX for a staging drain
      std::size_t node;           // node being passed through
      int k, c;
      Mode mode;
      enum class Target { edge, transform, sink } target;
      std::size_t to_edge = 0;
      double demand = 0.0;
      double granted = 0.0;
    };
    std::vector<Parcel> parcels;

    const auto& nodes = net.nodes();
    for (std::size_t e = 0; e < ne; ++e) {
      const Edge& edge = net.edges()[e];
      const EdgeState& st = states_[e];
      const std::size_t to = net.node_pos(edge.to);
      const Node& node = nodes[to];
      const FlowParams& p = params(edge.mode);
      const auto& cls = classes(edge.mode);
      const int last = st.cell_count() - 1;
      for (int k = 0; k < st.class_count(); ++k) {
        for (int c = 0; c < commodity_count_; ++c) {
          if (st.at(last, k, c) <= 0.0) continue;
          Parcel parcel{e, to, k, c, edge.mode, Parcel::Target::sink, 0, 0.0, 0.0};
          double down_density = 0.0;
          if (node.kind == NodeKind::exit) {
            if (to != destination_pos_[static_cast<std::size_t>(c)]) continue;  // hold: wrong exit
            parcel.target = Parcel::Target::sink;
          } else {
            const NextHop& hop = table_.next(to, static_cast<std::size_t>(c), edge.mode);
            if (hop.kind == NextHop::Kind::unreachable) continue;  // hold on the edge
            if (hop.kind == NextHop::Kind::transform) {
              parcel.target = Parcel::Target::transform;
            } else {
              const std::size_t g = static_cast<std::size_t>(hop.edge_index);
              if (sealed_.count(net.edges()[g].id)) continue;  // scripted closure, hold
              parcel.target = Parcel::Target::edge;
              parcel.to_edge = g;
              down_density = cell0_total[g];
            }
          }
          parcel.demand = face_outflow_mass(st, k, c, p, cls[static_cast<std::size_t>(k)].vff,
                                            down_density, dt_);
          if (parcel.demand > 0.0) parcels.push_back(parcel);
        }
      }
    }

    // Staging drains: transform output waiting at parking nodes enters the
    // network as soon as routing and supply allow.
    for (std::size_t nd = 0; nd < nodes.size(); ++nd) {
      if (nodes[nd].kind != NodeKind::parking) continue;
      for (Mode m : {Mode::pedestrian, Mode::vehicle}) {
        auto& staged = staging_[nd][m == Mode::pedestrian ? 0 : 1];
        if (staged.empty()) continue;
        const int kk = static_cast<int>(classes(m).size());
        for (int k = 0; k < kk; ++k) {
          for (int c = 0; c < commodity_count_; ++c) {
            const double mass = staged[static_cast<std::size_t>(k) * commodity_count_ + c];
            if (mass <= 0.0) continue;
            const NextHop& hop = table_.next(nd, static_cast<std::size_t>(c), m);
            if (hop.kind != NextHop::Kind::edge) continue;  // wait for a route
            const std::size_t g = static_cast<std::size_t>(hop.edge_index);
            if (sealed_.count(net.edges()[g].id)) continue;
            Parcel parcel{SIZE_MAX, nd, k, c, m, Parcel::Target::edge, g, mass, 0.0};
            parcels.push_back(parcel);
          }
        }
      }
    }

    // Proportional rationing, one uniform factor per binding constraint:
    // first the per-(node, mode) flow-rate caps, then receiving-cell supply.
    std::map<std::pair<std::size_t, int>, double> node_load;
    for (const Parcel& p : parcels) {
      if (nodes[p.node].kind == NodeKind::exit) continue;  // exits absorb unconditionally
      node_load[{p.node, p.mode == Mode::pedestrian ? 0 : 1}] += p.demand;
    }
    std::map<std::pair<std::size_t, int>, double> node_scale;
    for (const auto& [key, load] : node_load) {
      const double cap = nodes[key.first].flow_rate(key.second == 0 ? Mode::pedestrian : Mode::vehicle) * dt_;
      node_scale[key] = load > cap ? cap / load : 1.0;
    }
    std::vector<double> edge_load(ne, 0.0);
    for (Parcel& p : parcels) {
      double scale = 1.0;
      if (nodes[p.node].kind != NodeKind::exit)
        scale = node_scale[{p.node, p.mode == Mode::pedestrian ? 0 : 1}];
      p.granted = p.demand * scale;
      if (p.target == Parcel::Target::edge) edge_load[p.to_edge] += p.granted;
    }
    std::vector<double> edge_scale(ne, 1.0);
    for (std::size_t g = 0; g < ne; ++g) {
      if (edge_load[g] > supply[g]) edge_scale[g] = supply[g] > 0.0 ? supply[g] / edge_load[g] : 0.0;
    }

    // Transform intake per parking node.
    std::map<std::size_t, std::vector<double>> transform_ped_in, transform_veh_in;

    for (Parcel& p : parcels) {
      if (p.target == Parcel::Target::edge) p.granted *= edge_scale[p.to_edge];
      if (p.granted <= 0.0) continue;
      const std::size_t slot = static_cast<std::size_t>(p.k) * commodity_count_ + p.c;
      if (p.from_edge == SIZE_MAX) {
        auto& staged = staging_[p.node][p.mode == Mode::pedestrian ? 0 : 1];
        staged[slot] -= p.granted;
        if (staged[slot] < 0.0) staged[slot] = 0.0;
      } else {
        outflow[p.from_edge][slot] += p.granted;
      }
      switch (p.target) {
        case Parcel::Target::edge:
          inflow[p.to_edge][slot] += p.granted;
          break;
        case Parcel::Target::sink:
          exited_[p.c] += p.granted;
          exited_total_ += p.granted;
          break;
        case Parcel::Target::transform: {
          auto& dest = (p.mode == Mode::vehicle) ? transform_veh_in[p.node] : transform_ped_in[p.node];
          if (dest.empty())
            dest.assign(classes(p.mode).size() * static_cast<std::size_t>(commodity_count_), 0.0);
          dest[slot] += p.granted;
          break;
        }
      }
    }

    // (f) transformation at parking nodes
    for (auto& [nd, buffer] : buffers_) {
      const auto vi = transform_veh_in.find(nd);
      const auto pi = transform_ped_in.find(nd);
      const bool has_car = vi != transform_veh_in.end();
      const bool has_ped = pi != transform_ped_in.end();
      if (!has_car && !has_ped && buffer.total_subjects() == 0.0) continue;
      TransformResult res = transform_step(
          buffer, has_car ? std::span<const double>(vi->second) : std::span<const double>{},
          has_ped ? std::span<const double>(pi->second) : std::span<const double>{},
          scenario_.occupancy, classes_ped_, classes_veh_,
          {cfg.deterministic_transform});
      accumulate_transform(nd, res);
    }

    // (g) advance all edges
    for (std::size_t e = 0; e < ne; ++e) {
      apply_edge_step(states_[e], params(states_[e].mode()), classes(states_[e].mode()), dt_,
                      inflow[e], outflow[e]);
    }

    clock_ += dt_;
    ++step_index_;

    // (i) statistics and the global conservation audit
    AuditRow row;
    row.t = clock_;
    row.in_system = in_system_mass();
    row.exited = exited_total_;
    row.injected = person_ledger_;
    row.residual = std::abs(row.in_system + row.exited - row.injected) /
                   std::max(1.0, std::abs(row.injected));
    results_.audit.push_back(row);
    results_.max_residual = std::max(results_.max_residual, row.residual);
    for (int c = 0; c < commodity_count_; ++c)
      results_.curves[static_cast<std::size_t>(c)].push_back({clock_, entered_cum_[c], exited_[c]});
    if (clock_ + 1e-9 >= next_sample_t_) {
      record_edge_sample(clock_);
      while (clock_ + 1e-9 >= next_sample_t_) next_sample_t_ += cfg.sample_interval_s;
    }
  }

  /// Flush stalled parking accumulators (incomplete groups leave as a final
  /// partial car; fractional cars unload at the expected occupancy).
  void flush_parking_buffers() {
    for (auto& [nd, buffer] : buffers_) {
      if (buffer.total_subjects() <= 0.0) continue;
      FlushResult res = flush_buffer(buffer, scenario_.occupancy, classes_ped_, classes_veh_);
      person_ledger_ += res.persons_revealed;
      results_.transform.flush_persons += res.flush_persons;
      results_.transform.flush_cars += res.flush_cars;
      results_.transform.persons_from_cars += res.flush_persons;
      results_.transform.cars_formed += res.flush_cars;
      add_to_staging(nd, res.ped_out, res.car_out);
    }
  }

  /// Run to completion: until all demand is injected and the system has
  /// drained below done_epsilon of the injected mass, or until the simulated
  /// time cap is hit (reported as truncated).
  RunResults run(const ProgressHook& progress = {}) {
    const auto wall_start = std::chrono::steady_clock::now();
    const double max_t = scenario_.solver.max_sim_time_s > 0.0
                             ? scenario_.solver.max_sim_time_s
                             : demand_end_ + 86400.0;
    double next_progress = 60.0;
    bool flushed = false;
    while (true) {
      const double eps = scenario_.solver.done_epsilon * std::max(1.0, total_injected_subjects_);
      const bool all_injected = clock_ >= demand_end_ - 1e-12 && backlog_total() <= eps;
      if (all_injected && in_system_mass() <= eps) break;
      if (clock_ >= max_t) {
        results_.truncated = true;
        break;
      }
      if (all_injected && !flushed && moving_mass() <= eps && buffered_mass() > eps) {
        flush_parking_buffers();
        flushed = true;
      }
      step();
      if (progress && clock_ >= next_progress) {
        progress(clock_, in_system_mass());
        next_progress += 60.0;
      }
    }
    finalize();
    results_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return results_;
  }

 private:
  const FlowParams& params(Mode m) const {
    return m == Mode::pedestrian ? scenario_.pedestrian : scenario_.vehicle;
  }
  const std::vector<VelocityClass>& classes(Mode m) const {
    return m == Mode::pedestrian ? classes_ped_ : classes_veh_;
  }

  void inject_sources(double t, const std::vector<double>& supply,
                      std::vector<std::vector<double>>& inflow) {
    const Network& net = scenario_.network;
    if (entered_cum_.empty()) entered_cum_.assign(commodity_count_, 0.0);
    struct Want {
      int c;
      std::size_t edge;
      double mass;
    };
    std::vector<Want> wants;
    std::map<std::pair<std::size_t, int>, double> entry_load;  // (entry node, mode)
    for (int c = 0; c < commodity_count_; ++c) {
      const Commodity& com = net.commodities()[static_cast<std::size_t>(c)];
      double mass = backlog_[c];
      for (const RateInterval& r : com.demand) {
        const double lo = std::max(r.start_s, t), hi = std::min(r.end_s, t + dt_);
        if (hi > lo) mass += r.rate * (hi - lo);
      }
      backlog_[c] = mass;
      if (mass <= 0.0) continue;
      const NextHop& hop = table_.next(origin_pos_[static_cast<std::size_t>(c)],
                                       static_cast<std::size_t>(c),
                                       origin_mode_[static_cast<std::size_t>(c)]);
      if (hop.kind != NextHop::Kind::edge) continue;  // wait in the backlog
      const std::size_t g = static_cast<std::size_t>(hop.edge_index);
      wants.push_back({c, g, mass});
      entry_load[{origin_pos_[static_cast<std::size_t>(c)],
                  origin_mode_[static_cast<std::size_t>(c)] == Mode::pedestrian ? 0 : 1}] += mass;
    }
    // Entry flow-rate caps, then first-cell supply, each with one factor.
    std::map<std::pair<std::size_t, int>, double> entry_scale;
    for (const auto& [key, load] : entry_load) {
      const double cap =
          scenario_.network.nodes()[key.first].flow_rate(key.second == 0 ? Mode::pedestrian
                                                                         : Mode::vehicle) *
          dt_;
      entry_scale[key] = load > cap ? cap / load : 1.0;
    }
    std::map<std::size_t, double> edge_want;
    for (auto& w : wants) {
      const auto key = std::make_pair(origin_pos_[static_cast<std::size_t>(w.c)],
                                      origin_mode_[static_cast<std::size_t>(w.c)] == Mode::pedestrian ? 0 : 1);
      w.mass *= entry_scale[key];
      edge_want[w.edge] += w.mass;
    }
    for (const auto& w : wants) {
      double scale = 1.0;
      if (edge_want[w.edge] > supply[w.edge])
        scale = supply[w.edge] > 0.0 ? supply[w.edge] / edge_want[w.edge] : 0.0;
      const double granted = w.mass * scale;
      if (granted <= 0.0) continue;
      const Mode m = origin_mode_[static_cast<std::size_t>(w.c)];
      const auto& cls = classes(m);
      for (std::size_t k = 0; k < cls.size(); ++k)
        inflow[w.edge][k * commodity_count_ + static_cast<std::size_t>(w.c)] += granted * cls[k].weight;
      backlog_[w.c] -= granted;
      if (backlog_[w.c] < 0.0) backlog_[w.c] = 0.0;
      injected_[w.c] += granted;
      entered_cum_[w.c] += granted;
      total_injected_subjects_ += granted;
      person_ledger_ += granted;
    }
  }

  void accumulate_transform(std::size_t nd, const TransformResult& res) {
    person_ledger_ += res.persons_revealed;
    results_.transform.cars_consumed += res.cars_consumed;
    results_.transform.persons_from_cars += res.persons_emitted;
    results_.transform.sum_sampled_occupancy += res.sum_sampled_occupancy;
    results_.transform.cars_formed += res.cars_emitted;
    results_.transform.persons_into_cars += res.persons_consumed;
    add_to_staging(nd, res.ped_out, res.car_out);
  }

  void add_to_staging(std::size_t nd, const std::vector<double>& ped_out,
                      const std::vector<double>& car_out) {
    auto& ped_staged = staging_[nd][0];
    auto& veh_staged = staging_[nd][1];
    for (std::size_t j = 0; j < ped_out.size(); ++j) ped_staged[j] += ped_out[j];
    for (std::size_t j = 0; j < car_out.size(); ++j) veh_staged[j] += car_out[j];
  }

  void record_edge_sample(double t) {
    EdgeSnapshot snap;
    snap.t = t;
    snap.per_edge.reserve(states_.size());
    for (const EdgeState& st : states_) {
      std::vector<double> vals;
      vals.reserve(static_cast<std::size_t>(st.cell_count()) * (1 + st.class_count()));
      for (int i = 0; i < st.cell_count(); ++i) {
        vals.push_back(st.cell_total(i));
        for (int k = 0; k < st.class_count(); ++k) {
          double s = 0.0;
          for (int c = 0; c < commodity_count_; ++c) s += st.at(i, k, c);
          vals.push_back(s);
        }
      }
      snap.per_edge.push_back(std::move(vals));
    }
    results_.edge_samples.push_back(std::move(snap));
  }

  void finalize() {
    results_.end_time = clock_;
    results_.steps = step_index_;
    results_.total_injected = total_injected_subjects_;
    results_.person_ledger = person_ledger_;
    results_.exited_total = exited_total_;
    results_.final_in_system = in_system_mass();
    results_.final_backlog = backlog_total();
    results_.injected_by_commodity = injected_;
    results_.exited_by_commodity = exited_;
    results_.backlog_by_commodity = backlog_;
    if (results_.edge_samples.empty() || results_.edge_samples.back().t < clock_ - 1e-9)
      record_edge_sample(clock_);

    // FIFO travel-time statistics from the normalized cumulative curves.
    results_.summary.clear();
    for (int c = 0; c < commodity_count_; ++c) {
      const auto& curve = results_.curves[static_cast<std::size_t>(c)];
      CommoditySummary s;
      s.commodity = results_.commodity_ids[static_cast<std::size_t>(c)];
      s.total_entered = entered_cum_.empty() ? 0.0 : entered_cum_[c];
      s.total_exited = exited_[c];
      if (!curve.empty() && s.total_entered > 0.0 && s.total_exited > 0.0) {
        double area = 0.0;
        for (const auto& pt : curve)
          area += dt_ * (pt.entered / s.total_entered - pt.exited / s.total_exited);
        s.mean_travel_time_s = area;
        auto quantile_time = [&](bool exited_curve, double q) {
          const double target = q * (exited_curve ? s.total_exited : s.total_entered);
          for (const auto& pt : curve) {
            if ((exited_curve ? pt.exited : pt.entered) >= target) return pt.t;
          }
          return curve.back().t;
        };
        s.p95_travel_time_s = quantile_time(true, 0.95) - quantile_time(false, 0.95);
      }
      results_.summary.push_back(std::move(s));
    }
  }

  Scenario scenario_;
  std::vector<VelocityClass> classes_ped_, classes_veh_;
  int commodity_count_ = 0;
  std::vector<EdgeState> states_;
  std::vector<std::array<std::vector<double>, 2>> staging_;  // [node][mode] -> (k, c) mass
  std::map<std::size_t, ParkingBuffer> buffers_;
  std::vector<double> backlog_, injected_, exited_, entered_cum_;
  std::vector<std::size_t> origin_pos_, destination_pos_;
  std::vector<Mode> origin_mode_;
  double total_demand_ = 0.0, demand_end_ = 0.0;
  double total_injected_subjects_ = 0.0, person_ledger_ = 0.0, exited_total_ = 0.0;
  double clock_ = 0.0, dt_ = 0.0;
  long long step_index_ = 0, routing_rebuild_steps_ = 1;
  double next_sample_t_ = 0.0;
  bool table_valid_ = false;
  std::vector<EdgeWeight> weights_;
  RoutingTable table_;
  std::set<std::string> sealed_;
  RunResults results_;
};

/// Convenience wrapper: build, run, return results.
inline RunResults run_scenario(Scenario scenario, const ProgressHook& progress = {}) {
  Simulation sim(std::move(scenario));
  return sim.run(progress);
}

}  // namespace mmflow
