#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmflow/flow_model.hpp"
#include "mmflow/network.hpp"
#include "mmflow/solver.hpp"

namespace mmflow {

/// Travel-time weight of one edge under current congestion. `closed` edges are
/// ignored by the routing algorithm entirely.
struct EdgeWeight {
  double seconds = 0.0;
  bool closed = false;
};

/// weight = length / v(vff, rho_avg) with rho_avg the edge-average total
/// density. Returns nullopt (closed) once rho_avg >= theta_close * rho_max.
inline std::optional<double> edge_weight(const Edge& edge, const EdgeState& state,
                                         const FlowParams& p, double vff, double theta_close) {
  if (!(theta_close > 0.0) || theta_close > 1.0)
    throw std::invalid_argument("edge_weight: theta_close outside (0, 1]");
  const double rho_avg = state.average_total_density();
  if (rho_avg >= theta_close * p.rho_max) return std::nullopt;
  return edge.length / velocity(p, vff, clamp_density(p, rho_avg));
}

/// Weights for every edge, aligned with network.edges() order. Routes use the
/// mode's vff_mean; per-class weights would be a common positive scaling
/// inside one mode and therefore pick the same paths. `forced_closed` adds
/// scripted closures on top of the density rule.
inline std::vector<EdgeWeight> compute_edge_weights(const Network& net,
                                                    std::span<const EdgeState> states,
                                                    const FlowParams& pedestrian,
                                                    const FlowParams& vehicle, double theta_close,
                                                    const std::set<std::string>* forced_closed = nullptr) {
  const auto& edges = net.edges();
  std::vector<EdgeWeight> out(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const FlowParams& p = edges[i].mode == Mode::pedestrian ? pedestrian : vehicle;
    const auto w = edge_weight(edges[i], states[i], p, p.vff_mean, theta_close);
    if (!w || (forced_closed && forced_closed->count(edges[i].id))) {
      out[i] = {0.0, true};
    } else {
      out[i] = {*w, false};
    }
  }
  return out;
}

/// Exactly the edges whose average total density has reached
/// theta_close * rho_max.
inline std::set<std::string> closed_edges(const Network& net, std::span<const EdgeState> states,
                                          const FlowParams& pedestrian, const FlowParams& vehicle,
                                          double theta_close) {
  std::set<std::string> out;
  const auto& edges = net.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const FlowParams& p = edges[i].mode == Mode::pedestrian ? pedestrian : vehicle;
    if (!edge_weight(edges[i], states[i], p, p.vff_mean, theta_close)) out.insert(edges[i].id);
  }
  return out;
}

struct RoutingOptions {
  double transfer_penalty_s = 60.0;  // added per mode change at a parking node
};

namespace detail {

inline int mode_ix(Mode m) { return m == Mode::pedestrian ? 0 : 1; }

}  // namespace detail

/// Shortest travel-time path over the mode-layered graph: Dijkstra over
/// (node, mode) states, where closed edges are removed and mode changes are
/// possible only at parking nodes (costing the transfer penalty). Ties in
/// total weight break toward the lexicographically smallest edge-id sequence.
/// Returns the edge-id sequence, or nullopt when no open path exists.
inline std::optional<std::vector<std::string>> shortest_time_route(
    const Network& net, const std::vector<EdgeWeight>& weights, const std::string& origin,
    const std::string& destination, Mode start_mode, const RoutingOptions& opt = {}) {
  const std::size_t start = net.node_pos(origin);          // throws on unknown id
  const std::size_t goal = net.node_pos(destination);      // throws on unknown id
  const std::size_t n = net.nodes().size();

  const auto& edges = net.edges();
  auto lex_less = [&edges](const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(
        a.begin(), a.end(), b.begin(), b.end(),
        [&edges](int x, int y) { return edges[x].id < edges[y].id; });
  };
  struct Entry {
    double dist;
    std::vector<int> path;
    std::size_t node;
    int mode;
  };
  auto worse = [&lex_less](const Entry& a, const Entry& b) {
    if (a.dist != b.dist) return a.dist > b.dist;
    return lex_less(b.path, a.path);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> queue(worse);
  std::vector<std::array<bool, 2>> settled(n, {false, false});

  queue.push({0.0, {}, start, detail::mode_ix(start_mode)});
  while (!queue.empty()) {
    Entry cur = queue.top();
    queue.pop();
    if (settled[cur.node][cur.mode]) continue;
    settled[cur.node][cur.mode] = true;
    if (cur.node == goal) {
      std::vector<std::string> ids;
      ids.reserve(cur.path.size());
      for (int e : cur.path) ids.push_back(edges[e].id);
      return ids;
    }
    const Node& node = net.nodes()[cur.node];
    if (node.kind == NodeKind::parking) {
      const int om = 1 - cur.mode;
      if (!settled[cur.node][om])
        queue.push({cur.dist + opt.transfer_penalty_s, cur.path, cur.node, om});
    }
    for (std::size_t ei : net.outgoing_of(cur.node)) {
      const Edge& e = edges[ei];
      if (detail::mode_ix(e.mode) != cur.mode || weights[ei].closed) continue;
      const std::size_t to = net.node_pos(e.to);
      if (settled[to][cur.mode]) continue;
      Entry next{cur.dist + weights[ei].seconds, cur.path, to, cur.mode};
      next.path.push_back(static_cast<int>(ei));
      queue.push(std::move(next));
    }
  }
  return std::nullopt;
}

/// What a parcel sitting at a node should do next.
struct NextHop {
  enum class Kind { edge, transform, unreachable };
  Kind kind = Kind::unreachable;
  int edge_index = -1;  // valid when kind == edge
};

/// Per-(node, commodity, mode) next-hop table, rebuilt periodically from the
/// current edge weights. Built by one reverse Dijkstra per commodity over the
/// mode-layered graph; following next pointers is cycle-free on the open
/// subgraph.
class RoutingTable {
 public:
  static RoutingTable build(const Network& net, const std::vector<EdgeWeight>& weights,
                            const RoutingOptions& opt, double computed_at) {
    RoutingTable table;
    table.computed_at_ = computed_at;
    const std::size_t n = net.nodes().size();
    const auto& edges = net.edges();
    const auto& commodities = net.commodities();
    table.next_.assign(commodities.size(), std::vector<std::array<NextHop, 2>>(n));
    table.dist_.assign(commodities.size(),
                       std::vector<std::array<double, 2>>(
                           n, {std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity()}));

    for (std::size_t ci = 0; ci < commodities.size(); ++ci) {
      const Node* dest = net.find_node(commodities[ci].destination);
      if (!dest) continue;
      auto& dist = table.dist_[ci];
      const std::size_t goal = net.node_pos(dest->id);

      // Reverse Dijkstra from the destination (both mode layers are goals).
      using QEntry = std::pair<double, std::pair<std::size_t, int>>;
      std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> queue;
      dist[goal][0] = dist[goal][1] = 0.0;
      queue.push({0.0, {goal, 0}});
      queue.push({0.0, {goal, 1}});
      std::vector<std::array<bool, 2>> done(n, {false, false});
      while (!queue.empty()) {
        auto [d, nm] = queue.top();
        queue.pop();
        auto [v, m] = nm;
        if (done[v][m]) continue;
        done[v][m] = true;
        // Relax reverse edge arcs: u --e--> v means dist(u) <= w(e) + dist(v).
        for (std::size_t ei : net.incoming_of(v)) {
          const Edge& e = edges[ei];
          if (detail::mode_ix(e.mode) != m || weights[ei].closed) continue;
          const std::size_t u = net.node_pos(e.from);
          if (d + weights[ei].seconds < dist[u][m]) {
            dist[u][m] = d + weights[ei].seconds;
            queue.push({dist[u][m], {u, m}});
          }
        }
        // Reverse transfer arc at parking nodes.
        if (net.nodes()[v].kind == NodeKind::parking) {
          const int om = 1 - m;
          if (d + opt.transfer_penalty_s < dist[v][om]) {
            dist[v][om] = d + opt.transfer_penalty_s;
            queue.push({dist[v][om], {v, om}});
          }
        }
      }

      // Next hop per (node, mode): best open option by cost; ties prefer a
      // real edge over a transfer, then the smallest edge id.
      for (std::size_t v = 0; v < n; ++v) {
        for (int m = 0; m < 2; ++m) {
          NextHop hop;
          if (v == goal) {
            table.next_[ci][v][m] = hop;  // at destination, nothing to do
            continue;
          }
          double best = std::numeric_limits<double>::infinity();
          int best_edge = -1;
          for (std::size_t ei : net.outgoing_of(v)) {
            const Edge& e = edges[ei];
            if (detail::mode_ix(e.mode) != m || weights[ei].closed) continue;
            const double cand = weights[ei].seconds + dist[net.node_pos(e.to)][m];
            if (cand < best ||
                (cand == best && best_edge >= 0 && e.id < edges[best_edge].id)) {
              best = cand;
              best_edge = static_cast<int>(ei);
            }
          }
          bool transfer = false;
          if (net.nodes()[v].kind == NodeKind::parking) {
            const double cand = opt.transfer_penalty_s + dist[v][1 - m];
            if (cand < best) {
              best = cand;
              transfer = true;
            }
          }
          if (best == std::numeric_limits<double>::infinity()) {
            hop.kind = NextHop::Kind::unreachable;
          } else if (transfer) {
            hop.kind = NextHop::Kind::transform;
          } else {
            hop.kind = NextHop::Kind::edge;
            hop.edge_index = best_edge;
          }
          table.next_[ci][v][m] = hop;
        }
      }
    }
    return table;
  }

  const NextHop& next(std::size_t node_pos, std::size_t commodity, Mode mode) const {
    return next_[commodity][node_pos][detail::mode_ix(mode)];
  }
  double distance(std::size_t node_pos, std::size_t commodity, Mode mode) const {
    return dist_[commodity][node_pos][detail::mode_ix(mode)];
  }
  double computed_at() const { return computed_at_; }

 private:
  double computed_at_ = 0.0;
  std::vector<std::vector<std::array<NextHop, 2>>> next_;    // [commodity][node][mode]
  std::vector<std::vector<std::array<double, 2>>> dist_;     // [commodity][node][mode]
};

}  // namespace mmflow
