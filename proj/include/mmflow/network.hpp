#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmflow {

enum class Mode { pedestrian, vehicle };
enum class NodeKind { entry, exit, parking, junction };

inline Mode other_mode(Mode m) { return m == Mode::pedestrian ? Mode::vehicle : Mode::pedestrian; }

inline const char* to_string(Mode m) { return m == Mode::pedestrian ? "pedestrian" : "vehicle"; }

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::entry: return "entry";
    case NodeKind::exit: return "exit";
    case NodeKind::parking: return "parking";
    default: return "junction";
  }
}

struct Node {
  std::string id;
  NodeKind kind = NodeKind::junction;
  Mode mode_at_entry = Mode::pedestrian;  // entry nodes only: what the source emits
  std::optional<double> flow_rate_pedestrian;  // persons/s through the node
  std::optional<double> flow_rate_vehicle;     // vehicles/s through the node
  std::optional<double> vehicle_store;  // parking only: cars initially available for group emission
  std::optional<std::array<double, 2>> position;  // display only

  /// Throughput cap for subjects of mode m. Parking lots default to
  /// 1 vehicle/s and 2 persons/s; every other kind is unlimited unless set.
  double flow_rate(Mode m) const {
    const auto& v = (m == Mode::pedestrian) ? flow_rate_pedestrian : flow_rate_vehicle;
    if (v) return *v;
    if (kind == NodeKind::parking) return m == Mode::pedestrian ? 2.0 : 1.0;
    return std::numeric_limits<double>::infinity();
  }
};

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  Mode mode = Mode::pedestrian;
  double length = 0.0;  // meters
  double width = 0.0;   // meters, pedestrian edges only
  int lane_count = 0;   // vehicle edges only
  int cell_count = 0;   // 0 = derive from the solver's dx target

  /// Width in meters for walkways, lane count for roads. Cell mass is
  /// density * dx * cross_section.
  double cross_section() const {
    return mode == Mode::pedestrian ? width : static_cast<double>(lane_count);
  }
};

struct RateInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double rate = 0.0;  // subjects/s in the origin's mode
};

/// An (origin entry, destination exit) demand class whose mass is routed and
/// accounted separately.
struct Commodity {
  std::string id;  // defaults to "origin->destination"
  std::string origin;
  std::string destination;
  std::vector<RateInterval> demand;

  double total_demand() const {
    double m = 0.0;
    for (const auto& r : demand) m += r.rate * (r.end_s - r.start_s);
    return m;
  }
  double demand_end() const {
    double t = 0.0;
    for (const auto& r : demand) t = std::max(t, r.end_s);
    return t;
  }
};

struct Violation {
  std::string id;       // offending element (node, edge or commodity id)
  std::string message;
};
using ValidationReport = std::vector<Violation>;

enum class Direction { incoming, outgoing };

/// Typed multimodal graph. Nodes and edges are stored sorted by id; the
/// object is treated as immutable once validated.
class Network {
 public:
  Network() = default;
  Network(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<Commodity> commodities)
      : nodes_(std::move(nodes)), edges_(std::move(edges)), commodities_(std::move(commodities)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) { return a.id < b.id; });
    for (auto& c : commodities_) {
      if (c.id.empty()) c.id = c.origin + "->" + c.destination;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) node_index_.emplace(nodes_[i].id, i);
    for (std::size_t i = 0; i < edges_.size(); ++i) edge_index_.emplace(edges_[i].id, i);
    incoming_.resize(nodes_.size());
    outgoing_.resize(nodes_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (auto* n = find_node(edges_[i].from)) outgoing_[node_pos(n->id)].push_back(i);
      if (auto* n = find_node(edges_[i].to)) incoming_[node_pos(n->id)].push_back(i);
    }
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Commodity>& commodities() const { return commodities_; }

  const Node* find_node(std::string_view id) const {
    auto it = node_index_.find(std::string(id));
    return it == node_index_.end() ? nullptr : &nodes_[it->second];
  }
  const Edge* find_edge(std::string_view id) const {
    auto it = edge_index_.find(std::string(id));
    return it == edge_index_.end() ? nullptr : &edges_[it->second];
  }
  const Node& node(std::string_view id) const {
    const Node* n = find_node(id);
    if (!n) throw std::out_of_range("unknown node id: " + std::string(id));
    return *n;
  }
  const Edge& edge(std::string_view id) const {
    const Edge* e = find_edge(id);
    if (!e) throw std::out_of_range("unknown edge id: " + std::string(id));
    return *e;
  }
  std::size_t node_pos(std::string_view id) const {
    auto it = node_index_.find(std::string(id));
    if (it == node_index_.end()) throw std::out_of_range("unknown node id: " + std::string(id));
    return it->second;
  }
  std::size_t edge_pos(std::string_view id) const {
    auto it = edge_index_.find(std::string(id));
    if (it == edge_index_.end()) throw std::out_of_range("unknown edge id: " + std::string(id));
    return it->second;
  }

  /// Edges adjacent to a node, filtered by direction and optionally by mode,
  /// sorted by edge id. Throws on an unknown node id.
  std::vector<const Edge*> adjacent_edges(std::string_view node_id, Direction dir,
                                          std::optional<Mode> mode = std::nullopt) const {
    const std::size_t pos = node_pos(node_id);
    const auto& idx = (dir == Direction::incoming) ? incoming_[pos] : outgoing_[pos];
    std::vector<const Edge*> out;
    for (std::size_t i : idx) {
      if (!mode || edges_[i].mode == *mode) out.push_back(&edges_[i]);
    }
    return out;  // edges_ is sorted by id, so idx order is id order
  }

  const std::vector<std::size_t>& incoming_of(std::size_t node_pos) const { return incoming_[node_pos]; }
  const std::vector<std::size_t>& outgoing_of(std::size_t node_pos) const { return outgoing_[node_pos]; }

  /// Restriction to one mode's edges plus their endpoint nodes. Parking nodes
  /// appear in both modal subgraphs.
  Network modal_subgraph(Mode mode) const {
    std::set<std::string> keep_nodes;
    std::vector<Edge> sub_edges;
    for (const Edge& e : edges_) {
      if (e.mode != mode) continue;
      sub_edges.push_back(e);
      keep_nodes.insert(e.from);
      keep_nodes.insert(e.to);
    }
    std::vector<Node> sub_nodes;
    for (const Node& n : nodes_) {
      if (keep_nodes.count(n.id)) sub_nodes.push_back(n);
    }
    std::vector<Commodity> sub_commodities;
    for (const Commodity& c : commodities_) {
      if (keep_nodes.count(c.origin) && keep_nodes.count(c.destination)) sub_commodities.push_back(c);
    }
    return Network(std::move(sub_nodes), std::move(sub_edges), std::move(sub_commodities));
  }

  /// True if a path origin->destination exists in which mode changes occur
  /// only at parking nodes. `start_mode` is the mode the mass sets out in.
  bool mode_feasible_path_exists(std::string_view origin, std::string_view destination,
                                 Mode start_mode,
                                 const std::set<std::string>* excluded_edges = nullptr) const {
    const Node* o = find_node(origin);
    const Node* d = find_node(destination);
    if (!o || !d) return false;
    // BFS over (node, mode) states.
    std::vector<std::array<bool, 2>> seen(nodes_.size(), {false, false});
    auto mode_ix = [](Mode m) { return m == Mode::pedestrian ? 0 : 1; };
    std::deque<std::pair<std::size_t, Mode>> queue;
    const std::size_t start = node_pos(origin);
    queue.emplace_back(start, start_mode);
    seen[start][mode_ix(start_mode)] = true;
    while (!queue.empty()) {
      auto [pos, mode] = queue.front();
      queue.pop_front();
      if (nodes_[pos].id == destination) return true;
      if (nodes_[pos].kind == NodeKind::parking) {
        const Mode o2 = other_mode(mode);
        if (!seen[pos][mode_ix(o2)]) {
          seen[pos][mode_ix(o2)] = true;
          queue.emplace_back(pos, o2);
        }
      }
      for (std::size_t ei : outgoing_[pos]) {
        const Edge& e = edges_[ei];
        if (e.mode != mode) continue;
        if (excluded_edges && excluded_edges->count(e.id)) continue;
        const std::size_t to = node_pos(e.to);
        if (!seen[to][mode_ix(mode)]) {
          seen[to][mode_ix(mode)] = true;
          queue.emplace_back(to, mode);
        }
      }
    }
    return false;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<Commodity> commodities_;
  std::map<std::string, std::size_t> node_index_;
  std::map<std::string, std::size_t> edge_index_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> outgoing_;
};

/// Structural validation. Collects every violated invariant instead of
/// stopping at the first; an empty report means the network is valid.
/// Deterministic: sorted by offending id, then message.
inline ValidationReport validate_network(const Network& net) {
  ValidationReport report;
  auto add = [&](const std::string& id, std::string msg) { report.push_back({id, std::move(msg)}); };

  // Duplicate ids (nodes and edges are stored sorted).
  const auto& nodes = net.nodes();
  const auto& edges = net.edges();
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].id == nodes[i - 1].id) add(nodes[i].id, "duplicate node id");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i].id == edges[i - 1].id) add(edges[i].id, "duplicate edge id");
  }

  for (const Edge& e : edges) {
    const Node* from = net.find_node(e.from);
    const Node* to = net.find_node(e.to);
    if (!from) add(e.id, "edge references missing node '" + e.from + "'");
    if (!to) add(e.id, "edge references missing node '" + e.to + "'");
    if (e.from == e.to) add(e.id, "self-loop");
    if (!(e.length > 0.0)) add(e.id, "length must be > 0");
    if (e.mode == Mode::pedestrian && !(e.width > 0.0)) add(e.id, "pedestrian edge needs width > 0");
    if (e.mode == Mode::vehicle && e.lane_count < 1) add(e.id, "vehicle edge needs lane_count >= 1");
    if (e.cell_count < 0) add(e.id, "cell_count must be >= 1 (or 0 for automatic)");
  }

  for (const Node& n : nodes) {
    const auto in = net.adjacent_edges(n.id, Direction::incoming);
    const auto out = net.adjacent_edges(n.id, Direction::outgoing);
    std::set<Mode> modes;
    for (const Edge* e : in) modes.insert(e->mode);
    for (const Edge* e : out) modes.insert(e->mode);
    switch (n.kind) {
      case NodeKind::entry:
        if (!in.empty()) add(n.id, "entry node has incoming edges");
        if (out.empty()) add(n.id, "entry node has no outgoing edge");
        for (const Edge* e : out) {
          if (e->mode != n.mode_at_entry)
            add(n.id, "entry node emits " + std::string(to_string(n.mode_at_entry)) +
                          " but edge '" + e->id + "' is " + to_string(e->mode));
        }
        break;
      case NodeKind::exit:
        if (!out.empty()) add(n.id, "exit node has outgoing edges");
        if (in.empty()) add(n.id, "exit node has no incoming edge");
        if (modes.size() > 1) add(n.id, "exit node is adjacent to edges of both modes");
        break;
      case NodeKind::parking:
        if (!modes.count(Mode::vehicle)) add(n.id, "parking node has no adjacent vehicle edge");
        if (!modes.count(Mode::pedestrian)) add(n.id, "parking node has no adjacent pedestrian edge");
        for (Mode m : {Mode::pedestrian, Mode::vehicle}) {
          if (!(n.flow_rate(m) > 0.0))
            add(n.id, std::string("parking node needs ") + to_string(m) + " flow_rate > 0");
        }
        break;
      case NodeKind::junction:
        if (modes.size() > 1) add(n.id, "junction node is adjacent to edges of both modes");
        for (Mode m : {Mode::pedestrian, Mode::vehicle}) {
          if (modes.count(m) && !(n.flow_rate(m) > 0.0))
            add(n.id, std::string("junction node needs ") + to_string(m) + " flow_rate > 0");
        }
        break;
    }
  }

  for (const Commodity& c : net.commodities()) {
    const Node* o = net.find_node(c.origin);
    const Node* d = net.find_node(c.destination);
    if (!o) {
      add(c.id, "commodity origin '" + c.origin + "' does not exist");
    } else if (o->kind != NodeKind::entry) {
      add(c.id, "commodity origin '" + c.origin + "' is not an entry node");
    }
    if (!d) {
      add(c.id, "commodity destination '" + c.destination + "' does not exist");
    } else if (d->kind != NodeKind::exit) {
      add(c.id, "commodity destination '" + c.destination + "' is not an exit node");
    }
    if (o && d && o->kind == NodeKind::entry && d->kind == NodeKind::exit) {
      if (!net.mode_feasible_path_exists(c.origin, c.destination, o->mode_at_entry))
        add(c.id, "no mode-feasible path for commodity (mode changes only at parking nodes)");
    }
    for (const RateInterval& r : c.demand) {
      if (r.rate < 0.0) add(c.id, "demand rate must be >= 0");
      if (!(r.end_s >= r.start_s)) add(c.id, "demand interval end before start");
    }
    auto sorted = c.demand;
    std::sort(sorted.begin(), sorted.end(),
              [](const RateInterval& a, const RateInterval& b) { return a.start_s < b.start_s; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].start_s < sorted[i - 1].end_s) add(c.id, "demand intervals overlap");
    }
  }

  std::sort(report.begin(), report.end(), [](const Violation& a, const Violation& b) {
    return a.id != b.id ? a.id < b.id : a.message < b.message;
  });
  return report;
}

}  // namespace mmflow
