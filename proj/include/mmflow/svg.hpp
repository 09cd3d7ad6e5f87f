#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mmflow/engine.hpp"
#include "mmflow/results_io.hpp"

namespace mmflow {

namespace svg_detail {

struct Rgb {
  int r, g, b;
};

// Density colormap, fixed so snapshot goldens stay stable:
// 0 -> green rgb(0,170,0), 0.5 -> yellow rgb(255,255,0), 1 -> red rgb(255,0,0),
// linear in between.
inline Rgb colormap(double x) {
  x = std::clamp(x, 0.0, 1.0);
  auto lerp = [](int a, int b, double u) { return static_cast<int>(std::lround(a + (b - a) * u)); };
  if (x <= 0.5) {
    const double u = 2.0 * x;
    return {lerp(0, 255, u), lerp(170, 255, u), 0};
  }
  const double u = 2.0 * x - 1.0;
  return {255, lerp(255, 0, u), 0};
}

inline std::string color_str(const Rgb& c) {
  std::ostringstream out;
  out << "rgb(" << c.r << ',' << c.g << ',' << c.b << ')';
  return out.str();
}

}  // namespace svg_detail

/// Render one network snapshot as SVG: edges colored by rho_avg / rho_max on
/// the green-yellow-red colormap, roads with dark casing and walkways with
/// light casing, nodes drawn by kind (entry green, exit red, parking square,
/// junction small circle), plus a legend. Node display positions are required.
inline std::string render_network_svg(const Scenario& sc,
                                      const std::map<std::string, double>& edge_mean_density,
                                      double t) {
  const Network& net = sc.network;
  for (const Node& n : net.nodes()) {
    if (!n.position)
      throw std::invalid_argument("render_snapshot: node '" + n.id + "' has no display position");
  }

  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const Node& n : net.nodes()) {
    min_x = std::min(min_x, (*n.position)[0]);
    max_x = std::max(max_x, (*n.position)[0]);
    min_y = std::min(min_y, (*n.position)[1]);
    max_y = std::max(max_y, (*n.position)[1]);
  }
  const double span_x = std::max(1.0, max_x - min_x);
  const double span_y = std::max(1.0, max_y - min_y);
  const double width = 860.0, height = 560.0, margin = 60.0;
  const double scale = std::min((width - 2 * margin) / span_x, (height - 2 * margin - 60.0) / span_y);
  auto px = [&](double x) { return margin + (x - min_x) * scale; };
  auto py = [&](double y) { return height - margin - 60.0 - (y - min_y) * scale; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<defs><linearGradient id=\"density\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">"
         "<stop offset=\"0\" stop-color=\"rgb(0,170,0)\"/>"
         "<stop offset=\"0.5\" stop-color=\"rgb(255,255,0)\"/>"
         "<stop offset=\"1\" stop-color=\"rgb(255,0,0)\"/></linearGradient></defs>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\">"
      << sc.name << " at t=" << format_number(t) << " s</text>\n";

  // Offset two-way twins sideways so both directions stay visible.
  std::set<std::pair<std::string, std::string>> pairs;
  for (const Edge& e : net.edges()) pairs.insert({e.from, e.to});

  for (const Edge& e : net.edges()) {
    const Node& a = net.node(e.from);
    const Node& b = net.node(e.to);
    double x1 = px((*a.position)[0]), y1 = py((*a.position)[1]);
    double x2 = px((*b.position)[0]), y2 = py((*b.position)[1]);
    if (pairs.count({e.to, e.from})) {
      const double dx = x2 - x1, dy = y2 - y1;
      const double len = std::max(1e-9, std::hypot(dx, dy));
      const double ox = dy / len * 3.0, oy = -dx / len * 3.0;  // offset to the right
      x1 += ox;
      x2 += ox;
      y1 += oy;
      y2 += oy;
    }
    const FlowParams& p = e.mode == Mode::pedestrian ? sc.pedestrian : sc.vehicle;
    const auto it = edge_mean_density.find(e.id);
    const double rho = it == edge_mean_density.end() ? 0.0 : it->second;
    const auto color = svg_detail::color_str(svg_detail::colormap(rho / p.rho_max));
    const bool road = e.mode == Mode::vehicle;
    out << "<line class=\"" << (road ? "road-casing" : "walk-casing") << "\" x1=\""
        << format_number(x1) << "\" y1=\"" << format_number(y1) << "\" x2=\"" << format_number(x2)
        << "\" y2=\"" << format_number(y2) << "\" stroke=\"" << (road ? "#303030" : "#c0c0c0")
        << "\" stroke-width=\"" << (road ? 7 : 5) << "\" stroke-linecap=\"round\"/>\n";
    out << "<line class=\"" << (road ? "road" : "walkway") << "\" x1=\"" << format_number(x1)
        << "\" y1=\"" << format_number(y1) << "\" x2=\"" << format_number(x2) << "\" y2=\""
        << format_number(y2) << "\" stroke=\"" << color << "\" stroke-width=\"" << (road ? 4 : 2.5)
        << "\" stroke-linecap=\"round\"/>\n";
  }

  for (const Node& n : net.nodes()) {
    const double x = px((*n.position)[0]), y = py((*n.position)[1]);
    switch (n.kind) {
      case NodeKind::entry:
        out << "<circle class=\"entry\" cx=\"" << format_number(x) << "\" cy=\"" << format_number(y)
            << "\" r=\"7\" fill=\"#1f9d1f\" stroke=\"#0c4f0c\"/>\n";
        break;
      case NodeKind::exit:
        out << "<circle class=\"exit\" cx=\"" << format_number(x) << "\" cy=\"" << format_number(y)
            << "\" r=\"7\" fill=\"#d62828\" stroke=\"#6e0d0d\"/>\n";
        break;
      case NodeKind::parking:
        out << "<rect class=\"parking\" x=\"" << format_number(x - 6) << "\" y=\""
            << format_number(y - 6) << "\" width=\"12\" height=\"12\" fill=\"#3465a4\" stroke=\"#17314f\"/>\n";
        break;
      case NodeKind::junction:
        out << "<circle class=\"junction\" cx=\"" << format_number(x) << "\" cy=\""
            << format_number(y) << "\" r=\"4\" fill=\"#888888\" stroke=\"#555555\"/>\n";
        break;
    }
    out << "<text x=\"" << format_number(x + 9) << "\" y=\"" << format_number(y - 9)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">" << n.id << "</text>\n";
  }

  // Legend: density gradient and node glyphs.
  const double ly = height - 46.0;
  out << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << ly << "\" width=\"180\" height=\"12\" fill=\"url(#density)\" stroke=\"#666666\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << ly + 26 << "\">rho/rho_max 0</text>\n";
  out << "<text x=\"" << margin + 150 << "\" y=\"" << ly + 26 << "\">1</text>\n";
  out << "<circle cx=\"" << margin + 230 << "\" cy=\"" << ly + 6 << "\" r=\"6\" fill=\"#1f9d1f\"/>"
      << "<text x=\"" << margin + 240 << "\" y=\"" << ly + 10 << "\">entry</text>\n";
  out << "<circle cx=\"" << margin + 300 << "\" cy=\"" << ly + 6 << "\" r=\"6\" fill=\"#d62828\"/>"
      << "<text x=\"" << margin + 310 << "\" y=\"" << ly + 10 << "\">exit</text>\n";
  out << "<rect x=\"" << margin + 358 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\"#3465a4\"/>"
      << "<text x=\"" << margin + 376 << "\" y=\"" << ly + 10 << "\">parking</text>\n";
  out << "<line x1=\"" << margin + 440 << "\" y1=\"" << ly + 6 << "\" x2=\"" << margin + 480
      << "\" y2=\"" << ly + 6 << "\" stroke=\"#303030\" stroke-width=\"6\"/>"
      << "<text x=\"" << margin + 488 << "\" y=\"" << ly + 10 << "\">road</text>\n";
  out << "<line x1=\"" << margin + 540 << "\" y1=\"" << ly + 6 << "\" x2=\"" << margin + 580
      << "\" y2=\"" << ly + 6 << "\" stroke=\"#c0c0c0\" stroke-width=\"5\"/>"
      << "<text x=\"" << margin + 588 << "\" y=\"" << ly + 10 << "\">walkway</text>\n";
  out << "</g>\n</svg>\n";
  return out.str();
}

/// Snapshot straight from in-memory results at the sample closest to t.
inline std::string render_snapshot(const Scenario& sc, const RunResults& results, double t) {
  if (results.edge_samples.empty()) throw std::out_of_range("render_snapshot: no samples recorded");
  const EdgeSnapshot* best = nullptr;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const EdgeSnapshot& s : results.edge_samples) {
    const double gap = std::abs(s.t - t);
    if (gap < best_gap) {
      best_gap = gap;
      best = &s;
    }
  }
  if (t < results.edge_samples.front().t - 1e-9 || t > results.edge_samples.back().t + 1e-9)
    throw std::out_of_range("render_snapshot: t outside the run horizon");
  std::map<std::string, double> density;
  const auto& edges = sc.network.edges();
  const std::size_t stride = 1 + static_cast<std::size_t>(sc.solver.class_count);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& vals = best->per_edge[e];
    const std::size_t cells = vals.size() / stride;
    double sum = 0.0;
    for (std::size_t i = 0; i < cells; ++i) sum += vals[i * stride];
    density[edges[e].id] = cells ? sum / static_cast<double>(cells) : 0.0;
  }
  return render_network_svg(sc, density, best->t);
}

}  // namespace mmflow
