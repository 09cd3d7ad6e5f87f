#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mmflow/flow_model.hpp"
#include "mmflow/network.hpp"

namespace mmflow {

/// Per-edge finite-volume grid. Each cell holds one density value per
/// (velocity class, commodity) slot; cell 0 is the upstream end at the
/// edge's `from` node. Flattened layout: rho[(cell*K + k)*C + c].
class EdgeState {
 public:
  EdgeState() = default;
  EdgeState(Mode mode, double length, int cell_count, double cross_section, int class_count,
            int commodity_count)
      : mode_(mode),
        length_(length),
        cross_section_(cross_section),
        cells_(cell_count),
        classes_(class_count),
        commodities_(commodity_count) {
    if (cell_count < 1) throw std::invalid_argument("EdgeState: cell_count < 1");
    if (!(length > 0.0)) throw std::invalid_argument("EdgeState: length <= 0");
    if (!(cross_section > 0.0)) throw std::invalid_argument("EdgeState: cross_section <= 0");
    if (class_count < 1 || commodity_count < 1)
      throw std::invalid_argument("EdgeState: class/commodity count < 1");
    dx_ = length / cell_count;
    rho_.assign(static_cast<std::size_t>(cells_) * slots(), 0.0);
  }

  Mode mode() const { return mode_; }
  double dx() const { return dx_; }
  double length() const { return length_; }
  double cross_section() const { return cross_section_; }
  int cell_count() const { return cells_; }
  int class_count() const { return classes_; }
  int commodity_count() const { return commodities_; }
  int slots() const { return classes_ * commodities_; }

  std::span<double> cell(int i) { return {rho_.data() + static_cast<std::size_t>(i) * slots(), static_cast<std::size_t>(slots())}; }
  std::span<const double> cell(int i) const { return {rho_.data() + static_cast<std::size_t>(i) * slots(), static_cast<std::size_t>(slots())}; }

  double& at(int cell_ix, int k, int c) { return rho_[(static_cast<std::size_t>(cell_ix) * classes_ + k) * commodities_ + c]; }
  double at(int cell_ix, int k, int c) const { return rho_[(static_cast<std::size_t>(cell_ix) * classes_ + k) * commodities_ + c]; }

  double cell_total(int i) const {
    const auto c = cell(i);
    return std::accumulate(c.begin(), c.end(), 0.0);
  }

  double average_total_density() const {
    double s = 0.0;
    for (int i = 0; i < cells_; ++i) s += cell_total(i);
    return s / cells_;
  }

  /// Subjects currently on the edge.
  double total_mass() const {
    const double s = std::accumulate(rho_.begin(), rho_.end(), 0.0);
    return s * dx_ * cross_section_;
  }

  double mass_of_commodity(int c) const {
    double s = 0.0;
    for (int i = 0; i < cells_; ++i)
      for (int k = 0; k < classes_; ++k) s += at(i, k, c);
    return s * dx_ * cross_section_;
  }

 private:
  Mode mode_ = Mode::pedestrian;
  double length_ = 0.0, dx_ = 0.0, cross_section_ = 0.0;
  int cells_ = 0, classes_ = 0, commodities_ = 0;
  std::vector<double> rho_;
};

/// Sum of per-(class, commodity) densities in one cell.
inline double total_density(std::span<const double> cell) {
  return std::accumulate(cell.begin(), cell.end(), 0.0);
}

// Densities may carry ~1e-9 of fp slack above rho_max; anything worse is a bug.
inline double clamp_density(const FlowParams& p, double rho_total) {
  if (rho_total > p.rho_max) {
    if (rho_total > p.rho_max + 1e-6)
      throw std::domain_error("total density exceeds rho_max beyond solver tolerance");
    return p.rho_max;
  }
  return rho_total < 0.0 ? 0.0 : rho_total;
}

/// Upwind-downwind interface flux for one (class, commodity) slot: the
/// upstream density advected at the velocity implied by the downstream total
/// density. Zero when the upstream slot is empty or the downstream side jams.
inline double interface_flux(double rho_upwind, double rho_downwind_total, const FlowParams& p,
                             double vff) {
  if (rho_upwind < 0.0) throw std::domain_error("interface_flux: negative upwind density");
  if (rho_upwind == 0.0) return 0.0;
  return rho_upwind * velocity(p, vff, clamp_density(p, rho_downwind_total));
}

/// Global CFL-stable time step: cfl_factor * min over edges of
/// dx / vff_max of the edge's mode.
inline double max_stable_dt(std::span<const EdgeState> edges, const FlowParams& pedestrian,
                            const FlowParams& vehicle, double cfl_factor) {
  if (edges.empty()) throw std::invalid_argument("max_stable_dt: no edges");
  if (!(cfl_factor > 0.0) || cfl_factor > 1.0)
    throw std::invalid_argument("max_stable_dt: cfl_factor outside (0, 1]");
  double dt = std::numeric_limits<double>::infinity();
  for (const EdgeState& e : edges) {
    const FlowParams& p = e.mode() == Mode::pedestrian ? pedestrian : vehicle;
    dt = std::min(dt, e.dx() / p.vff_max);
  }
  return cfl_factor * dt;
}

namespace detail {

// Mass (in density units) moved through the interface below cell i within dt.
// Clipped to the donor cell's content so positivity is structural even at
// cfl_factor == 1.
inline double moved_density(double rho_up, double v, double dt_over_dx) {
  return std::min(rho_up * v * dt_over_dx, rho_up);
}

inline void check_cfl(const EdgeState& s, std::span<const VelocityClass> classes, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_edge: dt must be > 0");
  double vmax = 0.0;
  for (const auto& c : classes) vmax = std::max(vmax, c.vff);
  if (dt * vmax > s.dx() * (1.0 + 1e-12))
    throw std::invalid_argument("step_edge: CFL violation, dt too large for dx and vff");
}

// Interior update shared by both step flavors. Writes per-slot density deltas
// for all cells; boundary terms are applied by the caller on top.
inline void interior_deltas(const EdgeState& s, const FlowParams& p,
                            std::span<const VelocityClass> classes, double dt,
                            std::vector<double>& delta) {
  const int n = s.cell_count(), kk = s.class_count(), cc = s.commodity_count();
  const double dt_over_dx = dt / s.dx();
  delta.assign(static_cast<std::size_t>(n) * kk * cc, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    const double down_total = clamp_density(p, s.cell_total(i + 1));
    for (int k = 0; k < kk; ++k) {
      const double v = velocity(p, classes[k].vff, down_total);
      for (int c = 0; c < cc; ++c) {
        const double m = moved_density(s.at(i, k, c), v, dt_over_dx);
        if (m == 0.0) continue;
        delta[(static_cast<std::size_t>(i) * kk + k) * cc + c] -= m;
        delta[(static_cast<std::size_t>(i + 1) * kk + k) * cc + c] += m;
      }
    }
  }
}

inline void apply_deltas_and_check(EdgeState& s, const FlowParams& p,
                                   std::span<const double> delta) {
  const int n = s.cell_count(), slots = s.slots();
  for (int i = 0; i < n; ++i) {
    auto cell = s.cell(i);
    for (int j = 0; j < slots; ++j) {
      cell[j] += delta[static_cast<std::size_t>(i) * slots + j];
      if (cell[j] < 0.0) {
        if (cell[j] < -1e-12 * p.rho_max)
          throw std::runtime_error("step_edge: negative density after update");
        cell[j] = 0.0;
      }
    }
    if (s.cell_total(i) > p.rho_max + 1e-9)
      throw std::runtime_error("step_edge: cell density exceeds rho_max, inflow did not respect supply");
  }
}

}  // namespace detail

/// Advance one edge by dt. The upstream face receives `inflow_mass` (subjects,
/// per slot; may be empty for zero). The downstream face discharges at the
/// velocity implied by `downstream_total_density`, scaled by
/// `outflow_allowance` in [0, 1] (0 seals the edge). Returns the outflow mass
/// per slot. Mass balance is exact: new mass = old + inflow - outflow.
inline std::vector<double> step_edge(EdgeState& s, const FlowParams& p,
                                     std::span<const VelocityClass> classes, double dt,
                                     std::span<const double> inflow_mass,
                                     double downstream_total_density, double outflow_allowance) {
  detail::check_cfl(s, classes, dt);
  if (!inflow_mass.empty() && inflow_mass.size() != static_cast<std::size_t>(s.slots()))
    throw std::invalid_argument("step_edge: inflow_mass size mismatch");
  if (outflow_allowance < 0.0 || outflow_allowance > 1.0)
    throw std::invalid_argument("step_edge: outflow_allowance outside [0, 1]");

  const int kk = s.class_count(), cc = s.commodity_count(), last = s.cell_count() - 1;
  const double dt_over_dx = dt / s.dx();
  const double face_area = s.dx() * s.cross_section();

  std::vector<double> delta;
  detail::interior_deltas(s, p, classes, dt, delta);

  // Downstream face, computed from the pre-step last cell.
  std::vector<double> outflow(static_cast<std::size_t>(s.slots()), 0.0);
  if (outflow_allowance > 0.0) {
    const double down = clamp_density(p, downstream_total_density);
    for (int k = 0; k < kk; ++k) {
      const double v = velocity(p, classes[k].vff, down);
      for (int c = 0; c < cc; ++c) {
        const double m = detail::moved_density(s.at(last, k, c), v, dt_over_dx) * outflow_allowance;
        delta[(static_cast<std::size_t>(last) * kk + k) * cc + c] -= m;
        outflow[static_cast<std::size_t>(k) * cc + c] = m * face_area;
      }
    }
  }

  // Upstream face.
  for (std::size_t j = 0; j < inflow_mass.size(); ++j) {
    if (inflow_mass[j] < 0.0) throw std::invalid_argument("step_edge: negative inflow mass");
    delta[j] += inflow_mass[j] / face_area;
  }

  detail::apply_deltas_and_check(s, p, delta);
  return outflow;
}

/// Engine flavor: the boundary outflow has already been decided (flux caps and
/// rationing applied at the node); remove exactly `outflow_mass` per slot and
/// add `inflow_mass` per slot. Hard error if the requested outflow exceeds the
/// last cell's content.
inline void apply_edge_step(EdgeState& s, const FlowParams& p,
                            std::span<const VelocityClass> classes, double dt,
                            std::span<const double> inflow_mass,
                            std::span<const double> outflow_mass) {
  detail::check_cfl(s, classes, dt);
  const int last = s.cell_count() - 1, slots = s.slots();
  const double face_area = s.dx() * s.cross_section();

  std::vector<double> delta;
  detail::interior_deltas(s, p, classes, dt, delta);

  if (!outflow_mass.empty()) {
    if (outflow_mass.size() != static_cast<std::size_t>(slots))
      throw std::invalid_argument("apply_edge_step: outflow_mass size mismatch");
    auto last_cell = s.cell(last);
    for (int j = 0; j < slots; ++j) {
      double m = outflow_mass[j] / face_area;
      if (m > last_cell[j] * (1.0 + 1e-9) + 1e-300)
        throw std::runtime_error("apply_edge_step: outflow exceeds last-cell content");
      m = std::min(m, last_cell[j]);
      delta[static_cast<std::size_t>(last) * slots + j] -= m;
    }
  }
  if (!inflow_mass.empty()) {
    if (inflow_mass.size() != static_cast<std::size_t>(slots))
      throw std::invalid_argument("apply_edge_step: inflow_mass size mismatch");
    for (int j = 0; j < slots; ++j) {
      if (inflow_mass[j] < 0.0) throw std::invalid_argument("apply_edge_step: negative inflow mass");
      delta[j] += inflow_mass[j] / face_area;
    }
  }

  detail::apply_deltas_and_check(s, p, delta);
}

/// Mass (subjects) the last cell can send through the downstream face in dt
/// for one slot, against an effective downstream total density.
inline double face_outflow_mass(const EdgeState& s, int k, int c, const FlowParams& p, double vff,
                                double downstream_total_density, double dt) {
  const double rho = s.at(s.cell_count() - 1, k, c);
  if (rho <= 0.0) return 0.0;
  const double v = velocity(p, vff, clamp_density(p, downstream_total_density));
  return detail::moved_density(rho, v, dt / s.dx()) * s.dx() * s.cross_section();
}

/// Remaining capacity (subjects) of the upstream cell.
inline double cell0_supply(const EdgeState& s, const FlowParams& p) {
  const double room = p.rho_max - s.cell_total(0);
  return room > 0.0 ? room * s.dx() * s.cross_section() : 0.0;
}

}  // namespace mmflow
