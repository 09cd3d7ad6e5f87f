#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmflow/flow_model.hpp"
#include "mmflow/occupancy.hpp"
#include "mmflow/rng.hpp"

namespace mmflow {

struct TransformConfig {
  // Stochastic mode draws an occupancy per whole vehicle; deterministic mode
  // converts continuously at the expected occupancy.
  bool deterministic = false;
};

/// Conversion state of one parking node. Incoming car mass accrues per
/// commodity until a whole vehicle is available; incoming pedestrians accrue
/// toward a sampled group size. Commodities never share accumulators, so
/// persons bound for one destination cannot leak into another's cars.
class ParkingBuffer {
 public:
  ParkingBuffer() = default;
  ParkingBuffer(std::string node_id, int commodity_count, RngStream rng,
                std::optional<double> vehicle_store = std::nullopt)
      : node_id_(std::move(node_id)),
        rng_(rng),
        car_accum_(commodity_count, 0.0),
        ped_accum_(commodity_count),
        stored_vehicles_(vehicle_store ? *vehicle_store
                                       : std::numeric_limits<double>::infinity()) {}

  const std::string& node_id() const { return node_id_; }
  double car_fraction(int c) const { return car_accum_[c]; }
  double waiting_persons(int c) const { return ped_accum_[c].persons; }
  int pending_group(int c) const { return ped_accum_[c].group; }
  double stored_vehicles() const { return stored_vehicles_; }

  /// Subjects currently held by the buffer (car fractions plus waiting
  /// persons), for the conservation audit.
  double total_subjects() const {
    double s = 0.0;
    for (double v : car_accum_) s += v;
    for (const auto& p : ped_accum_) s += p.persons;
    return s;
  }

  double held_persons() const {
    double s = 0.0;
    for (const auto& p : ped_accum_) s += p.persons;
    return s;
  }
  double held_car_fractions() const {
    double s = 0.0;
    for (double v : car_accum_) s += v;
    return s;
  }

 private:
  friend struct TransformOps;
  struct PedAccum {
    double persons = 0.0;
    int group = 0;  // 0 = no group size drawn yet
  };
  std::string node_id_;
  RngStream rng_{0};
  std::vector<double> car_accum_;
  std::vector<PedAccum> ped_accum_;
  double stored_vehicles_ = std::numeric_limits<double>::infinity();
};

/// Outcome of one transformation step at a parking node.
struct TransformResult {
  std::vector<double> ped_out;  // persons per (pedestrian class, commodity)
  std::vector<double> car_out;  // vehicles per (vehicle class, commodity)
  // Audit bookkeeping. `persons_revealed` is the net change in person count
  // caused by conversions this step: +(n-1) per whole car unloading n persons,
  // -(g-1) per group of g persons boarding one car.
  double persons_revealed = 0.0;
  double cars_consumed = 0.0;
  double persons_consumed = 0.0;
  double persons_emitted = 0.0;
  double cars_emitted = 0.0;
  double sum_sampled_occupancy = 0.0;  // sum of occupancies drawn for unloaded cars
};

struct TransformOps {
  static RngStream& rng(ParkingBuffer& b) { return b.rng_; }
  static std::vector<double>& car_accum(ParkingBuffer& b) { return b.car_accum_; }
  static auto& ped_accum(ParkingBuffer& b) { return b.ped_accum_; }
  static double& stored(ParkingBuffer& b) { return b.stored_vehicles_; }
};

/// Convert arriving car mass into pedestrians and arriving pedestrian mass
/// into cars. Incoming spans are per (class, commodity) in the source mode's
/// class table; outgoing mass is spread over the destination mode's classes by
/// their weights, i.e. transformed subjects draw fresh individual parameters.
inline TransformResult transform_step(ParkingBuffer& buffer,
                                      std::span<const double> incoming_car_mass,
                                      std::span<const double> incoming_ped_mass,
                                      const OccupancyPmf& pmf,
                                      std::span<const VelocityClass> ped_classes,
                                      std::span<const VelocityClass> veh_classes,
                                      const TransformConfig& config = {}) {
  auto& car_accum = TransformOps::car_accum(buffer);
  auto& ped_accum = TransformOps::ped_accum(buffer);
  auto& rng = TransformOps::rng(buffer);
  double& stored = TransformOps::stored(buffer);

  const int commodities = static_cast<int>(car_accum.size());
  const int kp = static_cast<int>(ped_classes.size());
  const int kv = static_cast<int>(veh_classes.size());
  if (!incoming_car_mass.empty() &&
      incoming_car_mass.size() != static_cast<std::size_t>(kv * commodities))
    throw std::invalid_argument("transform_step: car mass size mismatch");
  if (!incoming_ped_mass.empty() &&
      incoming_ped_mass.size() != static_cast<std::size_t>(kp * commodities))
    throw std::invalid_argument("transform_step: ped mass size mismatch");

  TransformResult res;
  res.ped_out.assign(static_cast<std::size_t>(kp) * commodities, 0.0);
  res.car_out.assign(static_cast<std::size_t>(kv) * commodities, 0.0);

  // Cars -> pedestrians.
  for (int c = 0; c < commodities; ++c) {
    double arriving = 0.0;
    for (int k = 0; k < kv; ++k) {
      if (!incoming_car_mass.empty()) {
        const double m = incoming_car_mass[static_cast<std::size_t>(k) * commodities + c];
        if (m < 0.0) throw std::invalid_argument("transform_step: negative car mass");
        arriving += m;
      }
    }
    double persons = 0.0;
    if (config.deterministic) {
      // Continuous conversion at the expected occupancy.
      if (arriving > 0.0) {
        persons = arriving * pmf.mean();
        res.cars_consumed += arriving;
        res.persons_revealed += arriving * (pmf.mean() - 1.0);
        stored += arriving;
      }
    } else {
      car_accum[c] += arriving;
      while (car_accum[c] >= 1.0) {
        car_accum[c] -= 1.0;
        const int n = pmf.sample(rng);
        persons += n;
        res.cars_consumed += 1.0;
        res.sum_sampled_occupancy += n;
        res.persons_revealed += n - 1.0;
        stored += 1.0;
      }
    }
    if (persons > 0.0) {
      res.persons_emitted += persons;
      for (int k = 0; k < kp; ++k)
        res.ped_out[static_cast<std::size_t>(k) * commodities + c] += persons * ped_classes[k].weight;
    }
  }

  // Pedestrians -> cars.
  for (int c = 0; c < commodities; ++c) {
    double arriving = 0.0;
    for (int k = 0; k < kp; ++k) {
      if (!incoming_ped_mass.empty()) {
        const double m = incoming_ped_mass[static_cast<std::size_t>(k) * commodities + c];
        if (m < 0.0) throw std::invalid_argument("transform_step: negative ped mass");
        arriving += m;
      }
    }
    auto& acc = ped_accum[c];
    acc.persons += arriving;
    res.persons_consumed += arriving;
    double cars = 0.0;
    if (config.deterministic) {
      if (acc.persons > 0.0 && stored > 0.0) {
        const double want = acc.persons / pmf.mean();
        const double emit = std::min(want, stored);
        const double persons_used = emit * pmf.mean();
        acc.persons -= persons_used;
        if (acc.persons < 0.0) acc.persons = 0.0;
        stored -= emit;
        cars += emit;
        res.persons_revealed -= persons_used - emit;
      }
    } else {
      while (true) {
        if (acc.group == 0) {
          if (acc.persons <= 0.0) break;
          acc.group = pmf.sample(rng);
        }
        if (acc.persons >= acc.group && stored >= 1.0) {
          acc.persons -= acc.group;
          cars += 1.0;
          stored -= 1.0;
          res.persons_revealed -= acc.group - 1.0;
          acc.group = 0;
        } else {
          break;
        }
      }
    }
    if (cars > 0.0) {
      res.cars_emitted += cars;
      for (int k = 0; k < kv; ++k)
        res.car_out[static_cast<std::size_t>(k) * commodities + c] += cars * veh_classes[k].weight;
    }
  }

  return res;
}

/// Termination-time flush: convert whatever is still stuck in the
/// accumulators. Incomplete pedestrian groups leave as a final partial car
/// (persons / pending group size); fractional car remainders unload at the
/// expected occupancy. Reported separately in the audit.
struct FlushResult {
  std::vector<double> ped_out;
  std::vector<double> car_out;
  double persons_revealed = 0.0;
  double flush_persons = 0.0;
  double flush_cars = 0.0;
};

inline FlushResult flush_buffer(ParkingBuffer& buffer, const OccupancyPmf& pmf,
                                std::span<const VelocityClass> ped_classes,
                                std::span<const VelocityClass> veh_classes) {
  auto& car_accum = TransformOps::car_accum(buffer);
  auto& ped_accum = TransformOps::ped_accum(buffer);
  auto& rng = TransformOps::rng(buffer);

  const int commodities = static_cast<int>(car_accum.size());
  const int kp = static_cast<int>(ped_classes.size());
  const int kv = static_cast<int>(veh_classes.size());
  FlushResult res;
  res.ped_out.assign(static_cast<std::size_t>(kp) * commodities, 0.0);
  res.car_out.assign(static_cast<std::size_t>(kv) * commodities, 0.0);

  for (int c = 0; c < commodities; ++c) {
    if (car_accum[c] > 0.0) {
      const double frac = car_accum[c];
      car_accum[c] = 0.0;
      const double persons = frac * pmf.mean();
      res.persons_revealed += persons - frac;
      res.flush_persons += persons;
      for (int k = 0; k < kp; ++k)
        res.ped_out[static_cast<std::size_t>(k) * commodities + c] += persons * ped_classes[k].weight;
    }
    auto& acc = ped_accum[c];
    if (acc.persons > 0.0) {
      const int group = acc.group > 0 ? acc.group : pmf.sample(rng);
      const double persons = acc.persons;
      const double cars = persons / group;
      acc.persons = 0.0;
      acc.group = 0;
      res.persons_revealed -= persons - cars;
      res.flush_cars += cars;
      for (int k = 0; k < kv; ++k)
        res.car_out[static_cast<std::size_t>(k) * commodities + c] += cars * veh_classes[k].weight;
    }
  }
  return res;
}

}  // namespace mmflow
