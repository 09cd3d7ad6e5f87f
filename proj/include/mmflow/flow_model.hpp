#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmflow {

/// Fundamental-diagram constants of one mode, plus the free-flow velocity
/// distribution that defines its velocity classes.
struct FlowParams {
  double gamma;     ///< shape parameter of the velocity-density relation (density units)
  double rho_max;   ///< jam density (P/m^2 for pedestrians, veh/m/lane for vehicles)
  double vff_mean;  ///< mean free-flow velocity (m/s)
  double vff_std;   ///< std deviation of the free-flow velocity (m/s)
  double vff_max;   ///< truncation bound of the free-flow distribution (m/s)
};

// Weidmann-style walking parameters.
inline FlowParams pedestrian_defaults() { return {1.913, 5.4, 1.34, 0.26, 2.5}; }

// Urban road parameters, calibrated so peak flux lands near 0.5 veh/s/lane.
inline FlowParams vehicle_defaults() { return {0.1, 0.133, 13.9, 1.5, 16.7}; }

/// One discrete free-flow velocity class: a representative velocity and the
/// population fraction travelling at it.
struct VelocityClass {
  double vff;     ///< class representative free-flow velocity (m/s)
  double weight;  ///< population fraction, all classes sum to 1
};

/// Kladek-form velocity-density relation:
///   v = vff * (1 - exp(-gamma * (1/rho - 1/rho_max)))
/// rho == 0 returns vff exactly, rho == rho_max returns 0 exactly.
inline double velocity(const FlowParams& p, double vff, double rho_total) {
  if (!(rho_total >= 0.0) || rho_total > p.rho_max) {
    throw std::domain_error("velocity: density " + std::to_string(rho_total) +
                            " outside [0, " + std::to_string(p.rho_max) + "]");
  }
  if (rho_total == 0.0) return vff;
  return vff * (1.0 - std::exp(-p.gamma * (1.0 / rho_total - 1.0 / p.rho_max)));
}

/// Flux per unit cross-section at total density rho, all mass at one vff.
inline double flux(const FlowParams& p, double vff, double rho_total) {
  return rho_total * velocity(p, vff, rho_total);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Inverse standard normal CDF by bisection. Monotone and exact to the last
/// few ulps, which is all the class discretization needs.
inline double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Discretize the free-flow velocity distribution into `class_count` classes.
///
/// The normal(vff_mean, vff_std) distribution truncated to (0, vff_max] is cut
/// into equal-probability strata; class k is the conditional mean of stratum k
/// and every class carries weight 1/class_count. Classes come out sorted
/// ascending. Deterministic.
inline std::vector<VelocityClass> discretize_classes(const FlowParams& p, int class_count) {
  if (class_count < 1) throw std::invalid_argument("discretize_classes: class_count < 1");
  if (p.vff_std < 0.0) throw std::invalid_argument("discretize_classes: vff_std < 0");
  if (!(p.vff_max > 0.0)) throw std::invalid_argument("discretize_classes: vff_max <= 0");

  const double w = 1.0 / class_count;
  std::vector<VelocityClass> classes;
  classes.reserve(static_cast<std::size_t>(class_count));

  if (p.vff_std == 0.0) {
    if (!(p.vff_mean > 0.0) || p.vff_mean > p.vff_max) {
      throw std::invalid_argument("discretize_classes: degenerate vff outside (0, vff_max]");
    }
    classes.assign(static_cast<std::size_t>(class_count), {p.vff_mean, w});
    return classes;
  }

  const double lo_z = (0.0 - p.vff_mean) / p.vff_std;
  const double hi_z = (p.vff_max - p.vff_mean) / p.vff_std;
  const double cdf_lo = normal_cdf(lo_z);
  const double mass = normal_cdf(hi_z) - cdf_lo;
  if (mass < 1e-9) {
    throw std::invalid_argument("discretize_classes: truncation interval (0, vff_max] has near-zero probability mass");
  }

  double za = lo_z;
  for (int k = 0; k < class_count; ++k) {
    const double zb = (k + 1 == class_count)
                          ? hi_z
                          : normal_quantile(cdf_lo + mass * (k + 1) / class_count);
    const double stratum_mass = normal_cdf(zb) - normal_cdf(za);
    const double mean_z = (normal_pdf(za) - normal_pdf(zb)) / stratum_mass;
    double vff = p.vff_mean + p.vff_std * mean_z;
    if (vff > p.vff_max) vff = p.vff_max;  // fp guard, conditional mean lies inside the stratum
    classes.push_back({vff, w});
    za = zb;
  }
  return classes;
}

}  // namespace mmflow
