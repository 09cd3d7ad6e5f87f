#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmflow/rng.hpp"

namespace mmflow {

/// Empirical passengers-per-car distribution. Built either from survey counts
/// (kept for exact rational reporting) or from explicit probabilities.
class OccupancyPmf {
 public:
  struct Entry {
    int passengers = 0;
    double probability = 0.0;
    long long count = 0;  // 0 when built from probabilities
  };

  /// Build from a count table. A ">max" bucket can be folded in by giving its
  /// count under `overflow_count`; it is represented by the single value
  /// `overflow_value`.
  static OccupancyPmf from_counts(std::vector<std::pair<int, long long>> counts,
                                  int overflow_value = 6, long long overflow_count = 0) {
    if (overflow_count < 0) throw std::invalid_argument("occupancy: negative overflow count");
    std::optional<std::pair<int, int>> overflow;
    if (overflow_count > 0) {
      int largest = 0;
      for (const auto& [k, c] : counts) largest = std::max(largest, k);
      overflow = {largest, overflow_value};  // counts beyond `largest` folded to one value
      counts.emplace_back(overflow_value, overflow_count);
    }
    std::sort(counts.begin(), counts.end());
    OccupancyPmf pmf;
    long long total = 0;
    for (auto& [k, c] : counts) {
      if (k < 1) throw std::invalid_argument("occupancy: passenger count must be >= 1");
      if (c < 0) throw std::invalid_argument("occupancy: negative count");
      if (!pmf.entries_.empty() && pmf.entries_.back().passengers == k) {
        pmf.entries_.back().count += c;
      } else if (c > 0) {
        pmf.entries_.push_back({k, 0.0, c});
      }
      total += c;
    }
    if (total <= 0) throw std::invalid_argument("occupancy: all counts are zero");
    pmf.overflow_ = overflow;
    pmf.total_count_ = total;
    for (auto& e : pmf.entries_) e.probability = static_cast<double>(e.count) / static_cast<double>(total);
    pmf.finish();
    return pmf;
  }

  static OccupancyPmf from_probabilities(std::vector<std::pair<int, double>> probs) {
    std::sort(probs.begin(), probs.end());
    OccupancyPmf pmf;
    double sum = 0.0;
    for (auto& [k, p] : probs) {
      if (k < 1) throw std::invalid_argument("occupancy: passenger count must be >= 1");
      if (p < 0.0) throw std::invalid_argument("occupancy: negative probability");
      if (!pmf.entries_.empty() && pmf.entries_.back().passengers == k)
        throw std::invalid_argument("occupancy: duplicate passenger value");
      if (p > 0.0) pmf.entries_.push_back({k, p, 0});
      sum += p;
    }
    if (pmf.entries_.empty()) throw std::invalid_argument("occupancy: empty distribution");
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("occupancy: probabilities must sum to 1");
    pmf.finish();
    return pmf;
  }

  /// The Rockavaria 2015 field survey: 1960 cars, counts per passengers
  /// 1..5 plus a ">5" bucket folded to 6.
  static OccupancyPmf rockavaria2015() {
    return from_counts({{1, 452}, {2, 979}, {3, 273}, {4, 185}, {5, 62}}, 6, 9);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool exact() const { return total_count_ > 0; }
  long long total_count() const { return total_count_; }

  /// Set when a ">threshold" survey bucket was folded into a single value:
  /// (threshold, representative value).
  const std::optional<std::pair<int, int>>& overflow() const { return overflow_; }

  double probability(int passengers) const {
    for (const auto& e : entries_)
      if (e.passengers == passengers) return e.probability;
    return 0.0;
  }

  /// Expected passengers per car. Exact integer arithmetic when counts are
  /// available.
  double mean() const { return mean_; }

  int min_value() const { return entries_.front().passengers; }
  int max_value() const { return entries_.back().passengers; }

  /// Draw one occupancy. Count-built pmfs sample the exact rational
  /// distribution via an unbiased integer draw.
  int sample(RngStream& rng) const {
    if (total_count_ > 0) {
      std::int64_t r = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(total_count_)));
      for (const auto& e : entries_) {
        r -= e.count;
        if (r < 0) return e.passengers;
      }
      return entries_.back().passengers;
    }
    const double u = rng.next_unit();
    double acc = 0.0;
    for (const auto& e : entries_) {
      acc += e.probability;
      if (u < acc) return e.passengers;
    }
    return entries_.back().passengers;
  }

 private:
  void finish() {
    if (entries_.empty()) throw std::invalid_argument("occupancy: empty distribution");
    if (total_count_ > 0) {
      long long weighted = 0;
      for (const auto& e : entries_) weighted += static_cast<long long>(e.passengers) * e.count;
      mean_ = static_cast<double>(weighted) / static_cast<double>(total_count_);
    } else {
      double m = 0.0;
      for (const auto& e : entries_) m += e.passengers * e.probability;
      mean_ = m;
    }
  }

  std::vector<Entry> entries_;
  std::optional<std::pair<int, int>> overflow_;
  long long total_count_ = 0;
  double mean_ = 0.0;
};

inline double expected_occupancy(const OccupancyPmf& pmf) { return pmf.mean(); }

inline int sample_occupancy(const OccupancyPmf& pmf, RngStream& rng) { return pmf.sample(rng); }

}  // namespace mmflow
