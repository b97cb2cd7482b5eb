#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailsampler/errors.hpp"
#include "tailsampler/random.hpp"

namespace tailsampler {

/// Half-open probability interval [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double u) const noexcept { return lo <= u && u < hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// The not-yet-sampled part of [0, 1): disjoint, non-touching, ordered parts.
/// Parts live in an ordered map keyed by their left edge, so membership and
/// removal are logarithmic in the number of parts.
class IntervalSet {
 public:
  static constexpr double kContainmentSlack = 1e-12;
  static constexpr double kAdjacency = 1e-15;

  IntervalSet() { parts_.emplace(0.0, 1.0); }

  /// Builds a set from arbitrary parts; parts closer than 1e-15 are merged.
  static IntervalSet from_parts(std::vector<Interval> parts) {
    std::sort(parts.begin(), parts.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    IntervalSet set;
    set.parts_.clear();
    set.total_ = 0.0;
    std::optional<Interval> open;
    for (const auto& p : parts) {
      if (!(p.lo < p.hi) || p.lo < 0.0 || p.hi > 1.0) {
        throw ContainmentError("interval-domain", "parts must satisfy 0 <= lo < hi <= 1");
      }
      if (open && p.lo <= open->hi + kAdjacency) {
        if (p.lo < open->hi - kAdjacency) {
          throw ContainmentError("interval-domain", "overlapping parts");
        }
        open->hi = std::max(open->hi, p.hi);
        continue;
      }
      if (open) set.parts_.emplace(open->lo, open->hi);
      open = p;
    }
    if (open) set.parts_.emplace(open->lo, open->hi);
    set.total_ = set.recomputed_measure();
    return set;
  }

  std::size_t part_count() const noexcept { return parts_.size(); }
  bool empty() const noexcept { return parts_.empty(); }
  double total_measure() const noexcept { return std::max(0.0, total_ + compensation_); }

  std::vector<Interval> parts() const {
    std::vector<Interval> out;
    out.reserve(parts_.size());
    for (const auto& [lo, hi] : parts_) out.push_back({lo, hi});
    return out;
  }

  double recomputed_measure() const {
    double s = 0.0;
    for (const auto& [lo, hi] : parts_) s += hi - lo;
    return s;
  }

  bool contains(double u) const {
    auto it = parts_.upper_bound(u);
    if (it == parts_.begin()) return false;
    --it;
    return u < it->second;
  }

  /// True when [lo, hi) overlaps any part.
  bool intersects(double lo, double hi) const {
    auto it = parts_.upper_bound(lo);
    if (it != parts_.begin() && std::prev(it)->second > lo) return true;
    return it != parts_.end() && it->first < hi;
  }

  /// Removes a sub-interval of one part. Throws ContainmentError when the
  /// victim is not inside a single part (up to 1e-12 slack).
  void remove(const Interval& victim) {
    if (!(victim.lo < victim.hi)) {
      throw ContainmentError("interval-domain", "cannot remove an empty interval");
    }
    auto it = parts_.upper_bound(victim.lo + kContainmentSlack);
    if (it == parts_.begin()) throw not_contained(victim);
    --it;
    const double plo = it->first, phi = it->second;
    if (victim.lo < plo - kContainmentSlack || victim.hi > phi + kContainmentSlack ||
        victim.lo >= phi) {
      throw not_contained(victim);
    }
    const double cut_lo = std::max(victim.lo, plo);
    const double cut_hi = std::min(victim.hi, phi);
    parts_.erase(it);
    double delta = -(phi - plo);
    if (cut_lo > plo) {
      parts_.emplace(plo, cut_lo);
      delta += cut_lo - plo;
    }
    if (phi > cut_hi) {
      parts_.emplace(cut_hi, phi);
      delta += phi - cut_hi;
    }
    accumulate(delta);
  }

  /// Two-stage uniform draw over the set: part counts by normalized widths,
  /// then uniform positions inside each part. Result is ascending.
  std::vector<double> draw_sorted_uniform(std::size_t n_r, Rng& rng) const {
    if (parts_.empty() || !(total_measure() > 0.0)) {
      throw ExhaustedDomain("interval-domain", "sampling domain is empty");
    }
    if (n_r == 0) throw RangeError("interval-domain", "n_r must be at least 1");

    // Stage 1: how many draws fall in each part.
    std::vector<double> selectors(n_r);
    for (auto& s : selectors) s = uniform01(rng);
    std::sort(selectors.begin(), selectors.end());
    const double norm = recomputed_measure();
    std::vector<std::pair<const double*, std::size_t>> counts;
    double cum = 0.0;
    std::size_t k = 0;
    auto last = std::prev(parts_.end());
    for (auto it = parts_.begin(); it != parts_.end() && k < n_r; ++it) {
      cum += (it->second - it->first) / norm;
      std::size_t c = 0;
      while (k < n_r && (selectors[k] < cum || it == last)) {
        ++c;
        ++k;
      }
      if (c > 0) counts.emplace_back(&it->first, c);
    }

    // Stage 2: uniform positions inside the chosen parts.
    std::vector<double> out;
    out.reserve(n_r);
    for (const auto& [lo_ptr, c] : counts) {
      const double lo = *lo_ptr;
      const double hi = parts_.at(lo);
      const std::size_t first = out.size();
      for (std::size_t j = 0; j < c; ++j) {
        double u = lo + (hi - lo) * uniform01(rng);
        if (u >= hi) u = lo;  // rounding guard keeps u inside [lo, hi)
        out.push_back(u);
      }
      std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
    }
    return out;
  }

 private:
  ContainmentError not_contained(const Interval& v) const {
    return ContainmentError("interval-domain", "interval [" + std::to_string(v.lo) + ", " +
                                                   std::to_string(v.hi) +
                                                   ") is not inside the sampling domain");
  }

  // Neumaier-compensated running total.
  void accumulate(double delta) {
    const double t = total_ + delta;
    if (std::abs(total_) >= std::abs(delta)) {
      compensation_ += (total_ - t) + delta;
    } else {
      compensation_ += (delta - t) + total_;
    }
    total_ = t;
    if (parts_.empty()) total_ = compensation_ = 0.0;
  }

  std::map<double, double> parts_;
  double total_ = 1.0;
  double compensation_ = 0.0;
};

inline IntervalSet remove_interval(IntervalSet set, const Interval& victim) {
  set.remove(victim);
  return set;
}

/// Unsampled probability mass, i.e. epsilon = 1 - coverage.
inline double residual_measure(const IntervalSet& set) {
  return std::clamp(set.total_measure(), 0.0, 1.0);
}

inline std::vector<double> draw_sorted_uniform(const IntervalSet& set, std::size_t n_r, Rng& rng) {
  return set.draw_sorted_uniform(n_r, rng);
}

}  // namespace tailsampler
