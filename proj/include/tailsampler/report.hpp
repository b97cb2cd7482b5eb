#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailsampler/interval_set.hpp"
#include "tailsampler/outcome.hpp"

namespace tailsampler {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

/// One discovered outcome. The standard sampler learns p but not the interval.
struct SampleRecord {
  Outcome outcome;
  double probability = 0.0;
  std::optional<Interval> interval;
};

/// Deterministic cost counters. `expansions` counts conditional-probability
/// evaluations (one per site expansion) and is the primary cost metric.
struct CostCounters {
  std::uint64_t expansions = 0;
  std::uint64_t events = 0;  ///< shots (standard) or leaf descents (opes)
  std::uint64_t duplicate_draws = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t superiterations = 0;
};

/// State of a run after one event (a shot or a leaf descent). Recorded
/// whenever coverage changes.
struct TracePoint {
  std::uint64_t events = 0;
  std::uint64_t expansions = 0;
  double coverage = 0.0;
  std::size_t records = 0;      ///< records known at this point
  std::int64_t elapsed_ns = 0;  ///< wall-clock since run start; never serialized by default
};

inline constexpr double kCoverageSlack = 1e-12;

struct SamplingReport {
  std::string method;
  std::string alphabet;
  std::size_t n_sites = 0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  std::vector<SampleRecord> records;
  std::vector<TracePoint> trace;
  CostCounters counters;
  double coverage = 0.0;

  std::optional<double> target_epsilon;
  bool target_reached = false;
  bool budget_exhausted = false;
  bool domain_exhausted = false;

  // standard sampler
  std::map<Outcome, std::uint64_t> shot_counts;

  // opes sampler
  std::vector<double> superiteration_coverage;
  std::vector<double> superiteration_start_residual;
  std::vector<std::size_t> superiteration_record_offset;  ///< records known when each superiteration began
  /// For every superiteration, the record index each draw resolved to.
  std::vector<std::vector<std::size_t>> draw_records;
  std::vector<Interval> residual_domain;
  double closed_form_max_deviation = 0.0;

  std::int64_t wallclock_ns = 0;

  /// Cost (expansions) at the first event reaching coverage >= 1 - eps.
  /// Coverage is a float sum of probabilities, so thresholds are compared
  /// with an absolute slack of kCoverageSlack.
  std::optional<TracePoint> first_reaching(double eps) const {
    for (const auto& t : trace) {
      if (1.0 - t.coverage <= eps + kCoverageSlack) return t;
    }
    return std::nullopt;
  }

  /// Last trace point whose cost does not exceed `budget` expansions.
  std::optional<TracePoint> last_within(std::uint64_t budget) const {
    std::optional<TracePoint> best;
    for (const auto& t : trace) {
      if (t.expansions > budget) break;
      best = t;
    }
    return best;
  }
};

struct JsonOptions {
  bool include_costs = true;    ///< counters and per-event expansion counts
  bool include_config = true;   ///< seed, config, library version
  bool include_timing = false;  ///< wall-clock values
};

inline nlohmann::json to_json(const SamplingReport& r, const JsonOptions& opt = {}) {
  using nlohmann::json;
  json j;
  j["method"] = r.method;
  j["n_sites"] = r.n_sites;
  if (opt.include_config) {
    j["library_version"] = std::string(kLibraryVersion);
    j["seed"] = r.seed;
    j["config"] = r.config;
  }
  json recs = json::array();
  for (const auto& rec : r.records) {
    json e;
    e["outcome"] = format_outcome(rec.outcome, r.alphabet);
    e["p"] = rec.probability;
    if (rec.interval) {
      e["b_l"] = rec.interval->lo;
      e["b_r"] = rec.interval->hi;
    }
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  j["coverage"] = r.coverage;
  json trace = json::array();
  for (const auto& t : r.trace) {
    json e = {{"events", t.events}, {"coverage", t.coverage}, {"records", t.records}};
    if (opt.include_costs) e["expansions"] = t.expansions;
    if (opt.include_timing) e["elapsed_ns"] = t.elapsed_ns;
    trace.push_back(std::move(e));
  }
  j["coverage_trace"] = std::move(trace);
  if (!r.superiteration_coverage.empty()) j["superiteration_coverage"] = r.superiteration_coverage;
  if (!r.shot_counts.empty()) {
    json counts = json::object();
    for (const auto& [o, c] : r.shot_counts) counts[format_outcome(o, r.alphabet)] = c;
    j["shot_counts"] = std::move(counts);
  }
  if (r.method == "opes") {
    json dom = json::array();
    for (const auto& p : r.residual_domain) dom.push_back({p.lo, p.hi});
    j["residual_domain"] = std::move(dom);
    j["closed_form_max_deviation"] = r.closed_form_max_deviation;
  }
  j["target_epsilon"] = r.target_epsilon ? json(*r.target_epsilon) : json(nullptr);
  j["target_reached"] = r.target_reached;
  j["budget_exhausted"] = r.budget_exhausted;
  j["domain_exhausted"] = r.domain_exhausted;
  if (opt.include_costs) {
    j["counters"] = {{"expansions", r.counters.expansions},
                     {"events", r.counters.events},
                     {"duplicate_draws", r.counters.duplicate_draws},
                     {"cache_hits", r.counters.cache_hits},
                     {"superiterations", r.counters.superiterations}};
  }
  if (opt.include_timing) j["wallclock_ns"] = r.wallclock_ns;
  return j;
}

/// Sampling content only: records, coverage trace and residual domain.
inline std::string content_fingerprint(const SamplingReport& r) {
  return to_json(r, {.include_costs = false, .include_config = false, .include_timing = false}).dump();
}

}  // namespace tailsampler
