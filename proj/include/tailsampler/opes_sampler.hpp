#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tailsampler/errors.hpp"
#include "tailsampler/interval_set.hpp"
#include "tailsampler/models.hpp"
#include "tailsampler/random.hpp"
#include "tailsampler/report.hpp"

namespace tailsampler {

/// Left boundary and probability of the prefix currently being descended.
struct BoundaryState {
  double b_l = 0.0;
  double p = 1.0;
};

template <class Handle>
struct CacheEntry {
  Handle handle;
  Interval interval;         ///< sub-interval of [0, 1) owned by the prefix
  double probability = 0.0;  ///< prefix probability, the product of its conditionals
  double closed_form_lo = 0.0;
};

/// Measured prefixes and their contraction contexts, keyed by label string.
/// Lexicographic key order keeps every subtree contiguous.
template <class Handle>
class PrefixCache {
 public:
  using Entry = CacheEntry<Handle>;

  PrefixCache(std::size_t n_sites, std::size_t branch_count)
      : n_sites_(n_sites), k_(branch_count) {}

  std::size_t n_sites() const noexcept { return n_sites_; }
  std::size_t branch_count() const noexcept { return k_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  void clear() { entries_.clear(); }

  void insert(Outcome prefix, Entry entry) {
    if (prefix.empty()) throw PreconditionError("opes-sampler", "the root is never cached");
    entries_.insert_or_assign(std::move(prefix), std::move(entry));
  }

  const Entry* find(const Outcome& prefix) const {
    auto it = entries_.find(prefix);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Removes `prefix` and everything cached below it.
  void evict_subtree(const Outcome& prefix) {
    auto it = entries_.lower_bound(prefix);
    while (it != entries_.end() && it->first.size() >= prefix.size() &&
           std::equal(prefix.begin(), prefix.end(), it->first.begin())) {
      it = entries_.erase(it);
    }
  }

  /// Drops entries lying entirely to the left of `u`.
  void evict_before(double u) {
    std::erase_if(entries_, [u](const auto& kv) { return kv.second.interval.hi <= u; });
  }

  const std::map<Outcome, Entry>& entries() const noexcept { return entries_; }

 private:
  std::size_t n_sites_;
  std::size_t k_;
  std::map<Outcome, Entry> entries_;
};

template <class Handle>
struct PrefixHit {
  Outcome prefix;
  const CacheEntry<Handle>* entry;

  BoundaryState boundary() const { return {entry->interval.lo, entry->probability}; }
};

/// Deepest cached prefix whose interval contains `u`, found by walking down
/// from the root through cached children. A cached full string containing `u`
/// means `u` lies in removed space, which is a bookkeeping bug.
template <class Handle>
std::optional<PrefixHit<Handle>> longest_prefix_lookup(const PrefixCache<Handle>& cache, double u) {
  std::optional<PrefixHit<Handle>> best;
  Outcome key;
  while (key.size() < cache.n_sites()) {
    key.push_back(0);
    const CacheEntry<Handle>* next = nullptr;
    for (std::size_t b = 0; b < cache.branch_count(); ++b) {
      key.back() = static_cast<std::uint8_t>(b);
      const auto* e = cache.find(key);
      if (e && e->interval.contains(u)) {
        next = e;
        break;
      }
    }
    if (!next) break;
    if (key.size() == cache.n_sites()) {
      throw ConsistencyError("opes-sampler",
                             "a cached full string contains the draw, so the draw was already removed");
    }
    best = PrefixHit<Handle>{key, next};
  }
  return best;
}

struct OpesConfig {
  std::vector<std::size_t> nr_schedule{10, 100};  ///< n_r per superiteration; the last value repeats
  std::size_t max_superiterations = 10;
  std::optional<double> epsilon;
  bool keep_cache_across_superiterations = true;
  bool enable_cache = true;

  std::size_t nr_for(std::size_t superiteration) const {
    return nr_schedule[std::min(superiteration, nr_schedule.size() - 1)];
  }

  void validate() const {
    if (nr_schedule.empty()) throw RangeError("opes-sampler", "n_r schedule is empty");
    for (auto n : nr_schedule) {
      if (n == 0) throw RangeError("opes-sampler", "n_r must be at least 1");
    }
    if (max_superiterations == 0) throw RangeError("opes-sampler", "need at least one superiteration");
    if (epsilon && !(*epsilon >= 0.0 && *epsilon < 1.0)) {
      throw RangeError("opes-sampler", "epsilon must lie in [0, 1)");
    }
  }
};

/// Sampling state of one run: the punctured domain, the prefix cache and the
/// report being filled.
template <ConditionalModel M>
class OpesSampler {
 public:
  using Handle = typename M::Handle;

  OpesSampler(const M& model, OpesConfig config, std::uint64_t seed)
      : model_(model),
        config_(std::move(config)),
        rng_(seed),
        cache_(model.n_sites(), model.branch_count()),
        start_(std::chrono::steady_clock::now()) {
    config_.validate();
    report_.method = "opes";
    report_.alphabet = std::string(model.alphabet());
    report_.n_sites = model.n_sites();
    report_.seed = seed;
    report_.target_epsilon = config_.epsilon;
    report_.config = {{"nr_schedule", config_.nr_schedule},
                      {"max_superiterations", config_.max_superiterations},
                      {"keep_cache_across_superiterations", config_.keep_cache_across_superiterations}};
  }

  const IntervalSet& domain() const noexcept { return domain_; }
  const PrefixCache<Handle>& cache() const noexcept { return cache_; }
  const SamplingReport& report() const noexcept { return report_; }
  double coverage() const { return 1.0 - residual_measure(domain_); }

  /// Draws n_r sorted numbers from the domain and resolves each to a leaf.
  /// Returns the number of new records.
  std::size_t superiteration(std::size_t n_r) {
    report_.superiteration_start_residual.push_back(residual_measure(domain_));
    report_.superiteration_record_offset.push_back(report_.records.size());
    const std::vector<double> us = domain_.draw_sorted_uniform(n_r, rng_);
    const std::size_t before = report_.records.size();
    std::vector<std::size_t>& log = report_.draw_records.emplace_back();
    log.reserve(us.size());
    for (double u : us) {
      if (!domain_.contains(u)) {
        // Landed in a leaf recorded earlier in this superiteration.
        ++report_.counters.duplicate_draws;
        log.push_back(record_containing(u));
        continue;
      }
      if (config_.enable_cache && !config_.keep_cache_across_superiterations) cache_.evict_before(u);
      log.push_back(descend(u));
    }
    if (!config_.keep_cache_across_superiterations) cache_.clear();
    ++report_.counters.superiterations;
    report_.superiteration_coverage.push_back(coverage());
    return report_.records.size() - before;
  }

  SamplingReport run() {
    while (!domain_.empty()) {
      if (config_.epsilon && residual_measure(domain_) <= *config_.epsilon) break;
      if (report_.counters.superiterations >= config_.max_superiterations) break;
      superiteration(config_.nr_for(report_.counters.superiterations));
    }
    return finish();
  }

  SamplingReport finish() {
    report_.coverage = coverage();
    report_.domain_exhausted = domain_.empty();
    report_.target_reached =
        config_.epsilon ? residual_measure(domain_) <= *config_.epsilon : report_.domain_exhausted;
    report_.budget_exhausted = config_.epsilon.has_value() && !report_.target_reached;
    report_.residual_domain = domain_.parts();
    report_.wallclock_ns = elapsed_ns();
    return report_;
  }

 private:
  std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_)
        .count();
  }

  std::size_t record_containing(double u) const {
    auto it = by_lo_.upper_bound(u);
    if (it == by_lo_.begin()) throw ConsistencyError("opes-sampler", "draw outside every record");
    --it;
    const auto& rec = report_.records[it->second];
    if (!rec.interval->contains(u)) {
      throw ConsistencyError("opes-sampler", "removed draw is not inside a recorded interval");
    }
    return it->second;
  }

  /// Resolves one admissible u to its leaf, records the leaf and its final-site
  /// siblings, and returns the index of the record containing u.
  std::size_t descend(double u) {
    const std::size_t n = model_.n_sites();
    Outcome prefix;
    Handle handle = model_.root();
    double lo = 0.0, hi = 1.0, p = 1.0, cf = 0.0;
    if (config_.enable_cache) {
      if (auto hit = longest_prefix_lookup(cache_, u)) {
        ++report_.counters.cache_hits;
        prefix = hit->prefix;
        handle = hit->entry->handle;
        lo = hit->entry->interval.lo;
        hi = hit->entry->interval.hi;
        p = hit->entry->probability;
        cf = hit->entry->closed_form_lo;
      }
    }

    std::vector<double> edge;
    std::vector<double> cum;
    while (true) {
      auto branches = model_.expand(handle);
      ++report_.counters.expansions;
      const std::size_t k = branches.size();

      // Sub-interval edges of the children. Trailing zero-probability children
      // collapse onto hi so the children tile [lo, hi) exactly.
      edge.assign(k + 1, hi);
      cum.assign(k + 1, 0.0);
      std::size_t last_positive = 0;
      for (std::size_t b = 0; b < k; ++b) {
        cum[b + 1] = cum[b] + branches[b].probability;
        if (branches[b].probability > 0.0) last_positive = b;
      }
      edge[0] = lo;
      for (std::size_t b = 1; b <= last_positive; ++b) {
        edge[b] = std::clamp(lo + p * cum[b], edge[b - 1], hi);
      }

      std::size_t chosen = k;
      for (std::size_t b = 0; b < k; ++b) {
        if (edge[b + 1] > edge[b] && u < edge[b + 1]) {
          chosen = b;
          break;
        }
      }
      if (chosen == k) throw ConsistencyError("opes-sampler", "draw fell outside its prefix interval");

      const std::size_t depth = prefix.size();
      if (depth + 1 == n) return record_leaves(prefix, branches, edge, cum, p, cf, chosen);

      if (config_.enable_cache) {
        const std::size_t first = config_.keep_cache_across_superiterations ? 0 : chosen;
        for (std::size_t b = first; b < k; ++b) {
          if (!(edge[b + 1] > edge[b])) continue;
          Outcome key = prefix;
          key.push_back(static_cast<std::uint8_t>(b));
          cache_.insert(std::move(key), {branches[b].child, {edge[b], edge[b + 1]},
                                         p * branches[b].probability, cf + p * cum[b]});
        }
      }
      prefix.push_back(static_cast<std::uint8_t>(chosen));
      cf += p * cum[chosen];
      p *= branches[chosen].probability;
      lo = edge[chosen];
      hi = edge[chosen + 1];
      handle = std::move(branches[chosen].child);
    }
  }

  std::size_t record_leaves(const Outcome& prefix, const std::vector<Branch<Handle>>& branches,
                            const std::vector<double>& edge, const std::vector<double>& cum, double p,
                            double cf, std::size_t chosen) {
    ++report_.counters.events;
    std::size_t chosen_index = 0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
      if (!(edge[b + 1] > edge[b])) continue;
      SampleRecord rec;
      rec.outcome = prefix;
      rec.outcome.push_back(static_cast<std::uint8_t>(b));
      rec.probability = p * branches[b].probability;
      rec.interval = Interval{edge[b], edge[b + 1]};
      domain_.remove(*rec.interval);
      const double closed_form = cf + p * cum[b];
      report_.closed_form_max_deviation =
          std::max(report_.closed_form_max_deviation, std::abs(closed_form - edge[b]));
      const std::size_t idx = report_.records.size();
      if (b == chosen) chosen_index = idx;
      by_lo_.emplace(edge[b], idx);
      report_.records.push_back(std::move(rec));
    }
    if (config_.enable_cache) evict_exhausted_ancestors(prefix);
    report_.trace.push_back({report_.counters.events, report_.counters.expansions, coverage(),
                             report_.records.size(), elapsed_ns()});
    return chosen_index;
  }

  // Walks up from the parent of the recorded leaves and drops every ancestor
  // (with its subtree) whose interval no longer meets the domain.
  void evict_exhausted_ancestors(Outcome prefix) {
    while (!prefix.empty()) {
      const auto* e = cache_.find(prefix);
      if (e && domain_.intersects(e->interval.lo, e->interval.hi)) break;
      if (e) cache_.evict_subtree(prefix);
      prefix.pop_back();
    }
  }

  const M& model_;
  OpesConfig config_;
  Rng rng_;
  IntervalSet domain_;
  PrefixCache<Handle> cache_;
  std::map<double, std::size_t> by_lo_;
  SamplingReport report_;
  std::chrono::steady_clock::time_point start_;
};

/// One superiteration on an existing sampler; see OpesSampler::superiteration.
template <ConditionalModel M>
std::size_t run_superiteration(OpesSampler<M>& sampler, std::size_t n_r) {
  return sampler.superiteration(n_r);
}

template <ConditionalModel M>
SamplingReport run_opes(const M& model, const OpesConfig& config, std::uint64_t seed) {
  OpesSampler<M> sampler(model, config, seed);
  return sampler.run();
}

}  // namespace tailsampler
