#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tailsampler/errors.hpp"
#include "tailsampler/models.hpp"
#include "tailsampler/random.hpp"
#include "tailsampler/report.hpp"

namespace tailsampler {

/// Discovered outcomes and their accumulated probability.
class DiscoveryMap {
 public:
  /// Returns true when the outcome was new. Known outcomes keep their stored
  /// probability.
  bool insert(const Outcome& outcome, double probability) {
    auto [it, fresh] = probs_.try_emplace(outcome, probability);
    if (!fresh) return false;
    // Neumaier summation keeps coverage accurate over ~1e6 tiny increments.
    const double t = sum_ + probability;
    if (std::abs(sum_) >= std::abs(probability)) {
      comp_ += (sum_ - t) + probability;
    } else {
      comp_ += (probability - t) + sum_;
    }
    sum_ = t;
    return true;
  }

  bool contains(const Outcome& outcome) const { return probs_.count(outcome) != 0; }
  std::size_t size() const noexcept { return probs_.size(); }
  double coverage() const noexcept { return sum_ + comp_; }
  const std::map<Outcome, double>& entries() const noexcept { return probs_; }

 private:
  std::map<Outcome, double> probs_;
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct ShotResult {
  SampleRecord sampled;
  std::vector<SampleRecord> siblings;  ///< differ from `sampled` in the last label only
};

/// One projective measurement of every site in order. Each site consumes one
/// uniform number. `expansions` is incremented per site.
template <ConditionalModel M>
ShotResult draw_shot(const M& model, Rng& rng, std::uint64_t* expansions = nullptr) {
  const std::size_t n = model.n_sites();
  typename M::Handle h = model.root();
  Outcome labels;
  labels.reserve(n);
  double prefix_p = 1.0;
  std::vector<Branch<typename M::Handle>> branches;
  std::size_t chosen = 0;
  for (std::size_t site = 0; site < n; ++site) {
    branches = model.expand(h);
    if (expansions) ++*expansions;
    const double u = uniform01(rng);
    double cum = 0.0;
    chosen = branches.size();
    std::size_t last_positive = 0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
      if (branches[b].probability > 0.0) last_positive = b;
      cum += branches[b].probability;
      if (chosen == branches.size() && u < cum && branches[b].probability > 0.0) chosen = b;
    }
    if (chosen == branches.size()) chosen = last_positive;  // u beyond a rounded-down sum
    labels.push_back(static_cast<std::uint8_t>(chosen));
    if (site + 1 < n) {
      prefix_p *= branches[chosen].probability;
      h = std::move(branches[chosen].child);
    }
  }

  ShotResult out;
  out.sampled.outcome = labels;
  out.sampled.probability = prefix_p * branches[chosen].probability;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (b == chosen) continue;
    SampleRecord sib;
    sib.outcome = labels;
    sib.outcome.back() = static_cast<std::uint8_t>(b);
    sib.probability = prefix_p * branches[b].probability;
    out.siblings.push_back(std::move(sib));
  }
  return out;
}

struct StandardConfig {
  std::optional<std::uint64_t> shots;    ///< fixed shot budget
  std::optional<double> epsilon;         ///< stop once coverage >= 1 - epsilon
  std::uint64_t max_shots = 10'000'000;  ///< cap in epsilon mode
  bool record_siblings = true;
  bool count_shots = false;  ///< keep per-outcome shot counts in the report
};

template <ConditionalModel M>
SamplingReport run_standard(const M& model, const StandardConfig& config, std::uint64_t seed) {
  if (!config.shots && !config.epsilon) {
    throw PreconditionError("standard-sampler", "need a shot budget or a coverage target");
  }
  if (config.epsilon && !(*config.epsilon >= 0.0 && *config.epsilon < 1.0)) {
    throw RangeError("standard-sampler", "epsilon must lie in [0, 1)");
  }
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  SamplingReport report;
  report.method = "standard";
  report.alphabet = std::string(model.alphabet());
  report.n_sites = model.n_sites();
  report.seed = seed;
  report.target_epsilon = config.epsilon;
  report.config = {{"shots", config.shots ? nlohmann::json(*config.shots) : nlohmann::json(nullptr)},
                   {"max_shots", config.max_shots},
                   {"record_siblings", config.record_siblings}};

  DiscoveryMap found;
  const std::uint64_t budget = config.shots ? *config.shots : config.max_shots;
  auto add = [&](SampleRecord rec) {
    if (rec.probability > 0.0 && found.insert(rec.outcome, rec.probability)) {
      report.records.push_back(std::move(rec));
      return true;
    }
    return false;
  };
  auto reached = [&] { return config.epsilon && 1.0 - found.coverage() <= *config.epsilon; };

  while (report.counters.events < budget && !reached()) {
    ShotResult shot = draw_shot(model, rng, &report.counters.expansions);
    ++report.counters.events;
    if (config.count_shots) ++report.shot_counts[shot.sampled.outcome];
    bool changed = add(std::move(shot.sampled));
    if (!changed) ++report.counters.duplicate_draws;
    if (config.record_siblings) {
      for (auto& s : shot.siblings) changed = add(std::move(s)) || changed;
    }
    if (changed) {
      const auto now = std::chrono::steady_clock::now();
      report.trace.push_back({report.counters.events, report.counters.expansions,
                              std::min(found.coverage(), 1.0), report.records.size(),
                              std::chrono::duration_cast<std::chrono::nanoseconds>(now - start).count()});
    }
  }
  report.coverage = std::min(found.coverage(), 1.0);
  report.target_reached = reached();
  report.budget_exhausted = config.epsilon.has_value() && !report.target_reached;
  report.wallclock_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace tailsampler
