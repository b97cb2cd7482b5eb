#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tailsampler/errors.hpp"
#include "tailsampler/models.hpp"
#include "tailsampler/opes_sampler.hpp"
#include "tailsampler/report.hpp"
#include "tailsampler/standard_sampler.hpp"
#include "tailsampler/states.hpp"

namespace tailsampler {

// Natural logarithms throughout.

struct UniformTheory {
  double n_standard;  ///< expected shots to reach coverage 1 - eps, -D ln eps
  double n_opes;      ///< draws without replacement, D (1 - eps)
  double speedup;     ///< -ln eps / (1 - eps)
};

inline UniformTheory uniform_theory(double D, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw RangeError("analysis", "eps must lie in (0, 1)");
  if (!(D > 0.0)) throw RangeError("analysis", "D must be positive");
  const double s = -std::log(eps) / (1.0 - eps);
  return {-D * std::log(eps), D * (1.0 - eps), s};
}

struct HitProbability {
  double p_standard;
  double p_opes;
};

/// Probability that a fixed outcome of a uniform distribution over D states
/// has been seen after n draws, with and without replacement.
inline HitProbability uniform_hit_probability(double D, double n) {
  if (!(D >= 1.0) || !(n >= 0.0 && n <= D)) throw RangeError("analysis", "need 0 <= n <= D");
  const double p = n == 0.0 ? 0.0 : -std::expm1(n * std::log1p(-1.0 / D));
  return {p, n / D};
}

struct DecayTheory {
  double standard;  ///< (1/2) (1/eps)
  double opes;      ///< ln(1/eps) / (2 ln 2)
};

inline DecayTheory decay_theory(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw RangeError("analysis", "eps must lie in (0, 1)");
  return {0.5 / eps, std::log(1.0 / eps) / (2.0 * std::numbers::ln2)};
}

enum class ScalingLaw {
  inverse,  ///< cost ~ A eps^k, fitted in log-log; k is the exponent
  log,      ///< cost ~ a + b ln(1/eps), fitted in semilog; b is the slope
};

struct ScalingPoint {
  double eps;
  double cost;
};

struct ScalingFit {
  ScalingLaw law;
  std::vector<ScalingPoint> points;  ///< the points actually used
  double slope = 0.0;                ///< log-log exponent or semilog slope
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit. Points with eps below `floor` (where the distribution's
/// smallest probabilities make the law meaningless) are dropped first; what is
/// left must be at least 4 points spanning 1.5 decades.
inline ScalingFit fit_scaling(std::vector<ScalingPoint> points, ScalingLaw law, double floor = 0.0) {
  std::erase_if(points, [floor](const ScalingPoint& p) { return !(p.eps > floor); });
  for (const auto& p : points) {
    if (!(p.eps > 0.0 && p.eps < 1.0) || !(p.cost > 0.0)) {
      throw FitDomainError("analysis", "fit points need 0 < eps < 1 and positive cost");
    }
  }
  if (points.size() < 4) throw FitDomainError("analysis", "need at least 4 points above the floor");
  auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                      [](const auto& a, const auto& b) { return a.eps < b.eps; });
  if (std::log10(hi->eps / lo->eps) < 1.5 - 1e-12) {
    throw FitDomainError("analysis", "points must span at least 1.5 decades of eps");
  }

  std::vector<double> x, y;
  for (const auto& p : points) {
    if (law == ScalingLaw::inverse) {
      x.push_back(std::log(p.eps));
      y.push_back(std::log(p.cost));
    } else {
      x.push_back(std::log(1.0 / p.eps));
      y.push_back(p.cost);
    }
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  ScalingFit fit{law, std::move(points)};
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

/// Cost-to-eps pairs read off a coverage trace; thresholds never reached are skipped.
inline std::vector<ScalingPoint> cost_to_epsilon(const SamplingReport& report, std::span<const double> eps) {
  std::vector<ScalingPoint> out;
  for (double e : eps) {
    if (auto t = report.first_reaching(e)) out.push_back({e, static_cast<double>(t->expansions)});
  }
  return out;
}

inline double speedup(double cost_standard, double cost_opes) {
  if (!(cost_standard > 0.0) || !(cost_opes > 0.0)) throw RangeError("analysis", "costs must be positive");
  return cost_standard / cost_opes;
}

inline double image_mse(const GrayImage& reference, const GrayImage& reconstructed) {
  if (reference.side != reconstructed.side || reference.pixels.size() != reconstructed.pixels.size()) {
    throw ShapeError("analysis", "images differ in shape");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double d = reference.pixels[i] - reconstructed.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(reference.pixels.size());
}

// ---------------------------------------------------------------------------
// Stabilizer Renyi entropy.

/// Per-qubit 1-SRE of ((|0> + e^{i phi}|1>)/sqrt 2): -cos^2 ln|cos| - sin^2 ln|sin|.
inline double exact_sre_phase_state(double phi) {
  auto term = [](double c) {
    const double a = std::abs(c);
    return a < 1e-300 ? 0.0 : -c * c * std::log(a);
  };
  return term(std::cos(phi)) + term(std::sin(phi));
}

/// M_m from a full Pauli distribution: (1/(1-m)) ln(sum Pi^m) - n ln 2, with
/// the m -> 1 limit -sum Pi ln Pi - n ln 2.
inline double sre_from_distribution(std::span<const double> pi, std::size_t n, int m = 1) {
  double acc = 0.0;
  for (double p : pi) {
    if (p <= 0.0) continue;
    acc += m == 1 ? -p * std::log(p) : std::pow(p, m);
  }
  const double shift = static_cast<double>(n) * std::numbers::ln2;
  return m == 1 ? acc - shift : std::log(acc) / (1.0 - m) - shift;
}

enum class MagicMethod {
  standard,         ///< Monte-Carlo mean of -ln Pi over sampled strings
  opes_partial,     ///< exact sum over discovered strings only; lower bound up to eps
  opes_stratified,  ///< exact discovered part plus a sampled estimate of the residual
};

inline std::string to_string(MagicMethod m) {
  switch (m) {
    case MagicMethod::standard: return "standard";
    case MagicMethod::opes_partial: return "opes_partial";
    case MagicMethod::opes_stratified: return "opes_stratified";
  }
  return "?";
}

struct MagicEstimate {
  int order = 1;
  MagicMethod method = MagicMethod::standard;
  std::size_t n_super = 0;
  std::size_t n_r = 0;
  double estimate = 0.0;                 ///< mean over realizations
  std::vector<double> realizations;
  std::vector<double> residual_epsilon;  ///< per realization; 0 for standard sampling
  std::size_t realization_count() const noexcept { return realizations.size(); }
};

namespace detail {

// -sum_{discovered} Pi ln Pi, or sum Pi^m for m != 1.
inline double sre_partial(const SamplingReport& r, int m) {
  double acc = 0.0;
  for (const auto& rec : r.records) {
    acc += m == 1 ? -rec.probability * std::log(rec.probability) : std::pow(rec.probability, m);
  }
  return acc;
}

// Each superiteration s draws from the residual D_s it starts with, so
//   sum_{known before s} Pi h + eps_s * mean_{draws of s} h
// is an unbiased estimate of sum Pi h with h = -ln Pi. A draw's final-site
// sibling group is recorded whole, so h of the drawn leaf is replaced by its
// Pi-weighted mean over that group (same expectation, smaller variance).
// Superiterations are combined with weights 1/eps_s^2, which depend only on
// earlier draws.
inline double sre_stratified(const SamplingReport& r) {
  const auto& recs = r.records;
  std::vector<double> group_h(recs.size());
  for (std::size_t i = 0; i < recs.size();) {
    std::size_t j = i + 1;
    auto same_parent = [&](std::size_t a, std::size_t b) {
      return std::equal(recs[a].outcome.begin(), recs[a].outcome.end() - 1, recs[b].outcome.begin());
    };
    while (j < recs.size() && same_parent(i, j)) ++j;
    double mass = 0.0, acc = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      mass += recs[k].probability;
      acc += -recs[k].probability * std::log(recs[k].probability);
    }
    for (std::size_t k = i; k < j; ++k) group_h[k] = acc / mass;
    i = j;
  }

  double known = 0.0;
  std::size_t next = 0;
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < r.draw_records.size(); ++s) {
    const std::size_t offset = r.superiteration_record_offset[s];
    for (; next < offset; ++next) {
      const double p = recs[next].probability;
      known += -p * std::log(p);
    }
    const double eps = r.superiteration_start_residual[s];
    const auto& draws = r.draw_records[s];
    if (draws.empty() || !(eps > 0.0)) continue;
    double mean_h = 0.0;
    for (auto idx : draws) mean_h += group_h[idx];
    mean_h /= static_cast<double>(draws.size());
    const double w = 1.0 / (eps * eps);
    num += w * (known + eps * mean_h);
    den += w;
  }
  if (den == 0.0) return sre_partial(r, 1);
  return num / den;
}

}  // namespace detail

/// Estimates M_m of a qubit MPS by sampling its Pauli-string distribution with
/// budget n_super * n_r strings per realization. Realization j uses seed + j.
inline MagicEstimate sre_estimate(const PauliStringModel& model, MagicMethod method, std::size_t n_super,
                                  std::size_t n_r, std::uint64_t seed, std::size_t realizations = 1,
                                  int order = 1) {
  if (realizations == 0) throw RangeError("analysis", "need at least one realization");
  if (order < 1) throw RangeError("analysis", "SRE order must be positive");
  if (method == MagicMethod::opes_stratified && order != 1) {
    throw RangeError("analysis", "the stratified estimator is defined for order 1 only");
  }
  const double shift = static_cast<double>(model.n_sites()) * std::numbers::ln2;
  MagicEstimate est;
  est.order = order;
  est.method = method;
  est.n_super = n_super;
  est.n_r = n_r;
  for (std::size_t j = 0; j < realizations; ++j) {
    double value = 0.0;
    double eps = 0.0;
    if (method == MagicMethod::standard) {
      StandardConfig cfg;
      cfg.shots = n_super * n_r;
      cfg.record_siblings = false;
      Rng rng(seed + j);
      double acc = 0.0;
      for (std::uint64_t s = 0; s < *cfg.shots; ++s) {
        const double p = draw_shot(model, rng).sampled.probability;
        acc += order == 1 ? -std::log(p) : std::pow(p, order - 1);
      }
      acc /= static_cast<double>(*cfg.shots);
      value = order == 1 ? acc - shift : std::log(acc) / (1.0 - order) - shift;
    } else {
      OpesConfig cfg;
      cfg.nr_schedule = {n_r};
      cfg.max_superiterations = n_super;
      const SamplingReport r = run_opes(model, cfg, seed + j);
      eps = 1.0 - r.coverage;
      if (method == MagicMethod::opes_partial) {
        const double acc = detail::sre_partial(r, order);
        value = order == 1 ? acc - shift : std::log(acc) / (1.0 - order) - shift;
      } else {
        value = detail::sre_stratified(r) - shift;
      }
    }
    est.realizations.push_back(value);
    est.residual_epsilon.push_back(eps);
  }
  double mean = 0.0;
  for (double v : est.realizations) mean += v;
  est.estimate = mean / static_cast<double>(realizations);
  return est;
}

}  // namespace tailsampler
