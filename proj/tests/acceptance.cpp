// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tailsampler/tailsampler.hpp"

using namespace tailsampler;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Cost (expansions) to first reach residual <= eps, averaged over seeds.
template <class Run>
double mean_cost_to(double eps, std::size_t seeds, Run run) {
  std::vector<double> c;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto r = run(s);
    auto t = r.first_reaching(eps);
    if (!t) return std::nan("");
    c.push_back(static_cast<double>(t->expansions));
  }
  return mean(c);
}

// 1. Exactness oracle.
Verdict exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_p = 0.0, worst_b = 0.0;
  std::size_t records = 0;
  for (std::size_t k = 0; k < 50; ++k) {
    const std::size_t n = 2 + k % 9;
    auto v = oracle::random_state(n, 1000 + k);
    auto p = oracle::probabilities(v);
    auto bl = oracle::left_boundaries(p);
    BitstringModel m(mps_from_statevector(v, 2));
    auto r = run_opes(m, {.nr_schedule = {4, 32}, .max_superiterations = 12}, k);
    for (const auto& rec : r.records) {
      const auto i = outcome_index(rec.outcome, 2);
      worst_p = std::max(worst_p, std::abs(rec.probability - p[i]));
      worst_b = std::max(worst_b, std::abs(rec.interval->lo - bl[i]));
      ++records;
    }
  }
  const double secs = seconds_since(t0);
  return {worst_p < 1e-10 && worst_b < 1e-10 && secs < 30.0,
          fmt("%zu records, max |dp| = %.2e, max |db_l| = %.2e, %.1f s", records, worst_p, worst_b, secs)};
}

// 2. Non-repetition and exhaustion.
Verdict exhaustion() {
  std::size_t worst3 = 0, duplicates = 0, bound_violations = 0, runs = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto v = oracle::random_state(3, 2000 + s);
    BitstringModel m(mps_from_statevector(v, 2));
    for (std::vector<std::size_t> sched : {std::vector<std::size_t>{1}, {2, 8}, {100}}) {
      auto r = run_opes(m, {.nr_schedule = sched, .max_superiterations = 1000}, s);
      worst3 = std::max<std::size_t>(worst3, r.counters.events);
      if (!r.domain_exhausted) ++bound_violations;
      std::set<Outcome> seen;
      for (const auto& rec : r.records) duplicates += !seen.insert(rec.outcome).second;
      ++runs;
    }
  }
  std::size_t worst_ratio_violation = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto v = oracle::random_state(n, 3000 + 10 * n + s);
      BitstringModel m(mps_from_statevector(v, 2));
      auto r = run_opes(m, {.nr_schedule = {8, 64}, .max_superiterations = 100000}, s);
      if (!r.domain_exhausted || r.counters.events > (std::uint64_t{1} << (n - 1))) ++worst_ratio_violation;
      std::set<Outcome> seen;
      for (const auto& rec : r.records) duplicates += !seen.insert(rec.outcome).second;
      ++runs;
    }
  }
  return {worst3 <= 4 && duplicates == 0 && bound_violations == 0 && worst_ratio_violation == 0,
          fmt("n=3 max descents %zu, bound violations %zu, duplicates %zu over %zu runs", worst3,
              bound_violations + worst_ratio_violation, duplicates, runs)};
}

// 3. Scaling on the power-decay state n=10, d=1.01.
Verdict scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  BitstringModel m(power_decay_state(10, 1.01));
  const std::vector<double> eps{1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3};
  const std::size_t seeds = 10;
  std::vector<ScalingPoint> std_pts, opes_pts;
  std::vector<SamplingReport> std_runs, opes_runs;
  for (std::size_t s = 0; s < seeds; ++s) {
    std_runs.push_back(run_standard(m, {.epsilon = 1e-3}, 10 + s));
    opes_runs.push_back(run_opes(m, {.nr_schedule = {10, 100}, .max_superiterations = 1000, .epsilon = 1e-3}, 10 + s));
  }
  for (double e : eps) {
    std::vector<double> a, b;
    for (std::size_t s = 0; s < seeds; ++s) {
      a.push_back(static_cast<double>(std_runs[s].first_reaching(e)->expansions));
      b.push_back(static_cast<double>(opes_runs[s].first_reaching(e)->expansions));
    }
    std_pts.push_back({e, mean(a)});
    opes_pts.push_back({e, mean(b)});
  }
  auto fs = fit_scaling(std_pts, ScalingLaw::inverse);
  auto fo = fit_scaling(opes_pts, ScalingLaw::log);
  const double secs = seconds_since(t0);
  return {std::abs(fs.slope + 1.0) <= 0.15 && fo.r2 >= 0.95 && secs < 300.0,
          fmt("standard exponent %.3f (R2 %.3f), opes log-law R2 %.4f slope %.1f, %.1f s", fs.slope, fs.r2,
              fo.r2, fo.slope, secs)};
}

// 4. Uniform-law check at n=16.
Verdict uniform_law() {
  std::vector<double> p(1 << 16, 1.0 / 65536.0);
  BitstringModel m(state_from_distribution(p));
  const double D = 65536.0;
  std::vector<double> shots05, shots02, desc05, desc02;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto r = run_standard(m, {.epsilon = 0.2}, 500 + s);
    shots05.push_back(static_cast<double>(r.first_reaching(0.5)->events));
    shots02.push_back(static_cast<double>(r.first_reaching(0.2)->events));
    auto o = run_opes(m, {.nr_schedule = {100, 1000}, .max_superiterations = 1000, .epsilon = 0.2}, 500 + s);
    desc05.push_back(static_cast<double>(o.first_reaching(0.5)->events));
    desc02.push_back(static_cast<double>(o.first_reaching(0.2)->events));
  }
  // Each shot or descent yields a sibling pair, so one event stands for two
  // single-outcome draws of the closed-form laws.
  const auto t05 = uniform_theory(D, 0.5), t02 = uniform_theory(D, 0.2);
  const double rel05 = 2.0 * mean(shots05) / t05.n_standard - 1.0;
  const double rel02 = 2.0 * mean(shots02) / t02.n_standard - 1.0;
  const double expect05 = std::ceil(D * 0.5 / 2.0) * 2.0, expect02 = std::ceil(D * 0.8 / 2.0) * 2.0;
  double worst_desc = 0.0;
  for (std::size_t s = 0; s < 20; ++s) {
    worst_desc = std::max(worst_desc, std::abs(2.0 * desc05[s] - expect05));
    worst_desc = std::max(worst_desc, std::abs(2.0 * desc02[s] - expect02));
  }
  const double s_emp = mean(shots02) / mean(desc02);
  const double s_rel = s_emp / t02.speedup - 1.0;
  return {std::abs(rel05) <= 0.10 && std::abs(rel02) <= 0.10 && worst_desc <= 1.0 && std::abs(s_rel) <= 0.15,
          fmt("shots vs -D ln eps: %+.3f (0.5), %+.3f (0.2); opes descents max off %.0f; speedup %.3f vs %.3f",
              rel05, rel02, worst_desc, s_emp, t02.speedup)};
}

// 5. Gaussian speedup at n=10.
Verdict gaussian() {
  const std::vector<double> eps{1e-2, 1e-3, 1e-4};
  const std::size_t seeds = 5;
  bool monotone = true;
  double s_small = 0.0;
  std::string detail;
  for (double sigma2 : {1e-3, 1e-2, 1e-1}) {
    BitstringModel m(gaussian_state(10, sigma2));
    std::vector<SamplingReport> sr, orr;
    for (std::size_t s = 0; s < seeds; ++s) {
      sr.push_back(run_standard(m, {.epsilon = 1e-4}, 70 + s));
      orr.push_back(run_opes(m, {.nr_schedule = {10, 100}, .max_superiterations = 10000, .epsilon = 1e-4}, 70 + s));
    }
    double prev = 0.0;
    detail += fmt(" s2=%g:", sigma2);
    for (double e : eps) {
      const double cs = mean_cost_to(e, seeds, [&](std::size_t s) { return sr[s]; });
      const double co = mean_cost_to(e, seeds, [&](std::size_t s) { return orr[s]; });
      const double S = speedup(cs, co);
      if (!(S > prev)) monotone = false;
      prev = S;
      detail += fmt(" %.1f", S);
      if (sigma2 == 1e-3 && e == 1e-4) s_small = S;
    }
  }
  return {monotone && s_small >= 10.0, "S at eps 1e-2,1e-3,1e-4 ->" + detail};
}

// 6. FRQI reconstruction (m=4, n=9).
Verdict frqi() {
  const std::size_t m = 4;
  const GrayImage img = test_image(1 << m);
  BitstringModel model(frqi_encode(img));

  // Full OPES run: MSE along the trace, and at the end.
  auto full = run_opes(model, {.nr_schedule = {10, 100}, .max_superiterations = 10000, .epsilon = 1e-10}, 1);
  FrqiDecoder dec(m);
  std::size_t used = 0;
  bool monotone = true;
  double prev = image_mse(img, dec.image());
  for (const auto& t : full.trace) {
    for (; used < t.records; ++used) dec.add(full.records[used].outcome, full.records[used].probability);
    const double e = image_mse(img, dec.image());
    if (e > prev + 1e-18) monotone = false;
    prev = e;
  }
  const double final_mse = prev;

  // Equal evaluation budgets.
  const std::uint64_t budget = 300;
  std::size_t wins = 0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto sr = run_standard(model, {.shots = budget / model.n_sites()}, 40 + s);
    auto orr = run_opes(model, {.nr_schedule = {10, 100}, .max_superiterations = 10000, .epsilon = 0.0}, 40 + s);
    const auto at = orr.last_within(budget);
    const std::size_t n_rec = at ? at->records : 0;
    const GrayImage a = frqi_decode(sr.records, m);
    const GrayImage b = frqi_decode(std::vector(orr.records.begin(), orr.records.begin() + n_rec), m);
    const double es = image_mse(img, a), eo = image_mse(img, b);
    wins += eo <= es;
    per_seed += fmt(" %.3g/%.3g", eo, es);
  }
  return {monotone && final_mse < 1e-6 && full.coverage >= 1.0 - 1e-10 && wins >= 9,
          fmt("trace monotone %s, final MSE %.2e, OPES <= standard in %zu/10 (opes/std:", monotone ? "yes" : "no",
              final_mse, wins) +
              per_seed + ")"};
}

// 7. Magic estimation at n=10, phi=pi/4.
Verdict magic() {
  const double phi = std::numbers::pi / 4;
  // Oracle: per-qubit target against the 4^n brute force at n=3.
  auto small = phase_product_state(3, phi);
  const double brute = sre_from_distribution(oracle::pauli_distribution(to_statevector(small), 3), 3);
  const double oracle_err = std::abs(brute - 3 * exact_sre_phase_state(phi));

  const std::size_t n = 10;
  const double target = static_cast<double>(n) * exact_sre_phase_state(phi);
  PauliStringModel model(phase_product_state(n, phi));
  auto st = sre_estimate(model, MagicMethod::standard, 10, 100, 900, 10);
  auto op = sre_estimate(model, MagicMethod::opes_stratified, 10, 100, 900, 10);
  auto partial = sre_estimate(model, MagicMethod::opes_partial, 10, 100, 900, 1);
  std::size_t wins = 0;
  double es = 0.0, eo = 0.0;
  for (std::size_t j = 0; j < 10; ++j) {
    const double a = std::abs(op.realizations[j] - target), b = std::abs(st.realizations[j] - target);
    wins += a <= b;
    es += b * b;
    eo += a * a;
  }
  return {oracle_err < 1e-8 && wins >= 8,
          fmt("oracle |dM| %.1e; target %.4f; OPES closer in %zu/10; rms error opes %.4f std %.4f; "
              "plain partial sum %.3f at coverage %.3f",
              oracle_err, target, wins, std::sqrt(eo / 10), std::sqrt(es / 10), partial.realizations[0],
              1.0 - partial.residual_epsilon[0])};
}

// 8. Standard-sampler statistical soundness at n=6.
Verdict soundness() {
  auto v = oracle::random_state(6, 8080);
  auto p = oracle::probabilities(v);
  BitstringModel m(mps_from_statevector(v, 2));
  std::vector<ScalingPoint> pts;
  std::vector<double> tv_means;
  for (std::uint64_t N : {1000u, 10000u, 100000u}) {
    std::vector<double> tvs;
    for (std::uint64_t s = 0; s < 8; ++s) {
      auto r = run_standard(m, {.shots = N, .count_shots = true}, 60 + s);
      std::vector<double> freq(p.size(), 0.0);
      for (const auto& [o, c] : r.shot_counts) freq[outcome_index(o, 2)] = static_cast<double>(c) / N;
      tvs.push_back(oracle::total_variation(freq, p));
    }
    tv_means.push_back(mean(tvs));
  }
  // log-log slope over the three shot counts
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double Ns[3] = {1e3, 1e4, 1e5};
  for (int i = 0; i < 3; ++i) {
    const double x = std::log(Ns[i]), y = std::log(tv_means[static_cast<std::size_t>(i)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
  return {std::abs(slope + 0.5) <= 0.2 && tv_means[0] > tv_means[1] && tv_means[1] > tv_means[2],
          fmt("TV %.4f %.4f %.4f, slope %.3f", tv_means[0], tv_means[1], tv_means[2], slope)};
}

// 9. Cache transparency on the Gaussian benchmark.
Verdict cache_transparency() {
  BitstringModel m(gaussian_state(10, 1e-2));
  bool identical = true, cheaper = true;
  std::uint64_t on_cost = 0, off_cost = 0;
  for (bool keep : {true, false}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      OpesConfig on{.nr_schedule = {10, 100}, .max_superiterations = 1000, .epsilon = 1e-4,
                    .keep_cache_across_superiterations = keep};
      OpesConfig off = on;
      off.enable_cache = false;
      auto a = run_opes(m, on, 90 + s), b = run_opes(m, off, 90 + s);
      identical = identical && content_fingerprint(a) == content_fingerprint(b);
      cheaper = cheaper && a.counters.expansions < b.counters.expansions;
      on_cost += a.counters.expansions;
      off_cost += b.counters.expansions;
    }
  }
  return {identical && cheaper, fmt("content identical %s; expansions with cache %llu vs without %llu",
                                    identical ? "yes" : "no", static_cast<unsigned long long>(on_cost),
                                    static_cast<unsigned long long>(off_cost))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"exactness oracle", exactness},
      {"non-repetition and exhaustion", exhaustion},
      {"scaling reproduction", scaling},
      {"uniform-law check", uniform_law},
      {"gaussian speedup", gaussian},
      {"FRQI reconstruction", frqi},
      {"magic estimation", magic},
      {"standard-sampler soundness", soundness},
      {"cache transparency", cache_transparency},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
