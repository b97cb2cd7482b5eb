#pragma once

// Command-line front end. Kept in a header so the tests can drive it in-process.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tailsampler/tailsampler.hpp"

namespace tailsampler::cli {

/// Bad flag combinations detected after parsing; exit code 2 like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateOptions {
  std::string state = "gaussian";
  std::string in;  ///< MPS1 file, overrides --state
  std::string image;
  std::size_t n = 10;
  std::size_t side = 16;
  double sigma2 = 1e-2;
  double d = 1.01;
  double g = 1.0;
  double phi = std::numbers::pi / 4;
  double lambda = 0.0;
  std::size_t n_err = 0;  ///< 0 picks 2n
  std::uint64_t state_seed = 0;
};

struct SamplingOptions {
  std::string method = "opes";
  std::vector<std::size_t> nr{10, 100};
  std::size_t nsuper = 10;
  std::optional<double> coverage;
  std::optional<std::uint64_t> shots;
  std::uint64_t seed = 0;
  bool no_cache = false;
};

inline const std::vector<std::string> kStateNames{"gaussian", "decay", "dyadic", "uniform", "ghz",
                                                  "phase",    "ising", "frqi"};

inline void add_state_flags(CLI::App* c, StateOptions& s) {
  c->add_option("--state", s.state, "benchmark state")->check(CLI::IsMember(kStateNames));
  c->add_option("--in", s.in, "read the state from an MPS1 file instead");
  c->add_option("--n", s.n, "number of qubits")->check(CLI::PositiveNumber);
  c->add_option("--sigma2", s.sigma2, "gaussian variance");
  c->add_option("--d", s.d, "power-decay base");
  c->add_option("--g", s.g, "transverse field of the Ising chain");
  c->add_option("--phi", s.phi, "phase of the product state");
  c->add_option("--lambda", s.lambda, "leak weight of the noisy GHZ state");
  c->add_option("--n-err", s.n_err, "error strings of the noisy GHZ state (default 2n)");
  c->add_option("--state-seed", s.state_seed, "seed for randomised state construction");
  c->add_option("--image", s.image, "PGM image for the frqi state");
  c->add_option("--side", s.side, "side of the built-in test image when no --image is given");
}

inline void add_sampling_flags(CLI::App* c, SamplingOptions& o) {
  c->add_option("--method", o.method, "sampler")->check(CLI::IsMember({"standard", "opes"}));
  c->add_option("--nr", o.nr, "draws per superiteration, comma separated; the last repeats")->delimiter(',');
  c->add_option("--nsuper", o.nsuper, "maximum number of superiterations")->check(CLI::PositiveNumber);
  c->add_option("--coverage", o.coverage, "stop once this coverage is reached")->check(CLI::Range(0.0, 1.0));
  c->add_option("--shots", o.shots, "shot budget of the standard sampler");
  c->add_option("--seed", o.seed, "sampler seed");
  c->add_flag("--no-cache", o.no_cache, "disable the OPES prefix cache");
}

inline GrayImage image_for(const StateOptions& s) {
  if (!s.image.empty()) return load_pgm(s.image);
  return test_image(s.side);
}

inline nlohmann::json state_description(const StateOptions& s) {
  if (!s.in.empty()) return {{"file", s.in}};
  nlohmann::json j{{"name", s.state}, {"n", s.n}};
  if (s.state == "gaussian") j["sigma2"] = s.sigma2;
  if (s.state == "decay") j["d"] = s.d;
  if (s.state == "ising") j["g"] = s.g;
  if (s.state == "phase") j["phi"] = s.phi;
  if (s.state == "ghz") {
    j["lambda"] = s.lambda;
    j["n_err"] = s.n_err;
    j["state_seed"] = s.state_seed;
  }
  if (s.state == "frqi") {
    j.erase("n");
    if (s.image.empty()) {
      j["side"] = s.side;
    } else {
      j["image"] = s.image;
    }
  }
  return j;
}

inline MpsState build_state(const StateOptions& s) {
  if (!s.in.empty()) return load_mps(s.in);
  if (s.state == "gaussian") return gaussian_state(s.n, s.sigma2);
  if (s.state == "decay") return power_decay_state(s.n, s.d);
  if (s.state == "dyadic") return dyadic_decay_state(s.n);
  if (s.state == "uniform") {
    if (s.n > kMaxDenseQubits) throw RangeError("state-factory", "uniform state is built densely; n <= 20");
    return state_from_distribution(std::vector<double>(std::size_t{1} << s.n, 1.0));
  }
  if (s.state == "ghz") {
    const std::size_t n_err = s.lambda > 0.0 && s.n_err == 0 ? 2 * s.n : s.n_err;
    return noisy_ghz_state(s.n, s.lambda, n_err, s.state_seed);
  }
  if (s.state == "phase") return phase_product_state(s.n, s.phi);
  if (s.state == "ising") return ising_ground_state(s.n, s.g);
  if (s.state == "frqi") return frqi_encode(image_for(s));
  throw UsageError("unknown state " + s.state);
}

inline OpesConfig opes_config(const SamplingOptions& o) {
  OpesConfig c;
  c.nr_schedule = o.nr;
  c.max_superiterations = o.nsuper;
  if (o.coverage) c.epsilon = 1.0 - *o.coverage;
  c.enable_cache = !o.no_cache;
  return c;
}

inline StandardConfig standard_config(const SamplingOptions& o) {
  if (!o.shots && !o.coverage) throw UsageError("the standard sampler needs --shots or --coverage");
  StandardConfig c;
  c.shots = o.shots;
  if (o.coverage) c.epsilon = 1.0 - *o.coverage;
  return c;
}

template <ConditionalModel M>
SamplingReport run_method(const M& model, const SamplingOptions& o) {
  if (o.method == "standard") return run_standard(model, standard_config(o), o.seed);
  return run_opes(model, opes_config(o), o.seed);
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cli-harness", "cannot write " + path);
  f << text;
}

// Residual thresholds 0.5, 0.2, 0.1, 0.05, ... down to eps_min.
inline std::vector<double> epsilon_grid(double eps_min) {
  std::vector<double> out;
  for (int k = 0; k < 20; ++k) {
    for (double m : {5.0, 2.0, 1.0}) {
      const double e = m * std::pow(10.0, -(k + 1));
      if (e < eps_min * (1 - 1e-12)) return out;
      out.push_back(e);
    }
  }
  return out;
}

struct Paths {
  std::string out;
  std::string trace;
  std::string report;
  bool timing = false;
};

// ---------------------------------------------------------------------------

inline int cmd_gen_state(const StateOptions& s, const Paths& p, std::ostream& out) {
  if (p.out.empty()) throw UsageError("gen-state needs --out");
  MpsState mps = build_state(s);
  save_mps(p.out, mps);
  nlohmann::json j{{"library_version", kLibraryVersion},
                   {"state", state_description(s)},
                   {"n_sites", mps.n_sites()},
                   {"max_bond", mps.max_bond()},
                   {"file", p.out}};
  out << j.dump(2) << "\n";
  return 0;
}

inline int cmd_sample(const StateOptions& s, const SamplingOptions& o, const std::string& model_name,
                      const Paths& p, std::ostream& out) {
  MpsState mps = build_state(s);
  SamplingReport r;
  if (model_name == "pauli") {
    r = run_method(PauliStringModel(mps), o);
  } else {
    r = run_method(BitstringModel(mps), o);
  }
  auto j = to_json(r, {.include_costs = true, .include_config = true, .include_timing = p.timing});
  j["state"] = state_description(s);
  j["model"] = model_name;
  emit(p.out, j.dump(2) + "\n", out);
  return 0;
}

struct BenchmarkSuite {
  StateOptions state;
  double eps_min;
};

inline BenchmarkSuite suite_defaults(const std::string& name, const StateOptions& given,
                                     const std::map<std::string, bool>& set) {
  BenchmarkSuite b{given, 1e-3};
  auto keep = [&](const char* flag) { return set.count(flag) && set.at(flag); };
  if (name == "gaussian") {
    b.state.state = "gaussian";
    b.eps_min = 1e-4;
  } else if (name == "decay") {
    b.state.state = "decay";
  } else if (name == "uniform") {
    b.state.state = "uniform";
    if (!keep("--n")) b.state.n = 12;
    b.eps_min = 0.2;
  } else if (name == "ising") {
    b.state.state = "ising";
    b.eps_min = 1e-4;
  } else if (name == "ghz") {
    b.state.state = "ghz";
    if (!keep("--lambda")) b.state.lambda = 0.01;
    b.eps_min = 1e-4;
  }
  return b;
}

inline int cmd_benchmark(const std::string& suite, const StateOptions& s, const SamplingOptions& o,
                         const std::map<std::string, bool>& set, std::size_t seeds, const std::string& methods,
                         const Paths& p, std::ostream& out) {
  BenchmarkSuite b = suite_defaults(suite, s, set);
  if (o.coverage) b.eps_min = 1.0 - *o.coverage;
  if (!(b.eps_min > 0.0 && b.eps_min < 1.0)) throw UsageError("benchmark needs a coverage below 1");
  BitstringModel model(build_state(b.state));
  const auto grid = epsilon_grid(b.eps_min);

  std::ostringstream csv;
  csv << "method,epsilon,evaluations,wallclock_ns,seed\n";
  std::vector<std::string> list;
  if (methods == "both") {
    list = {"standard", "opes"};
  } else {
    list = {methods};
  }
  for (const auto& m : list) {
    for (std::size_t k = 0; k < seeds; ++k) {
      SamplingOptions run = o;
      run.method = m;
      run.seed = o.seed + k;
      run.coverage = 1.0 - b.eps_min;
      if (m == "opes" && !set.count("--nsuper")) run.nsuper = 1'000'000;
      SamplingReport r = run_method(model, run);
      for (double e : grid) {
        auto t = r.first_reaching(e);
        if (!t) continue;
        csv << m << "," << e << "," << t->expansions << "," << t->elapsed_ns << "," << run.seed << "\n";
      }
    }
  }
  emit(p.out, csv.str(), out);
  return 0;
}

inline int cmd_magic(const StateOptions& s, const SamplingOptions& o, std::size_t realizations, bool partial,
                     const Paths& p, std::ostream& out) {
  PauliStringModel model(phase_product_state(s.n, s.phi));
  MagicMethod method = MagicMethod::standard;
  if (o.method == "opes") method = partial ? MagicMethod::opes_partial : MagicMethod::opes_stratified;
  if (o.nr.size() != 1) throw UsageError("magic takes a single --nr value");
  auto e = sre_estimate(model, method, o.nsuper, o.nr.front(), o.seed, realizations);
  const double per_qubit = exact_sre_phase_state(s.phi);
  nlohmann::json j{{"library_version", kLibraryVersion},
                   {"n", s.n},
                   {"phi", s.phi},
                   {"seed", o.seed},
                   {"method", to_string(e.method)},
                   {"order", e.order},
                   {"n_super", e.n_super},
                   {"n_r", e.n_r},
                   {"estimate", e.estimate},
                   {"target", per_qubit * static_cast<double>(s.n)},
                   {"target_per_qubit", per_qubit},
                   {"estimate_per_qubit", e.estimate / static_cast<double>(s.n)},
                   {"realizations", e.realizations},
                   {"residual_epsilon", e.residual_epsilon}};
  emit(p.out, j.dump(2) + "\n", out);
  return 0;
}

inline int cmd_frqi(const StateOptions& s, const SamplingOptions& o, const Paths& p, std::ostream& out) {
  if (p.out.empty()) throw UsageError("frqi needs --out for the reconstructed image");
  const GrayImage reference = image_for(s);
  const std::size_t m = static_cast<std::size_t>(std::log2(static_cast<double>(reference.side)));
  BitstringModel model(frqi_encode(reference));
  SamplingReport r = run_method(model, o);

  FrqiDecoder dec(m);
  std::ostringstream csv;
  csv << "events,evaluations,coverage,mse\n";
  std::size_t next = 0;
  for (const auto& t : r.trace) {
    for (; next < t.records; ++next) dec.add(r.records[next].outcome, r.records[next].probability);
    csv << t.events << "," << t.expansions << "," << t.coverage << "," << image_mse(reference, dec.image()) << "\n";
  }
  for (; next < r.records.size(); ++next) dec.add(r.records[next].outcome, r.records[next].probability);
  save_pgm(p.out, dec.image());
  const std::string trace = p.trace.empty() ? p.out + ".mse.csv" : p.trace;
  emit(trace, csv.str(), out);
  if (!p.report.empty()) {
    auto j = to_json(r, {.include_costs = true, .include_config = true, .include_timing = p.timing});
    j["state"] = state_description(s);
    emit(p.report, j.dump(2) + "\n", out);
  }
  nlohmann::json summary{{"image", p.out},
                         {"trace", trace},
                         {"coverage", r.coverage},
                         {"evaluations", r.counters.expansions},
                         {"mse", image_mse(reference, dec.image())}};
  out << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"tail sampling of tensor-network states", "tailsampler"};
  app.set_version_flag("--version", std::string(kLibraryVersion));
  app.require_subcommand(1);

  StateOptions st;
  SamplingOptions so;
  Paths paths;
  std::string model_name = "bitstring";
  std::string suite = "gaussian";
  std::string methods = "both";
  std::size_t seeds = 1;
  std::size_t realizations = 10;
  bool partial = false;

  auto* gen = app.add_subcommand("gen-state", "build a benchmark state and save it as MPS1");
  add_state_flags(gen, st);
  gen->add_option("--out", paths.out, "output file")->required();

  auto* sample = app.add_subcommand("sample", "sample a state and write a JSON report");
  add_state_flags(sample, st);
  add_sampling_flags(sample, so);
  sample->add_option("--model", model_name, "what is sampled")->check(CLI::IsMember({"bitstring", "pauli"}));
  sample->add_option("--out", paths.out, "report file (default stdout)");
  sample->add_flag("--timing", paths.timing, "include wall-clock times in the report");

  auto* bench = app.add_subcommand("benchmark", "cost to reach residual thresholds, as CSV");
  add_state_flags(bench, st);
  add_sampling_flags(bench, so);
  bench->add_option("--suite", suite, "benchmark suite")
      ->check(CLI::IsMember({"gaussian", "decay", "uniform", "ising", "ghz"}));
  bench->add_option("--methods", methods, "samplers to run")->check(CLI::IsMember({"both", "standard", "opes"}));
  bench->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  bench->add_option("--out", paths.out, "CSV file (default stdout)");

  auto* magic = app.add_subcommand("magic", "estimate the stabilizer Renyi entropy of the phase product state");
  magic->add_option("--n", st.n, "number of qubits")->check(CLI::PositiveNumber);
  magic->add_option("--phi", st.phi, "phase");
  add_sampling_flags(magic, so);
  magic->add_option("--realizations", realizations, "independent repetitions")->check(CLI::PositiveNumber);
  magic->add_flag("--partial", partial, "with --method opes, report the bare partial sum");
  magic->add_option("--out", paths.out, "JSON file (default stdout)");

  auto* frqi = app.add_subcommand("frqi", "reconstruct a grayscale image from FRQI samples");
  frqi->add_option("--image", st.image, "input PGM (default: built-in test image)");
  frqi->add_option("--side", st.side, "side of the built-in test image");
  add_sampling_flags(frqi, so);
  frqi->add_option("--out", paths.out, "reconstructed PGM")->required();
  frqi->add_option("--trace", paths.trace, "MSE trace CSV (default <out>.mse.csv)");
  frqi->add_option("--report", paths.report, "also write the sampling report");
  frqi->add_flag("--timing", paths.timing, "include wall-clock times in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  if (const char* t = std::getenv("TAILSAMPLER_THREADS"); t && std::string(t) != "1") {
    err << "note: TAILSAMPLER_THREADS is reserved; running on 1 thread\n";
  }

  try {
    if (*gen) return cmd_gen_state(st, paths, out);
    if (*sample) return cmd_sample(st, so, model_name, paths, out);
    if (*bench) {
      std::map<std::string, bool> set{{"--n", bench->count("--n") > 0},
                                      {"--lambda", bench->count("--lambda") > 0},
                                      {"--nsuper", bench->count("--nsuper") > 0}};
      return cmd_benchmark(suite, st, so, set, seeds, methods, paths, out);
    }
    if (*magic) {
      if (magic->count("--method") == 0) so.method = "opes";
      if (magic->count("--nr") == 0) so.nr = {100};
      st.state = "phase";
      return cmd_magic(st, so, realizations, partial, paths, out);
    }
    if (*frqi) {
      if (frqi->count("--coverage") == 0 && !so.shots) so.coverage = 0.999;
      if (frqi->count("--nsuper") == 0) so.nsuper = 1'000'000;
      st.state = "frqi";
      return cmd_frqi(st, so, paths, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tailsampler::cli
