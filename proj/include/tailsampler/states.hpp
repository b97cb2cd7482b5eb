#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailsampler/errors.hpp"
#include "tailsampler/mps.hpp"
#include "tailsampler/outcome.hpp"
#include "tailsampler/random.hpp"

namespace tailsampler {

/// Largest register that the dense-first factories build.
inline constexpr std::size_t kMaxDenseQubits = 20;

namespace detail {

inline void check_dense_size(std::size_t n, std::size_t limit, const char* what) {
  if (n == 0) throw RangeError("state-factory", std::string(what) + ": need at least one qubit");
  if (n > limit) {
    throw RangeError("state-factory", std::string(what) + ": n = " + std::to_string(n) +
                                          " exceeds the dense limit " + std::to_string(limit));
  }
}

inline std::vector<Complex> normalized_amplitudes(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw RangeError("state-factory", "weights do not define a distribution");
  }
  std::vector<Complex> amps(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) amps[i] = std::sqrt(weights[i] / total);
  // One more pass so the norm is 1 to rounding, not to the accumulated sum.
  double norm = 0.0;
  for (const auto& a : amps) norm += std::norm(a);
  const double fix = 1.0 / std::sqrt(norm);
  for (auto& a : amps) a *= fix;
  return amps;
}

}  // namespace detail

/// Real nonnegative amplitudes sqrt(p_i) over n qubits.
inline MpsState state_from_distribution(std::span<const double> probs) {
  return mps_from_statevector(detail::normalized_amplitudes(probs), 2);
}

/// Amplitudes proportional to sqrt(exp(-x_i^2 / (2 sigma2))), x_i = (i - i_bar)/(2^n - 1).
inline std::vector<double> gaussian_distribution(std::size_t n, double sigma2,
                                                 std::optional<double> i_bar = std::nullopt) {
  detail::check_dense_size(n, kMaxDenseQubits, "gaussian_state");
  if (!(sigma2 > 0.0)) throw RangeError("state-factory", "sigma2 must be positive");
  const std::size_t dim = std::size_t{1} << n;
  const double center = i_bar.value_or(static_cast<double>((dim >> 1) - 1));
  const double scale = static_cast<double>(dim - 1);
  std::vector<double> p(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double x = (static_cast<double>(i) - center) / scale;
    p[i] = std::exp(-x * x / (2.0 * sigma2));
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

inline MpsState gaussian_state(std::size_t n, double sigma2, std::optional<double> i_bar = std::nullopt) {
  return state_from_distribution(gaussian_distribution(n, sigma2, i_bar));
}

/// p_i = d^{-i} / N for i = 1..2^n.
inline std::vector<double> power_decay_distribution(std::size_t n, double d) {
  detail::check_dense_size(n, kMaxDenseQubits, "power_decay_state");
  if (!(d > 1.0)) throw RangeError("state-factory", "decay base must exceed 1");
  const std::size_t dim = std::size_t{1} << n;
  if (static_cast<double>(dim) * std::log(d) > std::log(std::numeric_limits<double>::max())) {
    throw RangeError("state-factory", "d^(2^n) is not representable in double precision");
  }
  std::vector<double> p(dim);
  const double ld = std::log(d);
  // Evaluated relative to p_1 so nothing underflows before normalization.
  for (std::size_t i = 0; i < dim; ++i) p[i] = std::exp(-static_cast<double>(i) * ld);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

inline MpsState power_decay_state(std::size_t n, double d) {
  return state_from_distribution(power_decay_distribution(n, d));
}

/// p_i = 2^{-i} for i = 1..2^n - 1 and p_{2^n} = 2^{-(2^n - 1)}. Exact in binary.
inline std::vector<double> dyadic_decay_distribution(std::size_t n) {
  if (n == 0 || n > 6) throw RangeError("state-factory", "dyadic distribution needs 1 <= n <= 6");
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> p(dim);
  for (std::size_t i = 1; i < dim; ++i) p[i - 1] = std::ldexp(1.0, -static_cast<int>(i));
  p[dim - 1] = std::ldexp(1.0, -static_cast<int>(dim - 1));
  return p;
}

inline MpsState dyadic_decay_state(std::size_t n) {
  return state_from_distribution(dyadic_decay_distribution(n));
}

/// Distribution left after the first `removed` entries are known, rescaled to
/// sum to one.
inline std::vector<double> renormalized_tail(std::span<const double> p, std::size_t removed) {
  if (removed >= p.size()) throw RangeError("state-factory", "nothing left after removal");
  double rest = 0.0;
  for (std::size_t i = removed; i < p.size(); ++i) rest += p[i];
  std::vector<double> out(p.begin() + static_cast<std::ptrdiff_t>(removed), p.end());
  for (auto& v : out) v /= rest;
  return out;
}

/// GHZ peaks with weight (1 - lambda)/2 each, plus `n_err` random strings at
/// Hamming distance 1 or 2 from a peak carrying weights lambda * 2^{-j} / N.
inline std::vector<double> noisy_ghz_distribution(std::size_t n, double lambda, std::size_t n_err,
                                                  std::uint64_t seed) {
  detail::check_dense_size(n, kMaxDenseQubits, "noisy_ghz_state");
  if (n < 2) throw RangeError("state-factory", "GHZ needs at least two qubits");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw RangeError("state-factory", "lambda must lie in [0, 1)");
  const std::size_t dim = std::size_t{1} << n;
  const std::size_t candidates = 2 * (n + n * (n - 1) / 2);
  if (lambda > 0.0 && n_err == 0) throw RangeError("state-factory", "leak needs error strings");
  if (n_err > candidates) throw RangeError("state-factory", "too many error strings for this n");

  std::vector<double> p(dim, 0.0);
  p[0] = p[dim - 1] = (1.0 - lambda) / 2.0;
  if (lambda == 0.0) return p;

  Rng rng(seed);
  std::set<std::uint64_t> chosen;
  std::vector<std::uint64_t> order;
  while (order.size() < n_err) {
    std::uint64_t idx = (rng() & 1) ? dim - 1 : 0;
    idx ^= std::uint64_t{1} << (rng() % n);
    if (rng() & 1) idx ^= std::uint64_t{1} << (rng() % n);
    if (idx == 0 || idx == dim - 1 || !chosen.insert(idx).second) continue;
    order.push_back(idx);
  }
  double wsum = 0.0;
  for (std::size_t j = 0; j < n_err; ++j) wsum += std::ldexp(1.0, -static_cast<int>(j));
  for (std::size_t j = 0; j < n_err; ++j) {
    p[order[j]] = lambda * std::ldexp(1.0, -static_cast<int>(j)) / wsum;
  }
  return p;
}

inline MpsState noisy_ghz_state(std::size_t n, double lambda, std::size_t n_err, std::uint64_t seed) {
  return state_from_distribution(noisy_ghz_distribution(n, lambda, n_err, seed));
}

/// ((|0> + e^{i phi}|1>)/sqrt 2)^{(x) n} with bond dimension 1.
inline MpsState phase_product_state(std::size_t n, double phi) {
  if (n == 0) throw RangeError("state-factory", "need at least one qubit");
  const double h = 1.0 / std::numbers::sqrt2;
  std::vector<DenseTensor> sites;
  sites.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sites.emplace_back(Shape{1, 2, 1}, std::vector<Complex>{h, std::polar(h, phi)});
  }
  return MpsState(std::move(sites), 0);
}

// ---------------------------------------------------------------------------
// Transverse-field Ising chain, open boundaries.

struct IsingGroundState {
  double energy = 0.0;
  std::vector<double> vector;
};

namespace detail {

/// y = H x for H = J(-sum sz sz - g sum sx), basis index big-endian (site 0 = top bit).
inline void ising_apply(std::size_t n, double g, double J, const std::vector<double>& x,
                        std::vector<double>& y) {
  const std::size_t dim = x.size();
  for (std::size_t s = 0; s < dim; ++s) {
    // Bond i couples bits i and i+1; equal neighbours give sz sz = +1.
    const std::size_t flips = s ^ (s >> 1);
    const int unequal = std::popcount(flips & ((std::size_t{1} << (n - 1)) - 1));
    const double zz = static_cast<double>(static_cast<int>(n - 1) - 2 * unequal);
    double acc = -J * zz * x[s];
    for (std::size_t q = 0; q < n; ++q) acc -= J * g * x[s ^ (std::size_t{1} << q)];
    y[s] = acc;
  }
}

}  // namespace detail

/// Ground vector by Lanczos with full reorthogonalization, started from the
/// uniform vector. The start is invariant under the global spin flip, and so is
/// H, so the whole Krylov space stays in the symmetric sector; at g = 0 this
/// selects (|0...0> + |1...1>)/sqrt 2.
inline IsingGroundState ising_ground_vector(std::size_t n, double g, double J = 1.0) {
  detail::check_dense_size(n, 14, "ising_ground_state");
  if (n < 2) throw RangeError("state-factory", "Ising chain needs at least two sites");
  if (!(J > 0.0)) throw RangeError("state-factory", "J must be positive");
  const std::size_t dim = std::size_t{1} << n;
  const std::size_t max_iter = std::min<std::size_t>(dim, 300);

  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<double> w(dim);
  double energy = 0.0, prev_energy = std::numeric_limits<double>::infinity();
  Eigen::VectorXd ritz;

  for (std::size_t it = 0; it < max_iter; ++it) {
    basis.push_back(v);
    detail::ising_apply(n, g, J, v, w);
    double a = 0.0;
    for (std::size_t s = 0; s < dim; ++s) a += w[s] * v[s];
    alpha.push_back(a);
    // Full reorthogonalization, twice for stability.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double c = 0.0;
        for (std::size_t s = 0; s < dim; ++s) c += w[s] * b[s];
        for (std::size_t s = 0; s < dim; ++s) w[s] -= c * b[s];
      }
    }
    double bnorm = 0.0;
    for (double x : w) bnorm += x * x;
    bnorm = std::sqrt(bnorm);

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    energy = es.eigenvalues()(0);
    ritz = es.eigenvectors().col(0);
    const double residual = bnorm * std::abs(ritz(m - 1));
    if (bnorm < 1e-12 || residual < 1e-13 || (it > 4 && std::abs(energy - prev_energy) < 1e-15)) break;
    prev_energy = energy;
    beta.push_back(bnorm);
    for (std::size_t s = 0; s < dim; ++s) v[s] = w[s] / bnorm;
  }

  IsingGroundState out;
  out.energy = energy;
  out.vector.assign(dim, 0.0);
  for (std::size_t j = 0; j < static_cast<std::size_t>(ritz.size()); ++j) {
    for (std::size_t s = 0; s < dim; ++s) out.vector[s] += ritz(static_cast<Eigen::Index>(j)) * basis[j][s];
  }
  // Symmetrize under the global flip, fix the sign and normalize.
  for (std::size_t s = 0; s < dim / 2; ++s) {
    const double avg = 0.5 * (out.vector[s] + out.vector[dim - 1 - s]);
    out.vector[s] = out.vector[dim - 1 - s] = avg;
  }
  double sum = 0.0, norm = 0.0;
  for (double x : out.vector) {
    sum += x;
    norm += x * x;
  }
  const double scale = (sum < 0.0 ? -1.0 : 1.0) / std::sqrt(norm);
  for (auto& x : out.vector) x *= scale;
  return out;
}

inline MpsState ising_ground_state(std::size_t n, double g, double J = 1.0) {
  const auto gs = ising_ground_vector(n, g, J);
  std::vector<Complex> amps(gs.vector.begin(), gs.vector.end());
  return mps_from_statevector(amps, 2);
}

// ---------------------------------------------------------------------------
// FRQI images.

/// Square grayscale image, values in [0, 1], row-major.
struct GrayImage {
  std::size_t side = 0;
  std::vector<double> pixels;

  double& at(std::size_t row, std::size_t col) { return pixels[row * side + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * side + col]; }
};

namespace detail {

inline std::size_t image_order(const GrayImage& img) {
  if (img.side == 0 || img.pixels.size() != img.side * img.side) {
    throw ShapeError("state-factory", "image must be square");
  }
  std::size_t m = 0;
  while ((std::size_t{1} << m) < img.side) ++m;
  if ((std::size_t{1} << m) != img.side || m == 0) {
    throw ShapeError("state-factory", "image side must be a power of two, at least 2");
  }
  return m;
}

}  // namespace detail

/// Color qubit first, then 2m position qubits (pixel index big-endian).
/// Amplitude of (c, i) is 2^{-m} cos(theta_i) for c = 0 and 2^{-m} sin(theta_i)
/// for c = 1, with theta_i = (pi/2) g_i.
inline std::vector<Complex> frqi_statevector(const GrayImage& img) {
  const std::size_t m = detail::image_order(img);
  const std::size_t pixels = img.pixels.size();
  std::vector<Complex> amps(2 * pixels);
  const double scale = std::ldexp(1.0, -static_cast<int>(m));
  for (std::size_t i = 0; i < pixels; ++i) {
    const double g = img.pixels[i];
    if (!(g >= 0.0 && g <= 1.0)) throw RangeError("state-factory", "pixel values must lie in [0, 1]");
    const double theta = std::numbers::pi / 2.0 * g;
    amps[i] = scale * std::cos(theta);
    amps[pixels + i] = scale * std::sin(theta);
  }
  return amps;
}

inline MpsState frqi_encode(const GrayImage& img) { return mps_from_statevector(frqi_statevector(img), 2); }

/// Rebuilds an image from discovered (outcome, probability) pairs of an FRQI
/// state. Every pixel's two probabilities sum to 1/M, so one of them fixes the
/// angle; pixels with neither known decode to 0.
class FrqiDecoder {
 public:
  explicit FrqiDecoder(std::size_t m) : m_(m), pixels_(std::size_t{1} << (2 * m)) {
    if (m == 0 || 2 * m + 1 > kMaxDenseQubits) throw ShapeError("state-factory", "bad image order");
    p0_.assign(pixels_, -1.0);
    p1_.assign(pixels_, -1.0);
    image_.side = std::size_t{1} << m;
    image_.pixels.assign(pixels_, 0.0);
  }

  std::size_t order() const noexcept { return m_; }

  void add(std::span<const std::uint8_t> outcome, double probability) {
    if (outcome.size() != 2 * m_ + 1) throw ShapeError("state-factory", "outcome length is not 2m+1");
    const std::size_t i = static_cast<std::size_t>(outcome_index(outcome.subspan(1), 2));
    (outcome[0] == 0 ? p0_ : p1_)[i] = probability;
    image_.pixels[i] = decode_pixel(i);
  }

  const GrayImage& image() const noexcept { return image_; }

 private:
  double decode_pixel(std::size_t i) const {
    const double total = 1.0 / static_cast<double>(pixels_);
    double p0 = p0_[i], p1 = p1_[i];
    if (p0 < 0.0 && p1 < 0.0) return 0.0;
    if (p0 < 0.0) p0 = std::max(0.0, total - p1);
    if (p1 < 0.0) p1 = std::max(0.0, total - p0);
    return std::atan2(std::sqrt(p1), std::sqrt(p0)) * 2.0 / std::numbers::pi;
  }

  std::size_t m_;
  std::size_t pixels_;
  std::vector<double> p0_, p1_;
  GrayImage image_;
};

/// Decodes from pairs of labels and probabilities, e.g. a report's records.
template <class Records>
GrayImage frqi_decode(const Records& records, std::size_t m) {
  FrqiDecoder dec(m);
  for (const auto& r : records) dec.add(r.outcome, r.probability);
  return dec.image();
}

/// Deterministic test picture: a diagonal gradient with a bright disc.
inline GrayImage test_image(std::size_t side) {
  GrayImage img{side, std::vector<double>(side * side)};
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      const double dr = static_cast<double>(r) - c, dc = static_cast<double>(col) - c;
      int v = static_cast<int>(255.0 * static_cast<double>(r + col) / (2.0 * static_cast<double>(side - 1)) * 0.6);
      if (dr * dr + dc * dc <= c * c * 0.35) v = 230 - static_cast<int>(4 * (r % 4));
      img.at(r, col) = static_cast<double>(std::clamp(v, 0, 255)) / 255.0;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// PGM (P5, 8-bit) with g = v / 255.

inline GrayImage read_pgm(std::istream& is) {
  auto token = [&is]() {
    std::string t;
    while (t.empty()) {
      const int c = is.peek();
      if (c == EOF) throw FormatError("state-factory", "truncated PGM header");
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        is >> t;
      }
    }
    return t;
  };
  if (token() != "P5") throw FormatError("state-factory", "not a binary PGM (P5) file");
  std::size_t w = 0, h = 0;
  int maxval = 0;
  try {
    w = static_cast<std::size_t>(std::stoul(token()));
    h = static_cast<std::size_t>(std::stoul(token()));
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw FormatError("state-factory", "malformed PGM header");
  }
  if (maxval <= 0 || maxval > 255) throw FormatError("state-factory", "only 8-bit PGM is supported");
  if (w != h) throw ShapeError("state-factory", "image must be square");
  is.get();  // single whitespace before the raster
  GrayImage img{w, std::vector<double>(w * h)};
  for (auto& px : img.pixels) {
    const int v = is.get();
    if (v == EOF) throw FormatError("state-factory", "truncated PGM raster");
    px = static_cast<double>(v) / 255.0;
  }
  return img;
}

inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.side << ' ' << img.side << "\n255\n";
  for (double g : img.pixels) {
    const long v = std::lround(std::clamp(g, 0.0, 1.0) * 255.0);
    os.put(static_cast<char>(static_cast<unsigned char>(v)));
  }
}

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("state-factory", "cannot open " + path);
  return read_pgm(f);
}

inline void save_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("state-factory", "cannot write " + path);
  write_pgm(f, img);
}

}  // namespace tailsampler
