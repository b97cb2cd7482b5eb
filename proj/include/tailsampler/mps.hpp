#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "tailsampler/errors.hpp"
#include "tailsampler/outcome.hpp"
#include "tailsampler/tensor.hpp"

namespace tailsampler {

/// Matrix product state: rank-3 site tensors (left bond, physical, right bond)
/// with an optional isometry center.
class MpsState {
 public:
  MpsState(std::vector<DenseTensor> sites, std::optional<std::size_t> iso_center)
      : sites_(std::move(sites)), iso_center_(iso_center) {
    if (sites_.empty()) throw ShapeError("mps-state", "an MPS needs at least one site");
    local_dim_ = sites_.front().rank() == 3 ? sites_.front().extent(1) : 0;
    if (local_dim_ < 2) throw ShapeError("mps-state", "local dimension must be at least 2");
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      const auto& t = sites_[i];
      if (t.rank() != 3) throw ShapeError("mps-state", "site tensors must be rank 3");
      if (t.extent(1) != local_dim_) throw ShapeError("mps-state", "inconsistent local dimension");
      if (i > 0 && sites_[i - 1].extent(2) != t.extent(0)) {
        throw ShapeError("mps-state", "bond mismatch between sites " + std::to_string(i - 1) +
                                          " and " + std::to_string(i));
      }
    }
    if (sites_.front().extent(0) != 1 || sites_.back().extent(2) != 1) {
      throw ShapeError("mps-state", "boundary bonds must have extent 1");
    }
    if (iso_center_ && *iso_center_ >= sites_.size()) {
      throw RangeError("mps-state", "isometry center out of range");
    }
  }

  std::size_t n_sites() const noexcept { return sites_.size(); }
  std::size_t local_dim() const noexcept { return local_dim_; }
  std::optional<std::size_t> iso_center() const noexcept { return iso_center_; }
  const DenseTensor& site(std::size_t i) const { return sites_.at(i); }
  const std::vector<DenseTensor>& sites() const noexcept { return sites_; }

  /// Extent of the bond to the right of site i.
  std::size_t bond(std::size_t i) const { return sites_.at(i).extent(2); }

  std::size_t max_bond() const {
    std::size_t chi = 1;
    for (const auto& s : sites_) chi = std::max(chi, s.extent(2));
    return chi;
  }

 private:
  friend MpsState install_isometry_center(MpsState mps, std::size_t site);
  friend MpsState project_and_advance(MpsState mps, std::size_t site, std::uint8_t outcome);

  std::vector<DenseTensor> sites_;
  std::optional<std::size_t> iso_center_;
  std::size_t local_dim_ = 0;
};

namespace detail {

/// Singular values at or below this are numerically zero for unit-norm input;
/// dropping them keeps the representation exact to double precision.
inline constexpr double kZeroSingularValue = 1e-14;

inline bool is_power_of(std::size_t len, std::size_t d, std::size_t& n) {
  n = 0;
  if (len < d) return false;
  while (len > 1) {
    if (len % d != 0) return false;
    len /= d;
    ++n;
  }
  return true;
}

// Moves the center one site to the right (QR on the left-and-physical legs).
inline void shift_center_right(std::vector<DenseTensor>& sites, std::size_t c) {
  auto [q, r] = isometric_split(sites[c], {0, 1});
  sites[c] = std::move(q);
  sites[c + 1] = contract(r, sites[c + 1], {{1, 0}});
}

inline void shift_center_left(std::vector<DenseTensor>& sites, std::size_t c) {
  auto [q, r] = isometric_split(sites[c], {1, 2});
  sites[c] = permute(q, {2, 0, 1});
  sites[c - 1] = contract(sites[c - 1], r, {{2, 1}});
}

}  // namespace detail

/// Exact conversion of a dense state vector (site 0 most significant) into an
/// MPS with isometry center 0. Only numerically zero singular values are dropped.
inline MpsState mps_from_statevector(std::span<const Complex> coeffs, std::size_t d) {
  if (d < 2) throw ShapeError("mps-state", "local dimension must be at least 2");
  std::size_t n = 0;
  if (!detail::is_power_of(coeffs.size(), d, n)) {
    throw ShapeError("mps-state", "vector length " + std::to_string(coeffs.size()) +
                                      " is not a positive power of " + std::to_string(d));
  }
  double norm2 = 0.0;
  for (const auto& c : coeffs) norm2 += std::norm(c);
  const double norm = std::sqrt(norm2);
  if (std::abs(norm - 1.0) > 1e-10) {
    throw NormalizationError("mps-state", "state vector norm is " + std::to_string(norm), norm);
  }

  std::vector<DenseTensor> sites(n);
  // Remaining block as a matrix (left configurations) x (d * right bond).
  std::size_t left_dim = coeffs.size() / d;
  std::size_t right_bond = 1;
  RowMatrixXc block = Eigen::Map<const RowMatrixXc>(coeffs.data(),
                                                    static_cast<Eigen::Index>(left_dim),
                                                    static_cast<Eigen::Index>(d));
  for (std::size_t j = n - 1; j > 0; --j) {
    Eigen::BDCSVD<MatrixXc> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::Index keep = 1;
    while (keep < sv.size() && sv(keep) > detail::kZeroSingularValue) ++keep;
    RowMatrixXc vh = svd.matrixV().leftCols(keep).adjoint();
    sites[j] = from_matrix(vh, {static_cast<std::size_t>(keep), d, right_bond});
    RowMatrixXc us = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
    right_bond = static_cast<std::size_t>(keep);
    left_dim /= d;
    // us is (left_dim * d) x keep in row-major order == left_dim x (d * keep).
    block = Eigen::Map<const RowMatrixXc>(us.data(), static_cast<Eigen::Index>(left_dim),
                                          static_cast<Eigen::Index>(d * right_bond));
  }
  sites[0] = from_matrix(block, {1, d, right_bond});
  return MpsState(std::move(sites), 0);
}

/// Moves the isometry center with QR sweeps. A state without a center is first
/// brought to center 0 by a full right-to-left sweep.
inline MpsState install_isometry_center(MpsState mps, std::size_t site) {
  const std::size_t n = mps.n_sites();
  if (site >= n) throw RangeError("mps-state", "site index out of range");
  auto& sites = mps.sites_;
  if (!mps.iso_center_) {
    for (std::size_t c = n - 1; c > 0; --c) detail::shift_center_left(sites, c);
    mps.iso_center_ = 0;
  }
  std::size_t c = *mps.iso_center_;
  while (c < site) detail::shift_center_right(sites, c++);
  while (c > site) detail::shift_center_left(sites, c--);
  mps.iso_center_ = site;
  return mps;
}

/// Single-site reduced density matrix at the isometry center. For a projected
/// (unnormalized) state the trace equals the probability of the projection.
inline MatrixXc local_rdm(const MpsState& mps, std::size_t site) {
  if (mps.iso_center() != site) {
    throw PreconditionError("mps-state", "local_rdm requires the isometry center at site " +
                                             std::to_string(site));
  }
  const DenseTensor& a = mps.site(site);
  const DenseTensor rho = contract(a, a.conj(), {{0, 0}, {2, 2}});
  return MatrixXc(as_matrix(rho, mps.local_dim(), mps.local_dim()));
}

/// Normalized diagonal of a density matrix. Diagonal entries in [-1e-12, 0)
/// relative to the trace clamp to zero; anything more negative is an error.
inline std::vector<double> outcome_probabilities(const MatrixXc& rdm) {
  const auto d = rdm.rows();
  double trace = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) trace += rdm(i, i).real();
  if (!(trace > 0.0)) throw PreconditionError("mps-state", "density matrix has nonpositive trace");
  std::vector<double> probs(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    double p = rdm(i, i).real() / trace;
    if (p < 0.0) {
      if (p < -1e-12) throw PreconditionError("mps-state", "negative diagonal in density matrix");
      p = 0.0;
    }
    probs[static_cast<std::size_t>(i)] = std::min(p, 1.0);
  }
  return probs;
}

/// Projects the center site onto a basis state and moves the center one site
/// to the right. The state is not renormalized. On the last site the center
/// stays in place.
inline MpsState project_and_advance(MpsState mps, std::size_t site, std::uint8_t outcome) {
  if (mps.iso_center() != site) {
    throw PreconditionError("mps-state", "projection requires the isometry center at site " +
                                             std::to_string(site));
  }
  if (outcome >= mps.local_dim()) throw RangeError("mps-state", "outcome label out of range");
  DenseTensor& a = mps.sites_[site];
  const std::size_t l = a.extent(0), d = a.extent(1), r = a.extent(2);
  double weight = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t s = 0; s < d; ++s) {
      for (std::size_t j = 0; j < r; ++j) {
        auto& v = a.at({i, s, j});
        if (s == outcome) {
          weight += std::norm(v);
        } else {
          v = 0.0;
        }
      }
    }
  }
  if (weight == 0.0) {
    throw ZeroBranchError("mps-state", "projection onto a zero-probability outcome at site " +
                                           std::to_string(site));
  }
  if (site + 1 < mps.n_sites()) {
    detail::shift_center_right(mps.sites_, site);
    mps.iso_center_ = site + 1;
  }
  return mps;
}

inline Complex amplitude_of(const MpsState& mps, std::span<const std::uint8_t> outcome) {
  if (outcome.size() != mps.n_sites()) throw ShapeError("mps-state", "outcome length mismatch");
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (std::size_t i = 0; i < mps.n_sites(); ++i) {
    const auto& a = mps.site(i);
    if (outcome[i] >= mps.local_dim()) throw RangeError("mps-state", "outcome label out of range");
    const std::size_t l = a.extent(0), d = a.extent(1), r = a.extent(2);
    Eigen::RowVectorXcd next = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(r));
    for (std::size_t x = 0; x < l; ++x) {
      const Complex vx = v(static_cast<Eigen::Index>(x));
      const Complex* row = a.data().data() + (x * d + outcome[i]) * r;
      for (std::size_t y = 0; y < r; ++y) next(static_cast<Eigen::Index>(y)) += vx * row[y];
    }
    v = std::move(next);
  }
  return v(0);
}

/// Dense state vector (site 0 most significant). Cost grows as d^n.
inline std::vector<Complex> to_statevector(const MpsState& mps) {
  RowMatrixXc acc = RowMatrixXc::Ones(1, 1);
  for (const auto& a : mps.sites()) {
    const std::size_t l = a.extent(0), dr = a.extent(1) * a.extent(2);
    RowMatrixXc next = acc * as_matrix(a, l, dr);
    // rows: configurations so far, cols: (s, r) -> regroup to (configs * d) x r
    acc = Eigen::Map<const RowMatrixXc>(next.data(), next.rows() * static_cast<Eigen::Index>(a.extent(1)),
                                        static_cast<Eigen::Index>(a.extent(2)));
  }
  return std::vector<Complex>(acc.data(), acc.data() + acc.size());
}

/// <psi|psi> by transfer matrices; independent of the canonical form.
inline double norm_squared(const MpsState& mps) {
  MatrixXc env = MatrixXc::Ones(1, 1);
  for (const auto& a : mps.sites()) {
    const auto l = static_cast<Eigen::Index>(a.extent(0));
    const auto d = a.extent(1);
    const auto r = static_cast<Eigen::Index>(a.extent(2));
    MatrixXc next = MatrixXc::Zero(r, r);
    for (std::size_t s = 0; s < d; ++s) {
      MatrixXc slice(l, r);
      for (Eigen::Index x = 0; x < l; ++x)
        for (Eigen::Index y = 0; y < r; ++y)
          slice(x, y) = a.at({static_cast<std::size_t>(x), s, static_cast<std::size_t>(y)});
      next += slice.adjoint() * env * slice;
    }
    env = std::move(next);
  }
  return env(0, 0).real();
}

/// Deviation of sum_{s,r} A[l,s,r] conj(A[l',s,r]) from the identity (right isometry).
inline double right_isometry_error(const DenseTensor& a) {
  const DenseTensor g = contract(a, a.conj(), {{1, 1}, {2, 2}});
  const std::size_t l = a.extent(0);
  double err = 0.0;
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j)
      err = std::max(err, std::abs(g.at({i, j}) - Complex(i == j ? 1.0 : 0.0)));
  return err;
}

inline double left_isometry_error(const DenseTensor& a) {
  const DenseTensor g = contract(a.conj(), a, {{0, 0}, {1, 1}});
  const std::size_t r = a.extent(2);
  double err = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j)
      err = std::max(err, std::abs(g.at({i, j}) - Complex(i == j ? 1.0 : 0.0)));
  return err;
}

// ---------------------------------------------------------------------------
// Binary container: "MPS1", u32 n, u32 d, n x (u32 left, u32 phys, u32 right),
// then every site's entries in row-major order as little-endian float64
// (real, imag) pairs.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::ostream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline std::uint64_t get_bytes(std::istream& is, int count) {
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("mps-state", "truncated MPS1 stream");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void write_mps(std::ostream& os, const MpsState& mps) {
  os.write("MPS1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(mps.n_sites()));
  detail::put_u32(os, static_cast<std::uint32_t>(mps.local_dim()));
  for (const auto& s : mps.sites())
    for (auto e : s.shape()) detail::put_u32(os, static_cast<std::uint32_t>(e));
  for (const auto& s : mps.sites()) {
    for (const auto& v : s.data()) {
      detail::put_f64(os, v.real());
      detail::put_f64(os, v.imag());
    }
  }
}

/// Reads an MPS1 container and restores isometry center 0 and unit norm.
inline MpsState read_mps(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "MPS1") throw FormatError("mps-state", "missing MPS1 magic");
  const auto n = static_cast<std::size_t>(detail::get_bytes(is, 4));
  const auto d = static_cast<std::size_t>(detail::get_bytes(is, 4));
  if (n == 0 || n > 4096) throw FormatError("mps-state", "implausible site count");
  std::vector<Shape> shapes(n);
  for (auto& sh : shapes) {
    sh.resize(3);
    for (auto& e : sh) e = static_cast<std::size_t>(detail::get_bytes(is, 4));
    if (sh[1] != d) throw FormatError("mps-state", "site physical extent differs from header");
  }
  std::vector<DenseTensor> sites;
  sites.reserve(n);
  for (auto& sh : shapes) {
    std::vector<Complex> data(shape_volume(sh));
    for (auto& v : data) {
      const double re = std::bit_cast<double>(detail::get_bytes(is, 8));
      const double im = std::bit_cast<double>(detail::get_bytes(is, 8));
      v = {re, im};
    }
    sites.emplace_back(std::move(sh), std::move(data));
  }
  MpsState mps = install_isometry_center(MpsState(std::move(sites), std::nullopt), 0);
  const double norm = std::sqrt(norm_squared(mps));
  if (!(norm > 0.0)) throw FormatError("mps-state", "stored state has zero norm");
  std::vector<DenseTensor> scaled = mps.sites();
  scaled[0] = scaled[0].scaled(1.0 / norm);
  return MpsState(std::move(scaled), 0);
}

inline void save_mps(const std::string& path, const MpsState& mps) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("mps-state", "cannot open " + path + " for writing");
  write_mps(os, mps);
}

inline MpsState load_mps(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("mps-state", "cannot open " + path);
  return read_mps(is);
}

}  // namespace tailsampler
