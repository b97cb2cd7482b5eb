#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tailsampler/errors.hpp"
#include "tailsampler/mps.hpp"
#include "tailsampler/tensor.hpp"

namespace tailsampler {

template <class Handle>
struct Branch {
  double probability;  ///< conditional probability of this label given the prefix
  Handle child;        ///< context for the extended prefix
};

/// A tree of conditional probabilities over strings of `n_sites()` labels in
/// [0, branch_count()). Handles are values that own their contraction
/// context, so samplers never touch the underlying tensors.
template <class M>
concept ConditionalModel = requires(const M& m, const typename M::Handle& h) {
  { m.n_sites() } -> std::convertible_to<std::size_t>;
  { m.branch_count() } -> std::convertible_to<std::size_t>;
  { m.alphabet() } -> std::convertible_to<std::string_view>;
  { m.root() } -> std::same_as<typename M::Handle>;
  { m.expand(h) } -> std::same_as<std::vector<Branch<typename M::Handle>>>;
  { h.depth } -> std::convertible_to<std::size_t>;
};

/// Computational-basis outcomes of an MPS measured left to right.
///
/// The state is kept with its isometry center on site 0, so everything to the
/// right of the measured prefix is right-isometric. A handle stores the
/// unnormalized boundary vector obtained by projecting the prefix and
/// absorbing it into the next site; the branch weights are the diagonal of the
/// reduced density matrix at that site.
class BitstringModel {
 public:
  struct Handle {
    std::size_t depth = 0;
    Eigen::RowVectorXcd boundary = Eigen::RowVectorXcd::Ones(1);
  };

  explicit BitstringModel(MpsState mps) : mps_(install_isometry_center(std::move(mps), 0)) {}

  std::size_t n_sites() const noexcept { return mps_.n_sites(); }
  std::size_t branch_count() const noexcept { return mps_.local_dim(); }
  std::string_view alphabet() const noexcept { return "0123456789abcdefghijklmnopqrstuvwxyz"; }
  const MpsState& state() const noexcept { return mps_; }

  Handle root() const { return {}; }

  std::vector<Branch<Handle>> expand(const Handle& h) const {
    if (h.depth >= n_sites()) throw RangeError("conditional-models", "cannot expand a full string");
    const DenseTensor& a = mps_.site(h.depth);
    const std::size_t l = a.extent(0), d = a.extent(1), r = a.extent(2);
    const Complex* data = a.data().data();

    std::vector<Branch<Handle>> out(d);
    double total = 0.0;
    for (std::size_t s = 0; s < d; ++s) {
      Eigen::RowVectorXcd t = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(r));
      for (std::size_t x = 0; x < l; ++x) {
        const Complex bx = h.boundary(static_cast<Eigen::Index>(x));
        const Complex* row = data + (x * d + s) * r;
        for (std::size_t y = 0; y < r; ++y) t(static_cast<Eigen::Index>(y)) += bx * row[y];
      }
      const double w = t.squaredNorm();
      total += w;
      out[s].probability = w;
      out[s].child = Handle{h.depth + 1, std::move(t)};
    }
    flop_tally() += static_cast<std::uint64_t>(l * d * r + d * r);
    if (!(total > 0.0)) {
      throw ZeroBranchError("conditional-models", "expanding a zero-probability prefix");
    }
    for (auto& b : out) b.probability /= total;
    return out;
  }

 private:
  MpsState mps_;
};

inline std::vector<Branch<BitstringModel::Handle>> expand_bitstring(
    const BitstringModel& model, const BitstringModel::Handle& h) {
  return model.expand(h);
}

namespace detail {

/// Pauli matrices in the fixed order (I, X, Y, Z).
inline const std::array<Eigen::Matrix2cd, 4>& pauli_matrices() {
  static const std::array<Eigen::Matrix2cd, 4> mats = [] {
    std::array<Eigen::Matrix2cd, 4> m;
    const Complex i(0.0, 1.0);
    m[0] << 1, 0, 0, 1;
    m[1] << 0, 1, 1, 0;
    m[2] << 0, -i, i, 0;
    m[3] << 1, 0, 0, -1;
    return m;
  }();
  return mats;
}

/// Single-replica transfer of one site with operator `op` inserted:
/// G[(a,b),(a',b')] = sum_{s,t} A[a,s,a'] conj(A[b,t,b']) op[t,s].
inline MatrixXc pauli_transfer(const DenseTensor& a, const Eigen::Matrix2cd& op) {
  const std::size_t l = a.extent(0), d = a.extent(1), r = a.extent(2);
  MatrixXc g = MatrixXc::Zero(static_cast<Eigen::Index>(l * l), static_cast<Eigen::Index>(r * r));
  for (std::size_t s = 0; s < d; ++s) {
    for (std::size_t t = 0; t < d; ++t) {
      const Complex o = op(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s));
      if (o == Complex(0.0)) continue;
      for (std::size_t x = 0; x < l; ++x)
        for (std::size_t y = 0; y < l; ++y)
          for (std::size_t xp = 0; xp < r; ++xp) {
            const Complex ket = a.at({x, s, xp}) * o;
            for (std::size_t yp = 0; yp < r; ++yp) {
              g(static_cast<Eigen::Index>(x * l + y), static_cast<Eigen::Index>(xp * r + yp)) +=
                  ket * std::conj(a.at({y, t, yp}));
            }
          }
    }
  }
  flop_tally() += static_cast<std::uint64_t>(d * d * l * l * r * r);
  return g;
}

}  // namespace detail

/// Pauli-string distribution Pi(sigma) = <psi|sigma|psi>^2 / 2^n of a qubit MPS,
/// sampled site by site with four branches in the order (I, X, Y, Z).
///
/// Two replicas of <psi|.|psi> are carried as a chi^2 x chi^2 environment.
/// Right environments of the "all Paulis summed" transfer are precomputed once
/// so each branch marginal is a single contraction.
class PauliStringModel {
 public:
  struct Handle {
    std::size_t depth = 0;
    MatrixXc env = MatrixXc::Ones(1, 1);
  };

  explicit PauliStringModel(const MpsState& mps) {
    if (mps.local_dim() != 2) throw ShapeError("conditional-models", "Pauli model needs qubits");
    const std::size_t n = mps.n_sites();
    transfers_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < 4; ++p)
        transfers_[i][p] = detail::pauli_transfer(mps.site(i), detail::pauli_matrices()[p]);
    right_env_.resize(n + 1);
    right_env_[n] = MatrixXc::Ones(1, 1);
    for (std::size_t m = n; m-- > 0;) {
      const auto dim = transfers_[m][0].rows();
      MatrixXc acc = MatrixXc::Zero(dim, dim);
      for (const auto& g : transfers_[m]) acc += g * right_env_[m + 1] * g.transpose();
      right_env_[m] = 0.5 * acc;
    }
  }

  std::size_t n_sites() const noexcept { return transfers_.size(); }
  std::size_t branch_count() const noexcept { return 4; }
  std::string_view alphabet() const noexcept { return "IXYZ"; }
  Handle root() const { return {}; }

  /// R_m, the environment of sites m..n-1; R_n is the scalar 1.
  const MatrixXc& right_environment(std::size_t m) const { return right_env_.at(m); }

  std::vector<Branch<Handle>> expand(const Handle& h) const {
    if (h.depth >= n_sites()) throw RangeError("conditional-models", "cannot expand a full string");
    const MatrixXc& right = right_env_[h.depth + 1];
    std::vector<Branch<Handle>> out(4);
    double total = 0.0;
    for (std::size_t p = 0; p < 4; ++p) {
      const MatrixXc& g = transfers_[h.depth][p];
      MatrixXc env = 0.5 * (g.transpose() * h.env * g);
      double w = env.cwiseProduct(right).sum().real();
      if (w < 0.0) w = 0.0;
      total += w;
      out[p] = {w, Handle{h.depth + 1, std::move(env)}};
      flop_tally() += static_cast<std::uint64_t>(2 * g.rows() * g.cols() * g.cols());
    }
    if (!(total > 0.0)) {
      throw ZeroBranchError("conditional-models", "expanding a zero-probability Pauli prefix");
    }
    for (auto& b : out) b.probability /= total;
    return out;
  }

 private:
  std::vector<std::array<MatrixXc, 4>> transfers_;
  std::vector<MatrixXc> right_env_;
};

inline std::vector<Branch<PauliStringModel::Handle>> expand_pauli(
    const PauliStringModel& model, const PauliStringModel::Handle& h) {
  return model.expand(h);
}

/// Pi(sigma) = 2^-n <psi|sigma|psi>^2 for labels in (I, X, Y, Z) = (0, 1, 2, 3).
inline double pauli_string_probability(const MpsState& mps, std::span<const std::uint8_t> labels) {
  if (mps.local_dim() != 2) throw ShapeError("conditional-models", "Pauli strings need qubits");
  if (labels.size() != mps.n_sites()) throw ShapeError("conditional-models", "string length mismatch");
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 3) throw RangeError("conditional-models", "Pauli label out of range");
    v = v * detail::pauli_transfer(mps.site(i), detail::pauli_matrices()[labels[i]]);
  }
  const double expectation = v(0).real();
  return std::ldexp(expectation * expectation, -static_cast<int>(labels.size()));
}

}  // namespace tailsampler
