#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tailsampler/errors.hpp"

namespace tailsampler {

using Complex = std::complex<double>;
using Shape = std::vector<std::size_t>;
using MatrixXc = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrixXc =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-thread tally of complex multiply-adds performed by contractions.
/// Instrumentation only; never read by the algorithms themselves.
inline std::uint64_t& flop_tally() {
  thread_local std::uint64_t tally = 0;
  return tally;
}

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

/// Dense complex array in row-major order. A rank-0 tensor holds one scalar.
class DenseTensor {
 public:
  DenseTensor() : data_(1, Complex{0.0}) {}

  explicit DenseTensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_volume(shape_), Complex{0.0}) {
    check_extents();
  }

  DenseTensor(Shape shape, std::vector<Complex> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_volume(shape_)) {
      throw DimensionError("tensor-core",
                           "data length " + std::to_string(data_.size()) +
                               " does not match shape volume " +
                               std::to_string(shape_volume(shape_)));
    }
  }

  static DenseTensor identity(std::size_t n) {
    DenseTensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const Complex> data() const noexcept { return data_; }
  std::span<Complex> data() noexcept { return data_; }

  Complex& operator[](std::size_t flat) { return data_[flat]; }
  const Complex& operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) flat = flat * shape_[a] + idx[a];
    return flat;
  }

  Complex& at(std::initializer_list<std::size_t> idx) {
    return data_[flat_index(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }
  const Complex& at(std::initializer_list<std::size_t> idx) const {
    return data_[flat_index(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }

  DenseTensor conj() const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v = std::conj(v);
    return out;
  }

  DenseTensor scaled(Complex alpha) const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v *= alpha;
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const Complex& v) {
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    });
  }

  DenseTensor reshaped(Shape shape) const {
    if (shape_volume(shape) != data_.size()) {
      throw DimensionError("tensor-core", "reshape changes the number of elements");
    }
    return DenseTensor(std::move(shape), data_);
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw DimensionError("tensor-core", "tensor extents must be positive");
    }
  }

  Shape shape_;
  std::vector<Complex> data_;
};

/// Reorders axes so that result axis i is input axis perm[i].
inline DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> perm) {
  const std::size_t r = t.rank();
  if (perm.size() != r) throw DimensionError("tensor-core", "permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw DimensionError("tensor-core", "invalid permutation");
    seen[p] = true;
  }
  bool is_identity = true;
  for (std::size_t i = 0; i < r; ++i) is_identity = is_identity && perm[i] == i;
  if (is_identity) return t;

  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = t.extent(perm[i]);

  // Strides of the input, expressed in output axis order.
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t a = r; a-- > 1;) in_stride[a - 1] = in_stride[a] * t.extent(a);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) stride[i] = in_stride[perm[i]];

  DenseTensor out(out_shape);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  const auto in = t.data();
  auto dst = out.data();
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    dst[flat] = in[src];
    for (std::size_t a = r; a-- > 0;) {
      if (++idx[a] < out_shape[a]) {
        src += stride[a];
        break;
      }
      src -= stride[a] * (out_shape[a] - 1);
      idx[a] = 0;
    }
  }
  return out;
}

inline DenseTensor permute(const DenseTensor& t, std::initializer_list<std::size_t> perm) {
  return permute(t, std::span<const std::size_t>(perm.begin(), perm.size()));
}

/// Row-major matrix view of a tensor whose axes are already grouped.
inline Eigen::Map<const RowMatrixXc> as_matrix(const DenseTensor& t, std::size_t rows,
                                               std::size_t cols) {
  return {t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

inline DenseTensor from_matrix(const RowMatrixXc& m, Shape shape) {
  std::vector<Complex> data(m.data(), m.data() + m.size());
  return DenseTensor(std::move(shape), std::move(data));
}

using AxisPair = std::pair<std::size_t, std::size_t>;

/// Sums over the paired axes. Result axes are the free axes of `a` followed by
/// the free axes of `b`, each in original order.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            std::span<const AxisPair> axis_pairs) {
  std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
  for (const auto& [ia, ib] : axis_pairs) {
    if (ia >= a.rank() || ib >= b.rank() || used_a[ia] || used_b[ib]) {
      throw DimensionError("tensor-core", "invalid or repeated contraction axis (" +
                                              std::to_string(ia) + ", " +
                                              std::to_string(ib) + ")");
    }
    if (a.extent(ia) != b.extent(ib)) {
      throw DimensionError("tensor-core", "extent mismatch: axis " + std::to_string(ia) +
                                              " of a has " + std::to_string(a.extent(ia)) +
                                              ", axis " + std::to_string(ib) + " of b has " +
                                              std::to_string(b.extent(ib)));
    }
    used_a[ia] = used_b[ib] = true;
  }

  std::vector<std::size_t> perm_a, perm_b;
  Shape out_shape;
  std::size_t free_a = 1, free_b = 1, inner = 1;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (!used_a[i]) {
      perm_a.push_back(i);
      out_shape.push_back(a.extent(i));
      free_a *= a.extent(i);
    }
  }
  for (const auto& [ia, ib] : axis_pairs) {
    perm_a.push_back(ia);
    perm_b.push_back(ib);
    inner *= a.extent(ia);
  }
  for (std::size_t i = 0; i < b.rank(); ++i) {
    if (!used_b[i]) {
      perm_b.push_back(i);
      out_shape.push_back(b.extent(i));
      free_b *= b.extent(i);
    }
  }

  const DenseTensor pa = permute(a, perm_a);
  const DenseTensor pb = permute(b, perm_b);
  RowMatrixXc prod = as_matrix(pa, free_a, inner) * as_matrix(pb, inner, free_b);
  flop_tally() += static_cast<std::uint64_t>(free_a * inner * free_b);
  return from_matrix(prod, std::move(out_shape));
}

inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            std::initializer_list<AxisPair> axis_pairs) {
  return contract(a, b, std::span<const AxisPair>(axis_pairs.begin(), axis_pairs.size()));
}

struct SplitResult {
  DenseTensor q;  ///< left axes (in the order given) + new bond, isometric
  DenseTensor r;  ///< new bond + remaining axes in original order
};

/// QR-based isometric split. The diagonal of R is made real and nonnegative
/// so the factorization is deterministic.
inline SplitResult isometric_split(const DenseTensor& t, std::span<const std::size_t> left_axes) {
  if (left_axes.empty() || left_axes.size() >= t.rank()) {
    throw DimensionError("tensor-core", "left_axes must be a nonempty proper subset");
  }
  std::vector<bool> is_left(t.rank(), false);
  std::vector<std::size_t> perm;
  Shape q_shape, r_shape;
  std::size_t rows = 1, cols = 1;
  for (auto a : left_axes) {
    if (a >= t.rank() || is_left[a]) throw DimensionError("tensor-core", "invalid left axis");
    is_left[a] = true;
    perm.push_back(a);
    q_shape.push_back(t.extent(a));
    rows *= t.extent(a);
  }
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (!is_left[a]) {
      perm.push_back(a);
      r_shape.push_back(t.extent(a));
      cols *= t.extent(a);
    }
  }
  if (t.frobenius_norm() == 0.0) {
    throw SingularInputError("tensor-core", "cannot split an all-zero tensor");
  }

  const DenseTensor pt = permute(t, perm);
  const MatrixXc m = as_matrix(pt, rows, cols);
  Eigen::HouseholderQR<MatrixXc> qr(m);
  const auto k = static_cast<Eigen::Index>(std::min(rows, cols));
  MatrixXc q = qr.householderQ() * MatrixXc::Identity(static_cast<Eigen::Index>(rows), k);
  MatrixXc r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0.0) {
      const Complex phase = r(j, j) / mag;
      q.col(j) *= phase;
      r.row(j) *= std::conj(phase);
      r(j, j) = mag;
    }
  }
  flop_tally() += static_cast<std::uint64_t>(rows * cols * static_cast<std::size_t>(k));

  q_shape.push_back(static_cast<std::size_t>(k));
  r_shape.insert(r_shape.begin(), static_cast<std::size_t>(k));
  return {from_matrix(q, std::move(q_shape)), from_matrix(r, std::move(r_shape))};
}

inline SplitResult isometric_split(const DenseTensor& t, std::initializer_list<std::size_t> left_axes) {
  return isometric_split(t, std::span<const std::size_t>(left_axes.begin(), left_axes.size()));
}

}  // namespace tailsampler
