#pragma once

// Dense order-N tensors stored mode-1 fastest, and the multilinear
// operations (unfold/fold, mode-n products, rank-1 outer products) built on
// that layout.
//
// Layout: the element with 0-based index (i_1, ..., i_N) lives at flat
// position i_1 + I_1*(i_2 + I_2*(i_3 + ...)). The mode-n unfolding orders its
// columns by cycling the remaining modes with the lowest-numbered one
// fastest, so that vec(a_1 o ... o a_N) = a_N (x) ... (x) a_1 holds exactly.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tgauss/errors.hpp"

namespace tgauss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (n) s += ",";
    s += std::to_string(shape[n]);
  }
  return s + ")";
}

/// Number of elements K of a tensor with the given shape. Throws ShapeError
/// for an empty shape or a zero dimension.
inline std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor order must be at least 1");
  std::size_t k = 1;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (shape[n] == 0)
      throw ShapeError("dimension of mode " + std::to_string(n + 1) + " must be positive");
    k *= shape[n];
  }
  return k;
}

class DenseTensor {
 public:
  DenseTensor() : shape_{1}, data_(1, 0.0) {}

  DenseTensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    const std::size_t k = element_count(shape_);
    if (data_.size() != k)
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_) + " with " +
                       std::to_string(k) + " elements");
  }

  static DenseTensor zeros(const Shape& shape) {
    return DenseTensor(shape, std::vector<double>(element_count(shape), 0.0));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t n) const { return shape_.at(n); }

  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw ShapeError("multi-index has wrong order");
    std::size_t k = 0;
    for (std::size_t n = shape_.size(); n-- > 0;) {
      if (idx[n] >= shape_[n])
        throw ShapeError("index " + std::to_string(idx[n] + 1) + " out of range at mode " +
                         std::to_string(n + 1));
      k = k * shape_[n] + idx[n];
    }
    return k;
  }

  double at(std::span<const std::size_t> idx) const { return data_[linear_index(idx)]; }

  /// Multi-index of flat position k.
  std::vector<std::size_t> multi_index(std::size_t k) const {
    std::vector<std::size_t> idx(shape_.size());
    for (std::size_t n = 0; n < shape_.size(); ++n) {
      idx[n] = k % shape_[n];
      k /= shape_[n];
    }
    return idx;
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Unfolding {
  std::size_t mode = 0;  // 0-based
  Matrix matrix;
};

namespace detail {

inline void check_mode(std::size_t order, std::size_t n) {
  if (n >= order)
    throw ShapeError("mode " + std::to_string(n + 1) + " out of range for order-" +
                     std::to_string(order) + " tensor");
}

// Sizes of the modes before and after n: the tensor viewed as
// (left) x I_n x (right), column-major.
inline std::pair<std::size_t, std::size_t> split_at(const Shape& shape, std::size_t n) {
  std::size_t left = 1, right = 1;
  for (std::size_t m = 0; m < n; ++m) left *= shape[m];
  for (std::size_t m = n + 1; m < shape.size(); ++m) right *= shape[m];
  return {left, right};
}

}  // namespace detail

inline std::vector<double> vectorize(const DenseTensor& x) {
  return {x.data().begin(), x.data().end()};
}

inline Vector vectorize_eigen(const DenseTensor& x) {
  return Eigen::Map<const Vector>(x.data().data(), static_cast<Eigen::Index>(x.size()));
}

inline DenseTensor tensorize(std::vector<double> v, const Shape& shape) {
  return DenseTensor(shape, std::move(v));
}

inline DenseTensor tensorize(const Vector& v, const Shape& shape) {
  return DenseTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
}

inline Unfolding unfold(const DenseTensor& x, std::size_t n) {
  detail::check_mode(x.order(), n);
  const auto [left, right] = detail::split_at(x.shape(), n);
  const std::size_t in = x.dim(n);
  Matrix m(in, left * right);
  const double* d = x.data().data();
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t l = 0; l < left; ++l)
        m(i, l + left * r) = d[l + left * (i + in * r)];
  return {n, std::move(m)};
}

inline DenseTensor fold(const Unfolding& u, const Shape& shape) {
  const std::size_t k = element_count(shape);
  detail::check_mode(shape.size(), u.mode);
  const std::size_t in = shape[u.mode];
  if (static_cast<std::size_t>(u.matrix.rows()) != in ||
      static_cast<std::size_t>(u.matrix.cols()) != k / in)
    throw ShapeError("unfolding of size " + std::to_string(u.matrix.rows()) + "x" +
                     std::to_string(u.matrix.cols()) + " is inconsistent with shape " +
                     shape_string(shape) + " at mode " + std::to_string(u.mode + 1));
  const auto [left, right] = detail::split_at(shape, u.mode);
  std::vector<double> d(k);
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t l = 0; l < left; ++l)
        d[l + left * (i + in * r)] = u.matrix(i, l + left * r);
  return DenseTensor(shape, std::move(d));
}

/// X x_n U: multiplies every mode-n fiber by U (J_n x I_n).
inline DenseTensor mode_n_product(const DenseTensor& x, const Matrix& u, std::size_t n) {
  detail::check_mode(x.order(), n);
  const std::size_t in = x.dim(n);
  if (static_cast<std::size_t>(u.cols()) != in)
    throw ShapeError("mode-" + std::to_string(n + 1) + " product needs a matrix with " +
                     std::to_string(in) + " columns, got " + std::to_string(u.cols()));
  const auto [left, right] = detail::split_at(x.shape(), n);
  const std::size_t jn = static_cast<std::size_t>(u.rows());
  Shape out_shape = x.shape();
  out_shape[n] = jn;
  std::vector<double> out(left * jn * right);
  using Map = Eigen::Map<Matrix>;
  using CMap = Eigen::Map<const Matrix>;
  const auto l = static_cast<Eigen::Index>(left);
  for (std::size_t r = 0; r < right; ++r) {
    CMap src(x.data().data() + left * in * r, l, static_cast<Eigen::Index>(in));
    Map dst(out.data() + left * jn * r, l, static_cast<Eigen::Index>(jn));
    dst.noalias() = src * u.transpose();
  }
  return DenseTensor(std::move(out_shape), std::move(out));
}

/// Sequential mode-n products; std::nullopt entries are skipped (identity).
inline DenseTensor multi_mode_product(const DenseTensor& x,
                                      const std::vector<std::optional<Matrix>>& mats) {
  if (mats.size() != x.order())
    throw ShapeError("expected " + std::to_string(x.order()) + " per-mode matrices, got " +
                     std::to_string(mats.size()));
  DenseTensor y = x;
  for (std::size_t n = 0; n < mats.size(); ++n)
    if (mats[n]) y = mode_n_product(y, *mats[n], n);
  return y;
}

inline DenseTensor multi_mode_product(const DenseTensor& x, const std::vector<Matrix>& mats) {
  std::vector<std::optional<Matrix>> opt(mats.begin(), mats.end());
  return multi_mode_product(x, opt);
}

/// a_1 o a_2 o ... o a_N.
inline DenseTensor outer_rank1(const std::vector<Vector>& vectors) {
  if (vectors.empty()) throw ShapeError("outer product needs at least one vector");
  Shape shape;
  for (const auto& v : vectors) {
    if (v.size() == 0) throw ShapeError("outer product of an empty vector");
    shape.push_back(static_cast<std::size_t>(v.size()));
  }
  std::vector<double> d{1.0};
  for (const auto& v : vectors) {
    std::vector<double> next;
    next.reserve(d.size() * static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
      for (double e : d) next.push_back(e * v[i]);
    d = std::move(next);
  }
  return DenseTensor(std::move(shape), std::move(d));
}

inline void check_same_shape(const DenseTensor& x, const DenseTensor& y) {
  if (x.shape() != y.shape())
    throw ShapeError("shape mismatch: " + shape_string(x.shape()) + " vs " +
                     shape_string(y.shape()));
}

inline double inner(const DenseTensor& x, const DenseTensor& y) {
  check_same_shape(x, y);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

inline double frobenius_norm(const DenseTensor& x) { return std::sqrt(inner(x, x)); }

inline DenseTensor operator+(const DenseTensor& x, const DenseTensor& y) {
  check_same_shape(x, y);
  std::vector<double> d(x.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = x[k] + y[k];
  return DenseTensor(x.shape(), std::move(d));
}

inline DenseTensor operator-(const DenseTensor& x, const DenseTensor& y) {
  check_same_shape(x, y);
  std::vector<double> d(x.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = x[k] - y[k];
  return DenseTensor(x.shape(), std::move(d));
}

inline DenseTensor operator*(double a, const DenseTensor& x) {
  std::vector<double> d(x.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = a * x[k];
  return DenseTensor(x.shape(), std::move(d));
}

}  // namespace tgauss
