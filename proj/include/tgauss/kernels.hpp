#pragma once

// Block-matrix algebra (Kronecker, block Khatri-Rao, partial trace, Hadamard)
// and the small dense symmetric kernels used by the distribution layer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tgauss/errors.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

/// A matrix partitioned into M x M uniform blocks of size block_rows x
/// block_cols.
class BlockMatrix {
 public:
  BlockMatrix() = default;

  BlockMatrix(std::size_t partitions, std::size_t block_rows, std::size_t block_cols,
              Matrix matrix)
      : partitions_(partitions),
        block_rows_(block_rows),
        block_cols_(block_cols),
        matrix_(std::move(matrix)) {
    if (partitions_ == 0) throw ShapeError("block matrix needs at least one partition");
    if (static_cast<std::size_t>(matrix_.rows()) != partitions_ * block_rows_ ||
        static_cast<std::size_t>(matrix_.cols()) != partitions_ * block_cols_)
      throw ShapeError("assembled matrix is " + std::to_string(matrix_.rows()) + "x" +
                       std::to_string(matrix_.cols()) + ", expected " +
                       std::to_string(partitions_ * block_rows_) + "x" +
                       std::to_string(partitions_ * block_cols_));
  }

  static BlockMatrix from_blocks(const std::vector<std::vector<Matrix>>& blocks) {
    const std::size_t m = blocks.size();
    if (m == 0) throw ShapeError("block matrix needs at least one partition");
    const auto br = static_cast<std::size_t>(blocks[0][0].rows());
    const auto bc = static_cast<std::size_t>(blocks[0][0].cols());
    Matrix a(m * br, m * bc);
    for (std::size_t i = 0; i < m; ++i) {
      if (blocks[i].size() != m) throw ShapeError("block grid must be square");
      for (std::size_t j = 0; j < m; ++j) {
        const Matrix& b = blocks[i][j];
        if (static_cast<std::size_t>(b.rows()) != br || static_cast<std::size_t>(b.cols()) != bc)
          throw ShapeError("blocks must share one size");
        a.block(i * br, j * bc, br, bc) = b;
      }
    }
    return {m, br, bc, std::move(a)};
  }

  std::size_t partitions() const noexcept { return partitions_; }
  std::size_t block_rows() const noexcept { return block_rows_; }
  std::size_t block_cols() const noexcept { return block_cols_; }
  const Matrix& matrix() const noexcept { return matrix_; }

  Matrix block(std::size_t i, std::size_t j) const {
    if (i >= partitions_ || j >= partitions_) throw ShapeError("block index out of range");
    return matrix_.block(i * block_rows_, j * block_cols_, block_rows_, block_cols_);
  }

  void set_block(std::size_t i, std::size_t j, const Matrix& b) {
    if (i >= partitions_ || j >= partitions_) throw ShapeError("block index out of range");
    if (static_cast<std::size_t>(b.rows()) != block_rows_ ||
        static_cast<std::size_t>(b.cols()) != block_cols_)
      throw ShapeError("block has wrong size");
    matrix_.block(i * block_rows_, j * block_cols_, block_rows_, block_cols_) = b;
  }

 private:
  std::size_t partitions_ = 0;
  std::size_t block_rows_ = 0;
  std::size_t block_cols_ = 0;
  Matrix matrix_;
};

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Left fold of kron in the given order. Callers wanting the descending
/// composition (x)_{n=N}^{1} pass the matrices last mode first.
inline Matrix kron_seq(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw ShapeError("kron_seq needs at least one matrix");
  Matrix acc = mats.front();
  for (std::size_t k = 1; k < mats.size(); ++k) acc = kron(acc, mats[k]);
  return acc;
}

/// kron_seq over a per-mode list, composed last mode first.
inline Matrix kron_descending(const std::vector<Matrix>& per_mode) {
  std::vector<Matrix> rev(per_mode.rbegin(), per_mode.rend());
  return kron_seq(rev);
}

inline BlockMatrix khatri_rao_block(const BlockMatrix& a, const BlockMatrix& b) {
  if (a.partitions() != b.partitions())
    throw ShapeError("Khatri-Rao product needs equal partition counts, got " +
                     std::to_string(a.partitions()) + " and " + std::to_string(b.partitions()));
  const std::size_t m = a.partitions();
  const std::size_t br = a.block_rows() * b.block_rows();
  const std::size_t bc = a.block_cols() * b.block_cols();
  Matrix out(m * br, m * bc);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out.block(i * br, j * bc, br, bc) = kron(a.block(i, j), b.block(i, j));
  return {m, br, bc, std::move(out)};
}

/// M x M matrix of block traces.
inline Matrix partial_trace(const BlockMatrix& a) {
  if (a.block_rows() != a.block_cols())
    throw ShapeError("partial trace needs square blocks");
  const std::size_t m = a.partitions();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = a.block(i, j).trace();
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("Hadamard product needs equal shapes");
  return a.cwiseProduct(b);
}

/// Relative asymmetry max|A - A^T| / max|A| (0 for the zero matrix).
inline double asymmetry(const Matrix& a) {
  if (a.rows() != a.cols()) return INFINITY;
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Returns (A + A^T)/2, or throws NotSymmetric when A is further than 1e-10
/// (relative) from symmetric.
inline Matrix symmetrized(const Matrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols())
    throw ShapeError("expected a square matrix, got " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()));
  const double asym = asymmetry(a);
  if (asym > tol)
    throw NotSymmetric("matrix asymmetry " + std::to_string(asym) + " exceeds tolerance");
  return 0.5 * (a + a.transpose());
}

/// Lower-triangular L with L L^T = A. Throws NotPositiveDefinite at the first
/// non-positive pivot; no jitter or repair is applied.
inline Matrix cholesky(const Matrix& input) {
  const Matrix a = symmetrized(input);
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0))
      throw NotPositiveDefinite("non-positive pivot " + std::to_string(d) + " at row " +
                                std::to_string(j + 1));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

inline double logdet_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline double logdet_spd(const Matrix& a) { return logdet_from_cholesky(cholesky(a)); }

/// Solves (L L^T) X = B given the lower factor L.
inline Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  const auto tri = l.triangularView<Eigen::Lower>();
  Matrix y = tri.solve(b);
  return tri.transpose().solve(y);
}

/// X x_n A^{-1} for A = L L^T, applied with triangular solves.
inline DenseTensor mode_n_solve(const DenseTensor& x, const Matrix& l, std::size_t n) {
  detail::check_mode(x.order(), n);
  const std::size_t in = x.dim(n);
  if (static_cast<std::size_t>(l.rows()) != in)
    throw ShapeError("mode-" + std::to_string(n + 1) + " solve needs a factor of size " +
                     std::to_string(in));
  const auto [left, right] = detail::split_at(x.shape(), n);
  std::vector<double> out(x.size());
  const auto lr = static_cast<Eigen::Index>(left);
  const auto ir = static_cast<Eigen::Index>(in);
  const auto tri = l.triangularView<Eigen::Lower>();
  for (std::size_t r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> src(x.data().data() + left * in * r, lr, ir);
    Eigen::Map<Matrix> dst(out.data() + left * in * r, lr, ir);
    // fibers are the rows of src; solve A y = f for each of them
    Matrix y = tri.solve(src.transpose());
    dst = tri.transpose().solve(y).transpose();
  }
  return DenseTensor(x.shape(), std::move(out));
}

/// Symmetric positive definite matrix, validated by Cholesky on construction.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& a) : matrix_(symmetrized(a)), factor_(cholesky(matrix_)) {}

  const Matrix& matrix() const noexcept { return matrix_; }
  const Matrix& factor() const noexcept { return factor_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  double logdet() const { return logdet_from_cholesky(factor_); }

 private:
  Matrix matrix_;
  Matrix factor_;
};

/// Makes the largest-magnitude entry of v positive (first one on ties).
inline void apply_sign_convention(Eigen::Ref<Vector> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  if (v.size() > 0 && v[arg] < 0.0) v = -v;
}

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

/// Eigendecomposition of a symmetric matrix, eigenvalues descending, each
/// eigenvector normalized with its largest-magnitude entry positive.
inline SymmetricEigen sym_eig(const Matrix& input) {
  const Matrix a = symmetrized(input);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw DegenerateInput("eigendecomposition failed");
  const Eigen::Index n = a.rows();
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = solver.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    apply_sign_convention(out.vectors.col(i));
  }
  return out;
}

struct SingularPair {
  Vector vector;  // unit left singular vector
  double value = 0.0;
};

/// Leading left singular vector of M, taken as the leading eigenvector of
/// M M^T. Throws DegenerateInput for the zero matrix.
inline SingularPair leading_singular_vector(const Matrix& m) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
    throw DegenerateInput("leading singular vector of a zero matrix");
  const Matrix gram = m * m.transpose();
  const SymmetricEigen eig = sym_eig(gram);
  return {eig.vectors.col(0), std::sqrt(std::max(eig.values[0], 0.0))};
}

}  // namespace tgauss
