#pragma once

// M-variate tensor Gaussian. Variates X_1..X_M share one shape and are
// stacked as z = [vec(X_1); ...; vec(X_M)] (variate mode last), with
//
//   E[z]   = alpha_z (Khatri-Rao) mu_z^(N) ... mu_z^(1)
//   cov(z) = Sigma_zz (Khatri-Rao) Theta_zz^(N) ... Theta_zz^(1)
//
// i.e. block (i,j) of cov(z) is sigma_ij (Theta_ij^(N) (x) ... (x) Theta_ij^(1)).
// No structured inverse exists for this covariance, so the density and the
// sampler assemble it densely under a size guard.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tgauss/distribution.hpp"
#include "tgauss/errors.hpp"
#include "tgauss/estimation.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/parallel.hpp"
#include "tgauss/random.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

inline constexpr std::size_t kMaxDenseDim = 4096;
inline constexpr double kCrossMomentTolerance = 1e-12;

struct MultiTensorGaussianParams {
  Shape shape;
  std::vector<double> alphas;            // M
  std::vector<std::vector<Vector>> mus;  // M x N unit vectors
  Matrix sigma;                          // Sigma_zz, M x M
  std::vector<BlockMatrix> thetas;       // per mode: M x M grid of I_n x I_n blocks
  // Pairs (i, j), i < j, 0-based, whose Theta_ij is undefined. Their block
  // slot holds the raw cross-moment sigma_ij * Theta_ij instead, and they
  // contribute nothing to the assembled covariance.
  std::vector<std::pair<std::size_t, std::size_t>> undefined;

  std::size_t variates() const noexcept { return alphas.size(); }
  std::size_t order() const noexcept { return shape.size(); }

  bool is_undefined(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return std::find(undefined.begin(), undefined.end(), std::make_pair(i, j)) != undefined.end();
  }

  /// Univariate parameters of variate i (its marginal distribution).
  TensorGaussianParams marginal(std::size_t i) const {
    TensorGaussianParams p{shape, alphas.at(i), mus.at(i), sigma(i, i), {}};
    for (const auto& t : thetas) p.thetas.push_back(t.block(i, i));
    return p;
  }
};

/// Stacks M univariate parameter sets with a given Sigma_zz and cross blocks.
/// `cross[n][i][j]` supplies Theta_ij^(n) for i < j; Theta_ji = Theta_ij^T.
inline MultiTensorGaussianParams make_multi_params(
    const std::vector<TensorGaussianParams>& marginals, const Matrix& sigma,
    const std::vector<std::vector<std::vector<Matrix>>>& cross) {
  if (marginals.empty()) throw ShapeError("need at least one variate");
  const std::size_t m = marginals.size();
  MultiTensorGaussianParams p;
  p.shape = marginals[0].shape;
  p.sigma = sigma;
  for (const auto& mg : marginals) {
    if (mg.shape != p.shape) throw ShapeError("variates must share one shape");
    p.alphas.push_back(mg.alpha);
    p.mus.push_back(mg.mus);
  }
  for (std::size_t n = 0; n < p.order(); ++n) {
    std::vector<std::vector<Matrix>> grid(m, std::vector<Matrix>(m));
    for (std::size_t i = 0; i < m; ++i) {
      grid[i][i] = marginals[i].thetas.at(n);
      for (std::size_t j = i + 1; j < m; ++j) {
        grid[i][j] = cross.at(n).at(i).at(j);
        grid[j][i] = grid[i][j].transpose();
      }
    }
    p.thetas.push_back(BlockMatrix::from_blocks(grid));
  }
  return p;
}

namespace detail {

// Sigma with undefined pairs zeroed, as a matrix of 1x1 blocks.
inline BlockMatrix effective_sigma(const MultiTensorGaussianParams& p) {
  Matrix s = p.sigma;
  for (auto [i, j] : p.undefined) {
    s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.0;
    s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 0.0;
  }
  return {p.variates(), 1, 1, std::move(s)};
}

inline BlockMatrix effective_theta(const MultiTensorGaussianParams& p, std::size_t n) {
  BlockMatrix t = p.thetas.at(n);
  for (auto [i, j] : p.undefined) {
    const Matrix z = Matrix::Zero(static_cast<Eigen::Index>(t.block_rows()),
                                  static_cast<Eigen::Index>(t.block_cols()));
    t.set_block(i, j, z);
    t.set_block(j, i, z);
  }
  return t;
}

inline void check_capacity(std::size_t dim) {
  if (dim > kMaxDenseDim)
    throw CapacityError("dense covariance of dimension " + std::to_string(dim) +
                        " exceeds the limit of " + std::to_string(kMaxDenseDim));
}

}  // namespace detail

/// Dense Sigma_zz (KR) Theta_zz^(N) (KR) ... (KR) Theta_zz^(1), unvalidated.
inline Matrix assemble_cov_matrix(const MultiTensorGaussianParams& p) {
  detail::check_capacity(p.variates() * element_count(p.shape));
  BlockMatrix acc = detail::effective_sigma(p);
  for (std::size_t n = p.order(); n-- > 0;) acc = khatri_rao_block(acc, detail::effective_theta(p, n));
  return acc.matrix();
}

inline ValidationReport validate(const MultiTensorGaussianParams& p) {
  ValidationReport r;
  auto fail = [&](std::string s) { r.violations.push_back(std::move(s)); };
  const std::size_t m = p.variates();
  if (m == 0) {
    fail("M must be at least 1");
    return r;
  }
  if (p.shape.empty() || std::find(p.shape.begin(), p.shape.end(), 0) != p.shape.end()) {
    fail("shape: invalid " + shape_string(p.shape));
    return r;
  }
  const std::size_t order = p.order();
  if (p.mus.size() != m) fail("mu: expected " + std::to_string(m) + " variates");
  if (static_cast<std::size_t>(p.sigma.rows()) != m || static_cast<std::size_t>(p.sigma.cols()) != m) {
    fail("sigma_zz: expected " + std::to_string(m) + "x" + std::to_string(m));
    return r;
  }
  if (p.thetas.size() != order) {
    fail("theta_zz: expected " + std::to_string(order) + " modes");
    return r;
  }
  if (!r.ok()) return r;

  for (std::size_t i = 0; i < m; ++i) {
    const std::string tag = "variate " + std::to_string(i + 1);
    if (!(p.alphas[i] >= 0.0)) fail(tag + ": alpha must be >= 0, got " + detail::num(p.alphas[i]));
    if (p.mus[i].size() != order) {
      fail(tag + ": expected " + std::to_string(order) + " mu vectors");
      continue;
    }
    for (std::size_t n = 0; n < order; ++n) {
      if (static_cast<std::size_t>(p.mus[i][n].size()) != p.shape[n]) {
        fail(tag + ": mu[" + std::to_string(n + 1) + "] has wrong length");
        continue;
      }
      const double norm = p.mus[i][n].norm();
      if (!(std::abs(norm - 1.0) <= kUnitTolerance))
        fail(tag + ": mu[" + std::to_string(n + 1) + "] norm " + detail::num(norm) + " is not 1");
    }
  }

  if (asymmetry(p.sigma) > kUnitTolerance) fail("sigma_zz: not symmetric");
  for (std::size_t i = 0; i < m; ++i) {
    const double d = p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (!(d > 0.0))
      fail("sigma_zz: diagonal entry " + std::to_string(i + 1) + " must be > 0, got " + detail::num(d));
  }
  for (auto [i, j] : p.undefined) {
    if (i >= j || j >= m) {
      fail("undefined: invalid pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      continue;
    }
    const double sij = p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double scale = std::sqrt(p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) *
                                   p.sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
    if (!(std::abs(sij) <= kCrossMomentTolerance * scale))
      fail("undefined pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
           ") requires sigma_ij = 0, got " + detail::num(sij));
  }

  for (std::size_t n = 0; n < order; ++n) {
    const BlockMatrix& t = p.thetas[n];
    const std::string tag = "theta_zz[" + std::to_string(n + 1) + "]";
    if (t.partitions() != m || t.block_rows() != p.shape[n] || t.block_cols() != p.shape[n]) {
      fail(tag + ": expected " + std::to_string(m) + "x" + std::to_string(m) + " blocks of size " +
           std::to_string(p.shape[n]));
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        const std::string b = tag + "[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]";
        const Matrix bij = t.block(i, j);
        const Matrix bji = t.block(j, i);
        const double scale = std::max(1.0, bij.cwiseAbs().maxCoeff());
        if ((bij - bji.transpose()).cwiseAbs().maxCoeff() > kUnitTolerance * scale)
          fail(b + ": transposed block mismatch");
        if (i != j && p.is_undefined(i, j)) continue;
        const double tr = bij.trace();
        if (!(std::abs(tr - 1.0) <= kUnitTolerance)) fail(b + ": trace " + detail::num(tr) + " is not 1");
        if (i == j) {
          try {
            cholesky(bij);
          } catch (const Error&) {
            fail(b + ": not positive definite");
          }
        }
      }
    }
  }
  if (!r.ok()) return r;

  const std::size_t dim = m * element_count(p.shape);
  if (dim <= kMaxDenseDim) {
    try {
      cholesky(assemble_cov_matrix(p));
    } catch (const Error&) {
      fail("assembled covariance is not positive definite");
    }
  }
  return r;
}

inline void require_valid(const MultiTensorGaussianParams& p) {
  const ValidationReport r = validate(p);
  if (!r.ok()) throw InvalidParameters("invalid multivariate parameters: " + r.message());
}

inline Vector stack(const std::vector<DenseTensor>& tensors) {
  if (tensors.empty()) throw ShapeError("nothing to stack");
  const std::size_t k = tensors[0].size();
  Vector z(static_cast<Eigen::Index>(k * tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    check_same_shape(tensors[i], tensors[0]);
    for (std::size_t e = 0; e < k; ++e) z[static_cast<Eigen::Index>(i * k + e)] = tensors[i][e];
  }
  return z;
}

inline std::vector<DenseTensor> unstack(const Vector& z, const Shape& shape) {
  const std::size_t k = element_count(shape);
  if (z.size() == 0 || static_cast<std::size_t>(z.size()) % k != 0)
    throw ShapeError("stacked length is not a multiple of " + std::to_string(k));
  std::vector<DenseTensor> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(z.size()) / k; ++i)
    out.push_back(tensorize(Vector(z.segment(static_cast<Eigen::Index>(i * k), static_cast<Eigen::Index>(k))), shape));
  return out;
}

inline Vector assemble_mean(const MultiTensorGaussianParams& p) {
  std::vector<DenseTensor> means;
  for (std::size_t i = 0; i < p.variates(); ++i) means.push_back(p.alphas[i] * outer_rank1(p.mus[i]));
  return stack(means);
}

/// Validated dense covariance; NotPositiveDefinite when Cholesky fails.
inline SpdMatrix assemble_cov(const MultiTensorGaussianParams& p) {
  return SpdMatrix(assemble_cov_matrix(p));
}

/// cov(Z_(n)): blocks sigma_ij Theta_ij^(n), undefined pairs zero.
inline BlockMatrix mode_n_stacked_cov(const MultiTensorGaussianParams& p, std::size_t n) {
  detail::check_mode(p.order(), n);
  return khatri_rao_block(detail::effective_sigma(p), detail::effective_theta(p, n));
}

/// Unconstrained per-mode factors R_zz^(n) whose Khatri-Rao composition equals
/// the identifiable covariance: R_ij^(1) = sigma_ij Theta_ij^(1), R_ij^(n) =
/// Theta_ij^(n) for the other modes.
inline std::vector<BlockMatrix> to_legacy_factors(const MultiTensorGaussianParams& p) {
  std::vector<BlockMatrix> r;
  for (std::size_t n = 0; n < p.order(); ++n) {
    BlockMatrix t = detail::effective_theta(p, n);
    if (n == 0) t = khatri_rao_block(detail::effective_sigma(p), t);
    r.push_back(std::move(t));
  }
  return r;
}

inline Matrix legacy_assemble_cov(const std::vector<BlockMatrix>& r_zz) {
  if (r_zz.empty()) throw ShapeError("need at least one mode");
  BlockMatrix acc = r_zz.back();
  for (std::size_t n = r_zz.size() - 1; n-- > 0;) acc = khatri_rao_block(acc, r_zz[n]);
  return acc.matrix();
}

/// cov(Z_(n)) from unconstrained factors: (Hadamard_{i != n} ptr(R^(i))) (KR) R^(n).
inline BlockMatrix legacy_mode_n_stacked_cov(const std::vector<BlockMatrix>& r_zz, std::size_t n) {
  detail::check_mode(r_zz.size(), n);
  const std::size_t m = r_zz[n].partitions();
  Matrix weights = Matrix::Ones(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < r_zz.size(); ++i)
    if (i != n) weights = hadamard(weights, partial_trace(r_zz[i]));
  return khatri_rao_block(BlockMatrix(m, 1, 1, weights), r_zz[n]);
}

/// Validated parameters with the dense Cholesky factor of cov(z).
class MultiTensorGaussian {
 public:
  explicit MultiTensorGaussian(MultiTensorGaussianParams params) : params_(std::move(params)) {
    detail::check_capacity(params_.variates() * element_count(params_.shape));
    require_valid(params_);
    mean_ = assemble_mean(params_);
    factor_ = cholesky(assemble_cov_matrix(params_));
    logdet_ = logdet_from_cholesky(factor_);
  }

  const MultiTensorGaussianParams& params() const noexcept { return params_; }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& factor() const noexcept { return factor_; }

  double log_pdf(const std::vector<DenseTensor>& observation) const {
    if (observation.size() != params_.variates())
      throw ShapeError("expected " + std::to_string(params_.variates()) + " variates");
    for (const auto& x : observation)
      if (x.shape() != params_.shape) throw ShapeError("observation shape mismatch");
    const Vector d = stack(observation) - mean_;
    const Vector y = factor_.triangularView<Eigen::Lower>().solve(d);
    const double dim = static_cast<double>(d.size());
    return -0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_ - 0.5 * y.squaredNorm();
  }

  std::vector<DenseTensor> draw(Rng& rng) const {
    Vector w(mean_.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    const Vector z = mean_ + factor_.triangularView<Eigen::Lower>() * w;
    return unstack(z, params_.shape);
  }

 private:
  MultiTensorGaussianParams params_;
  Vector mean_;
  Matrix factor_;
  double logdet_ = 0.0;
};

inline double joint_log_pdf(const MultiTensorGaussianParams& p,
                            const std::vector<DenseTensor>& observation) {
  return MultiTensorGaussian(p).log_pdf(observation);
}

/// M aligned sample sets; sample t of variate i is X_i(t).
class MultiSampleSet {
 public:
  explicit MultiSampleSet(std::vector<SampleSet> variates) : variates_(std::move(variates)) {
    if (variates_.empty()) throw DegenerateInput("multivariate sample set is empty");
    for (const auto& v : variates_) {
      if (v.shape() != variates_[0].shape()) throw ShapeError("variates must share one shape");
      if (v.size() != variates_[0].size()) throw ShapeError("variates must share one length");
    }
  }

  std::size_t variates() const noexcept { return variates_.size(); }
  std::size_t size() const noexcept { return variates_[0].size(); }
  const Shape& shape() const noexcept { return variates_[0].shape(); }
  const SampleSet& operator[](std::size_t i) const { return variates_[i]; }

 private:
  std::vector<SampleSet> variates_;
};

inline MultiSampleSet multi_sample(const MultiTensorGaussianParams& p, std::size_t count,
                                   std::uint64_t seed) {
  const MultiTensorGaussian dist(p);
  if (count == 0) throw DegenerateInput("sample count must be positive");
  const Rng root(seed);
  std::vector<std::vector<DenseTensor>> draws(count);
  parallel_for(count, [&](std::size_t t) {
    Rng rng = root.split(t);
    draws[t] = dist.draw(rng);
  });
  std::vector<SampleSet> sets;
  for (std::size_t i = 0; i < p.variates(); ++i) {
    std::vector<DenseTensor> xs;
    xs.reserve(count);
    for (auto& d : draws) xs.push_back(std::move(d[i]));
    sets.emplace_back(p.shape, std::move(xs));
  }
  return MultiSampleSet(std::move(sets));
}

struct MultiFitReport {
  MultiTensorGaussianParams params;
  Matrix sigma_raw;  // before Bessel's correction
  bool bessel_applied = false;
  std::size_t T = 0;
  bool identifiable = false;
};

/// Closed-form ML fit: per-variate rank-1 means, then
///   sigma_ij = (1/T) sum <S_i(t), S_j(t)>,
///   Theta_ij^(n) = sum S_i(n)(t) S_j(n)(t)^T / (T sigma_ij_raw).
/// Pairs with |sigma_ij_raw| below 1e-12 sqrt(sigma_i^2 sigma_j^2) are marked
/// undefined and keep the raw cross-moment (1/T) sum S_i(n) S_j(n)^T.
inline MultiFitReport multi_fit(const MultiSampleSet& data, bool bessel) {
  const std::size_t m = data.variates();
  const std::size_t order = data.shape().size();
  const std::size_t count = data.size();
  const double t = static_cast<double>(count);

  MultiFitReport rep;
  rep.T = count;
  rep.identifiable = identifiability_check(data.shape(), count);
  rep.bessel_applied = bessel && count > 1;
  MultiTensorGaussianParams& p = rep.params;
  p.shape = data.shape();

  std::vector<std::vector<DenseTensor>> centered(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Rank1Cpd cpd = mean_cpd(sample_mean(data[i]));
    p.alphas.push_back(cpd.alpha);
    p.mus.push_back(cpd.mus);
    const DenseTensor mean = cpd.alpha * outer_rank1(cpd.mus);
    centered[i].reserve(count);
    for (const auto& x : data[i]) centered[i].push_back(x - mean);
  }

  Matrix raw(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < count; ++k) s += inner(centered[i][k], centered[j][k]);
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s / t;
      raw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s / t;
    }
  for (std::size_t i = 0; i < m; ++i) {
    double energy = 0.0;
    for (const auto& x : data[i]) energy += inner(x, x);
    if (!(raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * t > kDegenerateResidual * energy))
      throw DegenerateDistribution("variate " + std::to_string(i + 1) + " has zero variance");
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (std::abs(raw(ii, jj)) < kCrossMomentTolerance * std::sqrt(raw(ii, ii) * raw(jj, jj)))
        p.undefined.emplace_back(i, j);
    }
  rep.sigma_raw = raw;
  p.sigma = rep.bessel_applied ? Matrix(raw * (t / (t - 1.0))) : raw;

  for (std::size_t n = 0; n < order; ++n) {
    const auto in = static_cast<Eigen::Index>(p.shape[n]);
    std::vector<std::vector<Matrix>> grid(m, std::vector<Matrix>(m));
    std::vector<std::vector<Matrix>> unf(m);
    for (std::size_t i = 0; i < m; ++i)
      for (const auto& s : centered[i]) unf[i].push_back(unfold(s, n).matrix);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        Matrix acc = Matrix::Zero(in, in);
        for (std::size_t k = 0; k < count; ++k) acc.noalias() += unf[i][k] * unf[j][k].transpose();
        const double sij = raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        Matrix block = p.is_undefined(i, j) ? Matrix(acc / t) : Matrix(acc / (t * sij));
        if (i == j) block = 0.5 * (block + block.transpose());
        grid[i][j] = block;
        grid[j][i] = block.transpose();
      }
    p.thetas.push_back(BlockMatrix::from_blocks(grid));
  }
  return rep;
}

}  // namespace tgauss
