#pragma once

// The identifiable tensor-valued Gaussian
//
//   vec(X) ~ N( alpha (mu_N (x) ... (x) mu_1),  sigma2 (Theta_N (x) ... (x) Theta_1) )
//
// with ||mu_n|| = 1 and tr(Theta_n) = 1 for every mode. Everything here works
// mode by mode; the K x K covariance is never assembled.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tgauss/errors.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/parallel.hpp"
#include "tgauss/random.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

inline constexpr double kUnitTolerance = 1e-12;

struct TensorGaussianParams {
  Shape shape;
  double alpha = 0.0;
  std::vector<Vector> mus;     // one unit vector per mode
  double sigma2 = 0.0;
  std::vector<Matrix> thetas;  // one unit-trace SPD matrix per mode

  std::size_t order() const noexcept { return shape.size(); }
};

/// Canonical parameters: mu_n = e_1, Theta_n = I / I_n.
inline TensorGaussianParams canonical_params(const Shape& shape, double alpha = 1.0,
                                             double sigma2 = 1.0) {
  element_count(shape);
  TensorGaussianParams p{shape, alpha, {}, sigma2, {}};
  for (std::size_t in : shape) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(in));
    e[0] = 1.0;
    p.mus.push_back(e);
    p.thetas.push_back(Matrix::Identity(static_cast<Eigen::Index>(in),
                                        static_cast<Eigen::Index>(in)) /
                       static_cast<double>(in));
  }
  return p;
}

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }

  std::string message() const {
    std::string s;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) s += "; ";
      s += violations[i];
    }
    return s;
  }
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline double min_eigenvalue(const Matrix& a) {
  try {
    return sym_eig(a).values[a.rows() - 1];
  } catch (const Error&) {
    return NAN;
  }
}

}  // namespace detail

/// Checks every constraint of the identifiable parameterization. Never throws;
/// each violation is reported with its measured value (modes 1-based).
inline ValidationReport validate(const TensorGaussianParams& p) {
  ValidationReport r;
  auto fail = [&](std::string s) { r.violations.push_back(std::move(s)); };
  if (p.shape.empty()) {
    fail("shape: order must be at least 1");
    return r;
  }
  for (std::size_t n = 0; n < p.shape.size(); ++n)
    if (p.shape[n] == 0) fail("shape: mode " + std::to_string(n + 1) + " has dimension 0");
  if (!r.ok()) return r;

  if (!std::isfinite(p.alpha) || p.alpha < 0.0) fail("alpha must be >= 0, got " + detail::num(p.alpha));
  if (!std::isfinite(p.sigma2) || p.sigma2 < 0.0)
    fail("sigma2 must be >= 0, got " + detail::num(p.sigma2));

  const std::size_t order = p.shape.size();
  if (p.mus.size() != order) {
    fail("mu: expected " + std::to_string(order) + " vectors, got " + std::to_string(p.mus.size()));
  } else {
    for (std::size_t n = 0; n < order; ++n) {
      const std::string tag = "mu[" + std::to_string(n + 1) + "]";
      if (static_cast<std::size_t>(p.mus[n].size()) != p.shape[n]) {
        fail(tag + ": length " + std::to_string(p.mus[n].size()) + " != " +
             std::to_string(p.shape[n]));
        continue;
      }
      const double norm = p.mus[n].norm();
      if (!(std::abs(norm - 1.0) <= kUnitTolerance))
        fail(tag + ": norm " + detail::num(norm) + " is not 1");
    }
  }

  if (p.thetas.size() != order) {
    fail("theta: expected " + std::to_string(order) + " matrices, got " +
         std::to_string(p.thetas.size()));
  } else {
    for (std::size_t n = 0; n < order; ++n) {
      const std::string tag = "theta[" + std::to_string(n + 1) + "]";
      const Matrix& t = p.thetas[n];
      if (static_cast<std::size_t>(t.rows()) != p.shape[n] ||
          static_cast<std::size_t>(t.cols()) != p.shape[n]) {
        fail(tag + ": size " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
             " != " + std::to_string(p.shape[n]));
        continue;
      }
      if (!t.allFinite()) {
        fail(tag + ": non-finite entries");
        continue;
      }
      const double asym = asymmetry(t);
      if (asym > 1e-12) {
        fail(tag + ": not symmetric (relative asymmetry " + detail::num(asym) + ")");
        continue;
      }
      const double tr = t.trace();
      if (!(std::abs(tr - 1.0) <= kUnitTolerance)) fail(tag + ": trace " + detail::num(tr) + " is not 1");
      try {
        cholesky(t);
      } catch (const Error&) {
        fail(tag + ": not positive definite (min eigenvalue " +
             detail::num(detail::min_eigenvalue(t)) + ")");
      }
    }
  }
  return r;
}

inline void require_valid(const TensorGaussianParams& p) {
  const ValidationReport r = validate(p);
  if (!r.ok()) throw InvalidParameters("invalid parameters: " + r.message());
}

/// alpha * (mu_1 o ... o mu_N).
inline DenseTensor mean_tensor(const TensorGaussianParams& p) {
  return p.alpha * outer_rank1(p.mus);
}

/// cov([X]_{i}, [X]_{j}) = sigma2 * prod_n Theta_n[i_n, j_n] (0-based indices).
inline double element_cov(const TensorGaussianParams& p, std::span<const std::size_t> i,
                          std::span<const std::size_t> j) {
  if (i.size() != p.order() || j.size() != p.order())
    throw ShapeError("multi-index order does not match the tensor order");
  double c = p.sigma2;
  for (std::size_t n = 0; n < p.order(); ++n) {
    if (i[n] >= p.shape[n] || j[n] >= p.shape[n])
      throw ShapeError("index out of range at mode " + std::to_string(n + 1));
    c *= p.thetas[n](static_cast<Eigen::Index>(i[n]), static_cast<Eigen::Index>(j[n]));
  }
  return c;
}

/// Covariance of the mode-n unfolding, sigma2 * Theta_n.
inline Matrix mode_n_cov(const TensorGaussianParams& p, std::size_t n) {
  detail::check_mode(p.order(), n);
  return p.sigma2 * p.thetas[n];
}

/// Validated parameters with per-mode Cholesky factors, for repeated density
/// evaluation and sampling.
class TensorGaussian {
 public:
  explicit TensorGaussian(TensorGaussianParams params) : params_(std::move(params)) {
    require_valid(params_);
    mean_ = mean_tensor(params_);
    k_ = element_count(params_.shape);
    norm_const_ = 0.0;
    for (std::size_t n = 0; n < params_.order(); ++n) {
      factors_.push_back(cholesky(params_.thetas[n]));
      norm_const_ += static_cast<double>(k_) / (2.0 * static_cast<double>(params_.shape[n])) *
                     logdet_from_cholesky(factors_.back());
    }
  }

  const TensorGaussianParams& params() const noexcept { return params_; }
  const DenseTensor& mean() const noexcept { return mean_; }
  const std::vector<Matrix>& factors() const noexcept { return factors_; }

  double log_pdf(const DenseTensor& x) const {
    if (params_.sigma2 == 0.0)
      throw DegenerateDistribution("log density undefined for sigma2 = 0");
    check_same_shape(x, mean_);
    const DenseTensor s = x - mean_;
    DenseTensor w = s;
    for (std::size_t n = 0; n < params_.order(); ++n) w = mode_n_solve(w, factors_[n], n);
    const double kd = static_cast<double>(k_);
    return -0.5 * kd * std::log(2.0 * std::numbers::pi * params_.sigma2) - norm_const_ -
           inner(w, s) / (2.0 * params_.sigma2);
  }

  /// One draw from the stream `rng`: mean + sigma * (W x_1 L_1 ... x_N L_N).
  DenseTensor draw(Rng& rng) const {
    std::vector<double> w(k_);
    for (double& v : w) v = rng.normal();
    DenseTensor z(params_.shape, std::move(w));
    for (std::size_t n = 0; n < params_.order(); ++n) z = mode_n_product(z, factors_[n], n);
    return mean_ + std::sqrt(params_.sigma2) * z;
  }

 private:
  TensorGaussianParams params_;
  DenseTensor mean_;
  std::vector<Matrix> factors_;
  std::size_t k_ = 0;
  double norm_const_ = 0.0;
};

inline double log_pdf(const TensorGaussianParams& p, const DenseTensor& x) {
  return TensorGaussian(p).log_pdf(x);
}

/// T tensors sharing one shape.
class SampleSet {
 public:
  SampleSet(Shape shape, std::vector<DenseTensor> samples)
      : shape_(std::move(shape)), samples_(std::move(samples)) {
    check();
  }

  explicit SampleSet(std::vector<DenseTensor> samples)
      : shape_(first_shape(samples)), samples_(std::move(samples)) {
    check();
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const DenseTensor& operator[](std::size_t t) const { return samples_[t]; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }
  const std::vector<DenseTensor>& samples() const noexcept { return samples_; }

 private:
  void check() const {
    element_count(shape_);
    if (samples_.empty()) throw DegenerateInput("sample set is empty");
    for (const auto& s : samples_)
      if (s.shape() != shape_)
        throw ShapeError("sample of shape " + shape_string(s.shape()) +
                         " in a set of shape " + shape_string(shape_));
  }

  static Shape first_shape(const std::vector<DenseTensor>& samples) {
    if (samples.empty()) throw DegenerateInput("sample set is empty");
    return samples.front().shape();
  }

  Shape shape_;
  std::vector<DenseTensor> samples_;
};

/// T draws; sample t uses the sub-stream Rng(seed).split(t), so output is
/// identical for any worker count.
inline SampleSet sample(const TensorGaussianParams& p, std::size_t count, std::uint64_t seed,
                        std::size_t workers = thread_count()) {
  const TensorGaussian dist(p);
  if (count == 0) throw DegenerateInput("sample count must be positive");
  const Rng root(seed);
  std::vector<DenseTensor> out(count);
  parallel_for(count, [&](std::size_t t) {
    Rng rng = root.split(t);
    out[t] = dist.draw(rng);
  }, workers);
  return SampleSet(p.shape, std::move(out));
}

struct ParamCounts {
  double eta_multi = 0;   // mean + covariance, unstructured
  double eta_tensor = 0;  // mean + covariance, Kronecker separable
  double ratio = 0;
  std::uint64_t mean_full = 0;   // K
  std::uint64_t mean_rank1 = 0;  // 1 + sum I_n
};

/// Distinct-parameter counts of the unstructured and separable models. The
/// eta values are doubles (exact below 2^53).
inline ParamCounts param_counts(const Shape& shape) {
  element_count(shape);
  ParamCounts c;
  double k = 1.0;
  std::uint64_t ku = 1, sum = 0;
  double tensor_mean = 0.0, tensor_cov = 0.0;
  for (std::size_t in : shape) {
    const double i = static_cast<double>(in);
    k *= i;
    ku *= in;
    sum += in;
    tensor_mean += i;
    tensor_cov += 0.5 * (i * i + i);
  }
  c.eta_multi = 0.5 * (k * k + k) + k;
  c.eta_tensor = tensor_mean + tensor_cov;
  c.ratio = c.eta_tensor / c.eta_multi;
  c.mean_full = ku;
  c.mean_rank1 = 1 + sum;
  return c;
}

}  // namespace tgauss
