#pragma once

// Closed-form maximum-likelihood estimation of the identifiable tensor
// Gaussian, the sample-size identifiability condition, and the legacy
// flip-flop estimator kept as a comparison baseline.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tgauss/distribution.hpp"
#include "tgauss/errors.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

inline DenseTensor sample_mean(const SampleSet& data) {
  std::vector<double> acc(element_count(data.shape()), 0.0);
  for (const auto& x : data)
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += x[k];
  const double t = static_cast<double>(data.size());
  for (double& v : acc) v /= t;
  return DenseTensor(data.shape(), std::move(acc));
}

struct Rank1Cpd {
  double alpha = 0.0;
  std::vector<Vector> mus;
};

/// Best rank-1 approximation via the multilinear SVD: mu_n is the leading
/// left singular vector of the mode-n unfolding (largest-magnitude entry
/// positive), alpha the magnitude of the projected core. A negative core is
/// absorbed by flipping mu_1.
inline Rank1Cpd rank1_cpd(const DenseTensor& m) {
  Rank1Cpd out;
  for (std::size_t n = 0; n < m.order(); ++n) {
    try {
      out.mus.push_back(leading_singular_vector(unfold(m, n).matrix).vector);
    } catch (const DegenerateInput&) {
      throw DegenerateInput("rank-1 decomposition of a zero tensor");
    }
  }
  DenseTensor core = m;
  for (std::size_t n = 0; n < m.order(); ++n)
    core = mode_n_product(core, out.mus[n].transpose(), n);
  const double c = core[0];
  if (c < 0.0) out.mus[0] = -out.mus[0];
  out.alpha = std::abs(c);
  return out;
}

/// Rank-1 fit of a sample mean; an exactly zero mean gives alpha = 0 with
/// first-basis-vector factors.
inline Rank1Cpd mean_cpd(const DenseTensor& mbar) {
  if (inner(mbar, mbar) > 0.0) return rank1_cpd(mbar);
  Rank1Cpd out;
  for (std::size_t in : mbar.shape()) out.mus.push_back(Vector::Unit(static_cast<Eigen::Index>(in), 0));
  return out;
}

/// Sample-size condition for a unique Theta estimate: T > max_n I_n^2 / K.
inline bool identifiability_check(const Shape& shape, std::size_t t) {
  const std::size_t k = element_count(shape);
  for (std::size_t in : shape)
    if (static_cast<unsigned __int128>(t) * k <= static_cast<unsigned __int128>(in) * in)
      return false;
  return true;
}

/// max_n I_n^2 / K, the bound T must strictly exceed.
inline double identifiability_threshold(const Shape& shape) {
  const double k = static_cast<double>(element_count(shape));
  double best = 0.0;
  for (std::size_t in : shape) best = std::max(best, static_cast<double>(in) * in / k);
  return best;
}

inline std::string identifiability_warning(const Shape& shape, std::size_t t) {
  std::ostringstream os;
  os << "warning: shape " << shape_string(shape) << " needs T > "
     << std::setprecision(6) << identifiability_threshold(shape)
     << " samples for a unique estimate, got T = " << t;
  return os.str();
}

struct EstimationReport {
  TensorGaussianParams params;  // thetas empty when degenerate
  double sigma2_raw = 0.0;      // ML value before Bessel's correction
  bool bessel_applied = false;
  std::size_t T = 0;
  bool identifiable = false;
  bool degenerate = false;  // sigma2 == 0: Theta undefined
  double rank1_explained_variance = 0.0;
};

// Relative floor below which the residual energy counts as zero.
inline constexpr double kDegenerateResidual = 1e-24;

/// Closed-form ML fit. The mean is the rank-1 CPD of the sample mean;
/// sigma2 = (1/T) sum ||S(t)||^2 (times T/(T-1) when `bessel` and T > 1);
/// Theta_n = sum S_(n) S_(n)^T / (T sigma2_raw), which has unit trace exactly.
/// A violated identifiability condition is flagged, not fatal.
inline EstimationReport fit(const SampleSet& data, bool bessel) {
  EstimationReport rep;
  rep.T = data.size();
  rep.identifiable = identifiability_check(data.shape(), rep.T);
  const DenseTensor mbar = sample_mean(data);
  const Rank1Cpd cpd = mean_cpd(mbar);
  rep.params.shape = data.shape();
  rep.params.alpha = cpd.alpha;
  rep.params.mus = cpd.mus;
  const double mbar_sq = inner(mbar, mbar);
  rep.rank1_explained_variance = mbar_sq > 0.0 ? cpd.alpha * cpd.alpha / mbar_sq : 1.0;

  const DenseTensor mean = cpd.alpha * outer_rank1(cpd.mus);
  const std::size_t order = data.shape().size();
  const double t = static_cast<double>(rep.T);
  std::vector<Matrix> grams;
  for (std::size_t in : data.shape())
    grams.push_back(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(in)));
  double energy = 0.0, data_energy = 0.0;
  for (const auto& x : data) {
    const DenseTensor s = x - mean;
    energy += inner(s, s);
    data_energy += inner(x, x);
    for (std::size_t n = 0; n < order; ++n) {
      const Matrix u = unfold(s, n).matrix;
      grams[n].noalias() += u * u.transpose();
    }
  }
  rep.sigma2_raw = energy / t;
  if (!(energy > kDegenerateResidual * data_energy)) {
    rep.degenerate = true;
    rep.sigma2_raw = 0.0;
    rep.params.sigma2 = 0.0;
    return rep;
  }
  rep.bessel_applied = bessel && rep.T > 1;
  rep.params.sigma2 = rep.bessel_applied ? rep.sigma2_raw * t / (t - 1.0) : rep.sigma2_raw;
  for (std::size_t n = 0; n < order; ++n) {
    Matrix th = grams[n] / energy;
    rep.params.thetas.push_back(0.5 * (th + th.transpose()));
  }
  return rep;
}

inline double log_likelihood(const TensorGaussianParams& p, const SampleSet& data) {
  const TensorGaussian dist(p);
  double s = 0.0;
  for (const auto& x : data) s += dist.log_pdf(x);
  return s;
}

/// Unconstrained Kronecker model: vec(X) ~ N(vec(mean), R_N (x) ... (x) R_1).
struct LegacyKroneckerParams {
  DenseTensor mean;
  std::vector<Matrix> covs;

  /// Dense R_N (x) ... (x) R_1.
  Matrix composition() const { return kron_descending(covs); }
};

struct FlipFlopOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
  // Initial R_n; defaults to I / I_n for every mode.
  std::optional<std::vector<Matrix>> init;
};

struct FlipFlopResult {
  LegacyKroneckerParams params;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// ||A - B||_F / ||B||_F for A = (x)a_n, B = (x)b_n without forming either.
inline double relative_kron_change(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double aa = 1.0, bb = 1.0, ab = 1.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    aa *= a[n].squaredNorm();
    bb *= b[n].squaredNorm();
    ab *= a[n].cwiseProduct(b[n]).sum();
  }
  return std::sqrt(std::max(0.0, aa + bb - 2.0 * ab)) / std::sqrt(bb);
}

}  // namespace detail

/// Block-coordinate ML for the unconstrained model. Each sweep updates
///   R_n <- I_n/(T K) sum_t S_(n)(t) ((x)_{i != n} R_i^{-1}) S_(n)(t)^T
/// for n = 1..N, applying the inverse factors as mode-wise Cholesky solves.
/// Stops when the composition changes by less than `tol` (relative Frobenius).
inline FlipFlopResult flip_flop_fit(const SampleSet& data, const FlipFlopOptions& opt = {}) {
  const Shape& shape = data.shape();
  const std::size_t order = shape.size();
  const std::size_t k = element_count(shape);
  const double t = static_cast<double>(data.size());

  FlipFlopResult res;
  res.params.mean = sample_mean(data);
  std::vector<DenseTensor> centered;
  centered.reserve(data.size());
  for (const auto& x : data) centered.push_back(x - res.params.mean);

  std::vector<Matrix>& r = res.params.covs;
  if (opt.init) {
    if (opt.init->size() != order) throw ShapeError("flip-flop init needs one matrix per mode");
    r = *opt.init;
  } else {
    for (std::size_t in : shape) {
      const auto i = static_cast<Eigen::Index>(in);
      r.push_back(Matrix::Identity(i, i) / static_cast<double>(in));
    }
  }
  std::vector<Matrix> factors;
  for (const auto& m : r) factors.push_back(cholesky(m));

  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    const std::vector<Matrix> previous = r;
    for (std::size_t n = 0; n < order; ++n) {
      const auto in = static_cast<Eigen::Index>(shape[n]);
      Matrix acc = Matrix::Zero(in, in);
      for (const auto& s : centered) {
        DenseTensor w = s;
        for (std::size_t i = 0; i < order; ++i)
          if (i != n) w = mode_n_solve(w, factors[i], i);
        acc.noalias() += unfold(s, n).matrix * unfold(w, n).matrix.transpose();
      }
      Matrix next = acc * (static_cast<double>(shape[n]) / (t * static_cast<double>(k)));
      r[n] = 0.5 * (next + next.transpose());
      factors[n] = cholesky(r[n]);
    }
    res.iterations = it + 1;
    if (detail::relative_kron_change(r, previous) < opt.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Log-likelihood of the data under the unconstrained Kronecker model.
inline double legacy_log_likelihood(const LegacyKroneckerParams& p, const SampleSet& data) {
  const Shape& shape = data.shape();
  check_same_shape(p.mean, data[0]);
  const double k = static_cast<double>(element_count(shape));
  std::vector<Matrix> factors;
  double logdet = 0.0;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    factors.push_back(cholesky(p.covs.at(n)));
    logdet += k / static_cast<double>(shape[n]) * logdet_from_cholesky(factors.back());
  }
  const double per_sample = -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
  double total = 0.0;
  for (const auto& x : data) {
    const DenseTensor s = x - p.mean;
    DenseTensor w = s;
    for (std::size_t n = 0; n < shape.size(); ++n) w = mode_n_solve(w, factors[n], n);
    total += per_sample - 0.5 * inner(w, s);
  }
  return total;
}

/// Identifiable reparameterization of a legacy fit: sigma2 = prod tr(R_n),
/// Theta_n = R_n / tr(R_n). The legacy mean is kept as is.
inline std::pair<double, std::vector<Matrix>> identifiable_covariance(
    const std::vector<Matrix>& covs) {
  double sigma2 = 1.0;
  std::vector<Matrix> thetas;
  for (const auto& r : covs) {
    const double tr = r.trace();
    sigma2 *= tr;
    thetas.push_back(r / tr);
  }
  return {sigma2, thetas};
}

}  // namespace tgauss
