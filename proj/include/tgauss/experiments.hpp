#pragma once

// Monte Carlo and reporting routines behind the CLI commands.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tgauss/distribution.hpp"
#include "tgauss/estimation.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/parallel.hpp"
#include "tgauss/random.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

/// Well-conditioned parameters drawn from `seed`: mu entries in [0.2, 1]
/// before normalization, alpha in [2, 4], sigma2 in [0.5, 2],
/// Theta_n = (G G^T / I_n + I/2) scaled to unit trace.
inline TensorGaussianParams random_params(const Shape& shape, std::uint64_t seed) {
  element_count(shape);
  Rng rng(seed);
  TensorGaussianParams p;
  p.shape = shape;
  p.alpha = rng.uniform(2.0, 4.0);
  p.sigma2 = rng.uniform(0.5, 2.0);
  for (std::size_t in : shape) {
    const auto i = static_cast<Eigen::Index>(in);
    Vector mu(i);
    for (Eigen::Index k = 0; k < i; ++k) mu[k] = rng.uniform(0.2, 1.0);
    p.mus.push_back(mu / mu.norm());
    Matrix g(i, i);
    for (Eigen::Index r = 0; r < i; ++r)
      for (Eigen::Index c = 0; c < i; ++c) g(r, c) = rng.normal();
    Matrix th = g * g.transpose() / static_cast<double>(in) + 0.5 * Matrix::Identity(i, i);
    th = 0.5 * (th + th.transpose());
    p.thetas.push_back(th / th.trace());
  }
  return p;
}

/// Parameter names in the order estimation_errors() reports them:
/// alpha, mu1..muN, sigma2, theta1..thetaN.
inline std::vector<std::string> parameter_names(std::size_t order) {
  std::vector<std::string> names{"alpha"};
  for (std::size_t n = 1; n <= order; ++n) names.push_back("mu" + std::to_string(n));
  names.push_back("sigma2");
  for (std::size_t n = 1; n <= order; ++n) names.push_back("theta" + std::to_string(n));
  return names;
}

/// Squared estimation errors ||est - truth||^2 per parameter.
inline std::vector<double> estimation_errors(const TensorGaussianParams& est,
                                             const TensorGaussianParams& truth) {
  std::vector<double> e;
  const double da = est.alpha - truth.alpha;
  e.push_back(da * da);
  for (std::size_t n = 0; n < truth.order(); ++n) e.push_back((est.mus[n] - truth.mus[n]).squaredNorm());
  const double ds = est.sigma2 - truth.sigma2;
  e.push_back(ds * ds);
  for (std::size_t n = 0; n < truth.order(); ++n) {
    if (est.thetas.empty()) {
      e.push_back(NAN);
    } else {
      e.push_back((est.thetas[n] - truth.thetas[n]).squaredNorm());
    }
  }
  return e;
}

struct ConsistencyRow {
  std::string parameter;
  std::size_t T = 0;
  std::size_t trials = 0;
  double variance = 0.0;  // mean squared error over trials
};

struct ConsistencyOptions {
  Shape shape{2, 3, 4};
  std::vector<std::size_t> sizes{10, 100, 1000, 10000};
  std::size_t trials = 200;
  std::uint64_t seed = 42;
  bool bessel = true;
};

/// True parameters come from random_params(shape, seed); trial r at sample
/// size T draws from stream derive_seed(derive_seed(seed, T), r). Errors are
/// reduced in trial order, so the output does not depend on the thread count.
inline std::vector<ConsistencyRow> consistency_experiment(const ConsistencyOptions& opt) {
  const TensorGaussianParams truth = random_params(opt.shape, opt.seed);
  const auto names = parameter_names(opt.shape.size());
  std::vector<ConsistencyRow> rows;
  for (std::size_t t : opt.sizes) {
    std::vector<std::vector<double>> errs(opt.trials);
    const std::uint64_t base = derive_seed(opt.seed, t);
    parallel_for(opt.trials, [&](std::size_t r) {
      const SampleSet data = sample(truth, t, derive_seed(base, r), 1);
      errs[r] = estimation_errors(fit(data, opt.bessel).params, truth);
    });
    for (std::size_t k = 0; k < names.size(); ++k) {
      double s = 0.0;
      for (const auto& e : errs) s += e[k];
      rows.push_back({names[k], t, opt.trials, s / static_cast<double>(opt.trials)});
    }
  }
  return rows;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

struct ParamCountRow {
  std::size_t I = 0;
  std::size_t N = 0;
  ParamCounts counts;
};

/// Symmetric shapes I^N for every I in [i_lo, i_hi] and N in [n_lo, n_hi].
inline std::vector<ParamCountRow> param_count_sweep(std::size_t i_lo, std::size_t i_hi,
                                                    std::size_t n_lo, std::size_t n_hi) {
  std::vector<ParamCountRow> rows;
  for (std::size_t i = i_lo; i <= i_hi; ++i)
    for (std::size_t n = n_lo; n <= n_hi; ++n) rows.push_back({i, n, param_counts(Shape(n, i))});
  return rows;
}

struct ModeSpectrum {
  std::size_t mode = 0;  // 0-based
  Vector eigenvalues;    // descending
  Matrix eigenvectors;   // columns, matching eigenvalues
};

struct Analysis {
  EstimationReport report;
  std::vector<ModeSpectrum> spectra;
};

/// Fits the data and decomposes every Theta_n. `topk` = 0 keeps all modes'
/// full spectra.
inline Analysis analyze(const SampleSet& data, std::size_t topk, bool bessel = true) {
  Analysis a;
  a.report = fit(data, bessel);
  if (a.report.degenerate) throw DegenerateDistribution("data have zero residual variance; Theta is undefined");
  for (std::size_t n = 0; n < a.report.params.order(); ++n) {
    const SymmetricEigen e = sym_eig(a.report.params.thetas[n]);
    const auto keep = static_cast<Eigen::Index>(
        topk == 0 ? static_cast<std::size_t>(e.values.size())
                  : std::min<std::size_t>(topk, static_cast<std::size_t>(e.values.size())));
    a.spectra.push_back({n, e.values.head(keep), e.vectors.leftCols(keep)});
  }
  return a;
}

}  // namespace tgauss
