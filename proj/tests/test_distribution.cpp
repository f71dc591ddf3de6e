#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace tgauss;

namespace {

Matrix dense_cov(const TensorGaussianParams& p) { return p.sigma2 * oracle::kron_desc(p.thetas); }

Vector dense_mean(const TensorGaussianParams& p) { return p.alpha * oracle::outer_vec(p.mus); }

}  // namespace

TEST(Validate, CanonicalIsOk) {
  EXPECT_TRUE(validate(canonical_params({2, 3, 4})).ok());
  EXPECT_TRUE(validate(canonical_params({1, 1})).ok());
}

TEST(Validate, ReportsTraceViolation) {
  TensorGaussianParams p = canonical_params({2, 3});
  p.thetas[0] = Matrix::Identity(2, 2);
  const ValidationReport r = validate(p);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.message().find("theta[1]: trace 2"), std::string::npos);
}

TEST(Validate, ReportsIndefiniteTheta) {
  TensorGaussianParams p = canonical_params({2});
  p.thetas[0] << 0.5, 0.6, 0.6, 0.5;
  const ValidationReport r = validate(p);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.message().find("not positive definite (min eigenvalue -0.1)"), std::string::npos);
}

TEST(Validate, ReportsEveryViolation) {
  TensorGaussianParams p = canonical_params({2, 2});
  p.alpha = -1;
  p.sigma2 = -2;
  p.mus[1] *= 2.0;
  const ValidationReport r = validate(p);
  EXPECT_EQ(r.violations.size(), 3u);
  EXPECT_THROW(require_valid(p), InvalidParameters);
  p.thetas.pop_back();
  EXPECT_NO_THROW(validate(p));
}

TEST(MeanTensor, Examples) {
  TensorGaussianParams p = canonical_params({2, 3}, 0.0);
  EXPECT_EQ(mean_tensor(p), DenseTensor::zeros({2, 3}));
  p = canonical_params({2, 2}, 2.0);
  p.mus[0] = Vector::Constant(2, 1 / std::sqrt(2.0));
  p.mus[1] = p.mus[0];
  const DenseTensor m = mean_tensor(p);
  for (double v : m.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(MeanTensor, ElementwiseAndKronecker) {
  std::mt19937_64 g(31);
  for (int t = 0; t < 20; ++t) {
    const auto p = oracle::random_params(g, oracle::random_shape(g, 24));
    const DenseTensor m = mean_tensor(p);
    EXPECT_LT((vectorize_eigen(m) - dense_mean(p)).norm(), 1e-13);
    Vector kr = p.mus[0];
    for (std::size_t n = 1; n < p.order(); ++n) kr = kron(p.mus[n], kr);
    EXPECT_LT((vectorize_eigen(m) - p.alpha * kr).norm(), 1e-13);
  }
}

TEST(ElementCov, Examples) {
  const TensorGaussianParams c = canonical_params({2, 3, 4}, 1.0, 3.0);
  const std::vector<std::size_t> i{1, 2, 3};
  EXPECT_NEAR(element_cov(c, i, i), 3.0 / 24.0, 1e-15);
  TensorGaussianParams z = c;
  z.sigma2 = 0.0;
  EXPECT_EQ(element_cov(z, i, std::vector<std::size_t>{0, 0, 0}), 0.0);
  EXPECT_THROW(element_cov(c, std::vector<std::size_t>{2, 0, 0}, i), ShapeError);
}

TEST(ElementCov, MatchesDenseAssembly) {
  std::mt19937_64 g(32);
  for (int t = 0; t < 20; ++t) {
    const auto p = oracle::random_params(g, oracle::random_shape(g, 24));
    const Matrix cov = dense_cov(p);
    const DenseTensor probe = DenseTensor::zeros(p.shape);
    for (std::size_t a = 0; a < probe.size(); ++a)
      for (std::size_t b = 0; b < probe.size(); ++b)
        EXPECT_NEAR(element_cov(p, probe.multi_index(a), probe.multi_index(b)),
                    cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), 1e-14);
  }
}

TEST(ModeNCov, UnitTrace) {
  std::mt19937_64 g(33);
  const auto p = oracle::random_params(g, {2, 3, 4});
  for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(mode_n_cov(p, n).trace(), p.sigma2, 1e-13);
  const TensorGaussianParams c = canonical_params({3});
  EXPECT_EQ(mode_n_cov(c, 0), Matrix(Matrix::Identity(3, 3) / 3.0));
}

TEST(LogPdf, StandardNormalAtMean) {
  const TensorGaussianParams p = canonical_params({1}, 0.0, 1.0);
  EXPECT_NEAR(log_pdf(p, DenseTensor::zeros({1})), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(log_pdf(p, DenseTensor::zeros({1})), -0.91894, 1e-5);
}

TEST(LogPdf, MatchesDenseOracle) {
  std::mt19937_64 g(34);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_params(g, oracle::random_shape(g, 24));
    const TensorGaussian dist(p);
    const DenseTensor x = mean_tensor(p) + oracle::random_tensor(g, p.shape);
    const double ref = oracle::dense_logpdf(vectorize_eigen(x), dense_mean(p), dense_cov(p));
    EXPECT_NEAR(dist.log_pdf(x), ref, 1e-8);
  }
}

TEST(LogPdf, MaximalAtMean) {
  std::mt19937_64 g(35);
  const auto p = oracle::random_params(g, {2, 3, 2});
  const TensorGaussian dist(p);
  const double top = dist.log_pdf(mean_tensor(p));
  for (int t = 0; t < 50; ++t)
    EXPECT_LT(dist.log_pdf(mean_tensor(p) + 1e-3 * oracle::random_tensor(g, p.shape)), top);
}

TEST(LogPdf, Errors) {
  TensorGaussianParams p = canonical_params({2, 2});
  EXPECT_THROW(log_pdf(p, DenseTensor::zeros({2, 3})), ShapeError);
  p.sigma2 = 0.0;
  EXPECT_THROW(log_pdf(p, DenseTensor::zeros({2, 2})), DegenerateDistribution);
  p.thetas[0] = Matrix::Identity(2, 2);
  EXPECT_THROW(TensorGaussian{p}, InvalidParameters);
}

TEST(Sample, ZeroVarianceGivesMean) {
  std::mt19937_64 g(36);
  auto p = oracle::random_params(g, {2, 3});
  p.sigma2 = 0.0;
  const SampleSet s = sample(p, 3, 1);
  for (const auto& x : s) EXPECT_EQ(x, mean_tensor(p));
}

TEST(Sample, DeterministicAcrossWorkerCounts) {
  std::mt19937_64 g(37);
  const auto p = oracle::random_params(g, {2, 3, 4});
  const SampleSet a = sample(p, 64, 99, 1);
  const SampleSet b = sample(p, 64, 99, 4);
  const SampleSet c = sample(p, 64, 100, 1);
  for (std::size_t t = 0; t < 64; ++t) EXPECT_EQ(a[t], b[t]);
  EXPECT_NE(a[0], c[0]);
}

TEST(Sample, MomentsMatch) {
  std::mt19937_64 g(38);
  const auto p = oracle::random_params(g, {2, 3, 4});
  const std::size_t t = 100000;
  const SampleSet s = sample(p, t, 2024);
  const DenseTensor m = mean_tensor(p);

  DenseTensor acc = DenseTensor::zeros(p.shape);
  for (const auto& x : s) acc = acc + x;
  const DenseTensor mean = (1.0 / static_cast<double>(t)) * acc;
  EXPECT_LT(frobenius_norm(mean - m), 0.01 * frobenius_norm(m));

  Matrix cov = Matrix::Zero(24, 24);
  std::vector<Matrix> modes;
  for (auto in : p.shape) modes.push_back(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(in)));
  for (const auto& x : s) {
    const Vector d = vectorize_eigen(x - m);
    cov.noalias() += d * d.transpose();
    for (std::size_t n = 0; n < 3; ++n) {
      const Matrix u = unfold(x - m, n).matrix;
      modes[n].noalias() += u * u.transpose();
    }
  }
  cov /= static_cast<double>(t);
  EXPECT_LT(oracle::rel_fro(cov, dense_cov(p)), 0.03);
  for (std::size_t n = 0; n < 3; ++n)
    EXPECT_LT(oracle::rel_fro(modes[n] / static_cast<double>(t), mode_n_cov(p, n)), 0.02);
}

TEST(Sample, VarianceRepresentationInvariance) {
  std::mt19937_64 g(39);
  const auto p = oracle::random_params(g, {3, 2, 4});
  const SampleSet s = sample(p, 200, 5);
  double by_tensor = 0.0, by_vector = 0.0;
  std::vector<double> by_mode(3, 0.0);
  for (const auto& x : s) {
    by_tensor += inner(x, x);
    by_vector += vectorize_eigen(x).squaredNorm();
    for (std::size_t n = 0; n < 3; ++n) by_mode[n] += unfold(x, n).matrix.squaredNorm();
  }
  EXPECT_NEAR(by_vector, by_tensor, 1e-12 * by_tensor);
  for (double v : by_mode) EXPECT_NEAR(v, by_tensor, 1e-12 * by_tensor);
}

TEST(Sample, TraceOfCovarianceIsSigma2) {
  std::mt19937_64 g(40);
  const auto p = oracle::random_params(g, {2, 3, 2});
  EXPECT_NEAR(dense_cov(p).trace(), p.sigma2, 1e-12 * p.sigma2);
}

TEST(ParamCounts, Examples) {
  const ParamCounts c = param_counts({2, 2, 2});
  EXPECT_EQ(c.eta_multi, 44.0);
  EXPECT_EQ(c.eta_tensor, 15.0);
  EXPECT_DOUBLE_EQ(c.ratio, 15.0 / 44.0);
  const ParamCounts era = param_counts({721, 1440, 20});
  EXPECT_EQ(era.mean_full, 20764800u);
  EXPECT_EQ(era.mean_rank1, 2182u);
  EXPECT_EQ(param_counts({7}).ratio, 1.0);
}

TEST(ParamCounts, SymmetricClosedForms) {
  for (std::size_t i = 1; i <= 6; ++i)
    for (std::size_t n = 1; n <= 5; ++n) {
      const ParamCounts c = param_counts(Shape(n, i));
      const double di = static_cast<double>(i), dn = static_cast<double>(n);
      EXPECT_EQ(c.eta_multi, 0.5 * (std::pow(di, 2 * dn) + 3 * std::pow(di, dn)));
      EXPECT_EQ(c.eta_tensor, 0.5 * dn * (di * di + 3 * di));
    }
}

TEST(ParamCounts, RatioDecreasesWithOrder) {
  for (std::size_t i = 2; i <= 10; ++i)
    for (std::size_t n = 1; n < 8; ++n)
      EXPECT_LT(param_counts(Shape(n + 1, i)).ratio, param_counts(Shape(n, i)).ratio) << i << " " << n;
}

TEST(SampleSet, Invariants) {
  EXPECT_THROW(SampleSet({2}, {}), DegenerateInput);
  EXPECT_THROW(SampleSet({2}, {DenseTensor::zeros({2}), DenseTensor::zeros({3})}), ShapeError);
}
