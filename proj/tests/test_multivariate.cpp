#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace tgauss;

namespace {

// Two correlated variates with Theta_ij = G_i G_j^T / trace(G_i G_j^T). The
// covariance is blockdiag(G) (W (x) I) blockdiag(G)^T with W = [[1, rho], [rho, 1]]
// up to diagonal scaling, so it is positive definite for |rho| < 1.
MultiTensorGaussianParams pair_params(std::mt19937_64& g, const Shape& s, double rho) {
  std::uniform_real_distribution<double> u(0.3, 3.0);
  std::vector<TensorGaussianParams> marg(2);
  for (auto& m : marg) {
    m.shape = s;
    m.alpha = u(g);
    m.sigma2 = u(g);
  }
  std::vector<std::vector<std::vector<Matrix>>> cross(s.size(), std::vector<std::vector<Matrix>>(2, std::vector<Matrix>(2)));
  double ratio = 1.0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    const auto in = static_cast<Eigen::Index>(s[n]);
    const Matrix g0 = Matrix::Identity(in, in) + 0.3 * oracle::random_matrix(g, in, in);
    const Matrix g1 = Matrix::Identity(in, in) + 0.3 * oracle::random_matrix(g, in, in);
    const Matrix a = g0 * g0.transpose(), b = g1 * g1.transpose(), c = g0 * g1.transpose();
    marg[0].thetas.push_back(a / a.trace());
    marg[1].thetas.push_back(b / b.trace());
    marg[0].mus.push_back(oracle::random_unit(g, in));
    marg[1].mus.push_back(oracle::random_unit(g, in));
    cross[n][0][1] = c / c.trace();
    ratio *= c.trace() / std::sqrt(a.trace() * b.trace());
  }
  Matrix sigma(2, 2);
  const double c = rho * ratio * std::sqrt(marg[0].sigma2 * marg[1].sigma2);
  sigma << marg[0].sigma2, c, c, marg[1].sigma2;
  return make_multi_params(marg, sigma, cross);
}

Matrix dense_cov(const MultiTensorGaussianParams& p) {
  const std::size_t m = p.variates();
  const auto k = static_cast<Eigen::Index>(oracle::count(p.shape));
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(m) * k, static_cast<Eigen::Index>(m) * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (p.is_undefined(i, j)) continue;
      std::vector<Matrix> blocks;
      for (const auto& t : p.thetas) blocks.push_back(t.block(i, j));
      c.block(static_cast<Eigen::Index>(i) * k, static_cast<Eigen::Index>(j) * k, k, k) =
          p.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * oracle::kron_desc(blocks);
    }
  return c;
}

MultiTensorGaussianParams single(const TensorGaussianParams& p) {
  return make_multi_params({p}, Matrix::Constant(1, 1, p.sigma2), std::vector<std::vector<std::vector<Matrix>>>(p.order()));
}

}  // namespace

TEST(Stack, Examples) {
  std::mt19937_64 g(71);
  const DenseTensor x = oracle::random_tensor(g, {2, 3});
  EXPECT_EQ(stack({x}), vectorize_eigen(x));
  const Vector ab = stack({DenseTensor({1, 1}, {2.0}), DenseTensor({1, 1}, {5.0})});
  EXPECT_EQ(ab, (Vector(2) << 2.0, 5.0).finished());
  const DenseTensor y = oracle::random_tensor(g, {2, 3});
  const auto back = unstack(stack({x, y}), {2, 3});
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], x);
  EXPECT_EQ(back[1], y);
  EXPECT_THROW(stack({x, DenseTensor::zeros({3, 2})}), ShapeError);
}

TEST(AssembleMean, MatchesPerVariateMeans) {
  std::mt19937_64 g(72);
  auto p = pair_params(g, {2, 3}, 0.5);
  EXPECT_EQ(assemble_mean(p), stack({mean_tensor(p.marginal(0)), mean_tensor(p.marginal(1))}));
  p.alphas = {0.0, 0.0};
  EXPECT_EQ(assemble_mean(p), Vector::Zero(12));
  const auto q = oracle::random_params(g, {2, 2});
  Matrix sigma = Matrix::Constant(2, 2, q.sigma2);
  std::vector<std::vector<std::vector<Matrix>>> cross(2, std::vector<std::vector<Matrix>>(2, std::vector<Matrix>(2)));
  for (std::size_t n = 0; n < 2; ++n) cross[n][0][1] = q.thetas[n];
  const Vector twin = assemble_mean(make_multi_params({q, q}, sigma, cross));
  EXPECT_EQ(twin.head(4), twin.tail(4));
}

TEST(AssembleCov, ReducesToUnivariate) {
  std::mt19937_64 g(73);
  const auto p = oracle::random_params(g, {2, 3, 2});
  const Matrix c = assemble_cov(single(p)).matrix();
  EXPECT_LT((c - p.sigma2 * oracle::kron_desc(p.thetas)).norm(), 1e-12);
}

TEST(AssembleCov, WhiteBlocksGiveKronecker) {
  TensorGaussianParams a = canonical_params({2}), b = canonical_params({2});
  Matrix sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 1.0;
  a.sigma2 = 2.0;
  b.sigma2 = 1.0;
  const Matrix half = Matrix::Identity(2, 2) / 2.0;
  const auto p = make_multi_params({a, b}, sigma, {{{Matrix(), half}, {Matrix(), Matrix()}}});
  EXPECT_LT((assemble_cov(p).matrix() - oracle::kron(sigma, half)).norm(), 1e-15);
}

TEST(AssembleCov, MatchesDenseOracleAndPartialTrace) {
  std::mt19937_64 g(74);
  for (int t = 0; t < 10; ++t) {
    const auto p = pair_params(g, {2, 3}, 0.5);
    ASSERT_TRUE(validate(p).ok()) << validate(p).message();
    const Matrix c = assemble_cov(p).matrix();
    EXPECT_LT((c - dense_cov(p)).norm(), 1e-12 * c.norm());
    EXPECT_LT((partial_trace(BlockMatrix(2, 6, 6, c)) - p.sigma).norm(), 1e-12);
  }
}

TEST(JointLogPdf, ReducesToUnivariate) {
  std::mt19937_64 g(75);
  const auto p = oracle::random_params(g, {2, 3});
  const DenseTensor x = mean_tensor(p) + oracle::random_tensor(g, {2, 3});
  EXPECT_NEAR(joint_log_pdf(single(p), {x}), log_pdf(p, x), 1e-10);
}

TEST(JointLogPdf, IndependentVariatesFactorize) {
  std::mt19937_64 g(76);
  const auto p = pair_params(g, {2, 2}, 0.0);
  const DenseTensor x = oracle::random_tensor(g, {2, 2}), y = oracle::random_tensor(g, {2, 2});
  EXPECT_NEAR(joint_log_pdf(p, {x, y}), log_pdf(p.marginal(0), x) + log_pdf(p.marginal(1), y), 1e-10);
}

TEST(JointLogPdf, MatchesDenseOracle) {
  std::mt19937_64 g(77);
  for (int t = 0; t < 20; ++t) {
    const auto p = pair_params(g, {2, 3}, 0.6);
    const DenseTensor x = oracle::random_tensor(g, {2, 3}), y = oracle::random_tensor(g, {2, 3});
    const double ref = oracle::dense_logpdf(stack({x, y}), assemble_mean(p), dense_cov(p));
    EXPECT_NEAR(joint_log_pdf(p, {x, y}), ref, 1e-8);
  }
}

TEST(JointLogPdf, CapacityGuard) {
  const auto p = single(canonical_params({17, 17, 17}));
  EXPECT_THROW(joint_log_pdf(p, {DenseTensor::zeros({17, 17, 17})}), CapacityError);
}

TEST(Validate, RejectsIndefiniteComposition) {
  std::mt19937_64 g(78);
  auto p = pair_params(g, {2, 2}, 0.5);
  Matrix far(2, 2);
  far << 0.5, 0.5, -0.5, 0.5;
  for (auto& t : p.thetas) t.set_block(0, 1, far), t.set_block(1, 0, far.transpose());
  p.sigma(0, 1) = p.sigma(1, 0) = 0.99 * std::sqrt(p.sigma(0, 0) * p.sigma(1, 1));
  EXPECT_FALSE(validate(p).ok());
  EXPECT_THROW(MultiTensorGaussian{p}, InvalidParameters);
}

TEST(MultiSample, MomentsAndIndependence) {
  std::mt19937_64 g(79);
  const auto p = pair_params(g, {2, 2}, 0.0);
  const std::size_t t = 100000;
  const MultiSampleSet s = multi_sample(p, t, 11);
  double v0 = 0, v1 = 0, c01 = 0;
  const DenseTensor m0 = mean_tensor(p.marginal(0)), m1 = mean_tensor(p.marginal(1));
  for (std::size_t k = 0; k < t; ++k) {
    const DenseTensor a = s[0][k] - m0, b = s[1][k] - m1;
    v0 += inner(a, a);
    v1 += inner(b, b);
    c01 += inner(a, b);
  }
  EXPECT_NEAR(v0 / t / p.sigma(0, 0), 1.0, 0.03);
  EXPECT_NEAR(v1 / t / p.sigma(1, 1), 1.0, 0.03);
  EXPECT_LT(std::abs(c01) / std::sqrt(v0 * v1), 0.03);
}

TEST(MultiSample, ScalingSigmaScalesVariance) {
  std::mt19937_64 g(80);
  auto p = pair_params(g, {2, 2}, 0.4);
  auto q = p;
  q.sigma *= 2.0;
  const std::size_t t = 100000;
  const MultiSampleSet a = multi_sample(p, t, 3), b = multi_sample(q, t, 4);
  const DenseTensor m = mean_tensor(p.marginal(1));
  double va = 0, vb = 0;
  for (std::size_t k = 0; k < t; ++k) {
    va += inner(a[1][k] - m, a[1][k] - m);
    vb += inner(b[1][k] - m, b[1][k] - m);
  }
  EXPECT_NEAR(vb / va, 2.0, 0.06);
}

TEST(MultiSample, Deterministic) {
  std::mt19937_64 g(81);
  const auto p = pair_params(g, {2, 3}, 0.3);
  const MultiSampleSet a = multi_sample(p, 16, 5), b = multi_sample(p, 16, 5);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(a[i][k], b[i][k]);
}

TEST(MultiSample, SingleVariateMatchesUnivariateMoments) {
  std::mt19937_64 g(82);
  const auto p = oracle::random_params(g, {2, 3});
  const std::size_t t = 100000;
  const MultiSampleSet s = multi_sample(single(p), t, 8);
  Matrix cov = Matrix::Zero(6, 6);
  const Vector m = vectorize_eigen(mean_tensor(p));
  for (const auto& x : s[0]) {
    const Vector d = vectorize_eigen(x) - m;
    cov += d * d.transpose();
  }
  EXPECT_LT(oracle::rel_fro(cov / static_cast<double>(t), p.sigma2 * oracle::kron_desc(p.thetas)), 0.03);
}

TEST(MultiFit, ReducesToUnivariateFit) {
  std::mt19937_64 g(83);
  const auto p = oracle::random_params(g, {2, 3});
  const SampleSet s = sample(p, 50, 9);
  const MultiFitReport m = multi_fit(MultiSampleSet({s}), true);
  const EstimationReport u = fit(s, true);
  EXPECT_NEAR(m.params.sigma(0, 0), u.params.sigma2, 1e-10 * u.params.sigma2);
  EXPECT_NEAR(m.params.alphas[0], u.params.alpha, 1e-10);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_LT((m.params.thetas[n].block(0, 0) - u.params.thetas[n]).norm(), 1e-10);
    EXPECT_LT((m.params.mus[0][n] - u.params.mus[n]).norm(), 1e-10);
  }
}

TEST(MultiFit, RecoversTruth) {
  std::mt19937_64 g(84);
  const auto p = pair_params(g, {2, 3}, 0.5);
  const MultiFitReport r = multi_fit(multi_sample(p, 10000, 12), true);
  EXPECT_TRUE(r.params.undefined.empty());
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(r.params.sigma(i, j) / p.sigma(i, j), 1.0, 0.05);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_LT((r.params.thetas[n].block(i, j) - p.thetas[n].block(i, j)).norm(), 0.05);
        EXPECT_NEAR(r.params.thetas[n].block(i, j).trace(), 1.0, 1e-12);
      }
  EXPECT_EQ(r.params.sigma, r.params.sigma.transpose());
  EXPECT_DOUBLE_EQ(r.params.sigma(0, 1), r.sigma_raw(0, 1) * 10000.0 / 9999.0);
}

TEST(MultiFit, IndependentStreamsShrinkAndFlag) {
  std::mt19937_64 g(85);
  const auto a = oracle::random_params(g, {2, 2});
  const auto b = oracle::random_params(g, {2, 2});
  double prev = 0.0;
  for (std::size_t t : {100u, 10000u}) {
    const MultiFitReport r = multi_fit(MultiSampleSet({sample(a, t, 1), sample(b, t, 2)}), false);
    const double rho = std::abs(r.params.sigma(0, 1)) / std::sqrt(r.params.sigma(0, 0) * r.params.sigma(1, 1));
    EXPECT_LT(rho, 5.0 / std::sqrt(static_cast<double>(t)));
    if (prev > 0) EXPECT_LT(rho, prev);
    prev = rho;
  }
  // Exactly orthogonal residuals.
  const DenseTensor u({2, 2}, {1, 0, 0, 0}), v({2, 2}, {0, 0, 0, 1});
  const DenseTensor w({2, 2}, {0, 1, 0, 0}), z({2, 2}, {0, 0, 1, 0});
  const MultiFitReport r = multi_fit(MultiSampleSet({SampleSet({u, w, -1.0 * u, -1.0 * w}), SampleSet({z, v, -1.0 * z, -1.0 * v})}), false);
  ASSERT_EQ(r.params.undefined.size(), 1u);
  EXPECT_TRUE(r.params.is_undefined(1, 0));
}

TEST(ModeNStackedCov, IdentitiesAndLegacyHadamard) {
  std::mt19937_64 g(86);
  const auto u = oracle::random_params(g, {3, 2});
  EXPECT_LT((mode_n_stacked_cov(single(u), 1).matrix() - u.sigma2 * u.thetas[1]).norm(), 1e-14);
  for (int t = 0; t < 10; ++t) {
    const auto p = pair_params(g, {2, 3, 2}, 0.5);
    const auto legacy = to_legacy_factors(p);
    for (std::size_t n = 0; n < 3; ++n) {
      const BlockMatrix c = mode_n_stacked_cov(p, n);
      EXPECT_LT((partial_trace(c) - p.sigma).norm(), 1e-12);
      EXPECT_LT((c.matrix() - legacy_mode_n_stacked_cov(legacy, n).matrix()).norm(), 1e-12);
    }
    EXPECT_LT((legacy_assemble_cov(legacy) - dense_cov(p)).norm(), 1e-12 * dense_cov(p).norm());
  }
}

TEST(ModeNStackedCov, MatchesEmpiricalUnfoldings) {
  std::mt19937_64 g(87);
  const auto p = pair_params(g, {2, 3}, 0.5);
  const std::size_t t = 100000;
  const MultiSampleSet s = multi_sample(p, t, 13);
  const DenseTensor m0 = mean_tensor(p.marginal(0)), m1 = mean_tensor(p.marginal(1));
  for (std::size_t n = 0; n < 2; ++n) {
    const auto in = static_cast<Eigen::Index>(p.shape[n]);
    Matrix acc = Matrix::Zero(2 * in, 2 * in);
    for (std::size_t k = 0; k < t; ++k) {
      const Matrix a = unfold(s[0][k] - m0, n).matrix, b = unfold(s[1][k] - m1, n).matrix;
      Matrix z(2 * in, a.cols());
      z << a, b;
      acc.noalias() += z * z.transpose();
    }
    EXPECT_LT(oracle::rel_fro(acc / static_cast<double>(t), mode_n_stacked_cov(p, n).matrix()), 0.03);
  }
}

TEST(MultiSample, InnerProductRepresentationInvariance) {
  std::mt19937_64 g(88);
  const auto p = pair_params(g, {2, 3, 2}, 0.5);
  const MultiSampleSet s = multi_sample(p, 100, 14);
  double by_tensor = 0, by_vector = 0;
  std::vector<double> by_mode(3, 0.0);
  for (std::size_t k = 0; k < 100; ++k) {
    by_tensor += inner(s[0][k], s[1][k]);
    by_vector += vectorize_eigen(s[0][k]).dot(vectorize_eigen(s[1][k]));
    for (std::size_t n = 0; n < 3; ++n)
      by_mode[n] += (unfold(s[0][k], n).matrix * unfold(s[1][k], n).matrix.transpose()).trace();
  }
  const double tol = 1e-12 * std::abs(by_tensor) + 1e-12;
  EXPECT_NEAR(by_vector, by_tensor, tol);
  for (double v : by_mode) EXPECT_NEAR(v, by_tensor, tol);
}
