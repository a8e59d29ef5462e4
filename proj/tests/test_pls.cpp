#include "layerprobe/error.hpp"
#include "layerprobe/pls.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace layerprobe;
using namespace layerprobe::testing;

namespace {

PlsConfig components(int k) {
  PlsConfig cfg;
  cfg.n_components = k;
  return cfg;
}

double max_relative_error(const Eigen::MatrixXd &got, const Eigen::MatrixXd &want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

} // namespace

TEST(Pls, ExactLinearRelationshipIsReproduced) {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd X = gaussian(50, 3, rng);
  Eigen::Vector3d b(1.5, -2.0, 0.25);
  const Eigen::MatrixXd Y = X * b;
  const auto m = pls_fit(X, Y, components(3));
  EXPECT_EQ(m.components_used, 3);
  EXPECT_LT((pls_predict(m, X) - Y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pls, SinglePredictorMatchesOlsSlope) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd x = gaussian(40, 1, rng);
  const Eigen::MatrixXd y = 0.7 * x + gaussian(40, 1, rng) + Eigen::MatrixXd::Constant(40, 1, 3.0);

  // Oracle: cov(x, y) / var(x) written out directly.
  const double mx = x.mean(), my = y.mean();
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 40; ++i) {
    sxy += (x(i) - mx) * (y(i) - my);
    sxx += (x(i) - mx) * (x(i) - mx);
  }
  const double slope = sxy / sxx;

  const auto m = pls_fit(x, y, components(1));
  ASSERT_EQ(m.components_used, 1);
  EXPECT_NEAR(m.coefficients(0, 0), slope, 1e-10);
}

TEST(Pls, RankDeficientInputStopsAtRank) {
  std::mt19937_64 rng(13);
  Eigen::MatrixXd X(60, 3);
  X.leftCols(2) = gaussian(60, 2, rng);
  X.col(2) = X.col(0) + X.col(1);
  const Eigen::MatrixXd Y = gaussian(60, 2, rng);
  const auto m = pls_fit(X, Y, components(25));
  EXPECT_LE(m.components_used, 2);
  EXPECT_GE(m.components_used, 1);
  EXPECT_TRUE(pls_predict(m, X).allFinite());
}

TEST(Pls, RowAtTrainingMeanPredictsYMeanExactly) {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd X = gaussian(30, 5, rng);
  const Eigen::MatrixXd Y = gaussian(30, 2, rng);
  const auto m = pls_fit(X, Y, components(4));
  const Eigen::MatrixXd row = m.x_mean.transpose();
  const Eigen::MatrixXd out = pls_predict(m, row);
  EXPECT_EQ(out(0, 0), m.y_mean(0));
  EXPECT_EQ(out(0, 1), m.y_mean(1));
}

TEST(Pls, WrongColumnCountIsDimensionMismatch) {
  std::mt19937_64 rng(15);
  const auto m = pls_fit(gaussian(20, 4, rng), gaussian(20, 1, rng), components(2));
  try {
    pls_predict(m, gaussian(3, 5, rng));
    FAIL() << "expected DimensionMismatch";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Pls, InputErrors) {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd X = gaussian(10, 3, rng);
  const Eigen::MatrixXd Y = gaussian(10, 1, rng);
  X(2, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    pls_fit(X, Y, components(2));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteInput);
  }
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(10, 3, 0.1);
  try {
    pls_fit(same, Y, components(2));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::DegenerateInput);
  }
  PlsConfig bad;
  bad.n_components = 0;
  EXPECT_THROW(pls_fit(gaussian(10, 3, rng), Y, bad), Error);
}

TEST(Pls, ZeroVarianceColumnGetsZeroCoefficient) {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd X = gaussian(40, 4, rng);
  X.col(2).setConstant(5.0);
  const Eigen::MatrixXd Y = gaussian(40, 2, rng);
  const auto m = pls_fit(X, Y, components(25));
  EXPECT_TRUE(m.coefficients.row(2).isZero(0.0));
  EXPECT_EQ(m.components_used, 3);
}

TEST(Pls, ScaledFitPredictsLikeUnscaledAtFullRank) {
  std::mt19937_64 rng(18);
  Eigen::MatrixXd X = gaussian(70, 5, rng);
  X.col(0) *= 100.0;
  const Eigen::MatrixXd Y = gaussian(70, 3, rng);
  PlsConfig scaled = components(5);
  scaled.scale = true;
  const auto ms = pls_fit(X, Y, scaled);
  const auto mu = pls_fit(X, Y, components(5));
  EXPECT_LT(max_relative_error(pls_predict(ms, X), pls_predict(mu, X)), 1e-8);
  EXPECT_GT(ms.x_scale(0), 10.0);
}

// Property: with n_components equal to rank and n > p, PLS spans the column
// space of X and coincides with OLS.
TEST(PlsProperty, FullRankMatchesNormalEquations) {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 25; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 10);
    const int q = 1 + static_cast<int>(rng() % 5);
    const int n = p + 5 + static_cast<int>(rng() % (95 - p));
    const Eigen::MatrixXd X = gaussian(n, p, rng);
    const Eigen::MatrixXd Y = gaussian(n, q, rng) + X * gaussian(p, q, rng);
    const auto m = pls_fit(X, Y, components(p));
    EXPECT_LT(max_relative_error(pls_predict(m, X), ols_fit_predict(X, Y, X)), 1e-6)
        << "trial " << trial;
  }
}

TEST(PlsProperty, TranslationInvariance) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = gaussian(40, 6, rng);
    const Eigen::MatrixXd Y = gaussian(40, 2, rng) + X.leftCols(2);
    const Eigen::RowVectorXd dx = gaussian(1, 6, rng) * 3.0;
    const Eigen::RowVectorXd dy = gaussian(1, 2, rng) * 3.0;
    const auto base = pls_fit(X, Y, components(3));
    const auto shifted_x = pls_fit(X.rowwise() + dx, Y, components(3));
    const auto shifted_y = pls_fit(X, Y.rowwise() + dy, components(3));

    const Eigen::MatrixXd ref = pls_predict(base, X);
    EXPECT_LT((pls_predict(shifted_x, X.rowwise() + dx) - ref).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((pls_predict(shifted_y, X) - (ref.rowwise() + dy)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PlsProperty, OutputScalingEquivariance) {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = gaussian(45, 8, rng);
    const Eigen::MatrixXd Y = gaussian(45, 3, rng) + X.leftCols(3);
    const double c = 0.1 + static_cast<double>(rng() % 100) / 10.0;
    const auto base = pls_fit(X, Y, components(4));
    const auto scaled = pls_fit(X, c * Y, components(4));
    const Eigen::MatrixXd want = c * pls_predict(base, X);
    EXPECT_LT(max_relative_error(pls_predict(scaled, X), want), 1e-10);
  }
}

TEST(PlsProperty, DeterministicBitwise) {
  std::mt19937_64 rng(103);
  const Eigen::MatrixXd X = gaussian(80, 30, rng);
  const Eigen::MatrixXd Y = gaussian(80, 4, rng);
  const auto a = pls_fit(X, Y, components(25));
  const auto b = pls_fit(X, Y, components(25));
  ASSERT_EQ(a.components_used, b.components_used);
  EXPECT_EQ(std::memcmp(a.coefficients.data(), b.coefficients.data(),
                        sizeof(double) * a.coefficients.size()),
            0);
}

TEST(PlsProperty, DuplicatedColumnLeavesPredictionsUnchanged) {
  std::mt19937_64 rng(104);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = gaussian(50, 4, rng);
    const Eigen::MatrixXd Y = gaussian(50, 2, rng) + X.leftCols(2);
    Eigen::MatrixXd Xd(50, 5);
    Xd << X, X.col(trial % 4);
    const auto m = pls_fit(X, Y, components(25));
    const auto md = pls_fit(Xd, Y, components(25));
    EXPECT_EQ(md.components_used, m.components_used);
    EXPECT_LT((pls_predict(md, Xd) - pls_predict(m, X)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PlsProperty, ComponentsNeverExceedRankOrRequest) {
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 10; ++trial) {
    const int rank = 1 + trial % 5;
    const Eigen::MatrixXd X = gaussian(30, rank, rng) * gaussian(rank, 12, rng);
    const Eigen::MatrixXd Y = gaussian(30, 3, rng);
    const auto m = pls_fit(X, Y, components(25));
    EXPECT_LE(m.components_used, rank);
    const auto m2 = pls_fit(X, Y, components(1));
    EXPECT_EQ(m2.components_used, 1);
  }
}

TEST(Pls, WorksWithSinglePrecisionStorageCast) {
  std::mt19937_64 rng(19);
  const Eigen::MatrixXf Xf = gaussian(30, 4, rng).cast<float>();
  const Eigen::MatrixXd Y = gaussian(30, 1, rng);
  const auto m = pls_fit(Xf.cast<double>(), Y, components(4));
  EXPECT_EQ(m.components_used, 4);
  EXPECT_TRUE(pls_predict(m, Xf).allFinite());
}
