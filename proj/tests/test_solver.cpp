#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qlds/data.hpp"
#include "qlds/solver.hpp"

using namespace qlds;

namespace {

Dataset random_dataset(SplitMix64& g, Index d, Index nl, Index nu) {
  Dataset ds;
  ds.features = oracle::random_matrix(g, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(nl + nu));
  for (Index i = 0; i < nl; ++i) {
    ds.labeled_idx.push_back(i);
    ds.labels.push_back(g.uniform() < 0.5 ? -1 : 1);
  }
  for (Index i = nl; i < nl + nu; ++i) ds.unlabeled_idx.push_back(i);
  return ds;
}

}  // namespace

TEST(FitQlds, ScalarClosedForm) {
  Dataset ds;
  ds.features = Mat::Constant(1, 1, 2.0);
  ds.labeled_idx = {0};
  ds.labels = {1};
  const auto m = fit_qlds(ds, {1.0, 0.0, 1.0});
  EXPECT_NEAR(m.omega(0), 0.4, 1e-15);
  EXPECT_NEAR(decision_scores(m, Mat::Constant(1, 1, 1.0))(0), 0.4, 1e-15);
  EXPECT_EQ(decision_scores(m, Mat::Zero(1, 1))(0), 0.0);
}

TEST(FitQlds, ZeroLabeledColumnsGiveZeroOmega) {
  SplitMix64 g(1);
  auto ds = random_dataset(g, 4, 3, 6);
  for (Index i : ds.labeled_idx) ds.features.col(static_cast<Eigen::Index>(i)).setZero();
  const HyperParams hp{1.0, 0.5, default_lambda(ds)};
  EXPECT_EQ(fit_qlds(ds, hp).omega.norm(), 0.0);
}

TEST(FitQlds, GraphBasedSpecialCase) {
  SplitMix64 g(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto ds = random_dataset(g, 5, 3, 5);
    const double n = static_cast<double>(ds.n());
    const Mat xl = ds.labeled_features(), xu = ds.unlabeled_features();
    const double lambda = default_lambda(ds, LambdaSource::unlabeled, 0.5);
    const auto m = fit_qlds(ds, {0.0, 1.0, lambda});
    const Vec f = decision_scores(m, xu);
    // f_u = (1/n) y_ℓᵀ X_ℓᵀ (λI − X_uX_uᵀ/n)⁻¹ X_u
    const Mat a = lambda * Mat::Identity(5, 5) - xu * xu.transpose() / n;
    const Vec w = oracle::gauss_solve(a, xl * ds.labeled_targets());
    const Vec ref = xu.transpose() * w / n;
    EXPECT_LT((f - ref).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST(FitQlds, LsSvmMatchesRidgeNormalEquations) {
  SplitMix64 g(3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto ds = random_dataset(g, 6, 8, 4);
    const double n = static_cast<double>(ds.n()), lambda = 0.1 + g.uniform();
    const Mat xl = ds.labeled_features();
    const auto m = fit_qlds(ds, {1.0, 0.0, lambda});
    const Mat a = xl * xl.transpose() / n + lambda * Mat::Identity(6, 6);
    const Vec ref = oracle::gauss_solve(a, xl * ds.labeled_targets() / std::sqrt(n));
    EXPECT_LT((m.omega - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST(FitQlds, StationarityOfObjective) {
  SplitMix64 g(4);
  const auto ds = random_dataset(g, 7, 10, 30);
  const double n = static_cast<double>(ds.n());
  const Mat xl = ds.labeled_features(), xu = ds.unlabeled_features();
  for (const double al : {1.0, 0.7}) {
    const HyperParams hp{al, 0.9, default_lambda(ds)};
    // The closed form drops α_ℓ from the right-hand side, so α_ℓ·ω is the stationary point.
    const Vec w = al * fit_qlds(ds, hp).omega;
    const Vec fl = xl.transpose() * w / std::sqrt(n), fu = xu.transpose() * w / std::sqrt(n);
    const Vec grad = hp.lambda * w - al * xl * (ds.labeled_targets() - fl) / std::sqrt(n) - hp.alpha_u * xu * fu / std::sqrt(n);
    EXPECT_LE(grad.norm(), 1e-8 * (1 + w.norm())) << al;
  }
}

TEST(FitQlds, ScaleInvariantPredictions) {
  SplitMix64 g(5);
  const auto ds = random_dataset(g, 6, 10, 40);
  const HyperParams hp{0.8, 0.6, default_lambda(ds)};
  const auto base = fit_qlds(ds, hp);
  const Vec f0 = decision_scores(base, ds.features);
  for (double t : {0.1, 1.0, 10.0}) {
    const auto m = fit_qlds(ds, hp.scaled(t));
    EXPECT_EQ(predict(m, ds.features), labels_from_scores(f0)) << t;
    EXPECT_LT((t * decision_scores(m, ds.features) - f0).norm(), 1e-10 * f0.norm());
  }
}

TEST(FitQlds, SpectralClusteringLimit) {
  GmmSpec s{20, 4.0, 5, 5, 200, 200, 9};
  const auto ds = generate_gmm(s);
  const double n = static_cast<double>(ds.n());
  const Mat su = ds.unlabeled_features() * ds.unlabeled_features().transpose() / n;
  Eigen::SelfAdjointEigenSolver<Mat> es(su);
  const Vec top = es.eigenvectors().col(19);
  const auto m = fit_qlds(ds, {0.0, 1.0, (1 + 1e-6) * es.eigenvalues()(19)});
  EXPECT_GE(std::abs(m.omega.normalized().dot(top)), 0.999);
}

TEST(FitQlds, NonConvexRejected) {
  SplitMix64 g(6);
  const auto ds = random_dataset(g, 4, 4, 20);
  const double lmax = QldsProblem(ds).unlabeled_lambda_max();
  try {
    fit_qlds(ds, {0.0, 1.0, 0.5 * lmax});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvex);
  }
}

TEST(FitQlds, CountsFits) {
  SplitMix64 g(7);
  const auto ds = random_dataset(g, 3, 4, 4);
  const long before = fit_counter();
  fit_qlds(ds, {1.0, 0.0, 1.0});
  fit_qlds(ds, {1.0, 0.0, 2.0});
  EXPECT_EQ(fit_counter() - before, 2);
}

TEST(DecisionScores, DimensionMismatch) {
  LinearModel m;
  m.omega = Vec::Ones(3);
  try {
    decision_scores(m, Mat::Zero(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Predict, SignRule) {
  Vec f(3);
  f << -0.3, 0.0, 0.2;
  EXPECT_EQ(labels_from_scores(f), (std::vector<int>{-1, 1, 1}));
}

TEST(ErrorRate, CountingFixture) {
  LinearModel m;
  m.omega = Vec::Ones(1);
  Dataset ds;
  ds.features.resize(1, 7);
  ds.features << 1, -1, -2, 3, 4, -5, 6;
  ds.labeled_idx = {0};
  ds.labels = {1};
  ds.unlabeled_idx = {1, 2, 3, 4, 5, 6};
  ds.true_unlabeled_labels = std::vector<int>{-1, -1, 1, -1, 1, 1};
  EXPECT_NEAR(transductive_error(m, ds), 1.0 / 3.0, 1e-15);
  const auto pred = predict(m, ds.unlabeled_features());
  EXPECT_EQ(error_rate(pred, pred), 0.0);
  std::vector<int> flipped = pred;
  for (int& y : flipped) y = -y;
  EXPECT_NEAR(error_rate(flipped, *ds.true_unlabeled_labels), 2.0 / 3.0, 1e-15);
  ds.true_unlabeled_labels.reset();
  EXPECT_THROW(transductive_error(m, ds), Error);
}

TEST(DefaultLambda, RankOneGram) {
  Dataset ds;
  ds.features = Mat::Constant(3, 1, 0.0);
  ds.features(0, 0) = 1.0;
  ds.labeled_idx = {0};
  ds.labels = {1};
  EXPECT_NEAR(default_lambda(ds, LambdaSource::whole, 0.0), 1.0, 1e-12);
}

TEST(DefaultLambda, MatchesJacobiOracle) {
  SplitMix64 g(8);
  const auto ds = random_dataset(g, 4, 3, 7);
  const Mat x = ds.features;
  EXPECT_NEAR(default_lambda(ds), (1 + 1e-3) * oracle::jacobi_max(x * x.transpose() / 10.0), 1e-10);
  const Mat xu = ds.unlabeled_features();
  EXPECT_NEAR(default_lambda(ds, LambdaSource::unlabeled), (1 + 1e-3) * oracle::jacobi_max(xu * xu.transpose() / 10.0), 1e-10);
}

TEST(ConvexityMargin, Examples) {
  SplitMix64 g(9);
  const auto ds = random_dataset(g, 5, 6, 12);
  EXPECT_GE(convexity_margin(ds, {1.0, 0.0, 0.3}), 0.3 - 1e-12);
  const double lu = QldsProblem(ds).unlabeled_lambda_max();
  EXPECT_NEAR(convexity_margin(ds, {0.0, 1.0, default_lambda(ds, LambdaSource::unlabeled)}), 1e-3 * lu, 1e-10);
}

TEST(ConvexityMargin, TinyInstanceMatchesJacobi) {
  Dataset ds;
  ds.features.resize(2, 3);
  ds.features << 1.0, 0.5, -2.0, 0.3, 1.5, 0.7;
  ds.labeled_idx = {0};
  ds.labels = {-1};
  ds.unlabeled_idx = {1, 2};
  const HyperParams hp{0.4, 1.3, 0.9};
  const Mat xl = ds.labeled_features(), xu = ds.unlabeled_features();
  const Mat a = (hp.alpha_u * xu * xu.transpose() - hp.alpha_l * xl * xl.transpose()) / 3.0;
  EXPECT_NEAR(convexity_margin(ds, hp), hp.lambda - oracle::jacobi_max(a), 1e-10);
}
