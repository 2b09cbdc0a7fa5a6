#include <set>

#include <gtest/gtest.h>

#include "qlds/data.hpp"
#include "qlds/self_training.hpp"

using namespace qlds;

namespace {

Dataset gmm(std::uint64_t seed, Index d = 30, Index nl = 20, Index nu = 300, double mu = 2.5) {
  return center(generate_gmm({d, mu, nl / 2, nl - nl / 2, nu / 2, nu - nu / 2, seed}));
}

}  // namespace

TEST(SelfTrain, ThresholdAboveAllScoresGivesLsSvm) {
  const auto ds = gmm(1);
  SelfTrainConfig cfg;
  cfg.absolute = true;
  cfg.threshold_grid = {1e9};
  const auto r = self_train(ds, cfg);
  EXPECT_TRUE(r.model.omega == fit_qlds(ds, {1.0, 0.0, default_lambda(ds)}).omega);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].new_labels, 0u);
  EXPECT_TRUE(r.pseudo_idx.empty());
}

TEST(SelfTrain, ZeroThresholdSaturatesInOneRound) {
  const auto ds = gmm(2);
  SelfTrainConfig cfg;
  cfg.absolute = true;
  cfg.threshold_grid = {0.0};
  cfg.max_rounds = 1;
  const auto r = self_train(ds, cfg);
  EXPECT_EQ(r.pseudo_idx.size(), ds.n_unlabeled());
  EXPECT_EQ(r.history[0].pool_size, ds.n_labeled());
  const auto first = fit_qlds(ds, {1.0, 0.0, default_lambda(ds)});
  EXPECT_EQ(r.pseudo_labels, predict(first, ds.gather(r.pseudo_idx)));
  // The returned model is refit on the saturated pool.
  EXPECT_FALSE(r.model.omega == first.omega);
}

TEST(SelfTrain, ZeroQuantileAlsoSaturates) {
  const auto ds = gmm(3);
  SelfTrainConfig cfg;
  cfg.threshold_grid = {0.0};
  cfg.max_rounds = 1;
  EXPECT_EQ(self_train(ds, cfg).pseudo_idx.size(), ds.n_unlabeled());
}

TEST(SelfTrain, PseudoLabelsAreFrozenAndUnique) {
  const auto ds = gmm(4);
  const auto r = self_train(ds);
  std::set<Index> seen(r.pseudo_idx.begin(), r.pseudo_idx.end());
  EXPECT_EQ(seen.size(), r.pseudo_idx.size());
  EXPECT_EQ(r.pseudo_idx.size(), r.pseudo_labels.size());
  Index total = 0;
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    EXPECT_EQ(r.history[k].round, static_cast<int>(k) + 1);
    EXPECT_EQ(r.history[k].pool_size, ds.n_labeled() + total);
    total += r.history[k].new_labels;
  }
  EXPECT_EQ(total, r.pseudo_idx.size());
  EXPECT_LE(r.history.size(), 10u);
}

TEST(SelfTrain, Deterministic) {
  const auto ds = gmm(5);
  SelfTrainConfig cfg;
  cfg.seed = 77;
  const auto a = self_train(ds, cfg);
  cfg.jobs = 3;
  const auto b = self_train(ds, cfg);
  EXPECT_TRUE(a.model.omega == b.model.omega);
  EXPECT_EQ(a.pseudo_idx, b.pseudo_idx);
}

TEST(SelfTrain, InvalidConfigAndTooFewLabels) {
  const auto ds = gmm(6);
  SelfTrainConfig cfg;
  cfg.threshold_grid.clear();
  EXPECT_THROW(self_train(ds, cfg), Error);
  cfg = {};
  cfg.max_rounds = 0;
  EXPECT_THROW(self_train(ds, cfg), Error);
  const auto tiny = center(generate_gmm({5, 2.0, 1, 3, 10, 10, 1}));
  try {
    self_train(tiny);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientSamples);
  }
}

TEST(SelfTrain, NoWorseThanLsSvmOnAverage) {
  double st = 0, ls = 0;
  const int seeds = 20;
  for (int k = 0; k < seeds; ++k) {
    const auto ds = gmm(100u + static_cast<unsigned>(k), 50, 20, 1000, 2.5);
    SelfTrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(k);
    st += transductive_error(self_train(ds, cfg).model, ds);
    ls += transductive_error(fit_qlds(ds, {1.0, 0.0, default_lambda(ds)}), ds);
  }
  EXPECT_LE(st / seeds, ls / seeds + 0.02);
}
