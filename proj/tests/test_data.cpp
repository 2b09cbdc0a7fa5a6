#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qlds/data.hpp"

using namespace qlds;

namespace {

std::string fixture(const std::string& name) { return std::string(QLDS_FIXTURE_DIR) + "/" + name; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(LoadCsv, AllLabeledRows) {
  const auto ds = load_csv(fixture("two_labeled.csv"), "label", "labeled");
  EXPECT_EQ(ds.n_labeled(), 2u);
  EXPECT_EQ(ds.n_unlabeled(), 0u);
  EXPECT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, -1}));
  EXPECT_DOUBLE_EQ(ds.features(1, 1), -1.5);
}

TEST(LoadCsv, ZeroOneLabelsMapToSigns) {
  const auto ds = load_csv(fixture("labels01.csv"), "label", "labeled");
  EXPECT_EQ(ds.labels, (std::vector<int>{-1, 1}));
  ASSERT_TRUE(ds.true_unlabeled_labels);
  EXPECT_EQ(*ds.true_unlabeled_labels, (std::vector<int>{1, -1}));
  // Feature columns keep file order around the label column.
  EXPECT_DOUBLE_EQ(ds.features(0, 2), 2.0);
  EXPECT_DOUBLE_EQ(ds.features(1, 2), 3.0);
}

TEST(LoadCsv, MixedPartitionFollowsFlags) {
  const auto ds = load_csv(fixture("mixed4.csv"), "label", "labeled");
  EXPECT_EQ(ds.labeled_idx, (std::vector<Index>{0, 2}));
  EXPECT_EQ(ds.unlabeled_idx, (std::vector<Index>{1, 3}));
  EXPECT_EQ(ds.labels, (std::vector<int>{1, -1}));
  EXPECT_EQ(*ds.true_unlabeled_labels, (std::vector<int>{-1, 1}));
}

TEST(LoadCsv, Errors) {
  EXPECT_EQ(kind_of([] { load_csv(fixture("bad_label.csv"), "label", "labeled"); }), ErrorKind::LabelDomainError);
  EXPECT_EQ(kind_of([] { load_csv(fixture("bad_cell.csv"), "label", "labeled"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { load_csv(fixture("missing_label.csv"), "label", "labeled"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { load_csv(fixture("two_labeled.csv"), "nope", "labeled"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { load_csv(fixture("does_not_exist.csv"), "label", "labeled"); }), ErrorKind::IoError);
}

TEST(LoadCsv, ParseErrorCarriesLocation) {
  try {
    load_csv(fixture("bad_cell.csv"), "label", "labeled");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3, column 1"), std::string::npos) << e.what();
  }
}

TEST(LoadLibsvm, SingleLine) {
  const auto ds = load_libsvm(fixture("one.libsvm"), 1, 0);
  EXPECT_EQ(ds.dim(), 1u);
  EXPECT_EQ(ds.n(), 1u);
  EXPECT_EQ(ds.n_labeled(), 1u);
  EXPECT_DOUBLE_EQ(ds.features(0, 0), 2.0);
}

TEST(LoadLibsvm, DeterministicForSeed) {
  const auto a = load_libsvm(fixture("strat20.libsvm"), 4, 77);
  const auto b = load_libsvm(fixture("strat20.libsvm"), 4, 77);
  EXPECT_EQ(a.labeled_idx, b.labeled_idx);
  const auto c = load_libsvm(fixture("strat20.libsvm"), 4, 78);
  EXPECT_EQ(c.n_labeled(), 4u);
}

TEST(LoadLibsvm, StratifiedCounts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = load_libsvm(fixture("strat20.libsvm"), 4, seed);
    EXPECT_EQ(ds.dim(), 3u);
    const auto c = ds.labeled_class_sizes();
    EXPECT_EQ(c[0], 2u);
    EXPECT_EQ(c[1], 2u);
    EXPECT_EQ(ds.true_unlabeled_labels->size(), 16u);
  }
}

TEST(LoadLibsvm, TooManyLabeled) {
  EXPECT_EQ(kind_of([] { load_libsvm(fixture("one.libsvm"), 2, 0); }), ErrorKind::InsufficientSamples);
}

TEST(Center, SingleFeature) {
  Dataset ds;
  ds.features.resize(1, 2);
  ds.features << 1, 3;
  ds.labeled_idx = {0, 1};
  ds.labels = {1, -1};
  const auto c = center(ds);
  EXPECT_DOUBLE_EQ(c.features(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(c.features(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(ds.features(0, 0), 1.0);
}

TEST(Center, RowMeansVanishAndIdempotent) {
  SplitMix64 g(41);
  Dataset ds;
  ds.features = oracle::random_matrix(g, 5, 40).array() + 3.0;
  for (Index i = 0; i < 40; ++i) ds.unlabeled_idx.push_back(i);
  const auto c = center(ds);
  for (Eigen::Index i = 0; i < 5; ++i) {
    double s = 0;
    for (Eigen::Index j = 0; j < 40; ++j) s += c.features(i, j);
    EXPECT_LT(std::abs(s / 40), 1e-12);
  }
  EXPECT_LT((center(c).features - c.features).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GenerateGmm, SingleColumn) {
  GmmSpec s;
  s.d = 4;
  s.nl1 = 1;
  s.nl2 = s.nu1 = s.nu2 = 0;
  const auto ds = generate_gmm(s);
  EXPECT_EQ(ds.n(), 1u);
  EXPECT_EQ(ds.labels, (std::vector<int>{-1}));
}

TEST(GenerateGmm, SeedDeterminism) {
  GmmSpec s{10, 2.0, 3, 3, 5, 5, 99};
  const auto a = generate_gmm(s), b = generate_gmm(s);
  EXPECT_TRUE(a.features == b.features);
  s.seed = 100;
  EXPECT_FALSE(generate_gmm(s).features == a.features);
}

TEST(GenerateGmm, ClassMeansConcentrate) {
  GmmSpec s{50, 4.0, 0, 0, 2000, 2000, 5};
  const auto ds = generate_gmm(s);
  const auto& truth = *ds.true_unlabeled_labels;
  for (int cls : {-1, 1}) {
    Vec mean = Vec::Zero(50);
    int k = 0;
    for (Index i = 0; i < truth.size(); ++i)
      if (truth[i] == cls) {
        mean += ds.features.col(static_cast<Eigen::Index>(ds.unlabeled_idx[i]));
        ++k;
      }
    mean /= k;
    Vec mu = Vec::Zero(50);
    mu(0) = cls * 2.0;
    int ok = 0;
    for (int i = 0; i < 50; ++i) ok += std::abs(mean(i) - mu(i)) <= 3.0 / std::sqrt(2000.0);
    EXPECT_GE(ok, 50 * 99 / 100) << "class " << cls;
  }
}

TEST(ClassCounts, MatchedProportionsBalanced) {
  GmmSpec s{3, 1.0, 10, 10, 50, 50, 1};
  const auto c = class_counts(generate_gmm(s));
  EXPECT_EQ(c.nu1, 50u);
  EXPECT_EQ(c.nu2, 50u);
}

TEST(ClassCounts, MatchedProportionsRatio) {
  GmmSpec s{3, 1.0, 3, 1, 20, 20, 1};
  const auto c = class_counts(generate_gmm(s));
  EXPECT_EQ(c.nu1, 30u);
  EXPECT_EQ(c.nu2, 10u);
  const auto t = class_counts(generate_gmm(s), false);
  EXPECT_EQ(t.nu1, 20u);
  EXPECT_EQ(t.nu2, 20u);
}

TEST(ClassCounts, NoUnlabeled) {
  GmmSpec s{3, 1.0, 2, 2, 0, 0, 1};
  const auto c = class_counts(generate_gmm(s));
  EXPECT_EQ(c.cu(1), 0.0);
  EXPECT_EQ(c.cu(2), 0.0);
}

TEST(ClassCounts, MissingTruth) {
  GmmSpec s{3, 1.0, 2, 2, 3, 3, 1};
  auto ds = generate_gmm(s);
  ds.true_unlabeled_labels.reset();
  EXPECT_EQ(kind_of([&] { class_counts(ds, false); }), ErrorKind::MissingTruth);
}

TEST(ClassCounts, SumInvariantOverRandomSplits) {
  SplitMix64 g(51);
  for (int k = 0; k < 200; ++k) {
    GmmSpec s{2, 1.0, 1 + g.below(30), 1 + g.below(30), g.below(500), g.below(500), g.next()};
    const auto ds = generate_gmm(s);
    for (bool matched : {true, false}) {
      const auto c = class_counts(ds, matched);
      EXPECT_EQ(c.n(), ds.n());
      EXPECT_EQ(c.nu1 + c.nu2, ds.n_unlabeled());
      for (int j : {1, 2}) {
        EXPECT_GE(c.cl(j), 0.0);
        EXPECT_LE(c.cu(j), 1.0);
      }
    }
  }
}
