#include <gtest/gtest.h>

#include <random>

#include "datasets.hpp"
#include "mtnn/gbdt.hpp"

using namespace mtnn;

namespace {

std::vector<FeatureVector> features_of(const std::vector<Sample>& s) {
  std::vector<FeatureVector> x;
  for (const auto& v : s) x.push_back(v.features);
  return x;
}

}  // namespace

TEST(Gain, SpotCheck) { EXPECT_DOUBLE_EQ(split_gain(-2, 1, 2, 1, 0, 0), 4.0); }

TEST(Gain, GammaAndLambda) {
  // 0.5 * (4/2 + 4/2 - 0/3) - 0.5
  EXPECT_DOUBLE_EQ(split_gain(-2, 1, 2, 1, 1, 0.5), 1.5);
  // 0.5 * (1/2 + 9/3 - 16/4)
  EXPECT_DOUBLE_EQ(split_gain(1, 1, 3, 2, 1, 0), -0.25);
}

TEST(LeafWeight, Formula) {
  EXPECT_DOUBLE_EQ(leaf_weight(3, 2, 1), -1.0);
  EXPECT_DOUBLE_EQ(leaf_weight(-2, 1, 0), 2.0);
  EXPECT_DOUBLE_EQ(leaf_weight(1, 0, 0), 0.0);
}

TEST(FitTree, EightSampleFixture) {
  // x = 1..8, first half negative. First logistic round: p = 0.5, so
  // g = +-0.5 and h = 0.25. Best split 4.5: GL = 2, HL = 1, GR = -2, HR = 1.
  std::vector<Sample> s;
  for (int i = 1; i <= 8; ++i) s.push_back(datasets::point(i, 0, 0, i <= 4 ? -1 : 1));
  const auto x = features_of(s);
  std::vector<double> g, h;
  for (const auto& v : s) {
    g.push_back(0.5 - (v.label > 0 ? 1.0 : 0.0));
    h.push_back(0.25);
  }
  const auto tree = fit_tree(x, g, h, GbdtParams{});
  ASSERT_FALSE(tree.root().is_leaf());
  EXPECT_EQ(tree.root().feature, 5);
  EXPECT_DOUBLE_EQ(tree.root().threshold, 4.5);
  EXPECT_EQ(tree.nodes().size(), 3u);  // children have H = 1 and cannot split under min_child_weight 1
  const auto& l = tree.nodes()[static_cast<std::size_t>(tree.root().left)];
  const auto& r = tree.nodes()[static_cast<std::size_t>(tree.root().right)];
  EXPECT_DOUBLE_EQ(l.weight, -1.0);  // -2 / (1 + 1)
  EXPECT_DOUBLE_EQ(r.weight, 1.0);
}

TEST(FitTree, IdenticalFeaturesGiveSingleLeaf) {
  std::vector<FeatureVector> x(5, FeatureVector{1, 2, 3, 4, 5, 6, 7, 8});
  std::vector<double> g{1, -2, 0.5, 0.25, 1}, h{1, 1, 1, 1, 1};
  const auto t = fit_tree(x, g, h, GbdtParams{});
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(t.root().weight, -0.75 / 6.0);
}

TEST(FitTree, OneDimensionalSeparableSplitsBetweenClusters) {
  std::vector<Sample> s;
  for (int i = 0; i < 4; ++i) s.push_back(datasets::point(0, 0, 0, -1));
  for (int i = 0; i < 4; ++i) s.push_back(datasets::point(10, 0, 0, 1));
  const auto m = fit_gbdt(s, GbdtParams{});
  const auto& root = m.trees.front().root();
  ASSERT_FALSE(root.is_leaf());
  EXPECT_GT(root.threshold, 0.0);
  EXPECT_LT(root.threshold, 10.0);
  EXPECT_EQ(accuracy(m, s), 1.0);
}

TEST(FitTree, MinChildWeightBlocksSmallChildren) {
  std::vector<FeatureVector> x{{0, 0, 0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 0, 2, 0, 0}};
  std::vector<double> g{1, -1}, h{0.25, 0.25};
  EXPECT_EQ(fit_tree(x, g, h, GbdtParams{}).nodes().size(), 1u);
  GbdtParams p;
  p.min_child_weight = 0;
  EXPECT_EQ(fit_tree(x, g, h, p).nodes().size(), 3u);
}

TEST(FitTree, RoutesStrictlyLessToLeft) {
  std::vector<FeatureVector> x{{0, 0, 0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 0, 3, 0, 0}};
  std::vector<double> g{1, -1}, h{1, 1};
  GbdtParams p;
  const auto t = fit_tree(x, g, h, p);
  ASSERT_EQ(t.root().threshold, 2.0);
  FeatureVector at{0, 0, 0, 0, 0, 2, 0, 0};
  EXPECT_EQ(t.predict(at), t.nodes()[static_cast<std::size_t>(t.root().right)].weight);
}

TEST(FitTree, RejectsMismatchedAndNonFinite) {
  std::vector<FeatureVector> x(2);
  std::vector<double> g{1}, h{1, 1};
  EXPECT_THROW(fit_tree(x, g, h, GbdtParams{}), DimensionMismatch);
  std::vector<double> g2{1, std::nan("")};
  EXPECT_THROW(fit_tree(x, g2, h, GbdtParams{}), std::invalid_argument);
}

TEST(Gbdt, DefaultHyperparameters) {
  const GbdtParams p;
  EXPECT_EQ(p.max_depth, 8);
  EXPECT_EQ(p.n_estimators, 8);
  EXPECT_EQ(p.eta, 1.0);
  EXPECT_EQ(p.gamma, 0.0);
}

TEST(Gbdt, CheckerboardTrainingAccuracy) {
  const auto s = datasets::checkerboard(400, 3);
  const auto m = fit_gbdt(s);
  EXPECT_EQ(m.trees.size(), 8u);
  EXPECT_GE(accuracy(m, s), 0.99);
}

TEST(Gbdt, DepthNeverExceedsLimit) {
  const auto s = datasets::checkerboard(300, 5);
  for (int depth : {0, 1, 2, 3, 8}) {
    GbdtParams p;
    p.max_depth = depth;
    p.min_child_weight = 0;
    for (const auto& t : fit_gbdt(s, p).trees) EXPECT_LE(t.depth(), depth);
  }
  for (const auto& t : fit_gbdt(datasets::shuffled_labels(500, 2)).trees) EXPECT_LE(t.depth(), 8);
}

TEST(Gbdt, PredictionComparisonBound) {
  const auto s = datasets::shuffled_labels(400, 9);
  GbdtParams p;
  p.min_child_weight = 0;
  const auto m = fit_gbdt(s, p);
  for (const auto& v : s) {
    std::size_t cmp = 0;
    (void)m.raw_score(v.features, &cmp);
    EXPECT_LE(cmp, static_cast<std::size_t>(p.n_estimators * p.max_depth));
  }
}

TEST(Gbdt, RawScoreIsBasePlusEtaSum) {
  const auto s = datasets::checkerboard(100, 1);
  GbdtParams p;
  p.eta = 0.3;
  const auto m = fit_gbdt(s, p);
  for (const auto& v : s) {
    double sum = 0.0;
    for (const auto& t : m.trees) sum += t.predict(v.features);
    EXPECT_DOUBLE_EQ(m.raw_score(v.features), m.base_score + 0.3 * sum);
  }
}

TEST(Gbdt, SingleClassInputs) {
  std::vector<Sample> pos, neg;
  for (int i = 0; i < 20; ++i) {
    pos.push_back(datasets::point(i, 1, 1, 1));
    neg.push_back(datasets::point(i, 1, 1, -1));
  }
  const auto mp = fit_gbdt(pos), mn = fit_gbdt(neg);
  for (int i = -5; i < 50; i += 3) {
    const auto x = datasets::point(i, i, i, 1).features;
    EXPECT_EQ(predict(mp, x), 1);
    EXPECT_EQ(predict(mn, x), -1);
  }
  EXPECT_EQ(accuracy(mp, pos), 1.0);
}

TEST(Gbdt, EmptyModelPredictsNt) {
  const GbdtModel m;
  EXPECT_EQ(predict(m, FeatureVector{}), 1);
}

TEST(Gbdt, ArityChecked) {
  const GbdtModel m;
  std::vector<double> seven(7, 0.0);
  EXPECT_THROW(predict(m, seven), DimensionMismatch);
}

TEST(Gbdt, EmptyTrainingSetRejected) {
  EXPECT_THROW(fit_gbdt(std::vector<Sample>{}), std::invalid_argument);
}

TEST(Gbdt, DeterministicFit) {
  const auto s = datasets::checkerboard(200, 4);
  const auto a = fit_gbdt(s), b = fit_gbdt(s);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t i = 0; i < a.trees.size(); ++i) EXPECT_EQ(a.trees[i], b.trees[i]);
}

TEST(Gbdt, SeparableSetFitsPerfectly) {
  const auto s = datasets::separable(300, 8);
  const auto m = fit_gbdt(s);
  for (const auto& v : s) EXPECT_EQ(predict(m, v.features), v.label);
}

TEST(Gbdt, NoFeatureNormalisation) {
  // Scaling a feature by 1e6 moves thresholds but not the partition.
  auto s = datasets::checkerboard(200, 6);
  const auto base = fit_gbdt(s);
  auto scaled = s;
  for (auto& v : scaled) v.features[5] *= 1e6;
  const auto m = fit_gbdt(scaled);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(predict(base, s[i].features), predict(m, scaled[i].features));
  }
}

TEST(Gbdt, LargerTrainingSetFitsAtLeastAsWell) {
  const auto full = datasets::checkerboard(400, 12);
  const double full_acc = accuracy(fit_gbdt(full), full);
  double subset_acc = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto pick = full;
    std::mt19937_64 rng(seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(full.size() / 10);
    subset_acc += accuracy(fit_gbdt(pick), full) / 10.0;
  }
  EXPECT_GE(full_acc, subset_acc);
}

TEST(SingleCart, OneTreeSquaredError) {
  const auto s = datasets::separable(200, 2);
  const auto m = fit_single_cart(s);
  EXPECT_EQ(m.trees.size(), 1u);
  EXPECT_EQ(m.objective, Objective::SquaredError);
  EXPECT_GE(accuracy(m, s), 0.95);
}
