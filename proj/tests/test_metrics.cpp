#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mtnn/evaluation.hpp"
#include "mtnn/metrics.hpp"

using namespace mtnn;

namespace {

EvalCase make_case(double nt, double tnn, double mtnn) {
  EvalCase c;
  c.shape = {32, 32, 32};
  c.p_nt = nt;
  c.p_tnn = tnn;
  c.p_mtnn = mtnn;
  return c;
}

}  // namespace

TEST(Gow, Examples) {
  EXPECT_DOUBLE_EQ(gow(100, 100, 200), 0.0);
  EXPECT_DOUBLE_EQ(gow(200, 100, 200), 1.0);
  EXPECT_THROW(gow(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(gow(1, -1, 1), std::invalid_argument);
}

TEST(Lub, Examples) {
  EXPECT_DOUBLE_EQ(lub(200, 100, 200), 0.0);
  EXPECT_DOUBLE_EQ(lub(100, 100, 200), -0.5);
  EXPECT_THROW(lub(1, 1, 0), std::invalid_argument);
}

TEST(GowLub, RecoverPerformanceFromEither) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1, 500);
  for (int i = 0; i < 200; ++i) {
    const double nt = u(rng), tnn = u(rng), m = u(rng);
    const double lo = std::min(nt, tnn), hi = std::max(nt, tnn);
    EXPECT_NEAR(gow(m, nt, tnn) * lo + lo, lub(m, nt, tnn) * hi + hi, 1e-9 * hi);
  }
}

TEST(GowLub, CopiedValueSigns) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1, 500);
  for (int i = 0; i < 500; ++i) {
    const double nt = u(rng), tnn = u(rng);
    for (double m : {nt, tnn}) {
      const double g = gow(m, nt, tnn), l = lub(m, nt, tnn);
      EXPECT_GE(g, 0.0);
      EXPECT_LE(l, 0.0);
      EXPECT_TRUE(g == 0.0 || l == 0.0);
    }
  }
  EXPECT_EQ(gow(5, 5, 5), 0.0);
  EXPECT_EQ(lub(5, 5, 5), 0.0);
}

TEST(Histogram, Buckets) {
  EXPECT_EQ(histogram_bucket(1.0), 10u);
  EXPECT_EQ(histogram_bucket(0.3), 3u);
  EXPECT_EQ(histogram_bucket(0.05), 0u);
  EXPECT_EQ(histogram_bucket(1.99), 19u);
  EXPECT_EQ(histogram_bucket(2.0), 20u);
  EXPECT_EQ(histogram_bucket(17.0), 20u);
  EXPECT_EQ(histogram_label(10), "1.0");
  EXPECT_EQ(histogram_label(20), "2.0+");
}

TEST(Aggregate, SingleNeutralCase) {
  const EvalCase c = make_case(50, 50, 50);
  const auto r = aggregate(std::span(&c, 1));
  EXPECT_EQ(r.cases, 1u);
  EXPECT_EQ(r.mtnn_vs_nt, 0.0);
  EXPECT_EQ(r.mtnn_vs_tnn, 0.0);
  EXPECT_EQ(r.gow_avg, 0.0);
  EXPECT_EQ(r.gow_max, 0.0);
  EXPECT_EQ(r.lub_avg, 0.0);
  EXPECT_EQ(r.lub_min, 0.0);
  EXPECT_EQ(r.ratio_histogram[10], 1u);
}

TEST(Aggregate, Empty) { EXPECT_THROW(aggregate({}), std::invalid_argument); }

TEST(Aggregate, TenCasesMatchIndependentRecomputation) {
  // Hand-tabulated: columns nt, tnn, mtnn.
  const double t[10][3] = {{100, 200, 200}, {100, 200, 100}, {50, 25, 50}, {80, 80, 80},   {10, 30, 30},
                           {300, 100, 300}, {40, 60, 55},    {70, 35, 70}, {20, 100, 100}, {90, 45, 45}};
  std::vector<EvalCase> cases;
  for (const auto& r : t) cases.push_back(make_case(r[0], r[1], r[2]));
  const auto r = aggregate(cases);
  // mtnn/nt - 1: 1, 0, 0, 0, 2, 0, 0.375, 0, 4, -0.5  -> sum 6.875
  EXPECT_NEAR(r.mtnn_vs_nt, 68.75, 1e-9);
  // mtnn/tnn - 1: 0, -0.5, 1, 0, 0, 2, -1/12, 1, 0, 0 -> sum 3.41666...
  EXPECT_NEAR(r.mtnn_vs_tnn, 100.0 * (3.5 - 1.0 / 12.0) / 10.0, 1e-9);
  // gow: 1, 0, 1, 0, 2, 2, 0.375, 1, 4, 0 -> sum 11.375, max 4
  EXPECT_NEAR(r.gow_avg, 113.75, 1e-9);
  EXPECT_NEAR(r.gow_max, 400.0, 1e-9);
  // lub: 0, -0.5, 0, 0, 0, 0, -1/12, 0, 0, -0.5 -> sum -13/12, min -0.5
  EXPECT_NEAR(r.lub_avg, -100.0 * 13.0 / 120.0, 1e-9);
  EXPECT_NEAR(r.lub_min, -50.0, 1e-9);
  // ratios mtnn/nt: 2, 1, 1, 1, 3, 1, 1.375, 1, 5, 0.5
  EXPECT_EQ(r.ratio_histogram[20], 3u);
  EXPECT_EQ(r.ratio_histogram[10], 5u);
  EXPECT_EQ(r.ratio_histogram[13], 1u);
  EXPECT_EQ(r.ratio_histogram[5], 1u);
}

TEST(Aggregate, HistogramTotalsEqualCases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 400);
  std::vector<EvalCase> cases;
  for (int i = 0; i < 377; ++i) cases.push_back(make_case(u(rng), u(rng), u(rng)));
  const auto r = aggregate(cases);
  std::size_t total = 0;
  for (auto v : r.ratio_histogram) total += v;
  EXPECT_EQ(total, cases.size());
  EXPECT_GE(r.gow_max, r.gow_avg);
  EXPECT_LE(r.lub_min, r.lub_avg);
}

TEST(Aggregate, PermutationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1, 100);
  std::vector<EvalCase> cases;
  for (int i = 0; i < 64; ++i) {
    const double nt = u(rng), tnn = u(rng);
    cases.push_back(make_case(nt, tnn, i % 3 ? nt : tnn));
  }
  const auto a = aggregate(cases);
  std::shuffle(cases.begin(), cases.end(), rng);
  const auto b = aggregate(cases);
  EXPECT_NEAR(a.mtnn_vs_nt, b.mtnn_vs_nt, 1e-9);
  EXPECT_NEAR(a.gow_avg, b.gow_avg, 1e-9);
  EXPECT_NEAR(a.lub_avg, b.lub_avg, 1e-9);
  EXPECT_EQ(a.gow_max, b.gow_max);
  EXPECT_EQ(a.lub_min, b.lub_min);
  EXPECT_EQ(a.ratio_histogram, b.ratio_histogram);
}

TEST(Report, CsvShapes) {
  const std::vector<EvalCase> cases{make_case(100, 200, 200), make_case(100, 50, 100)};
  const auto r = aggregate(cases);
  std::ostringstream m, h, c;
  write_metrics_csv(m, r);
  write_histogram_csv(h, r);
  write_cases_csv(c, cases);
  const auto ms = m.str(), hs = h.str(), cs = c.str();
  EXPECT_NE(ms.find("gow_avg_pct,100.00"), std::string::npos);
  EXPECT_NE(ms.find("averaging,per-case-mean"), std::string::npos);
  EXPECT_EQ(std::count(hs.begin(), hs.end(), '\n'), 22);
  EXPECT_NE(hs.find("2.0+,1"), std::string::npos);
  EXPECT_EQ(std::count(cs.begin(), cs.end(), '\n'), 3);
  std::ostringstream table;
  print_metrics_table(table, r);
  EXPECT_NE(table.str().find("LUB_avg"), std::string::npos);
}

TEST(Evaluation, CopiedRecordsKeepSigns) {
  GbdtModel m;
  m.params.n_estimators = 1;
  m.trees.push_back(RegressionTree::leaf(-1));
  const Mtnn h(std::make_shared<const GbdtModel>(m), gtx1080(), std::size_t{1} << 40);
  const std::vector<BenchRecord> recs{{{32, 32, 32}, 1, 10, 20, 1, 1}, {{64, 32, 32}, 1, 30, 20, 1, 1}};
  const auto cases = evaluate_records(h, recs);
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[0].p_mtnn, 20);
  EXPECT_EQ(cases[1].p_mtnn, 20);
  const auto r = aggregate(cases);
  EXPECT_GE(r.gow_avg, 0.0);
  EXPECT_LE(r.lub_avg, 0.0);
}

TEST(Evaluation, MeasuredModesOnSmallShapes) {
  GbdtModel m;
  const Mtnn h(std::make_shared<const GbdtModel>(m), gtx1080(), std::size_t{1} << 40);
  EvalOptions opt;
  opt.timing.reps = 3;
  opt.timing.warmup = 1;
  const std::vector<ProblemShape> shapes{{16, 32, 8}, {40, 24, 64}};
  opt.mode = EvalMode::Copied;
  for (const auto& c : evaluate_shapes(h, shapes, opt)) {
    EXPECT_EQ(c.p_mtnn, c.p_nt);  // empty model picks NT
    EXPECT_GE(gow(c.p_mtnn, c.p_nt, c.p_tnn), 0.0);
    EXPECT_LE(lub(c.p_mtnn, c.p_nt, c.p_tnn), 0.0);
  }
  opt.mode = EvalMode::Remeasured;
  const auto re = evaluate_shapes(h, shapes, opt);
  ASSERT_EQ(re.size(), 2u);
  for (const auto& c : re) EXPECT_GT(c.p_mtnn, 0.0);
}
