#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mtnn/bench.hpp"

using namespace mtnn;

TEST(Timing, MedianOfFive) { EXPECT_EQ(median({3, 1, 2, 9, 2}), 2.0); }

TEST(Timing, MedianOfEvenCountAveragesMiddle) { EXPECT_EQ(median({4, 1, 3, 2}), 2.5); }

TEST(Timing, MedianRejectsEmpty) { EXPECT_THROW(median({}), std::invalid_argument); }

TEST(Timing, MedianOfRunsDiscardsWarmup) {
  std::vector<double> seq{100, 100, 3, 1, 2, 9, 2};
  std::size_t at = 0;
  EXPECT_EQ(median_of_runs(5, 2, [&] { return seq[at++]; }), 2.0);
  EXPECT_EQ(at, 7u);
}

TEST(Timing, Gflops) {
  EXPECT_DOUBLE_EQ(gflops({1000, 1000, 1000}, 1.0), 2.0);
  EXPECT_NEAR(gflops({1024, 1024, 1024}, 0.001), 2147.48, 0.01);
  EXPECT_THROW(gflops({1, 1, 1}, 0.0), std::invalid_argument);
  EXPECT_THROW(gflops({1, 1, 1}, -1.0), std::invalid_argument);
}

TEST(Timing, KernelTimesArePositive) {
  TimingOptions opt;
  opt.reps = 3;
  opt.warmup = 1;
  for (auto k : {Kernel::NN, Kernel::NT, Kernel::TNN}) {
    const auto t = time_kernel(k, ProblemShape{32, 48, 16}, opt);
    ASSERT_TRUE(t.has_value()) << to_string(k);
    EXPECT_GT(*t, 0.0);
  }
}

TEST(Timing, TnnOverScratchLimitIsInfeasible) {
  TimingOptions opt;
  opt.kernel.scratch_limit = 16;
  EXPECT_FALSE(time_kernel(Kernel::TNN, ProblemShape{8, 8, 8}, opt).has_value());
  EXPECT_TRUE(time_kernel(Kernel::NT, ProblemShape{8, 8, 8}, opt).has_value());
}

TEST(Grid, CountAndOrder) {
  const auto shapes = grid_shapes(5, 7);
  ASSERT_EQ(shapes.size(), 27u);
  EXPECT_EQ(shapes.front(), (ProblemShape{32, 32, 32}));
  EXPECT_EQ(shapes[1], (ProblemShape{32, 32, 64}));
  EXPECT_EQ(shapes.back(), (ProblemShape{128, 128, 128}));
  EXPECT_TRUE(std::is_sorted(shapes.begin(), shapes.end()));
  EXPECT_EQ(std::set<ProblemShape>(shapes.begin(), shapes.end()).size(), 27u);
  EXPECT_EQ(grid_shapes(5, 10).size(), 216u);
}

TEST(Grid, PowerSizes) {
  EXPECT_EQ(power_sizes(5, 7), (std::vector<std::size_t>{32, 64, 128}));
  EXPECT_THROW(power_sizes(7, 5), std::invalid_argument);
}

TEST(Labels, TieGoesToNt) {
  const BenchRecord r{{32, 32, 32}, 1, 100, 100, 1, 1};
  EXPECT_EQ(label_record(r, gtx1080()).label, 1);
}

TEST(Labels, SignOfDifference) {
  EXPECT_EQ(label_record({{32, 32, 32}, 1, 100, 150, 1, 1}, gtx1080()).label, -1);
  EXPECT_EQ(label_record({{32, 32, 32}, 1, 150, 100, 1, 1}, gtx1080()).label, 1);
}

TEST(Labels, FeaturesOfGtx1080) {
  const auto s = label_record({{128, 128, 128}, 1, 2, 1, 1, 1}, gtx1080());
  EXPECT_EQ(s.features, (FeatureVector{8, 20, 1607, 256, 2048, 128, 128, 128}));
  EXPECT_EQ(s.shape(), (ProblemShape{128, 128, 128}));
}

TEST(Labels, CountsPartitionSamples) {
  std::vector<BenchRecord> recs;
  for (int i = 1; i <= 9; ++i) recs.push_back({{32, 32, std::size_t(i)}, 1, double(i), 5, 1, 1});
  const auto samples = label_records(recs, gtx1080());
  const auto c = count_labels(samples);
  EXPECT_EQ(c.negative, 4u);
  EXPECT_EQ(c.positive, 5u);
  EXPECT_EQ(c.total(), samples.size());
}

TEST(Sweep, FixtureReplaysRecords) {
  std::vector<BenchRecord> recs{{{32, 32, 32}, 10, 20, 30, 0, 0}, {{32, 32, 64}, 40, 20, 10, 0, 0}};
  const auto timer = fixture_timer(recs);
  const auto res = sweep_grid(5, 6, timer);
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.skipped.size(), 6u);
  EXPECT_NEAR(res.records[0].p_nt, 20, 1e-9);
  EXPECT_NEAR(res.records[1].p_tnn, 10, 1e-9);
  const auto samples = label_records(res.records, gtx1080());
  EXPECT_EQ(samples[0].label, -1);
  EXPECT_EQ(samples[1].label, 1);
}

TEST(Sweep, SkipsInfeasibleAndThrowingCases) {
  const CaseTimer timer = [](const ProblemShape& s) -> std::optional<KernelTimes> {
    if (s.k == 64) return std::nullopt;
    if (s.n == 64) throw std::runtime_error("boom");
    return KernelTimes{1e-3, 2e-3, 3e-3};
  };
  std::ostringstream log;
  const auto res = sweep_grid(5, 6, timer, &log);
  EXPECT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.skipped.size(), 6u);
  EXPECT_NE(log.str().find("spread"), std::string::npos);
  EXPECT_NE(log.str().find("boom"), std::string::npos);
}

TEST(Sweep, MeasuredDeterministicShapes) {
  TimingOptions opt;
  opt.reps = 1;
  opt.warmup = 0;
  const auto a = sweep_grid(3, 4, measured_timer(opt));
  const auto b = sweep_grid(3, 4, measured_timer(opt));
  ASSERT_EQ(a.records.size(), 8u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].shape, b.records[i].shape);
    for (double p : {a.records[i].p_nn, a.records[i].p_nt, a.records[i].p_tnn}) {
      EXPECT_GT(p, 0.0);
      EXPECT_TRUE(std::isfinite(p));
    }
  }
}

TEST(Sweep, MemoryBudgetSkipsLargeCases) {
  TimingOptions opt;
  opt.reps = 1;
  opt.warmup = 0;
  const auto res = sweep_grid(3, 4, measured_timer(opt, case_footprint_bytes({8, 8, 8})));
  EXPECT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.skipped.size(), 7u);
}

TEST(Operands, SeededAndShaped) {
  const auto x = CaseOperands::make({3, 4, 5}, 9);
  const auto y = CaseOperands::make({3, 4, 5}, 9);
  EXPECT_EQ(x.a, y.a);
  EXPECT_EQ(x.a.rows(), 3u);
  EXPECT_EQ(x.b.rows(), 4u);
  EXPECT_EQ(x.b.cols(), 5u);
  EXPECT_EQ(x.b_nn.rows(), 5u);
  for (float v : x.a.data()) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}
