#pragma once

// Timing harness and training-data collection: every (m, n, k) on a power-of-two
// grid is timed with NN, NT and TNN, and each record becomes one labelled sample
// (+1 when NT is at least as fast as TNN, -1 otherwise).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtnn/kernels.hpp"
#include "mtnn/matrix.hpp"
#include "mtnn/platform.hpp"

namespace mtnn {

enum class Kernel { NN, NT, TNN };

inline std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::NN:
      return "NN";
    case Kernel::NT:
      return "NT";
    case Kernel::TNN:
      return "TNN";
  }
  return "?";
}

inline constexpr std::size_t kFeatureCount = 8;
using FeatureVector = std::array<double, kFeatureCount>;

// Feature order is (gm, sm, cc, mbw, l2c, m, n, k).
struct Sample {
  FeatureVector features{};
  int label = 1;

  ProblemShape shape() const {
    return {static_cast<std::size_t>(features[5]), static_cast<std::size_t>(features[6]),
            static_cast<std::size_t>(features[7])};
  }
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct BenchRecord {
  ProblemShape shape;
  double p_nn = 0.0;  // GFLOPS
  double p_nt = 0.0;
  double p_tnn = 0.0;
  double t_nt = 0.0;  // seconds
  double t_tnn = 0.0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

struct KernelTimes {
  double nn = 0.0;
  double nt = 0.0;
  double tnn = 0.0;
};

struct TimingOptions {
  int reps = 5;
  int warmup = 2;
  std::uint64_t seed = 42;
  KernelConfig kernel{};
};

/// 2*m*n*k / (seconds * 1e9).
inline double gflops(const ProblemShape& shape, double seconds) {
  if (!(seconds > 0.0) || !std::isfinite(seconds)) {
    throw std::invalid_argument("gflops: duration must be positive and finite");
  }
  return shape.flops() / (seconds * 1e9);
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Calls `run` warmup + reps times; `run` returns the seconds of one execution.
// The warmup results are discarded and the median of the rest returned.
template <typename Run>
double median_of_runs(int reps, int warmup, Run&& run) {
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  for (int i = 0; i < warmup; ++i) (void)run();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) times.push_back(run());
  return median(std::move(times));
}

template <typename Fn>
double stopwatch(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

// Uniform [-1, 1] fill from a seeded generator.
inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> data(rows * cols);
  for (auto& v : data) v = dist(rng);
  return Matrix(rows, cols, std::move(data));
}

// Operands for one timed case: A (m x k), B (n x k), and B_nn (k x n) for the
// plain product.
struct CaseOperands {
  Matrix a;
  Matrix b;
  Matrix b_nn;

  static CaseOperands make(const ProblemShape& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix a = random_matrix(s.m, s.k, rng);
    Matrix b = random_matrix(s.n, s.k, rng);
    Matrix b_nn = random_matrix(s.k, s.n, rng);
    return {std::move(a), std::move(b), std::move(b_nn)};
  }
};

/// Median wall-clock seconds of one kernel on pre-built operands, or nullopt
/// when TNN cannot get its scratch buffer.
inline std::optional<double> time_kernel(Kernel kernel, const CaseOperands& ops,
                                         const TimingOptions& opt) {
  try {
    return median_of_runs(opt.reps, opt.warmup, [&] {
      return stopwatch([&] {
        switch (kernel) {
          case Kernel::NN:
            (void)gemm_nn(ops.a, ops.b_nn, opt.kernel);
            break;
          case Kernel::NT:
            (void)gemm_nt(ops.a, ops.b, opt.kernel);
            break;
          case Kernel::TNN:
            (void)gemm_tnn(ops.a, ops.b, opt.kernel);
            break;
        }
      });
    });
  } catch (const MemoryExhausted&) {
    return std::nullopt;
  }
}

inline std::optional<double> time_kernel(Kernel kernel, const ProblemShape& shape,
                                         const TimingOptions& opt) {
  try {
    return time_kernel(kernel, CaseOperands::make(shape, opt.seed), opt);
  } catch (const std::bad_alloc&) {
    return std::nullopt;
  }
}

// Produces the three timings for one shape, or nullopt if the case is infeasible.
using CaseTimer = std::function<std::optional<KernelTimes>(const ProblemShape&)>;

inline std::size_t case_footprint_bytes(const ProblemShape& s) {
  // A, B, B_nn, C and the transposed scratch.
  return sizeof(float) * (s.m * s.k + 2 * s.n * s.k + s.k * s.n + s.m * s.n);
}

inline CaseTimer measured_timer(TimingOptions opt,
                                std::size_t memory_budget = available_memory_bytes()) {
  return [opt, memory_budget](const ProblemShape& s) -> std::optional<KernelTimes> {
    if (memory_budget != 0 && case_footprint_bytes(s) > memory_budget) return std::nullopt;
    try {
      const auto ops = CaseOperands::make(s, opt.seed);
      const auto nn = time_kernel(Kernel::NN, ops, opt);
      const auto nt = time_kernel(Kernel::NT, ops, opt);
      const auto tnn = time_kernel(Kernel::TNN, ops, opt);
      if (!nn || !nt || !tnn) return std::nullopt;
      return KernelTimes{*nn, *nt, *tnn};
    } catch (const std::bad_alloc&) {
      return std::nullopt;
    }
  };
}

// Replays previously recorded performance instead of running kernels. Shapes
// absent from `records` are infeasible.
inline CaseTimer fixture_timer(const std::vector<BenchRecord>& records) {
  std::map<ProblemShape, KernelTimes> table;
  for (const auto& r : records) {
    const double f = r.shape.flops() * 1e-9;
    table[r.shape] = KernelTimes{f / r.p_nn, f / r.p_nt, f / r.p_tnn};
  }
  return [table = std::move(table)](const ProblemShape& s) -> std::optional<KernelTimes> {
    const auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
  };
}

inline BenchRecord make_record(const ProblemShape& s, const KernelTimes& t) {
  return {s, gflops(s, t.nn), gflops(s, t.nt), gflops(s, t.tnn), t.nt, t.tnn};
}

/// Sizes {2^i | exp_min <= i <= exp_max}, ascending.
inline std::vector<std::size_t> power_sizes(int exp_min, int exp_max) {
  if (exp_min > exp_max) throw std::invalid_argument("empty exponent range");
  if (exp_min < 0 || exp_max > 40) throw std::invalid_argument("exponent out of range [0, 40]");
  std::vector<std::size_t> sizes;
  for (int i = exp_min; i <= exp_max; ++i) sizes.push_back(std::size_t{1} << i);
  return sizes;
}

/// All (m, n, k) over the power-of-two grid in lexicographic order.
inline std::vector<ProblemShape> grid_shapes(int exp_min, int exp_max) {
  const auto sizes = power_sizes(exp_min, exp_max);
  std::vector<ProblemShape> shapes;
  shapes.reserve(sizes.size() * sizes.size() * sizes.size());
  for (auto m : sizes)
    for (auto n : sizes)
      for (auto k : sizes) shapes.push_back({m, n, k});
  return shapes;
}

struct SweepResult {
  std::vector<BenchRecord> records;
  std::vector<ProblemShape> skipped;
};

inline SweepResult sweep_shapes(const std::vector<ProblemShape>& shapes, const CaseTimer& timer,
                                std::ostream* log = nullptr) {
  SweepResult out;
  for (const auto& s : shapes) {
    std::optional<KernelTimes> t;
    try {
      t = timer(s);
    } catch (const std::exception& e) {
      if (log) *log << "case " << to_string(s) << " failed: " << e.what() << "\n";
    }
    const bool usable = t && t->nn > 0.0 && t->nt > 0.0 && t->tnn > 0.0 &&
                        std::isfinite(t->nn) && std::isfinite(t->nt) && std::isfinite(t->tnn);
    if (!usable) {
      if (log) *log << "case " << to_string(s) << " infeasible, skipped\n";
      out.skipped.push_back(s);
      continue;
    }
    auto rec = make_record(s, *t);
    if (log) {
      const double hi = std::max({rec.p_nn, rec.p_nt, rec.p_tnn});
      const double lo = std::min({rec.p_nn, rec.p_nt, rec.p_tnn});
      *log << "case " << to_string(s) << std::fixed << std::setprecision(2) << " NN "
           << rec.p_nn << " NT " << rec.p_nt << " TNN " << rec.p_tnn << " GFLOPS, spread "
           << hi / lo << "x\n";
      log->unsetf(std::ios::floatfield);
    }
    out.records.push_back(rec);
  }
  return out;
}

inline SweepResult sweep_grid(int exp_min, int exp_max, const CaseTimer& timer,
                              std::ostream* log = nullptr) {
  return sweep_shapes(grid_shapes(exp_min, exp_max), timer, log);
}

inline FeatureVector build_features(const PlatformFeatures& p, const ProblemShape& s) noexcept {
  return {p.gm,
          p.sm,
          p.cc,
          p.mbw,
          p.l2c,
          static_cast<double>(s.m),
          static_cast<double>(s.n),
          static_cast<double>(s.k)};
}

/// label = +1 when P_NT - P_TNN >= 0. Features are not normalised.
inline Sample label_record(const BenchRecord& r, const PlatformFeatures& p) noexcept {
  const double d = r.p_nt - r.p_tnn;
  return {build_features(p, r.shape), d >= 0.0 ? 1 : -1};
}

inline std::vector<Sample> label_records(const std::vector<BenchRecord>& records,
                                         const PlatformFeatures& p) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(label_record(r, p));
  return out;
}

struct LabelCounts {
  std::size_t negative = 0;
  std::size_t positive = 0;
  std::size_t total() const noexcept { return negative + positive; }
};

inline LabelCounts count_labels(const std::vector<Sample>& samples) noexcept {
  LabelCounts c;
  for (const auto& s : samples) (s.label > 0 ? c.positive : c.negative) += 1;
  return c;
}

}  // namespace mtnn
