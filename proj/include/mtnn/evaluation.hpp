#pragma once

#include <array>
#include <new>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <vector>

#include "mtnn/bench.hpp"
#include "mtnn/metrics.hpp"
#include "mtnn/selector.hpp"

namespace mtnn {

// Copied: P_MTNN is the chosen branch's own measurement, so GOW >= 0 and
// LUB <= 0 hold exactly. Remeasured: the dispatcher is timed end to end,
// decision overhead included, and noise can push either metric past zero.
enum class EvalMode { Copied, Remeasured };

struct EvalOptions {
  TimingOptions timing{};
  EvalMode mode = EvalMode::Remeasured;
};

inline double branch_performance(const SelectionDecision& d, double p_nt, double p_tnn) noexcept {
  return d.choice == Choice::UseNT ? p_nt : p_tnn;
}

namespace detail {

// NT, TNN and dispatcher timings taken round-robin, so no variant gains from
// always running after the others. Medians per variant; nullopt if TNN cannot
// get its scratch.
inline std::optional<std::array<double, 3>> interleaved_times(const Mtnn& mtnn, const CaseOperands& ops,
                                                              const TimingOptions& opt, bool with_dispatch) {
  std::array<std::vector<double>, 3> t;
  try {
    for (int rep = -opt.warmup; rep < opt.reps; ++rep) {
      const double nt = stopwatch([&] { (void)gemm_nt(ops.a, ops.b, opt.kernel); });
      const double tnn = stopwatch([&] { (void)gemm_tnn(ops.a, ops.b, opt.kernel); });
      const double mt = with_dispatch ? stopwatch([&] { (void)mtnn.gemm(ops.a, ops.b); }) : 0.0;
      if (rep < 0) continue;
      t[0].push_back(nt);
      t[1].push_back(tnn);
      t[2].push_back(mt);
    }
  } catch (const MemoryExhausted&) {
    return std::nullopt;
  }
  return std::array<double, 3>{median(t[0]), median(t[1]), with_dispatch ? median(t[2]) : 0.0};
}

}  // namespace detail

/// Times NT, TNN and the dispatcher on each shape. Infeasible shapes are skipped.
inline std::vector<EvalCase> evaluate_shapes(const Mtnn& mtnn, const std::vector<ProblemShape>& shapes,
                                             const EvalOptions& opt, std::ostream* log = nullptr) {
  if (opt.timing.reps < 1) throw std::invalid_argument("reps must be at least 1");
  std::vector<EvalCase> cases;
  for (const auto& s : shapes) {
    try {
      const auto ops = CaseOperands::make(s, opt.timing.seed);
      const bool remeasure = opt.mode == EvalMode::Remeasured;
      const auto t = detail::interleaved_times(mtnn, ops, opt.timing, remeasure);
      if (!t) {
        if (log) *log << "case " << to_string(s) << " infeasible, skipped\n";
        continue;
      }
      EvalCase c;
      c.shape = s;
      c.p_nt = gflops(s, (*t)[0]);
      c.p_tnn = gflops(s, (*t)[1]);
      c.decision = mtnn.select(s);
      c.p_mtnn = remeasure ? gflops(s, (*t)[2]) : branch_performance(c.decision, c.p_nt, c.p_tnn);
      if (log) {
        *log << "case " << to_string(s) << " -> " << to_string(c.decision.choice) << " NT "
             << percent(c.p_nt) << " TNN " << percent(c.p_tnn) << " MTNN " << percent(c.p_mtnn)
             << " GFLOPS\n";
      }
      cases.push_back(c);
    } catch (const std::bad_alloc&) {
      if (log) *log << "case " << to_string(s) << " out of memory, skipped\n";
    }
  }
  return cases;
}

/// Copied-mode cases straight from stored records; no kernels run.
inline std::vector<EvalCase> evaluate_records(const Mtnn& mtnn, const std::vector<BenchRecord>& records) {
  std::vector<EvalCase> cases;
  cases.reserve(records.size());
  for (const auto& r : records) {
    EvalCase c;
    c.shape = r.shape;
    c.p_nt = r.p_nt;
    c.p_tnn = r.p_tnn;
    c.decision = mtnn.select(r.shape);
    c.p_mtnn = branch_performance(c.decision, c.p_nt, c.p_tnn);
    cases.push_back(c);
  }
  return cases;
}

}  // namespace mtnn
