#pragma once

// Model-guided C = A x B^T: build the 8 features in O(1), ask the model, and
// run NT or TNN. TNN is never chosen when its B^T buffer would not fit.

#include <cstddef>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "mtnn/bench.hpp"
#include "mtnn/gbdt.hpp"
#include "mtnn/kernels.hpp"
#include "mtnn/platform.hpp"

namespace mtnn {

enum class Choice { UseNT, UseTNN };
enum class Reason { Predicted, MemoryFallback };

inline std::string_view to_string(Choice c) { return c == Choice::UseNT ? "NT" : "TNN"; }
inline std::string_view to_string(Reason r) {
  return r == Reason::Predicted ? "predicted" : "memory-fallback";
}

struct SelectionDecision {
  Choice choice = Choice::UseNT;
  Reason reason = Reason::Predicted;
  double raw_score = 0.0;

  friend bool operator==(const SelectionDecision&, const SelectionDecision&) = default;
};

inline std::size_t transpose_buffer_bytes(const ProblemShape& s) noexcept {
  return sizeof(float) * s.n * s.k;
}

inline SelectionDecision select(const GbdtModel& model, const PlatformFeatures& platform,
                                const ProblemShape& shape, std::size_t free_memory) {
  if (transpose_buffer_bytes(shape) > free_memory) {
    return {Choice::UseNT, Reason::MemoryFallback, 0.0};
  }
  const auto x = build_features(platform, shape);
  const double raw = model.raw_score(x);
  return {raw >= 0.0 ? Choice::UseNT : Choice::UseTNN, Reason::Predicted, raw};
}

/// Dispatches one product per the model. A TNN allocation failure after a
/// TNN decision is retried with NT and noted on `log`.
inline Matrix mtnn_gemm(const GbdtModel& model, const PlatformFeatures& platform, const Matrix& a,
                        const Matrix& b, std::size_t free_memory, const KernelConfig& cfg = {},
                        SelectionDecision* decision = nullptr, std::ostream* log = nullptr) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("mtnn_gemm: A is " + detail::dims(a) + " but B is " + detail::dims(b) +
                            " (A.cols must equal B.cols)");
  }
  const ProblemShape shape{a.rows(), b.rows(), a.cols()};
  auto d = select(model, platform, shape, free_memory);
  if (decision) *decision = d;
  if (d.choice == Choice::UseTNN) {
    try {
      return gemm_tnn(a, b, cfg);
    } catch (const MemoryExhausted& e) {
      if (log) *log << "mtnn: TNN scratch unavailable for " << to_string(shape) << " (" << e.what()
                    << "), falling back to NT\n";
      if (decision) *decision = {Choice::UseNT, Reason::MemoryFallback, d.raw_score};
    }
  }
  return gemm_nt(a, b, cfg);
}

// Runtime handle: a loaded model plus the platform description captured once
// at startup. Immutable after construction, so concurrent use is safe.
class Mtnn {
 public:
  Mtnn(std::shared_ptr<const GbdtModel> model, PlatformFeatures platform,
       std::size_t memory_budget = available_memory_bytes(), KernelConfig cfg = {})
      : model_{std::move(model)}, platform_{platform}, memory_budget_{memory_budget}, cfg_{cfg} {
    if (!model_) throw std::invalid_argument("Mtnn: null model");
  }

  SelectionDecision select(const ProblemShape& shape) const {
    return mtnn::select(*model_, platform_, shape, memory_budget_);
  }

  Matrix gemm(const Matrix& a, const Matrix& b, SelectionDecision* decision = nullptr,
              std::ostream* log = nullptr) const {
    return mtnn_gemm(*model_, platform_, a, b, memory_budget_, cfg_, decision, log);
  }

  const GbdtModel& model() const noexcept { return *model_; }
  const PlatformFeatures& platform() const noexcept { return platform_; }
  std::size_t memory_budget() const noexcept { return memory_budget_; }
  const KernelConfig& kernel_config() const noexcept { return cfg_; }

 private:
  std::shared_ptr<const GbdtModel> model_;
  PlatformFeatures platform_;
  std::size_t memory_budget_;
  KernelConfig cfg_;
};

}  // namespace mtnn
