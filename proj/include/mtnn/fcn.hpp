#pragma once

// One emulated training iteration of a fully connected network, expressed as
// its GEMM sequence. For layer i with weights W (out x in) and activations X
// (batch x in):
//
//   forward   Y  = X  x W^T          NT (batch, out, in)   routed through the dispatcher
//   backward  dX = dY x W            NN (batch, in, out)
//             dW = dY^T x (X^T)^T    NT (out, in, batch)   always the direct NT kernel
//
// Only forward products go through the dispatcher. Gradient operands are laid
// out before the timed region.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <new>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtnn/bench.hpp"
#include "mtnn/kernels.hpp"
#include "mtnn/matrix.hpp"
#include "mtnn/selector.hpp"

namespace mtnn {

enum class Dispatcher { AlwaysNT, AlwaysTNN, Mtnn };

inline std::string_view to_string(Dispatcher d) {
  switch (d) {
    case Dispatcher::AlwaysNT:
      return "always-NT";
    case Dispatcher::AlwaysTNN:
      return "always-TNN";
    case Dispatcher::Mtnn:
      return "MTNN";
  }
  return "?";
}

struct FcnConfig {
  std::string name = "custom";
  std::size_t input = 0;
  std::size_t output = 0;
  std::vector<std::size_t> hidden;
  std::size_t batch = 0;

  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output);
    return w;
  }
  std::size_t layers() const noexcept { return hidden.size() + 1; }

  void validate() const {
    if (batch == 0) throw std::invalid_argument("fcn: batch size must be positive");
    if (input == 0 || output == 0) throw std::invalid_argument("fcn: input and output widths must be positive");
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      if (hidden[i] == 0) {
        throw std::invalid_argument("fcn: hidden layer " + std::to_string(i + 1) + " has width 0");
      }
    }
  }
};

// Default mini-batch sizes for the demo presets.
inline constexpr std::size_t kMnistBatches[] = {64, 256, 1024};
inline constexpr std::size_t kSyntheticBatches[] = {256, 512, 1024};

inline std::string layer_name(std::size_t i) { return "fc" + std::to_string(i + 1); }

/// 784 -> 2048 ... 2048-1024 -> 10, with 2 to 4 hidden layers.
inline FcnConfig mnist_like(std::size_t hidden_layers, std::size_t batch) {
  if (hidden_layers < 2 || hidden_layers > 4) {
    throw std::invalid_argument("mnist-like preset has 2, 3 or 4 hidden layers");
  }
  FcnConfig c;
  c.name = "mnist-like/" + std::to_string(hidden_layers);
  c.input = 784;
  c.output = 10;
  c.hidden.assign(hidden_layers - 1, 2048);
  c.hidden.push_back(1024);
  c.batch = batch;
  return c;
}

/// 26752 -> 4096 x layers -> 26752, every width divided by `divisor`.
inline FcnConfig synthetic_like(std::size_t hidden_layers, std::size_t batch, std::size_t divisor = 8) {
  if (hidden_layers < 2 || hidden_layers > 4) {
    throw std::invalid_argument("synthetic-like preset has 2, 3 or 4 hidden layers");
  }
  if (divisor == 0 || divisor > 4096) throw std::invalid_argument("scale divisor must lie in [1, 4096]");
  FcnConfig c;
  c.name = "synthetic-like/" + std::to_string(hidden_layers) + "/div" + std::to_string(divisor);
  c.input = 26752 / divisor;
  c.output = 26752 / divisor;
  c.hidden.assign(hidden_layers, 4096 / divisor);
  c.batch = batch;
  return c;
}

enum class Phase { Forward, Backward };

inline std::string_view to_string(Phase p) { return p == Phase::Forward ? "forward" : "backward"; }

struct GemmCall {
  std::size_t layer = 0;
  Phase phase = Phase::Forward;
  std::string_view op;         // "NT" or "NN"
  ProblemShape shape;
  std::string_view algorithm;  // kernel actually run
};

struct FcnTiming {
  Dispatcher dispatcher = Dispatcher::AlwaysNT;
  double forward = 0.0;  // seconds, median over reps
  double backward = 0.0;
  std::vector<GemmCall> calls;

  double total() const noexcept { return forward + backward; }
};

struct FcnOptions {
  int reps = 5;
  int warmup = 1;
  std::uint64_t seed = 42;
  KernelConfig kernel{};
  std::size_t memory_budget = available_memory_bytes();
};

namespace detail {

struct FcnLayer {
  Matrix weights;     // out x in
  Matrix grad_out;    // batch x out
  Matrix grad_out_t;  // out x batch
  Matrix input_t;     // in x batch
};

inline std::size_t fcn_layer_bytes(std::size_t batch, std::size_t in, std::size_t out) {
  // weights, activations, gradients, their transposed copies and one product
  return sizeof(float) * (2 * out * in + 3 * batch * in + 3 * batch * out);
}

}  // namespace detail

/// Prepared operands for one network; forward() and backward() may be called repeatedly.
class FcnWorkload {
 public:
  FcnWorkload(const FcnConfig& cfg, const FcnOptions& opt) : cfg_{cfg}, opt_{opt} {
    cfg_.validate();
    const auto w = cfg_.widths();
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const auto need = detail::fcn_layer_bytes(cfg_.batch, w[i], w[i + 1]);
      total += need;
      if (total > opt_.memory_budget) {
        throw std::runtime_error("fcn: layer " + layer_name(i) + " (" + std::to_string(w[i]) + " -> " +
                                 std::to_string(w[i + 1]) + ", batch " + std::to_string(cfg_.batch) +
                                 ") does not fit in memory; raise --scale-divisor or lower the batch");
      }
    }
    std::mt19937_64 rng(opt_.seed);
    try {
      input_ = random_matrix(cfg_.batch, w[0], rng);
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        detail::FcnLayer l{random_matrix(w[i + 1], w[i], rng), random_matrix(cfg_.batch, w[i + 1], rng),
                           Matrix(w[i + 1], cfg_.batch), Matrix(w[i], cfg_.batch)};
        l.grad_out_t = transpose_oop(l.grad_out, opt_.kernel);
        layers_.push_back(std::move(l));
      }
    } catch (const std::bad_alloc&) {
      throw std::runtime_error("fcn: out of memory preparing layer " + layer_name(layers_.size()) +
                               "; raise --scale-divisor or lower the batch");
    }
    // Activations feeding each layer, transposed for the weight gradient.
    Matrix x = input_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].input_t = transpose_oop(x, opt_.kernel);
      if (i + 1 < layers_.size()) x = gemm_nt(x, layers_[i].weights, opt_.kernel);
    }
  }

  const FcnConfig& config() const noexcept { return cfg_; }

  /// Times the forward products; records the call log if `calls` is given.
  double forward(Dispatcher d, const Mtnn* mtnn, std::vector<GemmCall>* calls = nullptr) const {
    if (d == Dispatcher::Mtnn && !mtnn) throw std::invalid_argument("fcn: MTNN dispatcher needs a model");
    return stopwatch([&] {
      Matrix x = input_;
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& w = layers_[i].weights;
        std::string_view algo = "NT";
        switch (d) {
          case Dispatcher::AlwaysNT:
            x = gemm_nt(x, w, opt_.kernel);
            break;
          case Dispatcher::AlwaysTNN:
            try {
              x = gemm_tnn(x, w, opt_.kernel);
            } catch (const MemoryExhausted& e) {
              throw std::runtime_error("fcn: layer " + layer_name(i) + ": " + e.what());
            }
            algo = "TNN";
            break;
          case Dispatcher::Mtnn: {
            SelectionDecision dec;
            const auto shape = ProblemShape{x.rows(), w.rows(), x.cols()};
            x = mtnn->gemm(x, w, &dec);
            algo = to_string(dec.choice);
            if (calls) calls->push_back({i, Phase::Forward, "NT", shape, algo});
            continue;
          }
        }
        if (calls) calls->push_back({i, Phase::Forward, "NT", {x.rows(), x.cols(), w.cols()}, algo});
      }
    });
  }

  double backward(std::vector<GemmCall>* calls = nullptr) const {
    return stopwatch([&] {
      for (std::size_t r = layers_.size(); r-- > 0;) {
        const auto& l = layers_[r];
        const Matrix dx = gemm_nn(l.grad_out, l.weights, opt_.kernel);
        const Matrix dw = gemm_nt(l.grad_out_t, l.input_t, opt_.kernel);
        if (calls) {
          calls->push_back({r, Phase::Backward, "NN", {dx.rows(), dx.cols(), l.weights.rows()}, "NN"});
          calls->push_back({r, Phase::Backward, "NT", {dw.rows(), dw.cols(), cfg_.batch}, "NT"});
        }
      }
    });
  }

 private:
  FcnConfig cfg_;
  FcnOptions opt_;
  Matrix input_{1, 1};
  std::vector<detail::FcnLayer> layers_;
};

/// Runs every dispatcher on the same operands, interleaved rep by rep so slow
/// drift in machine state hits all of them alike. Medians per phase.
inline std::vector<FcnTiming> fcn_compare(const FcnConfig& cfg, std::span<const Dispatcher> dispatchers,
                                          const Mtnn* mtnn, const FcnOptions& opt = {}) {
  if (opt.reps < 1) throw std::invalid_argument("reps must be at least 1");
  const FcnWorkload work(cfg, opt);
  std::vector<FcnTiming> out(dispatchers.size());
  std::vector<std::vector<double>> fwd(dispatchers.size()), bwd(dispatchers.size());
  for (int rep = -opt.warmup; rep < opt.reps; ++rep) {
    for (std::size_t d = 0; d < dispatchers.size(); ++d) {
      auto* log = rep == 0 ? &out[d].calls : nullptr;
      const double f = work.forward(dispatchers[d], mtnn, log);
      const double b = work.backward(log);
      if (rep >= 0) {
        fwd[d].push_back(f);
        bwd[d].push_back(b);
      }
    }
  }
  for (std::size_t d = 0; d < dispatchers.size(); ++d) {
    out[d].dispatcher = dispatchers[d];
    out[d].forward = median(std::move(fwd[d]));
    out[d].backward = median(std::move(bwd[d]));
  }
  return out;
}

inline FcnTiming fcn_scenario(const FcnConfig& cfg, Dispatcher dispatcher, const Mtnn* mtnn,
                              const FcnOptions& opt = {}) {
  const Dispatcher one[] = {dispatcher};
  return fcn_compare(cfg, one, mtnn, opt).front();
}

}  // namespace mtnn
