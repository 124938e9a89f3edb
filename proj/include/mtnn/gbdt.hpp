#pragma once

// Gradient-boosted regression trees for the NT-vs-TNN decision.
//
// Each round fits one CART tree to the first and second derivatives of the
// loss at the current raw scores, using exact greedy split search:
//
//   gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda) ] - gamma
//   leaf = -G / (H + lambda)
//
// Candidate thresholds are midpoints between consecutive distinct feature
// values; a sample goes left when feature < threshold. Ties in gain keep the
// lowest feature index, then the lowest threshold, so training is bit-for-bit
// reproducible. Raw scores live in log-odds space and a raw score of exactly 0
// maps to +1 (NT).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mtnn/bench.hpp"
#include "mtnn/errors.hpp"

namespace mtnn {

struct GbdtParams {
  int max_depth = 8;
  int n_estimators = 8;
  double eta = 1.0;
  double gamma = 0.0;
  double lambda = 1.0;
  double min_child_weight = 1.0;

  void validate() const {
    if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (n_estimators < 0) throw std::invalid_argument("n_estimators must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (min_child_weight < 0.0) throw std::invalid_argument("min_child_weight must be >= 0");
  }

  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

enum class Objective {
  Logistic,      // binary log-loss on y in {0, 1}
  SquaredError,  // regression straight onto labels in {-1, +1}; the single-CART baseline
};

inline std::string_view to_string(Objective o) {
  return o == Objective::Logistic ? "binary:logistic" : "reg:squarederror";
}

// Flat node: feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_{std::move(nodes)} {}

  static RegressionTree leaf(double weight) { return RegressionTree({TreeNode{-1, 0.0, -1, -1, weight}}); }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const { return nodes_.at(0); }

  // Leaf weight reached by x; `comparisons` counts the threshold tests made.
  double predict(std::span<const double> x, std::size_t* comparisons = nullptr) const {
    std::size_t at = 0;
    while (!nodes_[at].is_leaf()) {
      const auto& nd = nodes_[at];
      if (comparisons) ++*comparisons;
      at = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left
                                                                                           : nd.right);
    }
    return nodes_[at].weight;
  }

  // Edges on the longest root-to-leaf path.
  int depth() const { return nodes_.empty() ? 0 : depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  int depth_from(std::size_t at) const {
    const auto& nd = nodes_[at];
    if (nd.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nd.left)),
                        depth_from(static_cast<std::size_t>(nd.right)));
  }

  std::vector<TreeNode> nodes_;
};

struct GbdtModel {
  GbdtParams params{};
  Objective objective = Objective::Logistic;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;

  double raw_score(std::span<const double> x, std::size_t* comparisons = nullptr) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x, comparisons);
    return base_score + params.eta * sum;
  }
};

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

inline double leaf_weight(double g_sum, double h_sum, double lambda) noexcept {
  const double denom = h_sum + lambda;
  return denom > 0.0 ? -g_sum / denom : 0.0;
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda,
                         double gamma) noexcept {
  auto score = [lambda](double g, double h) {
    const double denom = h + lambda;
    return denom > 0.0 ? g * g / denom : 0.0;
  };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const FeatureVector> x, std::span<const double> g, std::span<const double> h,
              const GbdtParams& params)
      : x_{x}, g_{g}, h_{h}, params_{params} {}

  RegressionTree build() {
    std::vector<std::size_t> idx(x_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nodes_.clear();
    grow(idx, 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::vector<std::size_t>& idx, int depth) {
    double g_sum = 0.0, h_sum = 0.0;
    for (auto i : idx) {
      g_sum += g_[i];
      h_sum += h_[i];
    }
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, leaf_weight(g_sum, h_sum, params_.lambda)});
    if (depth >= params_.max_depth || idx.size() < 2) return self;

    const Split best = find_split(idx, g_sum, h_sum);
    if (best.feature < 0) return self;

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (x_[i][static_cast<std::size_t>(best.feature)] < best.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& nd = nodes_[static_cast<std::size_t>(self)];
    nd.feature = best.feature;
    nd.threshold = best.threshold;
    nd.left = l;
    nd.right = r;
    nd.weight = 0.0;
    return self;
  }

  Split find_split(const std::vector<std::size_t>& idx, double g_sum, double h_sum) const {
    Split best;
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_[a][f] < x_[b][f]; });
      if (x_[order.front()][f] == x_[order.back()][f]) continue;

      double gl = 0.0, hl = 0.0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        gl += g_[order[pos]];
        hl += h_[order[pos]];
        const double here = x_[order[pos]][f];
        const double next = x_[order[pos + 1]][f];
        if (here == next) continue;
        const double hr = h_sum - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain = split_gain(gl, hl, g_sum - gl, hr, params_.lambda, params_.gamma);
        if (gain > best.gain) {
          double mid = here + (next - here) * 0.5;
          if (!(mid > here)) mid = next;
          best = {static_cast<int>(f), mid, gain};
        }
      }
    }
    return best;
  }

  std::span<const FeatureVector> x_;
  std::span<const double> g_;
  std::span<const double> h_;
  const GbdtParams& params_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// One regression tree on per-sample gradients and hessians. An empty or
/// unsplittable input gives a single leaf.
inline RegressionTree fit_tree(std::span<const FeatureVector> x, std::span<const double> grad,
                               std::span<const double> hess, const GbdtParams& params) {
  if (x.size() != grad.size() || x.size() != hess.size()) {
    throw DimensionMismatch("fit_tree: features, gradients and hessians differ in length");
  }
  params.validate();
  if (x.empty()) return RegressionTree::leaf(0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(grad[i]) || !std::isfinite(hess[i])) {
      throw std::invalid_argument("fit_tree: non-finite gradient or hessian");
    }
  }
  return detail::TreeBuilder(x, grad, hess, params).build();
}

/// Boosts params.n_estimators trees from base score 0.
inline GbdtModel fit_gbdt(std::span<const Sample> samples, const GbdtParams& params = {},
                          Objective objective = Objective::Logistic) {
  if (samples.empty()) throw std::invalid_argument("fit_gbdt: no training samples");
  params.validate();

  const std::size_t n = samples.size();
  std::vector<FeatureVector> x(n);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = samples[i].features;
    const bool pos = samples[i].label > 0;
    target[i] = objective == Objective::Logistic ? (pos ? 1.0 : 0.0) : (pos ? 1.0 : -1.0);
  }

  GbdtModel model{params, objective, 0.0, {}};
  std::vector<double> raw(n, model.base_score), g(n), h(n);
  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (objective == Objective::Logistic) {
        const double p = sigmoid(raw[i]);
        g[i] = p - target[i];
        h[i] = std::max(p * (1.0 - p), 1e-16);
      } else {
        g[i] = raw[i] - target[i];
        h[i] = 1.0;
      }
    }
    auto tree = fit_tree(x, g, h, params);
    for (std::size_t i = 0; i < n; ++i) raw[i] += params.eta * tree.predict(x[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

/// +1 (choose NT) when the raw score is >= 0, else -1 (choose TNN).
inline int predict(const GbdtModel& model, std::span<const double> features) {
  if (features.size() != kFeatureCount) {
    std::ostringstream os;
    os << "predict: expected " << kFeatureCount << " features, got " << features.size();
    throw DimensionMismatch(os.str());
  }
  return model.raw_score(features) >= 0.0 ? 1 : -1;
}

inline double accuracy(const GbdtModel& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& s : samples) hit += predict(model, s.features) == (s.label > 0 ? 1 : -1);
  return static_cast<double>(hit) / static_cast<double>(samples.size());
}

// Baseline: one tree, eta 1, squared-error leaves.
inline GbdtModel fit_single_cart(std::span<const Sample> samples, int max_depth = 8) {
  GbdtParams p;
  p.max_depth = max_depth;
  p.n_estimators = 1;
  p.eta = 1.0;
  return fit_gbdt(samples, p, Objective::SquaredError);
}

}  // namespace mtnn
