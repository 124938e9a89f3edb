#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtnn/gbdt.hpp"

namespace mtnn {

struct FoldResult {
  std::size_t test_size = 0;
  double accuracy = 0.0;
  std::optional<double> negative_accuracy;  // empty when the fold has no -1 samples
  std::optional<double> positive_accuracy;
};

struct AccuracyStats {
  double min = 0.0;
  double max = 0.0;
  double average = 0.0;
  std::size_t folds = 0;  // folds that contributed
};

struct CvReport {
  std::vector<FoldResult> folds;
  AccuracyStats negative;
  AccuracyStats positive;
  AccuracyStats total;
};

// Seeded per-class shuffle, then dealt round-robin so every fold gets its share
// of each class. Indices within a fold are ascending.
inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const Sample> samples,
                                                              std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (samples.size() < folds) {
    throw std::invalid_argument("cross-validation needs at least as many samples as folds (" +
                                std::to_string(samples.size()) + " < " + std::to_string(folds) + ")");
  }
  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].label > 0 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::shuffle(pos.begin(), pos.end(), rng);

  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t next = 0;
  for (const auto* cls : {&neg, &pos}) {
    for (auto i : *cls) out[next++ % folds].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace detail {

inline AccuracyStats summarize(const std::vector<double>& values) {
  AccuracyStats s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.average = sum / static_cast<double>(values.size());
  s.folds = values.size();
  return s;
}

}  // namespace detail

inline CvReport cross_validate(std::span<const Sample> samples, std::size_t folds,
                               const GbdtParams& params, std::uint64_t seed,
                               Objective objective = Objective::Logistic) {
  const auto assignment = stratified_folds(samples, folds, seed);
  CvReport report;
  std::vector<double> neg_acc, pos_acc, tot_acc;

  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Sample> train, test;
    for (std::size_t g = 0; g < folds; ++g) {
      auto& dst = g == f ? test : train;
      for (auto i : assignment[g]) dst.push_back(samples[i]);
    }
    const auto model = fit_gbdt(train, params, objective);

    FoldResult r;
    r.test_size = test.size();
    std::size_t hit = 0, neg = 0, neg_hit = 0, pos = 0, pos_hit = 0;
    for (const auto& s : test) {
      const bool ok = predict(model, s.features) == s.label;
      hit += ok;
      if (s.label > 0) {
        ++pos;
        pos_hit += ok;
      } else {
        ++neg;
        neg_hit += ok;
      }
    }
    r.accuracy = test.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(test.size());
    if (neg) r.negative_accuracy = static_cast<double>(neg_hit) / static_cast<double>(neg);
    if (pos) r.positive_accuracy = static_cast<double>(pos_hit) / static_cast<double>(pos);

    tot_acc.push_back(r.accuracy);
    if (r.negative_accuracy) neg_acc.push_back(*r.negative_accuracy);
    if (r.positive_accuracy) pos_acc.push_back(*r.positive_accuracy);
    report.folds.push_back(r);
  }
  report.negative = detail::summarize(neg_acc);
  report.positive = detail::summarize(pos_acc);
  report.total = detail::summarize(tot_acc);
  return report;
}

struct HoldoutSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Stratified train/test split: round(test_fraction * class size) of each class
// goes to test. Relative order of samples is preserved on both sides.
inline HoldoutSplit stratified_holdout(std::span<const Sample> samples, double test_fraction,
                                       std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].label > 0 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<char> in_test(samples.size(), 0);
  for (auto* cls : {&neg, &pos}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    const auto take = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(cls->size())));
    for (std::size_t i = 0; i < take && i < cls->size(); ++i) in_test[(*cls)[i]] = 1;
  }
  HoldoutSplit out;
  for (std::size_t i = 0; i < samples.size(); ++i) (in_test[i] ? out.test : out.train).push_back(samples[i]);
  return out;
}

}  // namespace mtnn
