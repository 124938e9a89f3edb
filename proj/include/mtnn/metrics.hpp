#pragma once

// Evaluation metrics for the dispatcher.
//
//   GOW = (P_MTNN - min(P_NT, P_TNN)) / min(P_NT, P_TNN)   gain over the worse branch
//   LUB = (P_MTNN - max(P_NT, P_TNN)) / max(P_NT, P_TNN)   loss under the better branch
//
// Aggregates are per-case means reported in percent, plus a histogram of
// P_MTNN / P_NT in 0.1-wide buckets with a terminal "2.0+" bucket.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtnn/csv.hpp"
#include "mtnn/matrix.hpp"
#include "mtnn/selector.hpp"

namespace mtnn {

struct EvalCase {
  ProblemShape shape;
  double p_nt = 0.0;
  double p_tnn = 0.0;
  double p_mtnn = 0.0;
  SelectionDecision decision{};
};

inline constexpr std::size_t kHistogramBuckets = 21;
inline constexpr double kHistogramWidth = 0.1;

struct MetricsReport {
  std::size_t cases = 0;
  double mtnn_vs_nt = 0.0;  // percent
  double mtnn_vs_tnn = 0.0;
  double gow_avg = 0.0;
  double gow_max = 0.0;
  double lub_avg = 0.0;
  double lub_min = 0.0;
  std::array<std::size_t, kHistogramBuckets> ratio_histogram{};
};

namespace detail {

inline void require_positive(double p_mtnn, double p_nt, double p_tnn, const char* what) {
  for (double v : {p_mtnn, p_nt, p_tnn}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": performance values must be positive");
    }
  }
}

}  // namespace detail

inline double gow(double p_mtnn, double p_nt, double p_tnn) {
  detail::require_positive(p_mtnn, p_nt, p_tnn, "gow");
  const double worst = std::min(p_nt, p_tnn);
  return (p_mtnn - worst) / worst;
}

inline double lub(double p_mtnn, double p_nt, double p_tnn) {
  detail::require_positive(p_mtnn, p_nt, p_tnn, "lub");
  const double best = std::max(p_nt, p_tnn);
  return (p_mtnn - best) / best;
}

inline std::size_t histogram_bucket(double ratio) noexcept {
  if (!(ratio > 0.0)) return 0;
  const double scaled = std::floor(ratio / kHistogramWidth + 1e-9);
  return std::min<std::size_t>(kHistogramBuckets - 1, static_cast<std::size_t>(scaled));
}

inline std::string histogram_label(std::size_t bucket) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << static_cast<double>(bucket) * kHistogramWidth;
  if (bucket == kHistogramBuckets - 1) os << "+";
  return os.str();
}

inline MetricsReport aggregate(std::span<const EvalCase> cases) {
  if (cases.empty()) throw std::invalid_argument("aggregate: no evaluation cases");
  MetricsReport r;
  r.cases = cases.size();
  double vs_nt = 0.0, vs_tnn = 0.0, gow_sum = 0.0, lub_sum = 0.0;
  r.gow_max = -std::numeric_limits<double>::infinity();
  r.lub_min = std::numeric_limits<double>::infinity();
  for (const auto& c : cases) {
    const double g = gow(c.p_mtnn, c.p_nt, c.p_tnn);
    const double l = lub(c.p_mtnn, c.p_nt, c.p_tnn);
    vs_nt += (c.p_mtnn - c.p_nt) / c.p_nt;
    vs_tnn += (c.p_mtnn - c.p_tnn) / c.p_tnn;
    gow_sum += g;
    lub_sum += l;
    r.gow_max = std::max(r.gow_max, g);
    r.lub_min = std::min(r.lub_min, l);
    ++r.ratio_histogram[histogram_bucket(c.p_mtnn / c.p_nt)];
  }
  const double n = static_cast<double>(cases.size());
  r.mtnn_vs_nt = 100.0 * vs_nt / n;
  r.mtnn_vs_tnn = 100.0 * vs_tnn / n;
  r.gow_avg = 100.0 * gow_sum / n;
  r.lub_avg = 100.0 * lub_sum / n;
  r.gow_max *= 100.0;
  r.lub_min *= 100.0;
  return r;
}

inline std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

// One row per metric. The averaging rule is recorded alongside the numbers.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  out << "metric,value\n";
  out << "cases," << r.cases << '\n';
  out << "mtnn_vs_nt_pct," << percent(r.mtnn_vs_nt) << '\n';
  out << "mtnn_vs_tnn_pct," << percent(r.mtnn_vs_tnn) << '\n';
  out << "gow_avg_pct," << percent(r.gow_avg) << '\n';
  out << "gow_max_pct," << percent(r.gow_max) << '\n';
  out << "lub_avg_pct," << percent(r.lub_avg) << '\n';
  out << "lub_min_pct," << percent(r.lub_min) << '\n';
  out << "averaging,per-case-mean\n";
}

inline void write_histogram_csv(std::ostream& out, const MetricsReport& r) {
  out << "bucket,count\n";
  for (std::size_t b = 0; b < kHistogramBuckets; ++b) {
    out << histogram_label(b) << ',' << r.ratio_histogram[b] << '\n';
  }
}

inline void write_cases_csv(std::ostream& out, std::span<const EvalCase> cases) {
  out << "m,n,k,p_nt,p_tnn,p_mtnn,choice,reason,raw_score\n";
  for (const auto& c : cases) {
    out << c.shape.m << ',' << c.shape.n << ',' << c.shape.k << ',' << format_double(c.p_nt) << ','
        << format_double(c.p_tnn) << ',' << format_double(c.p_mtnn) << ','
        << to_string(c.decision.choice) << ',' << to_string(c.decision.reason) << ','
        << format_double(c.decision.raw_score) << '\n';
  }
}

inline void print_metrics_table(std::ostream& out, const MetricsReport& r) {
  const auto row = [&](const char* name, const char* meaning, double v) {
    out << std::left << std::setw(13) << name << std::setw(42) << meaning << std::right
        << std::setw(10) << percent(v) << '\n';
  };
  out << std::left << std::setw(13) << "Metric" << std::setw(42) << "Description" << std::right
      << std::setw(10) << "Value (%)" << '\n';
  row("MTNN vs NT", "mean (P_MTNN - P_NT) / P_NT", r.mtnn_vs_nt);
  row("MTNN vs TNN", "mean (P_MTNN - P_TNN) / P_TNN", r.mtnn_vs_tnn);
  row("GOW_avg", "average gain over the worse algorithm", r.gow_avg);
  row("GOW_max", "maximum gain over the worse algorithm", r.gow_max);
  row("LUB_avg", "average loss under the better algorithm", r.lub_avg);
  row("LUB_min", "worst loss under the better algorithm", r.lub_min);
  out << "cases: " << r.cases << " (per-case means)\n";
}

}  // namespace mtnn
