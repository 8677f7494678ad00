#pragma once

// Revenue, social welfare, relevance and minimum social welfare, with the
// divisors used for normalization kept alongside every number.

#include <cstdint>
#include <span>
#include <vector>

#include "segauc/core.hpp"

namespace segauc::metrics {

/// Raw (unnormalized) outcome of one session. Payments are per impression:
/// click weight times per-click price.
struct SessionMetrics {
  double revenue = 0.0;
  /// Sum of per-click prices, without click weighting.
  double revenue_per_click = 0.0;
  double welfare = 0.0;
  double relevance = 0.0;
  /// Allocative utility per ad: sum over segments of v_i * click weight.
  std::vector<double> utility;
};

SessionMetrics session_metrics(const AuctionOutcome& outcome,
                               const Scenario& scenario);

struct Normalizers {
  double revenue_max = 1.0;
  double revenue_per_click_max = 1.0;
  double welfare_max = 1.0;
  double relevance_max = 1.0;
  double min_welfare_max = 1.0;
};

/// Best ad in every slot of every segment: slot weight W = k_eff * sum_t delta_t
/// (k_eff = 1 for single-winner mechanisms), then revenue W*max q*b, welfare
/// W*max v*q, relevance W*max q. Per-click revenue is divided by
/// k_eff*T*max b. Minimum social welfare is reported as the raw per-trial
/// mean (divisor 1). Zero maxima fall back to 1.
Normalizers documented_normalizers(const Scenario& scenario);

struct Metric {
  double mean = 0.0;
  double stderr_ = 0.0;
  double normalizer = 1.0;

  bool operator==(const Metric&) const = default;
};

struct MetricsReport {
  Metric revenue;
  Metric revenue_per_click;
  Metric social_welfare;
  Metric relevance;
  Metric min_social_welfare;
  std::uint64_t trials = 0;
  /// Ad attaining the minimum social welfare.
  std::size_t min_welfare_ad = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// Means and standard errors over trials, each divided by its normalizer.
/// Sums run in trial order. Minimum social welfare is min_i of the mean
/// utility of ad i; its standard error is that of the minimizing ad.
MetricsReport aggregate(std::span<const SessionMetrics> trials,
                        const Normalizers& norm);

}  // namespace segauc::metrics
