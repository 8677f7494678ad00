#include "segauc/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace segauc::metrics {

SessionMetrics session_metrics(const AuctionOutcome& outcome,
                               const Scenario& scenario) {
  SessionMetrics m;
  m.utility.assign(scenario.ads.size(), 0.0);
  for (const auto& seg : outcome.segments) {
    for (std::size_t r = 0; r < seg.winners.size(); ++r) {
      const std::size_t i = seg.winners[r];
      const double w = seg.click_weights[r];
      const double u = scenario.ads[i].value * w;
      m.revenue += w * seg.prices[r];
      m.revenue_per_click += seg.prices[r];
      m.welfare += u;
      m.relevance += w;
      m.utility[i] += u;
    }
  }
  return m;
}

Normalizers documented_normalizers(const Scenario& s) {
  double delta_sum = 0.0;
  for (int t = 0; t < s.segments; ++t) {
    delta_sum += s.relevance.segment_factor(static_cast<std::size_t>(t));
  }
  const double slots = static_cast<double>(s.winners_per_segment()) * delta_sum;
  const double k_eff = static_cast<double>(s.winners_per_segment());
  double max_qb = 0.0, max_vq = 0.0, max_q = 0.0, max_b = 0.0;
  for (std::size_t i = 0; i < s.ads.size(); ++i) {
    const double q = i < s.relevance.q.size() ? s.relevance.q[i] : 1.0;
    max_qb = std::max(max_qb, q * s.ads[i].bid);
    max_vq = std::max(max_vq, q * s.ads[i].value);
    max_q = std::max(max_q, q);
    max_b = std::max(max_b, s.ads[i].bid);
  }
  auto positive = [](double x) { return x > 0.0 ? x : 1.0; };
  Normalizers n;
  n.revenue_max = positive(slots * max_qb);
  n.revenue_per_click_max = positive(k_eff * s.segments * max_b);
  n.welfare_max = positive(slots * max_vq);
  n.relevance_max = positive(slots * max_q);
  n.min_welfare_max = 1.0;
  return n;
}

namespace {

struct Moments {
  double mean = 0.0;
  double stderr_ = 0.0;
};

template <typename Get>
Moments moments(std::span<const SessionMetrics> trials, Get get) {
  const double n = static_cast<double>(trials.size());
  double sum = 0.0;
  for (const auto& t : trials) sum += get(t);
  const double mean = sum / n;
  if (trials.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const auto& t : trials) {
    const double d = get(t) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

Metric scaled(Moments m, double normalizer) {
  return {m.mean / normalizer, m.stderr_ / normalizer, normalizer};
}

}  // namespace

MetricsReport aggregate(std::span<const SessionMetrics> trials,
                        const Normalizers& norm) {
  MetricsReport r;
  r.trials = trials.size();
  if (trials.empty()) return r;
  r.revenue = scaled(moments(trials, [](const auto& t) { return t.revenue; }),
                     norm.revenue_max);
  r.revenue_per_click =
      scaled(moments(trials, [](const auto& t) { return t.revenue_per_click; }),
             norm.revenue_per_click_max);
  r.social_welfare = scaled(
      moments(trials, [](const auto& t) { return t.welfare; }), norm.welfare_max);
  r.relevance = scaled(
      moments(trials, [](const auto& t) { return t.relevance; }), norm.relevance_max);

  const std::size_t ads = trials.front().utility.size();
  Moments best{};
  for (std::size_t i = 0; i < ads; ++i) {
    const auto m = moments(trials, [i](const auto& t) { return t.utility[i]; });
    if (i == 0 || m.mean < best.mean) {
      best = m;
      r.min_welfare_ad = i;
    }
  }
  r.min_social_welfare = scaled(best, norm.min_welfare_max);
  return r;
}

}  // namespace segauc::metrics
