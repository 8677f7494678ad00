#include "segauc/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "segauc/sampling.hpp"

namespace segauc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_sizes(std::span<const double> bids, std::span<const double> q,
                 const NoiseDraw& noise) {
  if (bids.size() != q.size() || bids.size() != noise.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("bids ({}), relevance ({}) and noise ({}) differ "
                            "in length",
                            bids.size(), q.size(), noise.size()));
  }
  check_finite(noise);
}

// Ranks eligible participants by log score (ties: lowest index) and prices the
// top `k` against the (k+1)-th. `log_divisor[i]` is ln of the factor that
// turns a score into a bid for participant i (ln q_i + eps_i, or eps_i for the
// relevance-blind baseline).
SegmentRecord rank_and_price(std::span<const double> bids,
                             std::span<const double> q,
                             std::vector<double> log_scores,
                             std::span<const double> log_divisor,
                             std::size_t k, const NoiseDraw& noise) {
  std::vector<std::size_t> order;
  order.reserve(log_scores.size());
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    if (log_scores[i] != kNegInf) order.push_back(i);
  }
  if (order.empty()) {
    throw Error(ErrorCode::NoEligibleAds, "no ad has a positive score");
  }
  if (order.size() < k) {
    throw Error(ErrorCode::NotEnoughCompetitors,
                fmt::format("{} slots but only {} eligible ads", k,
                            order.size()));
  }

  auto better = [&](std::size_t a, std::size_t b) {
    if (log_scores[a] != log_scores[b]) return log_scores[a] > log_scores[b];
    return a < b;
  };
  const std::size_t ranked = std::min(order.size(), k + 1);
  std::partial_sort(order.begin(), order.begin() + ranked, order.end(),
                    better);

  const bool has_threshold = order.size() > k;
  const double threshold = has_threshold ? log_scores[order[k]] : kNegInf;

  SegmentRecord rec;
  rec.noise = noise;
  rec.log_scores = std::move(log_scores);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t w = order[r];
    double price = 0.0;
    if (has_threshold) {
      price = std::exp(threshold - log_divisor[w]);
      // The winner's own score clears the threshold, so the exact price never
      // exceeds the bid; rounding in exp/log is not allowed to break that.
      price = std::min(price, bids[w]);
    }
    rec.winners.push_back(w);
    rec.prices.push_back(price);
    rec.click_weights.push_back(q[w]);
  }
  return rec;
}

}  // namespace

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return r;
}

std::vector<std::vector<std::size_t>> k_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> cur(k);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

SegmentRecord single_auction(std::span<const double> bids,
                             std::span<const double> q,
                             const NoiseDraw& noise,
                             std::span<const unsigned char> excluded) {
  check_sizes(bids, q, noise);
  const std::size_t n = bids.size();
  std::vector<double> ls(n);
  std::vector<double> div(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool out = !excluded.empty() && excluded[i] != 0;
    ls[i] = out ? kNegInf : log_score(q[i], bids[i], noise[i]);
    div[i] = q[i] > 0.0 ? std::log(q[i]) + noise[i] : 0.0;
  }
  return rank_and_price(bids, q, std::move(ls), div, 1, noise);
}

SegmentRecord multi_allocation_auction(std::span<const double> bids,
                                       std::span<const double> q,
                                       std::size_t k, const NoiseDraw& noise) {
  check_sizes(bids, q, noise);
  if (k == 0 || k > bids.size()) {
    throw Error(ErrorCode::NotEnoughCompetitors,
                fmt::format("k = {} with {} ads", k, bids.size()));
  }
  const std::size_t n = bids.size();
  std::vector<double> ls(n);
  std::vector<double> div(n);
  for (std::size_t i = 0; i < n; ++i) {
    ls[i] = log_score(q[i], bids[i], noise[i]);
    div[i] = q[i] > 0.0 ? std::log(q[i]) + noise[i] : 0.0;
  }
  return rank_and_price(bids, q, std::move(ls), div, k, noise);
}

SegmentRecord naive_two_auction(std::span<const double> bids,
                                std::span<const double> q,
                                const NoiseDraw& noise) {
  check_sizes(bids, q, noise);
  const std::size_t n = bids.size();
  std::vector<double> ls(n);
  std::vector<double> div(n);
  for (std::size_t i = 0; i < n; ++i) {
    ls[i] = log_score(1.0, bids[i], noise[i]);
    div[i] = noise[i];
  }
  return rank_and_price(bids, q, std::move(ls), div, 1, noise);
}

SegmentRecord naive_one_auction(std::span<const double> bids,
                                std::span<const double> q,
                                const NoiseDraw& noise) {
  auto rec = single_auction(bids, q, noise);
  rec.composition = Composition::Append;
  return rec;
}

void check_set_scores(const SetScores& scores) {
  const auto expected = binomial(scores.ads, scores.k);
  if (scores.k == 0 || scores.sets.size() != expected ||
      scores.prominence.size() != scores.sets.size()) {
    throw Error(ErrorCode::MissingSetScore,
                fmt::format("expected scores for all {} sets of size {}, got {}",
                            expected, scores.k, scores.sets.size()));
  }
  std::set<std::vector<std::size_t>> seen;
  for (std::size_t a = 0; a < scores.sets.size(); ++a) {
    const auto& s = scores.sets[a];
    bool ok = s.size() == scores.k && scores.prominence[a].size() == s.size() &&
              std::is_sorted(s.begin(), s.end()) &&
              std::adjacent_find(s.begin(), s.end()) == s.end() &&
              (s.empty() || s.back() < scores.ads);
    for (double p : scores.prominence[a]) ok = ok && p >= 0.0 && std::isfinite(p);
    if (!ok || !seen.insert(s).second) {
      throw Error(ErrorCode::MissingSetScore,
                  fmt::format("candidate set {} is malformed or repeated", a));
    }
  }
}

SegmentRecord combinatorial_auction(std::span<const double> bids,
                                    const SetScores& scores,
                                    NegativePaymentPolicy policy,
                                    const NoiseDraw& set_noise) {
  if (bids.size() != scores.ads) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} bids for {} ads", bids.size(), scores.ads));
  }
  check_set_scores(scores);
  if (set_noise.size() != scores.sets.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} noise entries for {} sets", set_noise.size(),
                            scores.sets.size()));
  }
  check_finite(set_noise);

  const std::size_t m = scores.sets.size();
  std::vector<double> ls(m);
  for (std::size_t a = 0; a < m; ++a) {
    double base = 0.0;
    for (std::size_t j = 0; j < scores.k; ++j) {
      base += scores.prominence[a][j] * bids[scores.sets[a][j]];
    }
    ls[a] = base > 0.0 ? std::log(base) + set_noise[a] : kNegInf;
  }

  std::size_t best = kNoSet;
  for (std::size_t a = 0; a < m; ++a) {
    if (ls[a] == kNegInf) continue;
    if (best == kNoSet || ls[a] > ls[best]) best = a;
  }
  if (best == kNoSet) {
    throw Error(ErrorCode::NoEligibleAds, "no candidate set has a positive score");
  }

  const auto& winners = scores.sets[best];
  const auto& prom = scores.prominence[best];
  const double eps_star = set_noise[best];

  SegmentRecord rec;
  rec.noise = set_noise;
  rec.winning_set = best;
  for (std::size_t r = 0; r < winners.size(); ++r) {
    const std::size_t i = winners[r];
    double price = 0.0;
    if (prom[r] > 0.0) {
      // Best competing set that does not contain i.
      double rival = kNegInf;
      bool exists = false;
      for (std::size_t a = 0; a < m; ++a) {
        const auto& s = scores.sets[a];
        if (std::binary_search(s.begin(), s.end(), i)) continue;
        exists = true;
        rival = std::max(rival, ls[a]);
      }
      if (exists) {
        double others = 0.0;
        for (std::size_t j = 0; j < winners.size(); ++j) {
          if (j != r) others += prom[j] * bids[winners[j]];
        }
        const double rival_term =
            rival == kNegInf ? 0.0 : std::exp(rival - eps_star - std::log(prom[r]));
        price = rival_term - others / prom[r];
        price = std::min(price, bids[i]);
      }
    }
    if (policy == NegativePaymentPolicy::ClampToZero) price = std::max(price, 0.0);
    rec.winners.push_back(i);
    rec.prices.push_back(price);
    rec.click_weights.push_back(prom[r]);
  }
  rec.log_scores = std::move(ls);
  return rec;
}

}  // namespace segauc
