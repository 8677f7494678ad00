#pragma once

// Auction mechanisms: one NoiseDraw in, winners and per-click prices out.
//
// Every function here is pure. Scores are compared in log space
// (ln q + ln b + eps); participants with q*b == 0 never win. Exact ties go to
// the lowest index.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segauc/core.hpp"

namespace segauc {

/// Relevance of every size-k candidate set, decomposed per member.
struct SetScores {
  std::size_t ads = 0;
  std::size_t k = 0;
  /// Sorted ad indices of each candidate set.
  std::vector<std::vector<std::size_t>> sets;
  /// q_{A,i}, aligned with the members of sets[a].
  std::vector<std::vector<double>> prominence;
};

std::uint64_t binomial(std::size_t n, std::size_t k);

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> k_subsets(std::size_t n, std::size_t k);

/// Single-allocation segment auction. The winner pays the runner-up's score
/// divided by its own q*e^eps. `excluded` (optional, one flag per ad) removes
/// ads from this round; the runner-up is taken among the remaining ads.
///
/// A lone eligible ad wins at price 0. Throws NoEligibleAds when no ad has
/// q*b > 0.
SegmentRecord single_auction(std::span<const double> bids,
                             std::span<const double> q,
                             const NoiseDraw& noise,
                             std::span<const unsigned char> excluded = {});

/// Generalized second price over perturbed scores: the top-k ads win and each
/// pays the (k+1)-th score over its own q*e^eps. With exactly k eligible ads
/// all win at price 0; fewer throws NotEnoughCompetitors.
SegmentRecord multi_allocation_auction(std::span<const double> bids,
                                       std::span<const double> q,
                                       std::size_t k, const NoiseDraw& noise);

/// Relevance-blind baseline: scores are b*e^eps. `q` only sets the click
/// weights used for accounting.
SegmentRecord naive_two_auction(std::span<const double> bids,
                                std::span<const double> q,
                                const NoiseDraw& noise);

/// Same allocation and payment as single_auction, flagged so the generator
/// appends the ad text instead of integrating it.
SegmentRecord naive_one_auction(std::span<const double> bids,
                                std::span<const double> q,
                                const NoiseDraw& noise);

/// Combinatorial segment auction with per-set noise and VCG prices.
///
/// s_A = (sum_{i in A} q_{A,i} b_i) e^{eps_A}; A* = argmax. Each i in A* pays
/// (s_{A'(i)} - sum_{j in A*\i} q_{A*,j} b_j e^{eps_A*}) / (q_{A*,i} e^{eps_A*})
/// where A'(i) is the best set without i. If no such set exists (n == k) the
/// price is 0. Negative prices are kept or clamped according to `policy`.
SegmentRecord combinatorial_auction(std::span<const double> bids,
                                    const SetScores& scores,
                                    NegativePaymentPolicy policy,
                                    const NoiseDraw& set_noise);

/// Throws MissingSetScore unless `scores` covers every k-subset exactly once.
void check_set_scores(const SetScores& scores);

}  // namespace segauc
