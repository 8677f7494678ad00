#pragma once

// Closed-form allocation probabilities, payments and welfare objectives.
// Every Monte Carlo result in the project is checked against these.

#include <cstddef>
#include <span>
#include <vector>

#include "segauc/mechanisms.hpp"

namespace segauc::analytic {

/// Probabilities over ads (or over candidate sets).
struct AllocationDistribution {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
  double operator[](std::size_t i) const { return p[i]; }
  /// Entries nonnegative and summing to one within `tol`.
  bool valid(double tol = 1e-9) const;
};

/// x_i = q_i b_i / sum_j q_j b_j. Throws DegenerateDenominator if every
/// q_j b_j is zero.
AllocationDistribution softmax_allocation(std::span<const double> q,
                                          std::span<const double> b);

/// Probability that exactly the ads in `set` are the top-k by perturbed
/// score, by inclusion-exclusion over the nonempty subsets T of `set`:
///   sum_T (-1)^{|T|+1} w(T) / (w(complement of set) + w(T)),  w = q*b.
/// Requires |set| == k and n <= 20.
double set_win_probability(std::span<const double> q,
                           std::span<const double> b,
                           std::span<const std::size_t> set, std::size_t k);

/// set_win_probability for every k-subset, in k_subsets order.
std::vector<double> all_set_probabilities(std::span<const double> q,
                                          std::span<const double> b,
                                          std::size_t k);

/// Expected per-click payment of ad i:
///   (w/q_i) (ln((q_i b_i + w)/w) - q_i b_i/(w + q_i b_i)),  w = sum_{j!=i} q_j b_j.
/// Zero when w == 0, b_i == 0 or q_i == 0.
double myerson_expected_payment(std::span<const double> q,
                                std::span<const double> b, std::size_t i);

/// prod_i x_i^{v_i q_i}.
double lsw(const AllocationDistribution& x, std::span<const double> q,
           std::span<const double> v);
/// sum_i v_i q_i ln x_i; -inf when some x_i == 0 carries positive weight.
double log_lsw(const AllocationDistribution& x, std::span<const double> q,
               std::span<const double> v);

/// x_i = q_i v_i / sum_j q_j v_j.
AllocationDistribution lsw_maximizer(std::span<const double> q,
                                     std::span<const double> v);

/// x_A = sum_{i in A} q_{A,i} b_i / sum_B sum_{i in B} q_{B,i} b_i.
AllocationDistribution combinatorial_allocation(const SetScores& scores,
                                                std::span<const double> b);

/// prod_i (prod_{A containing i} x_A^{q_{A,i}})^{v_i}.
double clsw(const AllocationDistribution& x_sets, const SetScores& scores,
            std::span<const double> v);
double log_clsw(const AllocationDistribution& x_sets, const SetScores& scores,
                std::span<const double> v);

/// x_A proportional to sum_{i in A} q_{A,i} v_i.
AllocationDistribution clsw_maximizer(const SetScores& scores,
                                      std::span<const double> v);

struct SetRelevance {
  double set_score = 0.0;
  /// q_{A,i}, aligned with the members of the set.
  std::vector<double> prominence;
};

/// q_A = alpha * sum_{i in A} q_i + beta * sum_{i != j in A} rel(i, j), summed
/// over ordered pairs. Each member's prominence is q_A * q_i / sum_{j in A} q_j
/// (an even split when the members' q sum to zero). `pairwise` may be empty
/// when beta == 0.
SetRelevance set_relevance_heuristic(
    std::span<const double> q, const std::vector<std::vector<double>>& pairwise,
    double alpha, double beta, std::span<const std::size_t> set);

/// Heuristic scores for every k-subset.
SetScores heuristic_set_scores(std::span<const double> q,
                               const std::vector<std::vector<double>>& pairwise,
                               double alpha, double beta, std::size_t k);

}  // namespace segauc::analytic
