#include "segauc/analytic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace segauc::analytic {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{}: lengths {} and {} differ", what, a, b));
  }
}

AllocationDistribution normalize(std::vector<double> weights, const char* what) {
  KahanSum total;
  for (double w : weights) total.add(w);
  if (!(total.value() > 0.0)) {
    throw Error(ErrorCode::DegenerateDenominator,
                fmt::format("{}: total weight is zero", what));
  }
  for (auto& w : weights) w /= total.value();
  return {std::move(weights)};
}

// ln(1+r) - r/(1+r), accurate for small r.
double log_gap(double r) {
  if (r < 1e-4) {
    // Series: sum_{m>=2} (-1)^m (m-1)/m r^m.
    double term = r * r;
    double sum = 0.0;
    for (int m = 2; m < 8; ++m) {
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      sum += sign * (m - 1.0) / m * term;
      term *= r;
    }
    return sum;
  }
  return std::log1p(r) - r / (1.0 + r);
}

}  // namespace

bool AllocationDistribution::valid(double tol) const {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tol;
}

AllocationDistribution softmax_allocation(std::span<const double> q,
                                          std::span<const double> b) {
  require_same_size(q.size(), b.size(), "softmax_allocation");
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) w[i] = q[i] * b[i];
  return normalize(std::move(w), "softmax_allocation");
}

double set_win_probability(std::span<const double> q,
                           std::span<const double> b,
                           std::span<const std::size_t> set, std::size_t k) {
  require_same_size(q.size(), b.size(), "set_win_probability");
  const std::size_t n = q.size();
  if (n > 20) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("set_win_probability supports n <= 20, got {}", n));
  }
  if (set.size() != k || k == 0 || k > n) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("set of size {} does not match k = {} (n = {})",
                            set.size(), k, n));
  }
  std::vector<unsigned char> in_set(n, 0);
  for (auto i : set) {
    if (i >= n || in_set[i]) {
      throw Error(ErrorCode::InvalidArgument, "set has out-of-range or repeated ads");
    }
    in_set[i] = 1;
  }

  KahanSum rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_set[i]) rest.add(q[i] * b[i]);
  }
  std::vector<double> w(k);
  for (std::size_t j = 0; j < k; ++j) w[j] = q[set[j]] * b[set[j]];

  KahanSum total;
  const std::uint32_t subsets = 1u << k;
  for (std::uint32_t mask = 1; mask < subsets; ++mask) {
    double num = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask & (1u << j)) num += w[j];
    }
    const double den = rest.value() + num;
    if (!(den > 0.0)) {
      throw Error(ErrorCode::DegenerateDenominator,
                  "a subset and the complement have zero total score");
    }
    const double sign = (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0;
    total.add(sign * num / den);
  }
  return total.value();
}

std::vector<double> all_set_probabilities(std::span<const double> q,
                                          std::span<const double> b,
                                          std::size_t k) {
  std::vector<double> out;
  for (const auto& s : k_subsets(q.size(), k)) {
    out.push_back(set_win_probability(q, b, s, k));
  }
  return out;
}

double myerson_expected_payment(std::span<const double> q,
                                std::span<const double> b, std::size_t i) {
  require_same_size(q.size(), b.size(), "myerson_expected_payment");
  if (i >= q.size()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("ad index {} out of range", i));
  }
  KahanSum others;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (j != i) others.add(q[j] * b[j]);
  }
  const double w = others.value();
  const double own = q[i] * b[i];
  if (w <= 0.0 || own <= 0.0) return 0.0;
  return (w / q[i]) * log_gap(own / w);
}

double log_lsw(const AllocationDistribution& x, std::span<const double> q,
               std::span<const double> v) {
  require_same_size(x.size(), q.size(), "log_lsw");
  require_same_size(q.size(), v.size(), "log_lsw");
  KahanSum total;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double weight = v[i] * q[i];
    if (weight == 0.0) continue;
    if (x[i] <= 0.0) return kNegInf;
    total.add(weight * std::log(x[i]));
  }
  return total.value();
}

double lsw(const AllocationDistribution& x, std::span<const double> q,
           std::span<const double> v) {
  return std::exp(log_lsw(x, q, v));
}

AllocationDistribution lsw_maximizer(std::span<const double> q,
                                     std::span<const double> v) {
  require_same_size(q.size(), v.size(), "lsw_maximizer");
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) w[i] = q[i] * v[i];
  return normalize(std::move(w), "lsw_maximizer");
}

AllocationDistribution combinatorial_allocation(const SetScores& scores,
                                                std::span<const double> b) {
  require_same_size(scores.ads, b.size(), "combinatorial_allocation");
  check_set_scores(scores);
  std::vector<double> w(scores.sets.size());
  for (std::size_t a = 0; a < scores.sets.size(); ++a) {
    for (std::size_t j = 0; j < scores.k; ++j) {
      w[a] += scores.prominence[a][j] * b[scores.sets[a][j]];
    }
  }
  return normalize(std::move(w), "combinatorial_allocation");
}

double log_clsw(const AllocationDistribution& x_sets, const SetScores& scores,
                std::span<const double> v) {
  require_same_size(x_sets.size(), scores.sets.size(), "log_clsw");
  require_same_size(scores.ads, v.size(), "log_clsw");
  KahanSum total;
  for (std::size_t a = 0; a < scores.sets.size(); ++a) {
    double weight = 0.0;
    for (std::size_t j = 0; j < scores.k; ++j) {
      weight += v[scores.sets[a][j]] * scores.prominence[a][j];
    }
    if (weight == 0.0) continue;
    if (x_sets[a] <= 0.0) return kNegInf;
    total.add(weight * std::log(x_sets[a]));
  }
  return total.value();
}

double clsw(const AllocationDistribution& x_sets, const SetScores& scores,
            std::span<const double> v) {
  return std::exp(log_clsw(x_sets, scores, v));
}

AllocationDistribution clsw_maximizer(const SetScores& scores,
                                      std::span<const double> v) {
  return combinatorial_allocation(scores, v);
}

SetRelevance set_relevance_heuristic(
    std::span<const double> q, const std::vector<std::vector<double>>& pairwise,
    double alpha, double beta, std::span<const std::size_t> set) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha and beta must be nonnegative");
  }
  double solo = 0.0;
  for (auto i : set) {
    if (i >= q.size()) throw Error(ErrorCode::InvalidArgument, "ad index out of range");
    solo += q[i];
  }
  double pairs = 0.0;
  if (beta > 0.0) {
    for (auto i : set) {
      for (auto j : set) {
        if (i == j) continue;
        if (i >= pairwise.size() || j >= pairwise[i].size()) {
          throw Error(ErrorCode::MissingRelevance,
                      "beta > 0 needs pairwise relevance for every pair");
        }
        pairs += pairwise[i][j];
      }
    }
  }
  SetRelevance out;
  out.set_score = alpha * solo + beta * pairs;
  out.prominence.reserve(set.size());
  for (auto i : set) {
    const double share = solo > 0.0 ? q[i] / solo
                                    : 1.0 / static_cast<double>(set.size());
    out.prominence.push_back(out.set_score * share);
  }
  return out;
}

SetScores heuristic_set_scores(std::span<const double> q,
                               const std::vector<std::vector<double>>& pairwise,
                               double alpha, double beta, std::size_t k) {
  SetScores out;
  out.ads = q.size();
  out.k = k;
  out.sets = k_subsets(q.size(), k);
  out.prominence.reserve(out.sets.size());
  for (const auto& s : out.sets) {
    out.prominence.push_back(
        set_relevance_heuristic(q, pairwise, alpha, beta, s).prominence);
  }
  return out;
}

}  // namespace segauc::analytic
