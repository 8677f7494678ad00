#include <doctest.h>

#include <cmath>

#include "segauc/analytic.hpp"
#include "segauc/mechanisms.hpp"
#include "segauc/sampling.hpp"

using namespace segauc;

namespace {

SetScores three_choose_two(double p01, double p02, double p12) {
  return {3, 2, {{0, 1}, {0, 2}, {1, 2}}, {{p01, p01}, {p02, p02}, {p12, p12}}};
}

}  // namespace

TEST_CASE("single auction direct substitution") {
  const std::vector<double> b{1, 1}, q{1, 1};
  const auto r = single_auction(b, q, NoiseDraw{{0.5, 0.0}});
  REQUIRE(r.winners.size() == 1);
  CHECK(r.winners[0] == 0);
  CHECK(r.prices[0] == doctest::Approx(std::exp(-0.5)));
  CHECK(r.click_weights[0] == 1.0);
}

TEST_CASE("degenerate single auctions") {
  const std::vector<double> q{0.5, 0.0, 0.3};
  CHECK_THROWS_AS(single_auction(std::vector<double>{0, 1, 0}, q, NoiseDraw{{0, 0, 0}}),
                  Error);
  const auto lone = single_auction(std::vector<double>{2, 1, 0}, q, NoiseDraw{{0, 5, 0}});
  CHECK(lone.winners[0] == 0);
  CHECK(lone.prices[0] == 0.0);
  const auto tie = single_auction(std::vector<double>{1, 1}, std::vector<double>{1, 1},
                                  NoiseDraw{{0.3, 0.3}});
  CHECK(tie.winners[0] == 0);
  CHECK(tie.prices[0] == doctest::Approx(1.0));
}

TEST_CASE("exclusion prices against the remaining ads") {
  const std::vector<double> b{1, 1, 1}, q{1, 1, 1};
  const std::vector<unsigned char> out{1, 0, 0};
  const auto r = single_auction(b, q, NoiseDraw{{3.0, 1.0, 0.0}}, out);
  CHECK(r.winners[0] == 1);
  CHECK(r.prices[0] == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("multi-allocation direct substitution") {
  const std::vector<double> b{1, 1, 1}, q{1, 1, 1};
  const auto r = multi_allocation_auction(b, q, 2, NoiseDraw{{1.0, 0.5, 0.0}});
  CHECK(r.winners == std::vector<std::size_t>{0, 1});
  CHECK(r.prices[0] == doctest::Approx(std::exp(-1.0)));
  CHECK(r.prices[1] == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("multi-allocation edge cases") {
  const std::vector<double> b{1, 2}, q{0.5, 0.5};
  const auto all = multi_allocation_auction(b, q, 2, NoiseDraw{{0.1, 0.2}});
  CHECK(all.prices == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(multi_allocation_auction(b, q, 3, NoiseDraw{{0.1, 0.2}}), Error);
  try {
    multi_allocation_auction(std::vector<double>{1, 0}, q, 2, NoiseDraw{{0.1, 0.2}});
    FAIL("expected NotEnoughCompetitors");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotEnoughCompetitors);
  }
}

TEST_CASE("reductions to the single auction") {
  const std::vector<double> b{3, 3, 2, 2}, q{.36, .87, .31, .26};
  RngStream rng(9, 0, 0);
  const auto scores = analytic::heuristic_set_scores(q, {}, 1.0, 0.0, 1);
  for (int i = 0; i < 2000; ++i) {
    const auto noise = draw_noise(rng, 4);
    const auto s = single_auction(b, q, noise);
    const auto m = multi_allocation_auction(b, q, 1, noise);
    const auto n1 = naive_one_auction(b, q, noise);
    const auto c = combinatorial_auction(b, scores, NegativePaymentPolicy::ClampToZero, noise);
    CHECK(m.winners == s.winners);
    CHECK(m.prices == s.prices);
    CHECK(n1.winners == s.winners);
    CHECK(n1.prices == s.prices);
    CHECK(n1.composition == Composition::Append);
    CHECK(c.winners == s.winners);
    CHECK(c.prices[0] == doctest::Approx(s.prices[0]).epsilon(1e-12));
  }
}

TEST_CASE("naive II ignores relevance in the score") {
  const std::vector<double> b{1, 1}, q{0.01, 1.0};
  const auto r = naive_two_auction(b, q, NoiseDraw{{0.5, 0.0}});
  CHECK(r.winners[0] == 0);
  CHECK(r.prices[0] == doctest::Approx(std::exp(-0.5)));
  CHECK(r.click_weights[0] == 0.01);
}

TEST_CASE("combinatorial hand evaluations") {
  const std::vector<double> b{1, 1, 1};
  const NoiseDraw zero{{0, 0, 0}};
  const auto even = combinatorial_auction(b, three_choose_two(0.5, 0.5, 0.5),
                                          NegativePaymentPolicy::ClampToZero, zero);
  CHECK(even.winning_set == 0);
  CHECK(even.winners == std::vector<std::size_t>{0, 1});
  CHECK(even.prices[0] == doctest::Approx(1.0));
  CHECK(even.prices[1] == doctest::Approx(1.0));

  const auto scores = three_choose_two(0.9, 0.1, 0.1);
  const auto clamp =
      combinatorial_auction(b, scores, NegativePaymentPolicy::ClampToZero, zero);
  CHECK(clamp.winners == std::vector<std::size_t>{0, 1});
  CHECK(clamp.prices[0] == 0.0);
  const auto allow = combinatorial_auction(b, scores, NegativePaymentPolicy::Allow, zero);
  CHECK(allow.prices[0] == doctest::Approx((0.2 - 0.9) / 0.9));
  CHECK(allow.prices[0] == doctest::Approx(-0.7778).epsilon(1e-4));
}

TEST_CASE("combinatorial with a single candidate set charges nothing") {
  const SetScores one{2, 2, {{0, 1}}, {{0.4, 0.6}}};
  const auto r = combinatorial_auction(std::vector<double>{1, 1}, one,
                                       NegativePaymentPolicy::Allow, NoiseDraw{{0.0}});
  CHECK(r.prices == std::vector<double>{0.0, 0.0});
}

TEST_CASE("combinatorial set scores must be complete") {
  SetScores partial = three_choose_two(0.5, 0.5, 0.5);
  partial.sets.pop_back();
  partial.prominence.pop_back();
  CHECK_THROWS_AS(combinatorial_auction(std::vector<double>{1, 1, 1}, partial,
                                        NegativePaymentPolicy::ClampToZero,
                                        NoiseDraw{{0, 0}}),
                  Error);
}

TEST_CASE("winner dominance and price cap on 10^5 replayed draws") {
  const std::vector<double> b{3, 3, 2, 2, 0.5}, q{.36, .87, .31, .26, .9};
  RngStream rng(21, 0, 0);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto noise = draw_noise(rng, b.size());
    for (const auto& r : {single_auction(b, q, noise), naive_two_auction(b, q, noise),
                          multi_allocation_auction(b, q, 2, noise)}) {
      double worst_winner = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < r.winners.size(); ++s) {
        worst_winner = std::min(worst_winner, r.log_scores[r.winners[s]]);
        if (r.prices[s] > b[r.winners[s]]) ++violations;
        if (r.prices[s] < 0.0) ++violations;
      }
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (std::find(r.winners.begin(), r.winners.end(), j) == r.winners.end() &&
            r.log_scores[j] > worst_winner) {
          ++violations;
        }
      }
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("k-subsets") {
  CHECK(binomial(5, 2) == 10);
  CHECK(binomial(11, 3) == 165);
  const auto s = k_subsets(4, 2);
  REQUIRE(s.size() == 6);
  CHECK(s.front() == std::vector<std::size_t>{0, 1});
  CHECK(s.back() == std::vector<std::size_t>{2, 3});
}

TEST_CASE("combinatorial prices admit a profitable overbid") {
  // Sets {0,1}, {0,2}, {1,2} with noise factors 1, 20, 1. Ad 0 values a click
  // at 1 but gains by bidding 15, which moves the win to the set with the
  // smaller noise factor.
  SetScores scores;
  scores.ads = 3;
  scores.k = 2;
  scores.sets = {{0, 1}, {0, 2}, {1, 2}};
  scores.prominence = {{1.0, 0.5}, {0.01, 0.5}, {0.5, 0.5}};
  const NoiseDraw noise{{0.0, std::log(20.0), 0.0}};
  const auto utility = [&](double bid, NegativePaymentPolicy policy) {
    const std::vector<double> bids{bid, 1.0, 1.0};
    const auto r = combinatorial_auction(bids, scores, policy, noise);
    for (std::size_t j = 0; j < r.winners.size(); ++j) {
      if (r.winners[j] == 0) return r.click_weights[j] * (1.0 - r.prices[j]);
    }
    return 0.0;
  };
  for (auto policy : {NegativePaymentPolicy::ClampToZero, NegativePaymentPolicy::Allow}) {
    CHECK(utility(15.0, policy) == doctest::Approx(0.5));
  }
  CHECK(utility(1.0, NegativePaymentPolicy::ClampToZero) == doctest::Approx(0.01));
  CHECK(utility(1.0, NegativePaymentPolicy::Allow) == doctest::Approx(0.46));
}
