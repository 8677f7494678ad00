#include <doctest.h>

#include "segauc/metrics.hpp"
#include "test_util.hpp"

using namespace segauc;
using namespace segauc::metrics;

namespace {

SegmentRecord won_by(std::vector<std::size_t> winners, std::vector<double> prices,
                     std::vector<double> weights) {
  SegmentRecord r;
  r.winners = std::move(winners);
  r.prices = std::move(prices);
  r.click_weights = std::move(weights);
  return r;
}

}  // namespace

TEST_CASE("one ad winning every segment") {
  const auto s = test::load_shipped("scenario1.json");
  AuctionOutcome o;
  for (int t = 0; t < 3; ++t) o.segments.push_back(won_by({1}, {2.0}, {0.87}));
  const auto m = session_metrics(o, s);
  CHECK(m.welfare == doctest::Approx(7.83));
  CHECK(m.relevance == doctest::Approx(2.61));
  CHECK(m.revenue == doctest::Approx(3 * 0.87 * 2.0));
  CHECK(m.revenue_per_click == doctest::Approx(6.0));
  CHECK(m.utility[1] == doctest::Approx(7.83));
  CHECK(m.utility[0] == 0.0);
}

TEST_CASE("empty outcome") {
  const auto s = test::load_shipped("scenario1.json");
  const auto m = session_metrics(AuctionOutcome{}, s);
  CHECK(m.revenue == 0.0);
  CHECK(m.welfare == 0.0);
  CHECK(m.relevance == 0.0);
}

TEST_CASE("multi-allocation winners all count") {
  auto s = test::load_shipped("scenario1.json");
  AuctionOutcome o;
  o.segments.push_back(won_by({1, 0, 3}, {1, 1, 1}, {0.87, 0.36, 0.26}));
  CHECK(session_metrics(o, s).relevance == doctest::Approx(0.87 + 0.36 + 0.26));
}

TEST_CASE("documented normalizers") {
  auto s = test::load_shipped("scenario1.json");
  auto n = documented_normalizers(s);
  CHECK(n.welfare_max == doctest::Approx(3 * 2.61));
  CHECK(n.relevance_max == doctest::Approx(3 * 0.87));
  CHECK(n.revenue_max == doctest::Approx(3 * 2.61));
  CHECK(n.revenue_per_click_max == doctest::Approx(9.0));
  CHECK(n.min_welfare_max == 1.0);
  s.mechanism = Mechanism::MultiAllocation;
  s.slots = 2;
  s.relevance.delta = {1.0, 0.5, 0.5};
  n = documented_normalizers(s);
  CHECK(n.relevance_max == doctest::Approx(2 * 2.0 * 0.87));
  CHECK(n.revenue_per_click_max == doctest::Approx(2 * 3 * 3.0));
}

TEST_CASE("aggregate") {
  SessionMetrics a{1.0, 2.0, 3.0, 4.0, {1.0, 5.0}};
  SessionMetrics b{3.0, 2.0, 5.0, 6.0, {3.0, 5.0}};
  const std::vector<SessionMetrics> one{a};
  const auto r1 = aggregate(one, Normalizers{});
  CHECK(r1.revenue.stderr_ == 0.0);
  CHECK(r1.trials == 1);

  const std::vector<SessionMetrics> two{a, b};
  const auto r = aggregate(two, Normalizers{2.0, 1.0, 4.0, 1.0, 1.0});
  CHECK(r.revenue.mean == doctest::Approx(1.0));
  CHECK(r.revenue.stderr_ == doctest::Approx(0.5));
  CHECK(r.social_welfare.mean == doctest::Approx(1.0));
  CHECK(r.relevance.mean == 5.0);
  CHECK(r.min_social_welfare.mean == 2.0);
  CHECK(r.min_welfare_ad == 0);
  CHECK(r.min_social_welfare.stderr_ == doctest::Approx(1.0));
  CHECK(aggregate(two, Normalizers{}) == aggregate(two, Normalizers{}));
}
