#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "segauc/analytic.hpp"
#include "segauc/sessions.hpp"
#include "segauc/sim.hpp"
#include "segauc/verify.hpp"
#include "test_util.hpp"

using namespace segauc;
using namespace segauc::sim;

namespace {

ExperimentOptions opts(std::uint64_t trials, std::uint64_t seed, unsigned threads = 1,
                       bool keep = false) {
  ExperimentOptions o;
  o.trials = trials;
  o.seed = seed;
  o.threads = threads;
  o.keep_outcomes = keep;
  return o;
}

}  // namespace

TEST_CASE("query counters per session") {
  auto s = test::load_shipped("scenario1.json");
  for (auto m : {Mechanism::SingleWithReplacement, Mechanism::SingleWithoutReplacement,
                 Mechanism::NaiveI, Mechanism::NaiveII}) {
    s.mechanism = m;
    const auto r = run_experiment(s, opts(5, 1));
    CHECK(r.counters.relevance_calls == 5 * 12);
    CHECK(r.counters.generator_calls == 5 * 3);
  }
  s.mechanism = Mechanism::MultiAllocation;
  s.slots = 2;
  CHECK(run_experiment(s, opts(2, 1)).counters.relevance_calls == 2 * 12);

  auto c = test::make_scenario({1, 2, 3, 4}, {.5, .5, .5, .5}, 2, Mechanism::Combinatorial, 2);
  const auto r = run_experiment(c, opts(3, 1));
  CHECK(r.counters.relevance_calls == 3 * 2 * 2 * 6);
  CHECK(r.counters.generator_calls == 3 * 2);
}

TEST_CASE("determinism and thread independence") {
  const auto s = test::load_shipped("scenario2.json");
  const auto a = run_experiment(s, opts(200, 11, 1, true));
  const auto b = run_experiment(s, opts(200, 11, 4, true));
  CHECK(a.metrics == b.metrics);
  CHECK(a.outcomes == b.outcomes);
  const auto c = run_experiment(s, opts(200, 12, 1));
  CHECK_FALSE(a.metrics == c.metrics);
}

TEST_CASE("dominant ad wins almost always") {
  auto s = test::make_scenario({100, 0.01, 0.01}, {1, 1, 1}, 1);
  const auto r = run_experiment(s, opts(2000, 3, 1, true));
  std::size_t wins = 0;
  for (const auto& o : r.outcomes) wins += o.segments[0].winners[0] == 0;
  CHECK(wins >= 0.97 * 2000);
}

TEST_CASE("without replacement shows every ad once when T = n") {
  auto s = test::make_scenario({1, 2, 3, 4}, {.2, .4, .6, .8}, 4,
                               Mechanism::SingleWithoutReplacement);
  const auto r = run_experiment(s, opts(100, 5, 1, true));
  for (const auto& o : r.outcomes) {
    std::set<std::size_t> seen;
    for (const auto& seg : o.segments) seen.insert(seg.winners[0]);
    CHECK(seen.size() == 4);
  }
}

TEST_CASE("naive I matches the replacement auction, append composition") {
  auto s = test::load_shipped("scenario1.json");
  const auto repl = run_experiment(s, opts(100, 9, 1, true));
  s.mechanism = Mechanism::NaiveI;
  const auto naive = run_experiment(s, opts(100, 9, 1, true));
  CHECK(repl.metrics == naive.metrics);
  const auto& seg = naive.outcomes[0].segments[0];
  CHECK(seg.composition == Composition::Append);
  CHECK(seg.text.find(s.ads[seg.winners[0]].document) != std::string::npos);
}

TEST_CASE("k = n multi-allocation always selects the full set at price zero") {
  auto s = test::make_scenario({1, 2, 3}, {.3, .6, .9}, 1, Mechanism::MultiAllocation, 3);
  const auto r = run_experiment(s, opts(50, 2, 1, true));
  for (const auto& o : r.outcomes) {
    CHECK(o.segments[0].winners.size() == 3);
    for (double p : o.segments[0].prices) CHECK(p == 0.0);
  }
}

TEST_CASE("empirical metrics converge to the analytic ones") {
  for (const char* name : {"scenario1.json", "scenario2.json", "scenario3.json"}) {
    for (auto m : {Mechanism::SingleWithReplacement, Mechanism::SingleWithoutReplacement,
                   Mechanism::NaiveII}) {
      auto s = test::load_shipped(name);
      s.mechanism = m;
      const auto r = run_experiment(s, opts(4000, 21, 0));
      const auto check = [&](const metrics::Metric& got, const std::optional<double>& want) {
        REQUIRE(want.has_value());
        CHECK(std::abs(got.mean - *want) <= 3.5 * got.stderr_ + 1e-12);
      };
      CAPTURE(name);
      CAPTURE(to_string(m));
      check(r.metrics.revenue, r.analytic.revenue);
      check(r.metrics.revenue_per_click, r.analytic.revenue_per_click);
      check(r.metrics.social_welfare, r.analytic.social_welfare);
      check(r.metrics.relevance, r.analytic.relevance);
    }
  }
}

TEST_CASE("combinatorial session uses the heuristic set scores") {
  auto s = test::make_scenario({1, 2, 3}, {.3, .6, .9}, 2, Mechanism::Combinatorial, 2);
  const auto r = run_experiment(s, opts(20, 4, 1, true));
  for (const auto& o : r.outcomes) {
    for (const auto& seg : o.segments) {
      CHECK(seg.winners.size() == 2);
      CHECK(seg.winning_set != kNoSet);
      CHECK(seg.noise.size() == 3);
    }
  }
  CHECK(r.analytic.social_welfare.has_value());
  CHECK_FALSE(r.analytic.revenue.has_value());
}

TEST_CASE("DSIC probe") {
  SUBCASE("symmetric ads") {
    auto s = test::make_scenario({1, 1, 1}, {1, 1, 1});
    const auto grid = dsic_grid(1.0);
    CHECK(grid.size() == 49);
    CHECK(dsic_grid(0.7).size() <= 50);
    CHECK(std::count(grid.begin(), grid.end(), 1.0) == 1);
    const auto r = dsic_probe(s, 0, grid, 20000, 3);
    CHECK(r.truthful);
    const auto best = std::max_element(r.utility.begin(), r.utility.end()) - r.utility.begin();
    CHECK(grid[best] == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("naive II") {
    auto s = test::make_scenario({1, 2, 3}, {.2, .5, .9}, 1, Mechanism::NaiveII);
    CHECK(dsic_probe(s, 1, dsic_grid(2.0), 5000, 4).truthful);
  }
  SUBCASE("multi-allocation") {
    auto s = test::make_scenario({1, 2, 3, 1.5}, {.2, .5, .9, .4}, 1,
                                 Mechanism::MultiAllocation, 2);
    CHECK(dsic_probe(s, 0, dsic_grid(1.0), 5000, 4).truthful);
  }
}

TEST_CASE("IR sweep") {
  auto s = test::make_scenario({1, 2, 3, 1.5}, {.2, .5, .9, .4});
  const auto r = ir_sweep(s, 20000, 8);
  CHECK(r.draws == 20000);
  CHECK(r.negative_utility == 0);
  CHECK(r.price_above_bid == 0);
  CHECK(r.loser_payments == 0);
}

TEST_CASE("oracles") {
  const std::vector<double> q{.3, .5, .8, .2}, b{1, 2, 1, 3};
  const auto reports = oracle_set_frequencies(q, b, 2, 200000, 5);
  CHECK(reports.size() == 6);
  double total = 0.0;
  for (const auto& r : reports) total += r.empirical;
  CHECK(total == doctest::Approx(1.0));

  const auto myerson = oracle_myerson(q, b, 200000, 6);
  CHECK(myerson.size() == 4);
  for (const auto& r : myerson) CHECK(r.analytic >= 0.0);

  const auto simplex = project_to_simplex({0.5, 0.8, -0.2});
  CHECK(simplex[0] == doctest::Approx(0.35));
  CHECK(simplex[1] == doctest::Approx(0.65));
  CHECK(simplex[2] == 0.0);

  const auto check = check_lsw_optimality(q, b, 1000, 2);
  CHECK(check.beats_random);
  CHECK(check.matches_gradient);
}

TEST_CASE("verify negative control") {
  VerifyOptions o;
  o.suites = {"thm3"};
  o.n = 5;
  o.k = 2;
  o.samples = 100000;
  auto good = run_verify(o);
  CHECK(good.pass);
  CHECK(good.report["suites"]["thm3"]["checks"].size() >= 10);

  o.set_probability = [](std::span<const double> q, std::span<const double> b,
                         std::span<const std::size_t> set, std::size_t) {
    // Product of softmax marginals: plausible-looking but wrong.
    const auto x = analytic::softmax_allocation(q, b);
    double p = 1.0;
    for (auto i : set) p *= x[i];
    return p;
  };
  CHECK_FALSE(run_verify(o).pass);

  VerifyOptions bad;
  bad.suites = {"nope"};
  CHECK_THROWS_AS(run_verify(bad), Error);
}
