#include "segauc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "segauc/mechanisms.hpp"
#include "segauc/sampling.hpp"
#include "segauc/sessions.hpp"

namespace segauc::sim {

namespace {

const CombinatorialConfig& combinatorial_config(const Scenario& s) {
  static const CombinatorialConfig defaults;
  return s.combinatorial ? *s.combinatorial : defaults;
}

double delta_at(const Scenario& s, std::size_t t) {
  return s.relevance.segment_factor(t);
}

}  // namespace

ProviderSet default_providers(const Scenario& scenario) {
  ProviderSet p;
  p.relevance = providers::static_relevance(scenario);
  if (scenario.mechanism == Mechanism::Combinatorial) {
    const auto& cfg = combinatorial_config(scenario);
    p.set_relevance = std::make_unique<providers::HeuristicSetRelevance>(
        scenario.relevance.q, cfg.pairwise, cfg.alpha, cfg.beta,
        scenario.relevance.delta);
  }
  p.generator = providers::stub_generator();
  return p;
}

ProviderSet embedding_providers(const Scenario& scenario,
                                providers::EmbeddingCache& cache) {
  ProviderSet p;
  p.relevance = providers::embedding_relevance(cache);
  if (scenario.mechanism == Mechanism::Combinatorial) {
    const auto& cfg = combinatorial_config(scenario);
    const std::size_t n = scenario.ads.size();
    std::vector<double> q(n);
    const providers::RelevanceContext ctx{};
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = p.relevance->relevance(scenario.query, scenario.ads[i], ctx);
    }
    std::vector<std::vector<double>> pairwise = cfg.pairwise;
    if (cfg.beta > 0.0 && pairwise.empty()) {
      pairwise.assign(n, std::vector<double>(n, 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i != j) {
            pairwise[i][j] = providers::output_similarity(
                scenario.ads[i].document, scenario.ads[j].document, cache);
          }
        }
      }
    }
    p.set_relevance = std::make_unique<providers::HeuristicSetRelevance>(
        std::move(q), std::move(pairwise), cfg.alpha, cfg.beta,
        scenario.relevance.delta);
  }
  p.generator = providers::stub_generator();
  return p;
}

SetScores scenario_set_scores(const Scenario& scenario) {
  const auto& cfg = combinatorial_config(scenario);
  return analytic::heuristic_set_scores(scenario.relevance.q, cfg.pairwise,
                                        cfg.alpha, cfg.beta,
                                        static_cast<std::size_t>(scenario.slots));
}

// ---------------------------------------------------------------------------
// Analytic expectations

namespace {

struct Totals {
  double revenue = 0.0;
  double revenue_per_click = 0.0;
  double welfare = 0.0;
  double relevance = 0.0;
  std::vector<double> utility;
};

// Exact expectation over ordered winner sequences without replacement.
void enumerate_without_replacement(const Scenario& s, std::size_t t,
                                   std::vector<unsigned char>& taken,
                                   double prob, Totals& acc) {
  if (t == static_cast<std::size_t>(s.segments)) return;
  const auto& q = s.relevance.q;
  const double d = delta_at(s, t);
  std::vector<std::size_t> rest;
  std::vector<double> q_rest, b_rest;
  for (std::size_t i = 0; i < s.ads.size(); ++i) {
    if (taken[i]) continue;
    rest.push_back(i);
    q_rest.push_back(q[i]);
    b_rest.push_back(s.ads[i].bid);
  }
  double total = 0.0;
  for (std::size_t r = 0; r < rest.size(); ++r) total += q_rest[r] * b_rest[r];
  if (!(total > 0.0)) return;
  for (std::size_t r = 0; r < rest.size(); ++r) {
    const double pay = analytic::myerson_expected_payment(q_rest, b_rest, r);
    acc.revenue += prob * d * q_rest[r] * pay;
    acc.revenue_per_click += prob * pay;
  }
  for (std::size_t r = 0; r < rest.size(); ++r) {
    const double w = q_rest[r] * b_rest[r];
    if (w == 0.0) continue;
    const std::size_t i = rest[r];
    const double p = prob * w / total;
    const double u = s.ads[i].value * q[i] * d;
    acc.welfare += p * u;
    acc.relevance += p * q[i] * d;
    acc.utility[i] += p * u;
    taken[i] = 1;
    enumerate_without_replacement(s, t + 1, taken, p, acc);
    taken[i] = 0;
  }
}

}  // namespace

Expectations analytic_expectations(const Scenario& s,
                                   const metrics::Normalizers& norm) {
  Expectations out;
  const auto& q = s.relevance.q;
  const std::size_t n = s.ads.size();
  if (q.size() != n || n == 0) return out;
  const auto b = s.bids();
  const auto v = s.values();
  const std::size_t T = static_cast<std::size_t>(s.segments);
  const std::size_t k = static_cast<std::size_t>(s.slots);

  Totals acc;
  acc.utility.assign(n, 0.0);
  bool revenue_known = true;

  switch (s.mechanism) {
    case Mechanism::SingleWithReplacement:
    case Mechanism::NaiveI:
    case Mechanism::NaiveII: {
      const bool naive2 = s.mechanism == Mechanism::NaiveII;
      const std::vector<double> ones(n, 1.0);
      std::span<const double> score_q = naive2 ? std::span<const double>(ones)
                                               : std::span<const double>(q);
      const auto x = analytic::softmax_allocation(score_q, b);
      for (std::size_t t = 0; t < T; ++t) {
        const double d = delta_at(s, t);
        for (std::size_t i = 0; i < n; ++i) {
          const double u = v[i] * q[i] * d * x[i];
          acc.welfare += u;
          acc.relevance += q[i] * d * x[i];
          acc.utility[i] += u;
          const double pay = analytic::myerson_expected_payment(score_q, b, i);
          acc.revenue += q[i] * d * pay;
          acc.revenue_per_click += pay;
        }
      }
      break;
    }
    case Mechanism::SingleWithoutReplacement: {
      double sequences = 1.0;
      for (std::size_t t = 0; t < T; ++t) sequences *= static_cast<double>(n - t);
      if (sequences > 1e6) return out;
      std::vector<unsigned char> taken(n, 0);
      enumerate_without_replacement(s, 0, taken, 1.0, acc);
      break;
    }
    case Mechanism::MultiAllocation: {
      revenue_known = false;
      const auto sets = k_subsets(n, k);
      const auto probs = analytic::all_set_probabilities(q, b, k);
      for (std::size_t t = 0; t < T; ++t) {
        const double d = delta_at(s, t);
        for (std::size_t a = 0; a < sets.size(); ++a) {
          for (auto i : sets[a]) {
            const double u = probs[a] * v[i] * q[i] * d;
            acc.welfare += u;
            acc.relevance += probs[a] * q[i] * d;
            acc.utility[i] += u;
          }
        }
      }
      break;
    }
    case Mechanism::Combinatorial: {
      revenue_known = false;
      const auto base = scenario_set_scores(s);
      for (std::size_t t = 0; t < T; ++t) {
        const double d = delta_at(s, t);
        auto scores = base;
        for (auto& row : scores.prominence) {
          for (auto& p : row) p *= d;
        }
        const auto x = analytic::combinatorial_allocation(scores, b);
        for (std::size_t a = 0; a < scores.sets.size(); ++a) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t i = scores.sets[a][j];
            const double w = scores.prominence[a][j];
            acc.welfare += x[a] * v[i] * w;
            acc.relevance += x[a] * w;
            acc.utility[i] += x[a] * v[i] * w;
          }
        }
      }
      break;
    }
  }

  if (revenue_known) {
    out.revenue = acc.revenue / norm.revenue_max;
    out.revenue_per_click = acc.revenue_per_click / norm.revenue_per_click_max;
  }
  out.social_welfare = acc.welfare / norm.welfare_max;
  out.relevance = acc.relevance / norm.relevance_max;
  out.min_social_welfare =
      *std::min_element(acc.utility.begin(), acc.utility.end()) /
      norm.min_welfare_max;
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

ExperimentReport run_experiment(const Scenario& scenario,
                                const ExperimentOptions& options,
                                const ProviderSet* providers) {
  const Scenario s = validate_scenario(scenario);
  if (options.trials == 0) {
    throw Error(ErrorCode::InvalidTrials, "trials must be at least 1");
  }
  ProviderSet owned;
  if (providers == nullptr) {
    owned = default_providers(s);
    providers = &owned;
  }
  const SessionProviders sp{providers->relevance.get(),
                            providers->set_relevance.get(),
                            providers->generator.get()};

  const std::uint64_t trials = options.trials;
  std::vector<metrics::SessionMetrics> per_trial(trials);
  std::vector<QueryCounters> counters(trials);
  std::vector<AuctionOutcome> outcomes(options.keep_outcomes ? trials : 0);

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::uint64_t j = next.fetch_add(1);
      if (j >= trials) return;
      try {
        auto outcome = run_session(s, options.seed, j, sp);
        per_trial[j] = metrics::session_metrics(outcome, s);
        counters[j] = outcome.counters;
        if (options.keep_outcomes) outcomes[j] = std::move(outcome);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(trials);
        return;
      }
    }
  };

  unsigned threads = options.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, trials));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.scenario = s;
  report.normalizers = metrics::documented_normalizers(s);
  report.metrics = metrics::aggregate(per_trial, report.normalizers);
  for (const auto& c : counters) report.counters += c;
  if (s.relevance_mode == RelevanceMode::Static) {
    report.analytic = analytic_expectations(s, report.normalizers);
  }
  report.outcomes = std::move(outcomes);
  return report;
}

// ---------------------------------------------------------------------------
// Oracles

OracleReport make_report(std::string name, double analytic, double empirical,
                         double stderr_) {
  const double gap = std::abs(analytic - empirical);
  const bool pass = stderr_ > 0.0 ? gap <= 3.0 * stderr_ : gap <= 1e-12;
  return {std::move(name), analytic, empirical, stderr_, pass};
}

namespace {

std::string set_label(std::span<const std::size_t> set) {
  std::string out = "{";
  for (std::size_t j = 0; j < set.size(); ++j) {
    if (j > 0) out += ",";
    out += std::to_string(set[j]);
  }
  return out + "}";
}

}  // namespace

std::vector<OracleReport> oracle_set_frequencies(
    std::span<const double> q, std::span<const double> b, std::size_t k,
    std::uint64_t samples, std::uint64_t seed, SetProbabilityFn formula) {
  if (!formula) formula = analytic::set_win_probability;
  const std::size_t n = q.size();
  if (n > 20) {
    throw Error(ErrorCode::InvalidArgument, "oracle supports at most 20 ads");
  }
  if (samples == 0) throw Error(ErrorCode::InvalidTrials, "samples must be positive");
  const auto sets = k_subsets(n, k);
  std::vector<std::int32_t> index_of(std::size_t{1} << n, -1);
  for (std::size_t a = 0; a < sets.size(); ++a) {
    std::uint32_t m = 0;
    for (auto i : sets[a]) m |= 1u << i;
    index_of[m] = static_cast<std::int32_t>(a);
  }
  std::vector<std::uint64_t> counts(sets.size(), 0);
  RngStream rng(seed, 0, 0);
  for (std::uint64_t s = 0; s < samples; ++s) {
    const auto rec = multi_allocation_auction(b, q, k, draw_noise(rng, n));
    std::uint32_t m = 0;
    for (auto w : rec.winners) m |= 1u << w;
    ++counts[static_cast<std::size_t>(index_of[m])];
  }
  std::vector<OracleReport> out;
  const double N = static_cast<double>(samples);
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const double p = formula(q, b, sets[a], k);
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / N);
    out.push_back(make_report(fmt::format("P(top-{} = {})", k, set_label(sets[a])),
                              p, static_cast<double>(counts[a]) / N, se));
  }
  return out;
}

OracleReport oracle_win_frequency(std::span<const double> q,
                                  std::span<const double> b,
                                  std::span<const std::size_t> set,
                                  std::size_t k, std::uint64_t samples,
                                  std::uint64_t seed) {
  std::vector<std::size_t> sorted(set.begin(), set.end());
  std::sort(sorted.begin(), sorted.end());
  const auto sets = k_subsets(q.size(), k);
  const auto it = std::find(sets.begin(), sets.end(), sorted);
  if (sorted.size() != k || it == sets.end()) {
    throw Error(ErrorCode::InvalidArgument, "set must hold k distinct ads");
  }
  auto all = oracle_set_frequencies(q, b, k, samples, seed);
  return all[static_cast<std::size_t>(it - sets.begin())];
}

std::vector<OracleReport> oracle_myerson(std::span<const double> q,
                                         std::span<const double> b,
                                         std::uint64_t samples,
                                         std::uint64_t seed) {
  const std::size_t n = q.size();
  std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
  RngStream rng(seed, 0, 0);
  for (std::uint64_t s = 0; s < samples; ++s) {
    const auto rec = single_auction(b, q, draw_noise(rng, n));
    const auto w = rec.winners.front();
    sum[w] += rec.prices.front();
    sumsq[w] += rec.prices.front() * rec.prices.front();
  }
  std::vector<OracleReport> out;
  const double N = static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / N;
    const double var = std::max(sumsq[i] / N - mean * mean, 0.0);
    out.push_back(make_report(fmt::format("E[1{{win}} z_{}]", i),
                              analytic::myerson_expected_payment(q, b, i), mean,
                              std::sqrt(var / N)));
  }
  return out;
}

std::vector<double> project_to_simplex(std::vector<double> y) {
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (auto& x : y) x = std::max(x - theta, 0.0);
  return y;
}

namespace {

double log_welfare(std::span<const double> w, std::span<const double> x) {
  double f = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    if (x[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    f += w[i] * std::log(x[i]);
  }
  return f;
}

}  // namespace

std::vector<double> projected_gradient_log_welfare(std::span<const double> w,
                                                   int max_iter) {
  const std::size_t n = w.size();
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  double f = log_welfare(w, x);
  double step = 1e-2;
  std::vector<double> g(n);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) g[i] = w[i] == 0.0 ? 0.0 : w[i] / x[i];
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + step * g[i];
      auto cand = project_to_simplex(std::move(y));
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = cand[i] - x[i];
        lin += g[i] * d;
        sq += d * d;
      }
      const double fc = log_welfare(w, cand);
      if (std::isfinite(fc) && fc >= f + lin - sq / (2.0 * step)) {
        const bool stalled = sq < 1e-30;
        x = std::move(cand);
        f = fc;
        step *= 1.5;
        accepted = true;
        if (stalled) return x;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return x;
}

std::vector<std::vector<double>> random_simplex_points(std::size_t dim,
                                                       std::size_t count,
                                                       std::uint64_t seed) {
  RngStream rng(seed, 0, 0);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& p : out) {
    double total = 0.0;
    for (auto& x : p) {
      x = -std::log(rng.uniform_open());
      total += x;
    }
    for (auto& x : p) x /= total;
  }
  return out;
}

namespace {

OptimalityCheck check_optimality(std::span<const double> w,
                                 std::span<const double> maximizer,
                                 std::size_t random_points, std::uint64_t seed) {
  OptimalityCheck c;
  c.at_maximizer = log_welfare(w, maximizer);
  c.best_random = -std::numeric_limits<double>::infinity();
  c.beats_random = true;
  for (const auto& p : random_simplex_points(w.size(), random_points, seed)) {
    const double f = log_welfare(w, p);
    c.best_random = std::max(c.best_random, f);
    if (!(c.at_maximizer >= f)) c.beats_random = false;
  }
  const auto x = projected_gradient_log_welfare(w);
  c.gradient_optimum = log_welfare(w, x);
  c.matches_gradient = std::abs(c.at_maximizer - c.gradient_optimum) <= 1e-6;
  return c;
}

}  // namespace

OptimalityCheck check_lsw_optimality(std::span<const double> q,
                                     std::span<const double> v,
                                     std::size_t random_points,
                                     std::uint64_t seed) {
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) w[i] = q[i] * v[i];
  const auto x = analytic::lsw_maximizer(q, v);
  auto c = check_optimality(w, x.p, random_points, seed);
  c.at_maximizer = analytic::log_lsw(x, q, v);
  return c;
}

OptimalityCheck check_clsw_optimality(const SetScores& scores,
                                      std::span<const double> v,
                                      std::size_t random_points,
                                      std::uint64_t seed) {
  std::vector<double> w(scores.sets.size(), 0.0);
  for (std::size_t a = 0; a < scores.sets.size(); ++a) {
    for (std::size_t j = 0; j < scores.k; ++j) {
      w[a] += v[scores.sets[a][j]] * scores.prominence[a][j];
    }
  }
  const auto x = analytic::clsw_maximizer(scores, v);
  auto c = check_optimality(w, x.p, random_points, seed);
  c.at_maximizer = analytic::log_clsw(x, scores, v);
  return c;
}

// ---------------------------------------------------------------------------
// Incentive checks

SegmentRecord run_segment(const Scenario& scenario, std::span<const double> bids,
                          std::span<const double> q, const SetScores* scores,
                          const NoiseDraw& noise) {
  switch (scenario.mechanism) {
    case Mechanism::SingleWithReplacement:
    case Mechanism::SingleWithoutReplacement:
      return single_auction(bids, q, noise);
    case Mechanism::NaiveI:
      return naive_one_auction(bids, q, noise);
    case Mechanism::NaiveII:
      return naive_two_auction(bids, q, noise);
    case Mechanism::MultiAllocation:
      return multi_allocation_auction(
          bids, q, static_cast<std::size_t>(scenario.slots), noise);
    case Mechanism::Combinatorial:
      if (scores == nullptr) {
        throw Error(ErrorCode::MissingSetScore, "combinatorial segment needs set scores");
      }
      return combinatorial_auction(bids, *scores,
                                   combinatorial_config(scenario).negative_payment,
                                   noise);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown mechanism");
}

std::vector<double> dsic_grid(double value) {
  std::vector<double> grid;
  for (int j = 0; j < 49; ++j) grid.push_back(2.0 * value * j / 48.0);
  grid.push_back(value);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

namespace {

std::vector<double> segment_relevance(const Scenario& s) {
  auto q = s.relevance.q;
  for (auto& x : q) x *= s.relevance.segment_factor(0);
  return q;
}

std::optional<SetScores> segment_set_scores(const Scenario& s) {
  if (s.mechanism != Mechanism::Combinatorial) return std::nullopt;
  auto scores = scenario_set_scores(s);
  for (auto& row : scores.prominence) {
    for (auto& p : row) p *= s.relevance.segment_factor(0);
  }
  return scores;
}

std::size_t participants(const Scenario& s, const std::optional<SetScores>& scores) {
  return scores ? scores->sets.size() : s.ads.size();
}

}  // namespace

DsicResult dsic_probe(const Scenario& scenario, std::size_t ad,
                      std::span<const double> grid, std::uint64_t draws,
                      std::uint64_t seed) {
  if (ad >= scenario.ads.size()) {
    throw Error(ErrorCode::InvalidArgument, "ad index out of range");
  }
  const double value = scenario.ads[ad].value;
  const auto truthful_it = std::find(grid.begin(), grid.end(), value);
  if (truthful_it == grid.end()) {
    throw Error(ErrorCode::InvalidArgument, "grid must contain the truthful bid");
  }
  const auto q = segment_relevance(scenario);
  const auto scores = segment_set_scores(scenario);
  const std::size_t m = participants(scenario, scores);
  auto bids = scenario.bids();

  DsicResult r;
  r.grid.assign(grid.begin(), grid.end());
  r.utility.assign(grid.size(), 0.0);
  for (std::uint64_t d = 0; d < draws; ++d) {
    RngStream rng(seed, d, 0);
    const auto noise = draw_noise(rng, m);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      bids[ad] = grid[g];
      SegmentRecord rec;
      try {
        rec = run_segment(scenario, bids, q, scores ? &*scores : nullptr, noise);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoEligibleAds ||
            e.code() == ErrorCode::NotEnoughCompetitors) {
          continue;
        }
        throw;
      }
      for (std::size_t s = 0; s < rec.winners.size(); ++s) {
        if (rec.winners[s] == ad) {
          r.utility[g] += rec.click_weights[s] * (value - rec.prices[s]);
        }
      }
    }
  }
  for (auto& u : r.utility) u /= static_cast<double>(std::max<std::uint64_t>(draws, 1));
  r.truthful_utility = r.utility[static_cast<std::size_t>(truthful_it - grid.begin())];
  r.best_utility = *std::max_element(r.utility.begin(), r.utility.end());
  r.truthful = r.truthful_utility >=
               r.best_utility - 1e-12 * std::max(1.0, std::abs(r.best_utility));
  return r;
}

IrResult ir_sweep(const Scenario& scenario, std::uint64_t draws,
                  std::uint64_t seed) {
  const auto q = segment_relevance(scenario);
  const auto scores = segment_set_scores(scenario);
  const std::size_t m = participants(scenario, scores);
  const auto values = scenario.values();
  const bool price_cap =
      scenario.mechanism != Mechanism::Combinatorial ||
      combinatorial_config(scenario).negative_payment ==
          NegativePaymentPolicy::ClampToZero;

  IrResult r;
  r.draws = draws;
  for (std::uint64_t d = 0; d < draws; ++d) {
    RngStream rng(seed, d, 0);
    const auto rec =
        run_segment(scenario, values, q, scores ? &*scores : nullptr,
                    draw_noise(rng, m));
    if (rec.prices.size() != rec.winners.size()) ++r.loser_payments;
    for (std::size_t s = 0; s < rec.winners.size(); ++s) {
      const std::size_t i = rec.winners[s];
      const double price = rec.prices[s];
      if (rec.click_weights[s] * (values[i] - price) < -1e-12) ++r.negative_utility;
      if (price_cap && price > values[i] * (1.0 + 1e-12)) ++r.price_above_bid;
    }
  }
  return r;
}

}  // namespace segauc::sim
