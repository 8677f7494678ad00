#pragma once

// Experiment harness: trials of a scenario, analytic expectations under the
// same normalization, and the Monte Carlo oracles used by `verify`.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segauc/analytic.hpp"
#include "segauc/core.hpp"
#include "segauc/metrics.hpp"
#include "segauc/providers.hpp"

namespace segauc::sim {

struct ProviderSet {
  std::unique_ptr<providers::RelevanceProvider> relevance;
  std::unique_ptr<providers::SetRelevanceProvider> set_relevance;
  std::unique_ptr<providers::GeneratorAdapter> generator;
};

/// Static relevance, heuristic set relevance (combinatorial only) and the
/// stub generator.
ProviderSet default_providers(const Scenario& scenario);

/// Embedding relevance. For the combinatorial mechanism the per-ad scores and
/// ad-to-ad similarities feeding the set heuristic are fetched once up front;
/// those lookups are not part of the per-segment counters.
ProviderSet embedding_providers(const Scenario& scenario,
                                providers::EmbeddingCache& cache);

/// Expected normalized metrics for the scenario's mechanism; empty where no
/// closed form is implemented (revenue of multi and combinatorial).
struct Expectations {
  std::optional<double> revenue;
  std::optional<double> revenue_per_click;
  std::optional<double> social_welfare;
  std::optional<double> relevance;
  std::optional<double> min_social_welfare;
};

/// Requires static relevance. Without replacement is enumerated exactly over
/// ordered winner sequences (skipped above 10^6 sequences).
Expectations analytic_expectations(const Scenario& scenario,
                                   const metrics::Normalizers& norm);

struct ExperimentOptions {
  std::uint64_t trials = 500;
  std::uint64_t seed = 0;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
  bool keep_outcomes = false;
};

struct ExperimentReport {
  Scenario scenario;
  metrics::Normalizers normalizers;
  metrics::MetricsReport metrics;
  Expectations analytic;
  /// Totals over all trials.
  QueryCounters counters;
  /// Filled when keep_outcomes is set, in trial order.
  std::vector<AuctionOutcome> outcomes;
};

/// Trial j uses RNG streams (seed, j, t). Results do not depend on the
/// thread count. `providers` defaults to default_providers(scenario) and must
/// tolerate concurrent calls.
ExperimentReport run_experiment(const Scenario& scenario,
                                const ExperimentOptions& options,
                                const ProviderSet* providers = nullptr);

// ---------------------------------------------------------------------------
// Oracles

struct OracleReport {
  std::string name;
  double analytic = 0.0;
  double empirical = 0.0;
  double stderr_ = 0.0;
  bool pass = false;
};

/// pass iff |analytic - empirical| <= 3 * stderr (exact match when stderr is 0).
OracleReport make_report(std::string name, double analytic, double empirical,
                         double stderr_);

using SetProbabilityFn = std::function<double(
    std::span<const double>, std::span<const double>,
    std::span<const std::size_t>, std::size_t)>;

/// Top-k frequency of every k-subset over `samples` multi-allocation draws
/// against `formula` (set_win_probability by default), binomial stderr.
std::vector<OracleReport> oracle_set_frequencies(
    std::span<const double> q, std::span<const double> b, std::size_t k,
    std::uint64_t samples, std::uint64_t seed, SetProbabilityFn formula = {});

/// The report for one set S.
OracleReport oracle_win_frequency(std::span<const double> q,
                                  std::span<const double> b,
                                  std::span<const std::size_t> set,
                                  std::size_t k, std::uint64_t samples,
                                  std::uint64_t seed);

/// Monte Carlo E[1{i wins} z_i] of the single auction against the closed-form
/// Myerson payment, one report per ad.
std::vector<OracleReport> oracle_myerson(std::span<const double> q,
                                         std::span<const double> b,
                                         std::uint64_t samples,
                                         std::uint64_t seed);

/// Maximizes sum_i w_i ln x_i over the simplex by projected gradient ascent
/// with backtracking. Returns the maximizer.
std::vector<double> projected_gradient_log_welfare(std::span<const double> w,
                                                   int max_iter = 20000);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::vector<double> y);

/// `count` points drawn uniformly from the simplex of dimension `dim`.
std::vector<std::vector<double>> random_simplex_points(std::size_t dim,
                                                       std::size_t count,
                                                       std::uint64_t seed);

struct OptimalityCheck {
  double at_maximizer = 0.0;
  double best_random = 0.0;
  double gradient_optimum = 0.0;
  bool beats_random = false;
  bool matches_gradient = false;
};

/// log-LSW of lsw_maximizer against random simplex points and projected
/// gradient ascent (tolerance 1e-6).
OptimalityCheck check_lsw_optimality(std::span<const double> q,
                                     std::span<const double> v,
                                     std::size_t random_points,
                                     std::uint64_t seed);

/// Same for log-CLSW over candidate sets.
OptimalityCheck check_clsw_optimality(const SetScores& scores,
                                      std::span<const double> v,
                                      std::size_t random_points,
                                      std::uint64_t seed);

struct DsicResult {
  std::vector<double> grid;
  std::vector<double> utility;
  double truthful_utility = 0.0;
  double best_utility = 0.0;
  bool truthful = false;
};

/// 49 evenly spaced bids on [0, 2v] plus v itself, sorted, duplicates removed.
std::vector<double> dsic_grid(double value);

/// One segment of the scenario's mechanism replayed on `draws` shared noise
/// vectors for every bid of `ad` in `grid`. Utility per draw is
/// sum over the ad's slots of click_weight * (value - price). The verdict
/// holds when the truthful bid attains the maximum mean utility (ties within
/// 1e-12).
DsicResult dsic_probe(const Scenario& scenario, std::size_t ad,
                      std::span<const double> grid, std::uint64_t draws,
                      std::uint64_t seed);

struct IrResult {
  std::uint64_t draws = 0;
  std::uint64_t negative_utility = 0;
  std::uint64_t price_above_bid = 0;
  std::uint64_t loser_payments = 0;
};

/// Replays one truthful segment per draw and counts IR violations: winners
/// with negative utility, prices above the bid (skipped for combinatorial
/// under Allow) and nonzero payments by losers.
IrResult ir_sweep(const Scenario& scenario, std::uint64_t draws,
                  std::uint64_t seed);

/// One segment of the scenario's mechanism on explicit bids and noise.
SegmentRecord run_segment(const Scenario& scenario, std::span<const double> bids,
                          std::span<const double> q, const SetScores* scores,
                          const NoiseDraw& noise);

/// Heuristic set scores from the scenario's static relevance.
SetScores scenario_set_scores(const Scenario& scenario);

}  // namespace segauc::sim
