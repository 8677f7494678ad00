#pragma once

// Multi-segment sessions: one auction per segment, relevance fetched through
// the provider interfaces and one generator call per segment.

#include <cstdint>

#include "segauc/core.hpp"
#include "segauc/mechanisms.hpp"
#include "segauc/providers.hpp"

namespace segauc {

struct SessionProviders {
  providers::RelevanceProvider* relevance = nullptr;
  /// Required for the combinatorial mechanism only.
  providers::SetRelevanceProvider* set_relevance = nullptr;
  /// Defaults to the stub generator when null.
  providers::GeneratorAdapter* generator = nullptr;
};

/// Runs every segment of trial `trial`. Segment t draws its noise from
/// RngStream(seed, trial, t): n values for per-ad mechanisms, C(n, k) for the
/// combinatorial one (one per set, in k_subsets order).
AuctionOutcome run_session(const Scenario& scenario, std::uint64_t seed,
                           std::uint64_t trial, const SessionProviders& p);

/// Candidate-set scores for one segment, pulled from `provider` (k calls per
/// set).
SetScores fetch_set_scores(const Scenario& scenario,
                           providers::SetRelevanceProvider& provider,
                           const providers::RelevanceContext& ctx);

}  // namespace segauc
