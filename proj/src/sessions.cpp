#include "segauc/sessions.hpp"

#include <fmt/format.h>

#include "segauc/sampling.hpp"

namespace segauc {

using providers::CountingRelevance;
using providers::CountingSetRelevance;
using providers::GenerationRequest;
using providers::RelevanceContext;

SetScores fetch_set_scores(const Scenario& scenario,
                           providers::SetRelevanceProvider& provider,
                           const RelevanceContext& ctx) {
  SetScores scores;
  scores.ads = scenario.ads.size();
  scores.k = static_cast<std::size_t>(scenario.slots);
  scores.sets = k_subsets(scores.ads, scores.k);
  scores.prominence.reserve(scores.sets.size());
  for (const auto& set : scores.sets) {
    std::vector<double> prom(set.size());
    for (std::size_t m = 0; m < set.size(); ++m) {
      prom[m] = provider.prominence(scenario.query, scenario.ads, set, m, ctx);
    }
    scores.prominence.push_back(std::move(prom));
  }
  return scores;
}

AuctionOutcome run_session(const Scenario& scenario, std::uint64_t seed,
                           std::uint64_t trial, const SessionProviders& p) {
  if (p.relevance == nullptr) {
    throw Error(ErrorCode::MissingRelevance, "session has no relevance provider");
  }
  const bool combinatorial = scenario.mechanism == Mechanism::Combinatorial;
  if (combinatorial && p.set_relevance == nullptr) {
    throw Error(ErrorCode::MissingSetScore,
                "combinatorial session needs a set relevance provider");
  }
  providers::StubGenerator stub;
  providers::GeneratorAdapter& generator =
      p.generator ? *p.generator : static_cast<providers::GeneratorAdapter&>(stub);

  const auto bids = scenario.bids();
  const std::size_t n = bids.size();
  const std::size_t T = static_cast<std::size_t>(scenario.segments);
  const NegativePaymentPolicy policy =
      scenario.combinatorial ? scenario.combinatorial->negative_payment
                             : NegativePaymentPolicy::ClampToZero;

  AuctionOutcome out;
  std::vector<std::string> texts;
  std::vector<unsigned char> taken(n, 0);

  for (std::size_t t = 0; t < T; ++t) {
    RngStream rng(seed, trial, t);
    const RelevanceContext ctx{t, texts};
    SegmentRecord rec;
    std::uint64_t relevance_calls = 0;

    if (combinatorial) {
      CountingSetRelevance counted(*p.set_relevance);
      const auto scores = fetch_set_scores(scenario, counted, ctx);
      relevance_calls = counted.calls();
      rec = combinatorial_auction(bids, scores, policy,
                                  draw_noise(rng, scores.sets.size()));
    } else {
      CountingRelevance counted(*p.relevance);
      std::vector<double> q(n);
      for (std::size_t i = 0; i < n; ++i) {
        q[i] = counted.relevance(scenario.query, scenario.ads[i], ctx);
      }
      relevance_calls = counted.calls();
      const auto noise = draw_noise(rng, n);
      switch (scenario.mechanism) {
        case Mechanism::SingleWithReplacement:
          rec = single_auction(bids, q, noise);
          break;
        case Mechanism::SingleWithoutReplacement:
          rec = single_auction(bids, q, noise, taken);
          taken[rec.winners.front()] = 1;
          break;
        case Mechanism::NaiveI:
          rec = naive_one_auction(bids, q, noise);
          break;
        case Mechanism::NaiveII:
          rec = naive_two_auction(bids, q, noise);
          break;
        case Mechanism::MultiAllocation:
          rec = multi_allocation_auction(
              bids, q, static_cast<std::size_t>(scenario.slots), noise);
          break;
        case Mechanism::Combinatorial:
          break;
      }
    }

    GenerationRequest request;
    request.query = scenario.query;
    request.prior_segments = texts;
    request.mode = rec.composition;
    request.segment = t;
    for (auto w : rec.winners) request.winners.push_back(&scenario.ads[w]);
    rec.text = generator.generate(request);
    rec.relevance_calls = relevance_calls;
    rec.generator_calls = 1;

    out.counters += QueryCounters{rec.relevance_calls, rec.generator_calls};
    texts.push_back(rec.text);
    out.segments.push_back(std::move(rec));
  }
  return out;
}

}  // namespace segauc
