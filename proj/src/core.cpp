#include "segauc/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

namespace segauc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateAdId: return "DuplicateAdId";
    case ErrorCode::NegativeBid: return "NegativeBid";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::EmptyRelevance: return "EmptyRelevance";
    case ErrorCode::RelevanceSizeMismatch: return "RelevanceSizeMismatch";
    case ErrorCode::RelevanceOutOfRange: return "RelevanceOutOfRange";
    case ErrorCode::InvalidDelta: return "InvalidDelta";
    case ErrorCode::InvalidSegments: return "InvalidSegments";
    case ErrorCode::SlotCountExceedsAds: return "SlotCountExceedsAds";
    case ErrorCode::WithoutReplacementInfeasible:
      return "WithoutReplacementInfeasible";
    case ErrorCode::InvalidTrials: return "InvalidTrials";
    case ErrorCode::NoEligibleAds: return "NoEligibleAds";
    case ErrorCode::NotEnoughCompetitors: return "NotEnoughCompetitors";
    case ErrorCode::MissingSetScore: return "MissingSetScore";
    case ErrorCode::InsufficientSets: return "InsufficientSets";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::NonFiniteNoise: return "NonFiniteNoise";
    case ErrorCode::MissingRelevance: return "MissingRelevance";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::string out = "invalid scenario:";
  for (const auto& v : violations) {
    out += fmt::format("\n  {}: {}", to_string(v.code), v.message);
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidArgument
                               : violations.front().code,
            join_violations(violations)),
      violations_(std::move(violations)) {}

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::SingleWithReplacement: return "seg_with_replacement";
    case Mechanism::SingleWithoutReplacement: return "seg_without_replacement";
    case Mechanism::NaiveI: return "naive1";
    case Mechanism::NaiveII: return "naive2";
    case Mechanism::MultiAllocation: return "multi";
    case Mechanism::Combinatorial: return "combinatorial";
  }
  return "unknown";
}

std::optional<Mechanism> parse_mechanism(std::string_view name) {
  for (auto m : {Mechanism::SingleWithReplacement,
                 Mechanism::SingleWithoutReplacement, Mechanism::NaiveI,
                 Mechanism::NaiveII, Mechanism::MultiAllocation,
                 Mechanism::Combinatorial}) {
    if (name == to_string(m)) return m;
  }
  // Short aliases accepted on the command line.
  if (name == "repl") return Mechanism::SingleWithReplacement;
  if (name == "norepl") return Mechanism::SingleWithoutReplacement;
  if (name == "comb") return Mechanism::Combinatorial;
  return std::nullopt;
}

std::string_view to_string(RelevanceMode mode) {
  return mode == RelevanceMode::Static ? "static" : "embedding";
}

std::string_view to_string(NegativePaymentPolicy policy) {
  return policy == NegativePaymentPolicy::ClampToZero ? "clamp" : "allow";
}

std::vector<double> Scenario::bids() const {
  std::vector<double> out;
  out.reserve(ads.size());
  for (const auto& ad : ads) out.push_back(ad.bid);
  return out;
}

std::vector<double> Scenario::values() const {
  std::vector<double> out;
  out.reserve(ads.size());
  for (const auto& ad : ads) out.push_back(ad.value);
  return out;
}

std::vector<Violation> check_scenario(const Scenario& s) {
  std::vector<Violation> out;
  auto add = [&out](ErrorCode code, std::string msg) {
    out.push_back({code, std::move(msg)});
  };

  const std::size_t n = s.ads.size();
  if (n == 0) add(ErrorCode::NoEligibleAds, "scenario has no ads");

  std::unordered_set<std::string> seen;
  for (const auto& ad : s.ads) {
    if (!seen.insert(ad.id).second) {
      add(ErrorCode::DuplicateAdId, fmt::format("ad id '{}' repeated", ad.id));
    }
    if (!(ad.bid >= 0.0) || !std::isfinite(ad.bid)) {
      add(ErrorCode::NegativeBid,
          fmt::format("ad '{}' has bid {}", ad.id, ad.bid));
    }
    if (!(ad.value >= 0.0) || !std::isfinite(ad.value)) {
      add(ErrorCode::NegativeValue,
          fmt::format("ad '{}' has value {}", ad.id, ad.value));
    }
  }

  const auto& q = s.relevance.q;
  if (s.relevance_mode == RelevanceMode::Static) {
    if (q.empty()) {
      add(ErrorCode::EmptyRelevance, "static relevance requires q");
    } else if (q.size() != n) {
      add(ErrorCode::RelevanceSizeMismatch,
          fmt::format("{} relevance scores for {} ads", q.size(), n));
    } else {
      bool any_positive = false;
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] >= 0.0 && q[i] <= 1.0)) {
          add(ErrorCode::RelevanceOutOfRange,
              fmt::format("q[{}] = {} outside [0,1]", i, q[i]));
        }
        any_positive = any_positive || q[i] > 0.0;
      }
      if (!any_positive) {
        add(ErrorCode::EmptyRelevance, "every relevance score is zero");
      }
    }
  }

  const auto& delta = s.relevance.delta;
  if (!delta.empty()) {
    if (delta.size() != static_cast<std::size_t>(std::max(s.segments, 0))) {
      add(ErrorCode::InvalidDelta,
          fmt::format("{} segment factors for T = {}", delta.size(),
                      s.segments));
    }
    for (std::size_t t = 0; t < delta.size(); ++t) {
      if (!(delta[t] > 0.0) || !std::isfinite(delta[t])) {
        add(ErrorCode::InvalidDelta,
            fmt::format("delta[{}] = {} is not positive", t, delta[t]));
      }
      if (t > 0 && delta[t] > delta[t - 1]) {
        add(ErrorCode::InvalidDelta,
            fmt::format("delta increases at segment {}", t));
      }
    }
  }

  if (s.segments < 1) {
    add(ErrorCode::InvalidSegments,
        fmt::format("T = {} must be at least 1", s.segments));
  }
  if (s.slots < 1 || static_cast<std::size_t>(s.slots) > n) {
    add(ErrorCode::SlotCountExceedsAds,
        fmt::format("k = {} must lie in [1, {}]", s.slots, n));
  }
  if (s.mechanism == Mechanism::SingleWithoutReplacement &&
      s.segments > static_cast<int>(n)) {
    add(ErrorCode::WithoutReplacementInfeasible,
        fmt::format("T = {} segments without replacement needs at least {} "
                    "ads, have {}",
                    s.segments, s.segments, n));
  }
  if (s.trials < 1) add(ErrorCode::InvalidTrials, "trials must be positive");

  if (s.mechanism == Mechanism::Combinatorial && n > 20) {
    add(ErrorCode::InvalidArgument,
        "combinatorial auctions enumerate C(n,k) sets; n must be <= 20");
  }
  if (s.combinatorial) {
    const auto& c = *s.combinatorial;
    if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) {
      add(ErrorCode::InvalidArgument, "alpha and beta must be nonnegative");
    }
    if (!c.pairwise.empty()) {
      bool square = c.pairwise.size() == n;
      for (const auto& row : c.pairwise) square = square && row.size() == n;
      if (!square) {
        add(ErrorCode::InvalidArgument,
            fmt::format("pairwise relevance must be {}x{}", n, n));
      }
    } else if (c.beta > 0.0 && s.relevance_mode == RelevanceMode::Static) {
      add(ErrorCode::InvalidArgument,
          "beta > 0 with static relevance needs a pairwise matrix");
    }
  }
  return out;
}

std::vector<std::string> scenario_warnings(const Scenario& s) {
  std::vector<std::string> out;
  if (!is_single_winner(s.mechanism) &&
      static_cast<std::size_t>(s.slots) == s.ads.size()) {
    out.push_back(
        "k equals the number of ads: every ad wins every segment at price 0");
  }
  return out;
}

Scenario validate_scenario(Scenario s) {
  auto violations = check_scenario(s);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return s;
}

void check_finite(const NoiseDraw& noise) {
  for (std::size_t i = 0; i < noise.eps.size(); ++i) {
    if (!std::isfinite(noise.eps[i])) {
      throw Error(ErrorCode::NonFiniteNoise,
                  fmt::format("noise entry {} is not finite", i));
    }
  }
}

std::vector<std::string> winner_ids(const SegmentRecord& record,
                                    const std::vector<Ad>& ads) {
  std::vector<std::string> out;
  out.reserve(record.winners.size());
  for (auto w : record.winners) out.push_back(ads.at(w).id);
  return out;
}

}  // namespace segauc
