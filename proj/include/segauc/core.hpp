#pragma once

// Domain types shared by every auction module.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace segauc {

enum class ErrorCode {
  DuplicateAdId,
  NegativeBid,
  NegativeValue,
  EmptyRelevance,
  RelevanceSizeMismatch,
  RelevanceOutOfRange,
  InvalidDelta,
  InvalidSegments,
  SlotCountExceedsAds,
  WithoutReplacementInfeasible,
  InvalidTrials,
  NoEligibleAds,
  NotEnoughCompetitors,
  MissingSetScore,
  InsufficientSets,
  DegenerateDenominator,
  NonFiniteNoise,
  MissingRelevance,
  ServiceUnavailable,
  DimensionMismatch,
  AuthMissing,
  ParseError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string message;
};

/// Thrown by validate_scenario; carries every violated invariant, not just
/// the first one found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept {
    return violations_;
  }

 private:
  std::vector<Violation> violations_;
};

struct Ad {
  std::string id;
  double bid = 0.0;
  /// Private per-click value. Scenario files default it to the bid.
  double value = 0.0;
  std::string document;
  std::string link;

  bool operator==(const Ad&) const = default;
};

/// Per-ad relevance q_i, optionally scaled per segment by delta[t].
struct RelevanceVector {
  std::vector<double> q;
  /// Empty means all-ones.
  std::vector<double> delta;

  double segment_factor(std::size_t segment) const {
    return segment < delta.size() ? delta[segment] : 1.0;
  }

  bool operator==(const RelevanceVector&) const = default;
};

enum class Mechanism {
  SingleWithReplacement,
  SingleWithoutReplacement,
  NaiveI,
  NaiveII,
  MultiAllocation,
  Combinatorial,
};

std::string_view to_string(Mechanism m);
std::optional<Mechanism> parse_mechanism(std::string_view name);

/// True for mechanisms that pick exactly one ad per segment.
constexpr bool is_single_winner(Mechanism m) {
  return m != Mechanism::MultiAllocation && m != Mechanism::Combinatorial;
}

enum class RelevanceMode { Static, Embedding };

std::string_view to_string(RelevanceMode mode);

enum class NegativePaymentPolicy { ClampToZero, Allow };

std::string_view to_string(NegativePaymentPolicy policy);

struct CombinatorialConfig {
  double alpha = 1.0;
  double beta = 0.0;
  NegativePaymentPolicy negative_payment = NegativePaymentPolicy::ClampToZero;
  /// Optional n x n ad-to-ad relevance; required when beta > 0 with static
  /// relevance.
  std::vector<std::vector<double>> pairwise;

  bool operator==(const CombinatorialConfig&) const = default;
};

struct Scenario {
  std::string query;
  std::vector<Ad> ads;
  RelevanceMode relevance_mode = RelevanceMode::Static;
  RelevanceVector relevance;
  int segments = 1;
  int slots = 1;
  Mechanism mechanism = Mechanism::SingleWithReplacement;
  std::uint64_t trials = 500;
  std::uint64_t seed = 0;
  std::optional<CombinatorialConfig> combinatorial;

  std::size_t ad_count() const { return ads.size(); }
  /// Winners per segment: 1 for single-winner mechanisms, `slots` otherwise.
  std::size_t winners_per_segment() const {
    return is_single_winner(mechanism) ? 1 : static_cast<std::size_t>(slots);
  }
  std::vector<double> bids() const;
  std::vector<double> values() const;

  bool operator==(const Scenario&) const = default;
};

/// Returns every violated invariant; empty means the scenario is valid.
std::vector<Violation> check_scenario(const Scenario& s);

/// Non-fatal observations (e.g. multi-allocation with k = n prices at zero).
std::vector<std::string> scenario_warnings(const Scenario& s);

/// Returns the scenario unchanged or throws ValidationError.
Scenario validate_scenario(Scenario s);

/// One Gumbel(0,1) perturbation per participant (ad or candidate set).
struct NoiseDraw {
  std::vector<double> eps;

  std::size_t size() const { return eps.size(); }
  double operator[](std::size_t i) const { return eps[i]; }

  bool operator==(const NoiseDraw&) const = default;
};

/// Throws NonFiniteNoise if any entry is not finite.
void check_finite(const NoiseDraw& noise);

enum class Composition { Integrated, Append };

inline constexpr std::size_t kNoSet = std::numeric_limits<std::size_t>::max();

struct SegmentRecord {
  /// Ad indices, highest perturbed score first.
  std::vector<std::size_t> winners;
  /// Per-click price, parallel to winners.
  std::vector<double> prices;
  /// Click-through proxy used for per-impression accounting, parallel to
  /// winners: q_i^(t) for per-ad mechanisms, q_{A*,i} for combinatorial.
  std::vector<double> click_weights;
  NoiseDraw noise;
  /// ln(score) per participant; -inf marks ineligible entries.
  std::vector<double> log_scores;
  /// Index of the winning candidate set (combinatorial only).
  std::size_t winning_set = kNoSet;
  Composition composition = Composition::Integrated;
  std::uint64_t relevance_calls = 0;
  std::uint64_t generator_calls = 0;
  std::string text;

  bool operator==(const SegmentRecord&) const = default;
};

struct QueryCounters {
  std::uint64_t relevance_calls = 0;
  std::uint64_t generator_calls = 0;

  QueryCounters& operator+=(const QueryCounters& o) {
    relevance_calls += o.relevance_calls;
    generator_calls += o.generator_calls;
    return *this;
  }
  bool operator==(const QueryCounters&) const = default;
};

struct AuctionOutcome {
  std::vector<SegmentRecord> segments;
  QueryCounters counters;

  bool operator==(const AuctionOutcome&) const = default;
};

/// Winner ids of one segment, in score order.
std::vector<std::string> winner_ids(const SegmentRecord& record,
                                    const std::vector<Ad>& ads);

}  // namespace segauc
