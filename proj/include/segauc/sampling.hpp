#pragma once

// Seeded Gumbel noise and perturbed scores.
//
// Stream derivation (stable interface): the generator for trial `t`, segment
// `s` under root seed `r` is xoshiro256** seeded by SplitMix64 from
//   key = mix(mix(mix(r) ^ t) ^ (s + 0x9E3779B97F4A7C15)),
// where mix is the SplitMix64 finalizer. Trials are the major index and
// segments the minor one, so any (trial, segment) stream can be rebuilt
// without replaying the others.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "segauc/core.hpp"

namespace segauc {

/// SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t x);

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t segment);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform_open();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t trial() const { return trial_; }
  std::uint64_t segment() const { return segment_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_;
  std::uint64_t trial_;
  std::uint64_t segment_;
};

/// -ln(-ln(u)), with u clamped into [2^-53, 1 - 2^-53].
double gumbel_from_uniform(double u);

double gumbel_draw(RngStream& rng);

/// `count` independent Gumbel(0,1) draws.
NoiseDraw draw_noise(RngStream& rng, std::size_t count);

/// q * b * e^eps; 0 whenever q * b == 0.
double perturbed_score(double q, double b, double eps);

/// ln(q) + ln(b) + eps, or -inf when q * b == 0. Orders participants exactly
/// as perturbed_score does, without overflow.
double log_score(double q, double b, double eps);

}  // namespace segauc
