#include "segauc/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace segauc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t trial,
                     std::uint64_t segment)
    : seed_(seed), trial_(trial), segment_(segment) {
  std::uint64_t key = mix64(mix64(mix64(seed) ^ trial) ^ (segment + kGolden));
  for (auto& word : state_) {
    key += kGolden;
    word = mix64(key);
  }
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform_open() {
  // 53 random bits centred in their bucket: (m + 0.5) * 2^-53.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double gumbel_from_uniform(double u) {
  constexpr double lo = 0x1.0p-53;
  constexpr double hi = 1.0 - 0x1.0p-53;
  u = std::clamp(u, lo, hi);
  return -std::log(-std::log(u));
}

double gumbel_draw(RngStream& rng) {
  return gumbel_from_uniform(rng.uniform_open());
}

NoiseDraw draw_noise(RngStream& rng, std::size_t count) {
  NoiseDraw out;
  out.eps.resize(count);
  for (auto& e : out.eps) e = gumbel_draw(rng);
  return out;
}

double perturbed_score(double q, double b, double eps) {
  const double w = q * b;
  if (w == 0.0) return 0.0;
  return w * std::exp(eps);
}

double log_score(double q, double b, double eps) {
  if (q * b == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(q) + std::log(b) + eps;
}

}  // namespace segauc
