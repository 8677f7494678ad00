#pragma once

// Oracle suites behind the `verify` subcommand.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segauc/sim.hpp"

namespace segauc {

struct VerifyOptions {
  /// Any of verify_suites(); empty runs all of them.
  std::vector<std::string> suites;
  std::uint64_t seed = 5;
  /// Restrict the thm3 suite to one random instance of this shape.
  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  /// Monte Carlo draws for frequency and payment oracles. DSIC probes use
  /// samples/100 shared draws, the IR sweep samples/10.
  std::uint64_t samples = 1'000'000;
  /// Replaces set_win_probability in the thm3 suite (negative controls).
  sim::SetProbabilityFn set_probability;
};

struct VerifyResult {
  bool pass = false;
  nlohmann::json report;
};

const std::vector<std::string>& verify_suites();

/// Throws Error(InvalidArgument) for unknown suite names.
VerifyResult run_verify(const VerifyOptions& options);

}  // namespace segauc
