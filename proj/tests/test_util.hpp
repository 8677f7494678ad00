#pragma once

#include <string>
#include <vector>

#include "segauc/core.hpp"
#include "segauc/scenario_io.hpp"

namespace segauc::test {

inline Scenario load_shipped(const std::string& name) {
  return load_scenario(std::string(SEGAUC_SCENARIO_DIR) + "/" + name);
}

inline Scenario make_scenario(const std::vector<double>& bids,
                              const std::vector<double>& q, int T = 1,
                              Mechanism m = Mechanism::SingleWithReplacement,
                              int k = 1) {
  Scenario s;
  s.query = "q";
  for (std::size_t i = 0; i < bids.size(); ++i) {
    s.ads.push_back({"ad" + std::to_string(i), bids[i], bids[i], "doc", "link"});
  }
  s.relevance.q = q;
  s.segments = T;
  s.slots = k;
  s.mechanism = m;
  if (m == Mechanism::Combinatorial) s.combinatorial = CombinatorialConfig{};
  return s;
}

}  // namespace segauc::test
