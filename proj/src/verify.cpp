#include "segauc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <fmt/format.h>

#include "segauc/sampling.hpp"
#include "segauc/scenario_io.hpp"
#include "segauc/sessions.hpp"

namespace segauc {

using nlohmann::json;
using sim::OracleReport;

namespace {

json to_json(const OracleReport& r) {
  return {{"name", r.name},
          {"analytic", r.analytic},
          {"empirical", r.empirical},
          {"stderr", r.stderr_},
          {"pass", r.pass}};
}

OracleReport check(std::string name, double expected, double actual, bool pass) {
  return {std::move(name), expected, actual, 0.0, pass};
}

// Uniform on (lo, hi].
double uniform(RngStream& rng, double lo, double hi) {
  return hi - (hi - lo) * rng.uniform_open();
}

std::size_t pick(RngStream& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

struct Instance {
  std::vector<double> q;
  std::vector<double> b;
};

Instance random_instance(RngStream& rng, std::size_t n, double bid_hi) {
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    in.q.push_back(uniform(rng, 0.0, 1.0));
    in.b.push_back(uniform(rng, 0.0, bid_hi));
  }
  return in;
}

Scenario probe_scenario(const Instance& in, Mechanism m, int slots) {
  Scenario s;
  s.query = "probe";
  for (std::size_t i = 0; i < in.q.size(); ++i) {
    s.ads.push_back({fmt::format("ad{}", i), in.b[i], in.b[i], "", ""});
  }
  s.relevance.q = in.q;
  s.segments = 1;
  s.slots = slots;
  s.mechanism = m;
  if (m == Mechanism::Combinatorial) s.combinatorial = CombinatorialConfig{};
  return s;
}

std::filesystem::path scenario_dir() {
  return std::filesystem::path(SEGAUC_DATA_DIR).parent_path() / "scenarios";
}

std::vector<OracleReport> suite_alloc(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  for (const char* file : {"scenario1.json", "scenario2.json", "scenario3.json"}) {
    const auto s = load_scenario(scenario_dir() / file);
    const auto bids = s.bids();
    for (auto r : sim::oracle_set_frequencies(s.relevance.q, bids, 1,
                                              o.samples, o.seed)) {
      r.name = fmt::format("{} {}", file, r.name);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<OracleReport> suite_thm3(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  const std::size_t instances = (o.n || o.k) ? 1 : 20;
  for (std::size_t t = 0; t < instances; ++t) {
    RngStream rng(o.seed, t, 3);
    const std::size_t n = o.n.value_or(pick(rng, 2, 6));
    const std::size_t k = o.k.value_or(pick(rng, 1, std::min<std::size_t>(3, n - 1)));
    if (k == 0 || k > n) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("thm3 needs 1 <= k <= n, got n={} k={}", n, k));
    }
    const auto in = random_instance(rng, n, 1.0);
    std::vector<double> qb(n);
    for (std::size_t i = 0; i < n; ++i) qb[i] = in.q[i] * in.b[i];
    const std::vector<double> ones(n, 1.0);
    auto formula = o.set_probability ? o.set_probability
                                     : sim::SetProbabilityFn(analytic::set_win_probability);
    double total = 0.0;
    for (const auto& set : k_subsets(n, k)) total += formula(qb, ones, set, k);
    out.push_back(check(fmt::format("instance {} (n={}, k={}) sum of set probabilities", t, n, k),
                        1.0, total, std::abs(total - 1.0) <= 1e-9));
    for (auto r : sim::oracle_set_frequencies(qb, ones, k, o.samples,
                                              o.seed + t, formula)) {
      r.name = fmt::format("instance {} (n={}, k={}) {}", t, n, k, r.name);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<OracleReport> suite_myerson(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  const std::vector<double> ones{1.0, 1.0};
  const double sym = analytic::myerson_expected_payment(ones, ones, 0);
  const double target = std::log(2.0) - 0.5;
  out.push_back(check("symmetric two-ad payment", target, sym,
                      std::abs(sym - target) <= 1e-3));
  for (std::size_t t = 0; t < 50; ++t) {
    RngStream rng(o.seed, t, 4);
    const std::size_t n = pick(rng, 2, 6);
    const auto in = random_instance(rng, n, 2.0);
    for (auto r : sim::oracle_myerson(in.q, in.b, o.samples, o.seed + 100 + t)) {
      r.name = fmt::format("instance {} {}", t, r.name);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<OracleReport> suite_lsw(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  for (std::size_t t = 0; t < 20; ++t) {
    RngStream rng(o.seed, t, 5);
    const std::size_t n = pick(rng, 2, 8);
    const auto in = random_instance(rng, n, 2.0);
    const auto c = sim::check_lsw_optimality(in.q, in.b, 10'000, o.seed + t);
    out.push_back(check(fmt::format("LSW instance {} (n={}) vs random points", t, n),
                        c.at_maximizer, c.best_random, c.beats_random));
    out.push_back(check(fmt::format("LSW instance {} (n={}) vs projected gradient", t, n),
                        c.at_maximizer, c.gradient_optimum, c.matches_gradient));
  }
  for (std::size_t t = 0; t < 20; ++t) {
    RngStream rng(o.seed, t, 6);
    const std::size_t n = pick(rng, 2, 5);
    const std::size_t k = pick(rng, 1, 2);
    const auto in = random_instance(rng, n, 2.0);
    const auto scores = analytic::heuristic_set_scores(in.q, {}, 1.0, 0.0, k);
    const auto c = sim::check_clsw_optimality(scores, in.b, 10'000, o.seed + t);
    out.push_back(check(fmt::format("CLSW instance {} (n={}, k={}) vs random points", t, n, k),
                        c.at_maximizer, c.best_random, c.beats_random));
    out.push_back(check(fmt::format("CLSW instance {} (n={}, k={}) vs projected gradient", t, n, k),
                        c.at_maximizer, c.gradient_optimum, c.matches_gradient));
  }
  return out;
}

std::vector<OracleReport> suite_dsic(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  const std::uint64_t draws = std::max<std::uint64_t>(o.samples / 100, 1);
  const std::uint64_t ir_draws = std::max<std::uint64_t>(o.samples / 10, 1);
  const std::pair<Mechanism, int> mechanisms[] = {
      {Mechanism::SingleWithReplacement, 1},
      {Mechanism::MultiAllocation, 2},
      {Mechanism::NaiveII, 1},
      {Mechanism::Combinatorial, 2}};
  for (std::size_t t = 0; t < 10; ++t) {
    RngStream rng(o.seed, t, 7);
    const std::size_t n = pick(rng, 3, 5);
    const auto in = random_instance(rng, n, 2.0);
    const std::size_t ad = pick(rng, 0, n - 1);
    for (auto [m, k] : mechanisms) {
      const auto s = probe_scenario(in, m, k);
      const auto grid = sim::dsic_grid(s.ads[ad].value);
      const auto r = sim::dsic_probe(s, ad, grid, draws, o.seed + t);
      out.push_back(check(fmt::format("DSIC {} instance {} ad {}", to_string(m), t, ad),
                          r.best_utility, r.truthful_utility, r.truthful));
      const auto ir = sim::ir_sweep(s, ir_draws, o.seed + 1000 + t);
      const auto violations = ir.negative_utility + ir.price_above_bid + ir.loser_payments;
      out.push_back(check(fmt::format("IR {} instance {}", to_string(m), t), 0.0,
                          static_cast<double>(violations), violations == 0));
    }
  }
  return out;
}

std::vector<OracleReport> suite_counters(const VerifyOptions& o) {
  std::vector<OracleReport> out;
  auto s = load_scenario(scenario_dir() / "scenario1.json");
  const auto n = static_cast<double>(s.ads.size());
  for (Mechanism m : {Mechanism::SingleWithReplacement,
                      Mechanism::SingleWithoutReplacement, Mechanism::NaiveI,
                      Mechanism::NaiveII}) {
    s.mechanism = m;
    s.slots = 1;
    auto p = sim::default_providers(s);
    const auto outcome = run_session(s, o.seed, 0, {p.relevance.get(), nullptr, p.generator.get()});
    const double T = s.segments;
    out.push_back(check(fmt::format("{} relevance calls", to_string(m)), n * T,
                        static_cast<double>(outcome.counters.relevance_calls),
                        outcome.counters.relevance_calls == n * T));
    out.push_back(check(fmt::format("{} generator calls", to_string(m)), T,
                        static_cast<double>(outcome.counters.generator_calls),
                        outcome.counters.generator_calls == T));
  }
  s.mechanism = Mechanism::Combinatorial;
  s.slots = 2;
  s.combinatorial = CombinatorialConfig{};
  auto p = sim::default_providers(s);
  const auto outcome = run_session(
      s, o.seed, 0, {p.relevance.get(), p.set_relevance.get(), p.generator.get()});
  const double per_segment = 2.0 * static_cast<double>(binomial(s.ads.size(), 2));
  for (std::size_t t = 0; t < outcome.segments.size(); ++t) {
    const auto& seg = outcome.segments[t];
    out.push_back(check(fmt::format("combinatorial segment {} relevance calls", t),
                        per_segment, static_cast<double>(seg.relevance_calls),
                        seg.relevance_calls == per_segment));
    out.push_back(check(fmt::format("combinatorial segment {} generator calls", t), 1.0,
                        static_cast<double>(seg.generator_calls),
                        seg.generator_calls == 1));
  }
  return out;
}

using SuiteFn = std::vector<OracleReport> (*)(const VerifyOptions&);

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> r{
      {"alloc", suite_alloc},     {"thm3", suite_thm3},
      {"myerson", suite_myerson}, {"lsw", suite_lsw},
      {"dsic", suite_dsic},       {"counters", suite_counters}};
  return r;
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, fn] : registry()) v.push_back(name);
    return v;
  }();
  return names;
}

VerifyResult run_verify(const VerifyOptions& options) {
  std::vector<std::string> selected = options.suites;
  if (selected.empty()) selected = verify_suites();
  for (const auto& name : selected) {
    if (std::find(verify_suites().begin(), verify_suites().end(), name) ==
        verify_suites().end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown suite '{}'", name));
    }
  }

  VerifyResult result;
  result.pass = true;
  json suites = json::object();
  json failures = json::array();
  for (const auto& [name, fn] : registry()) {
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    const auto reports = fn(options);
    bool pass = true;
    json checks = json::array();
    for (const auto& r : reports) {
      checks.push_back(to_json(r));
      if (!r.pass) {
        pass = false;
        failures.push_back(fmt::format("{}: {}", name, r.name));
      }
    }
    suites[name] = {{"pass", pass}, {"checks", std::move(checks)}};
    result.pass = result.pass && pass;
  }
  result.report = {{"seed", options.seed},
                   {"samples", options.samples},
                   {"pass", result.pass},
                   {"failures", std::move(failures)},
                   {"suites", std::move(suites)}};
  return result;
}

}  // namespace segauc
