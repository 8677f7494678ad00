#include "segauc/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "segauc/analytic.hpp"
#include "segauc/scenario_io.hpp"
#include "segauc/sim.hpp"
#include "segauc/verify.hpp"

namespace segauc::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  std::string scenario;
  std::string mechanism;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  std::string transcripts;
  std::string embedding_endpoint;
  std::string embedding_path = "/embed";
  std::string embedding_model;
  std::string api_key_env;
  unsigned threads = 0;
};

/// Expands the mechanism selector into concrete scenarios. "table" gives the
/// comparison layout: the three single-slot mechanisms over T
/// segments plus multi-allocation packing T ads into one segment.
std::vector<Scenario> expand_runs(const Scenario& base, const std::string& selector) {
  std::vector<Scenario> runs;
  if (selector.empty()) return {base};
  auto with = [&](Mechanism m) {
    Scenario s = base;
    s.mechanism = m;
    if (is_single_winner(m)) s.slots = 1;
    if (m == Mechanism::Combinatorial && !s.combinatorial) {
      s.combinatorial = CombinatorialConfig{};
    }
    return s;
  };
  if (selector == "table") {
    for (Mechanism m : {Mechanism::SingleWithReplacement,
                        Mechanism::SingleWithoutReplacement, Mechanism::NaiveII}) {
      runs.push_back(with(m));
    }
    Scenario multi = with(Mechanism::MultiAllocation);
    multi.slots = base.segments;
    multi.segments = 1;
    if (!multi.relevance.delta.empty()) multi.relevance.delta.resize(1);
    runs.push_back(std::move(multi));
    return runs;
  }
  std::stringstream list(selector);
  std::string name;
  while (std::getline(list, name, ',')) {
    const auto m = parse_mechanism(name);
    if (!m) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown mechanism '{}'", name));
    }
    runs.push_back(with(*m));
  }
  return runs;
}

json metric_json(const metrics::Metric& m) {
  return {{"mean", m.mean}, {"stderr", m.stderr_}, {"normalizer", m.normalizer}};
}

json optional_json(const std::optional<double>& x) {
  return x ? json(*x) : json(nullptr);
}

json report_json(const sim::ExperimentReport& r, std::uint64_t seed) {
  const auto& m = r.metrics;
  return {
      {"mechanism", to_string(r.scenario.mechanism)},
      {"T", r.scenario.segments},
      {"k", r.scenario.slots},
      {"trials", m.trials},
      {"seed", seed},
      {"normalizers",
       {{"revenue_max", r.normalizers.revenue_max},
        {"revenue_per_click_max", r.normalizers.revenue_per_click_max},
        {"welfare_max", r.normalizers.welfare_max},
        {"relevance_max", r.normalizers.relevance_max},
        {"min_welfare_max", r.normalizers.min_welfare_max}}},
      {"metrics",
       {{"revenue", metric_json(m.revenue)},
        {"revenue_per_click", metric_json(m.revenue_per_click)},
        {"social_welfare", metric_json(m.social_welfare)},
        {"relevance", metric_json(m.relevance)},
        {"min_social_welfare", metric_json(m.min_social_welfare)}}},
      {"min_welfare_ad", r.scenario.ads.at(m.min_welfare_ad).id},
      {"analytic",
       {{"revenue", optional_json(r.analytic.revenue)},
        {"revenue_per_click", optional_json(r.analytic.revenue_per_click)},
        {"social_welfare", optional_json(r.analytic.social_welfare)},
        {"relevance", optional_json(r.analytic.relevance)},
        {"min_social_welfare", optional_json(r.analytic.min_social_welfare)}}},
      {"counters",
       {{"relevance_calls", r.counters.relevance_calls},
        {"generator_calls", r.counters.generator_calls}}},
  };
}

constexpr const char* kMetricNames[] = {"revenue", "social_welfare", "relevance",
                                        "min_social_welfare"};

std::string csv_from_json(const json& doc) {
  std::string out = "mechanism,metric,mean,stderr,normalizer,trials,seed\n";
  for (const auto& run : doc.at("runs")) {
    for (const char* name : kMetricNames) {
      const auto& m = run.at("metrics").at(name);
      out += fmt::format("{},{},{:.6g},{:.6g},{:.6g},{},{}\n",
                         run.at("mechanism").get<std::string>(), name,
                         m.at("mean").get<double>(), m.at("stderr").get<double>(),
                         m.at("normalizer").get<double>(),
                         run.at("trials").get<std::uint64_t>(),
                         run.at("seed").get<std::uint64_t>());
    }
  }
  return out;
}

json transcript_json(const sim::ExperimentReport& r, std::uint64_t trial,
                     const AuctionOutcome& o) {
  json segs = json::array();
  for (const auto& seg : o.segments) {
    segs.push_back({{"winners", winner_ids(seg, r.scenario.ads)},
                    {"prices", seg.prices},
                    {"text", seg.text}});
  }
  return {{"mechanism", to_string(r.scenario.mechanism)},
          {"trial", trial},
          {"segments", std::move(segs)}};
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, fmt::format("cannot write '{}'", path));
  f << text;
}

bool is_provider_error(ErrorCode c) {
  return c == ErrorCode::ServiceUnavailable || c == ErrorCode::AuthMissing ||
         c == ErrorCode::DimensionMismatch || c == ErrorCode::MissingRelevance;
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<Scenario> runs;
  try {
    Scenario base = load_scenario(o.scenario);
    if (o.trials) base.trials = *o.trials;
    if (o.seed) base.seed = *o.seed;
    runs = expand_runs(base, o.mechanism);
    bool invalid = false;
    for (const auto& s : runs) {
      for (const auto& v : check_scenario(s)) {
        err << fmt::format("{}: {}: {}\n", to_string(s.mechanism), to_string(v.code),
                           v.message);
        invalid = true;
      }
    }
    if (invalid) return kBadInput;
    for (const auto& s : runs) {
      for (const auto& w : scenario_warnings(s)) {
        err << fmt::format("warning: {}: {}\n", to_string(s.mechanism), w);
      }
    }
    if (o.format != "csv" && o.format != "json") {
      err << fmt::format("unknown format '{}'\n", o.format);
      return kBadInput;
    }
    if (base.relevance_mode == RelevanceMode::Embedding && o.embedding_endpoint.empty()) {
      err << "embedding relevance needs --embedding-endpoint\n";
      return kBadInput;
    }
  } catch (const Error& e) {
    err << fmt::format("{}: {}\n", to_string(e.code()), e.what());
    return kBadInput;
  }

  json doc{{"runs", json::array()}};
  std::string transcripts;
  try {
    std::unique_ptr<providers::HttpEmbeddingClient> client;
    std::unique_ptr<providers::EmbeddingCache> cache;
    if (!o.embedding_endpoint.empty()) {
      providers::EndpointConfig cfg;
      cfg.base_url = o.embedding_endpoint;
      cfg.path = o.embedding_path;
      cfg.model = o.embedding_model;
      cfg.api_key_env = o.api_key_env;
      client = std::make_unique<providers::HttpEmbeddingClient>(cfg);
      cache = std::make_unique<providers::EmbeddingCache>(*client);
    }
    for (const auto& s : runs) {
      sim::ProviderSet p = cache ? sim::embedding_providers(s, *cache)
                                 : sim::default_providers(s);
      sim::ExperimentOptions eo{s.trials, s.seed, o.threads, !o.transcripts.empty()};
      const auto report = sim::run_experiment(s, eo, &p);
      doc["runs"].push_back(report_json(report, s.seed));
      for (std::size_t t = 0; t < report.outcomes.size(); ++t) {
        transcripts += transcript_json(report, t, report.outcomes[t]).dump() + "\n";
      }
    }
  } catch (const Error& e) {
    err << fmt::format("{}: {}\n", to_string(e.code()), e.what());
    return is_provider_error(e.code()) ? kProviderFailure : kBadInput;
  }

  try {
    write_text(o.out, o.format == "csv" ? csv_from_json(doc) : doc.dump(2) + "\n", out);
    if (!o.transcripts.empty()) write_text(o.transcripts, transcripts, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kBadInput;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeOptions {
  std::string what;
  std::vector<double> q, b, v, x;
  std::string set = "all";
  std::size_t k = 1;
  std::size_t i = 0;
  std::optional<std::size_t> n;
  double alpha = 1.0;
  double beta = 0.0;
};

std::vector<double> ones_if_empty(std::vector<double> xs, std::size_t n) {
  if (xs.empty()) xs.assign(n, 1.0);
  return xs;
}

std::vector<std::size_t> parse_set(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    const auto v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    out.push_back(v);
  }
  return out;
}

std::string join(const std::vector<double>& xs, const char* spec) {
  std::string out;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (j > 0) out += ' ';
    out += fmt::format(fmt::runtime(spec), xs[j]);
  }
  return out;
}

int cmd_probe(const ProbeOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const std::size_t n = o.n.value_or(std::max({o.q.size(), o.b.size(), o.v.size()}));
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "no ads given (use --q, --b or --n)");
    const auto q = ones_if_empty(o.q, n);
    const auto b = ones_if_empty(o.b, n);
    if (q.size() != n || b.size() != n) {
      throw Error(ErrorCode::DimensionMismatch, "--q, --b and --n disagree on the ad count");
    }
    if (o.what == "softmax") {
      out << join(analytic::softmax_allocation(q, b).p, "{:.4f}") << "\n";
    } else if (o.what == "setwin") {
      if (o.set == "all") {
        double total = 0.0;
        for (double p : analytic::all_set_probabilities(q, b, o.k)) total += p;
        out << fmt::format("{:.6f}\n", total);
      } else {
        const auto s = parse_set(o.set);
        out << fmt::format("{:.6f}\n", analytic::set_win_probability(q, b, s, o.k));
      }
    } else if (o.what == "myerson") {
      out << fmt::format("{:.6f}\n", analytic::myerson_expected_payment(q, b, o.i));
    } else if (o.what == "lsw") {
      const auto v = o.v.empty() ? b : o.v;
      const analytic::AllocationDistribution x =
          o.x.empty() ? analytic::softmax_allocation(q, v)
                      : analytic::AllocationDistribution{o.x};
      if (!x.valid()) throw Error(ErrorCode::InvalidArgument, "--x is not a distribution");
      out << fmt::format("{:.6g} {:.6g}\n", analytic::log_lsw(x, q, v),
                         analytic::lsw(x, q, v));
    } else if (o.what == "lswmax") {
      const auto v = o.v.empty() ? b : o.v;
      out << join(analytic::lsw_maximizer(q, v).p, "{:.6g}") << "\n";
    } else if (o.what == "heuristic") {
      if (o.set == "all") throw Error(ErrorCode::InvalidArgument, "heuristic needs --S");
      const auto s = parse_set(o.set);
      const auto r = analytic::set_relevance_heuristic(q, {}, o.alpha, o.beta, s);
      out << fmt::format("{:.6g} {}\n", r.set_score, join(r.prominence, "{:.6g}"));
    } else {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown probe '{}'", o.what));
    }
  } catch (const Error& e) {
    err << fmt::format("{}: {}\n", to_string(e.code()), e.what());
    return kBadInput;
  } catch (const std::invalid_argument&) {
    err << "malformed --S\n";
    return kBadInput;
  } catch (const std::out_of_range&) {
    err << "malformed --S\n";
    return kBadInput;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// verify / report

int cmd_verify(VerifyOptions o, const std::string& path, std::ostream& out,
               std::ostream& err) {
  std::vector<std::string> split;
  for (const auto& s : o.suites) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) split.push_back(tok);
  }
  o.suites = split;
  VerifyResult r;
  try {
    r = run_verify(o);
  } catch (const Error& e) {
    err << fmt::format("{}: {}\n", to_string(e.code()), e.what());
    return kBadInput;
  }
  for (const auto& f : r.report.at("failures")) err << "FAIL " << f.get<std::string>() << "\n";
  write_text(path, r.report.dump(2) + "\n", out);
  return r.pass ? kOk : kFailed;
}

int cmd_report(const std::string& in, const std::string& path, std::ostream& out,
               std::ostream& err) {
  try {
    std::ifstream f(in);
    if (!f) throw Error(ErrorCode::ParseError, fmt::format("cannot read '{}'", in));
    json doc = json::parse(f);
    write_text(path, csv_from_json(doc), out);
  } catch (const json::exception& e) {
    err << "ParseError: " << e.what() << "\n";
    return kBadInput;
  } catch (const Error& e) {
    err << fmt::format("{}: {}\n", to_string(e.code()), e.what());
    return kBadInput;
  }
  return kOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segment auctions for ads in generated text"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and report metrics");
  run_cmd->add_option("--scenario", run.scenario, "scenario JSON file")->required();
  run_cmd->add_option("--mechanism", run.mechanism,
                      "mechanism name, comma list, or 'table'");
  run_cmd->add_option("--trials", run.trials, "override the trial count");
  run_cmd->add_option("--seed", run.seed, "override the root seed");
  run_cmd->add_option("--out", run.out, "output file (default stdout)");
  run_cmd->add_option("--format", run.format, "csv or json");
  run_cmd->add_option("--transcripts", run.transcripts, "per-trial JSON lines");
  run_cmd->add_option("--embedding-endpoint", run.embedding_endpoint,
                      "embedding service base URL");
  run_cmd->add_option("--embedding-path", run.embedding_path, "embedding request path");
  run_cmd->add_option("--embedding-model", run.embedding_model, "embedding model name");
  run_cmd->add_option("--api-key-env", run.api_key_env,
                      "environment variable holding the service token");
  run_cmd->add_option("--threads", run.threads, "worker threads (0 = all cores)");

  ProbeOptions probe;
  auto* probe_cmd = app.add_subcommand("probe", "evaluate analytic formulas");
  probe_cmd->add_option("what", probe.what,
                        "softmax | setwin | myerson | lsw | lswmax | heuristic")
      ->required();
  probe_cmd->add_option("--q", probe.q)->delimiter(',');
  probe_cmd->add_option("--b", probe.b)->delimiter(',');
  probe_cmd->add_option("--v", probe.v)->delimiter(',');
  probe_cmd->add_option("--x", probe.x)->delimiter(',');
  probe_cmd->add_option("--S", probe.set, "comma-separated ad indices or 'all'");
  probe_cmd->add_option("--k", probe.k);
  probe_cmd->add_option("--i", probe.i);
  probe_cmd->add_option("--n", probe.n, "ad count when --q/--b are omitted");
  probe_cmd->add_option("--alpha", probe.alpha);
  probe_cmd->add_option("--beta", probe.beta);

  VerifyOptions verify;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "run oracle suites");
  verify_cmd->add_option("--suite", verify.suites, "suite names (default all)");
  verify_cmd->add_option("--seed", verify.seed);
  verify_cmd->add_option("--n", verify.n);
  verify_cmd->add_option("--k", verify.k);
  verify_cmd->add_option("--samples", verify.samples);
  verify_cmd->add_option("--out", verify_out, "JSON report file (default stdout)");

  std::string report_in, report_out;
  auto* report_cmd = app.add_subcommand("report", "render a JSON run report as CSV");
  report_cmd->add_option("--in", report_in)->required();
  report_cmd->add_option("--out", report_out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kBadInput;
  }

  if (*run_cmd) return cmd_run(run, out, err);
  if (*probe_cmd) return cmd_probe(probe, out, err);
  if (*verify_cmd) return cmd_verify(verify, verify_out, out, err);
  return cmd_report(report_in, report_out, out, err);
}

}  // namespace segauc::cli
