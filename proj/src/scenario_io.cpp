#include "segauc/scenario_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

namespace segauc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw Error(ErrorCode::ParseError, msg);
}

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(fmt::format("unknown field '{}' in {}", key, where));
  }
}

const json& required(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    fail(fmt::format("missing field '{}' in {}", key, where));
  }
  return *it;
}

double as_number(const json& v, std::string_view what) {
  if (!v.is_number()) fail(fmt::format("{} must be a number", what));
  return v.get<double>();
}

std::string as_string(const json& v, std::string_view what) {
  if (!v.is_string()) fail(fmt::format("{} must be a string", what));
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, std::string_view what) {
  if (!v.is_array()) fail(fmt::format("{} must be an array", what));
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(as_number(x, what));
  return out;
}

std::int64_t as_integer(const json& v, std::string_view what) {
  if (!v.is_number_integer()) fail(fmt::format("{} must be an integer", what));
  return v.get<std::int64_t>();
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  reject_unknown(doc, "scenario",
                 {"query", "ads", "relevance", "T", "k", "mechanism", "trials",
                  "seed", "combinatorial"});
  Scenario s;
  s.query = as_string(required(doc, "query", "scenario"), "query");

  const auto& ads = required(doc, "ads", "scenario");
  if (!ads.is_array()) fail("ads must be an array");
  for (const auto& a : ads) {
    reject_unknown(a, "ad", {"id", "bid", "value", "document", "link"});
    Ad ad;
    ad.id = as_string(required(a, "id", "ad"), "ad.id");
    ad.bid = as_number(required(a, "bid", "ad"), "ad.bid");
    ad.value = a.contains("value") ? as_number(a["value"], "ad.value") : ad.bid;
    ad.document = a.contains("document")
                      ? as_string(a["document"], "ad.document")
                      : std::string{};
    ad.link = a.contains("link") ? as_string(a["link"], "ad.link")
                                 : std::string{};
    s.ads.push_back(std::move(ad));
  }

  const auto& rel = required(doc, "relevance", "scenario");
  reject_unknown(rel, "relevance", {"mode", "q", "delta"});
  auto mode = as_string(required(rel, "mode", "relevance"), "relevance.mode");
  if (mode == "static") {
    s.relevance_mode = RelevanceMode::Static;
  } else if (mode == "embedding") {
    s.relevance_mode = RelevanceMode::Embedding;
  } else {
    fail(fmt::format("unknown relevance mode '{}'", mode));
  }
  if (rel.contains("q")) s.relevance.q = as_numbers(rel["q"], "relevance.q");
  if (rel.contains("delta")) {
    s.relevance.delta = as_numbers(rel["delta"], "relevance.delta");
  }

  s.segments = static_cast<int>(as_integer(required(doc, "T", "scenario"), "T"));
  s.slots = static_cast<int>(as_integer(required(doc, "k", "scenario"), "k"));

  auto mech = as_string(required(doc, "mechanism", "scenario"), "mechanism");
  auto parsed = parse_mechanism(mech);
  if (!parsed) fail(fmt::format("unknown mechanism '{}'", mech));
  s.mechanism = *parsed;

  const auto& trials = required(doc, "trials", "scenario");
  if (!trials.is_number_unsigned() && !trials.is_number_integer()) {
    fail("trials must be an integer");
  }
  if (trials.is_number_integer() && trials.get<std::int64_t>() < 0) {
    fail("trials must be nonnegative");
  }
  s.trials = trials.get<std::uint64_t>();

  const auto& seed = required(doc, "seed", "scenario");
  if (!seed.is_number_integer()) fail("seed must be an integer");
  s.seed = seed.is_number_unsigned()
               ? seed.get<std::uint64_t>()
               : static_cast<std::uint64_t>(seed.get<std::int64_t>());

  if (doc.contains("combinatorial")) {
    const auto& c = doc["combinatorial"];
    reject_unknown(c, "combinatorial",
                   {"alpha", "beta", "negative_payment", "pairwise"});
    CombinatorialConfig cfg;
    if (c.contains("alpha")) cfg.alpha = as_number(c["alpha"], "alpha");
    if (c.contains("beta")) cfg.beta = as_number(c["beta"], "beta");
    if (c.contains("negative_payment")) {
      auto p = as_string(c["negative_payment"], "negative_payment");
      if (p == "clamp") {
        cfg.negative_payment = NegativePaymentPolicy::ClampToZero;
      } else if (p == "allow") {
        cfg.negative_payment = NegativePaymentPolicy::Allow;
      } else {
        fail(fmt::format("unknown negative_payment policy '{}'", p));
      }
    }
    if (c.contains("pairwise")) {
      const auto& rows = c["pairwise"];
      if (!rows.is_array()) fail("pairwise must be an array of arrays");
      for (const auto& row : rows) {
        cfg.pairwise.push_back(as_numbers(row, "pairwise row"));
      }
    }
    s.combinatorial = std::move(cfg);
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["query"] = s.query;
  doc["ads"] = json::array();
  for (const auto& ad : s.ads) {
    doc["ads"].push_back({{"id", ad.id},
                          {"bid", ad.bid},
                          {"value", ad.value},
                          {"document", ad.document},
                          {"link", ad.link}});
  }
  json rel;
  rel["mode"] = to_string(s.relevance_mode);
  if (!s.relevance.q.empty()) rel["q"] = s.relevance.q;
  if (!s.relevance.delta.empty()) rel["delta"] = s.relevance.delta;
  doc["relevance"] = rel;
  doc["T"] = s.segments;
  doc["k"] = s.slots;
  doc["mechanism"] = to_string(s.mechanism);
  doc["trials"] = s.trials;
  doc["seed"] = s.seed;
  if (s.combinatorial) {
    const auto& c = *s.combinatorial;
    json cj{{"alpha", c.alpha},
            {"beta", c.beta},
            {"negative_payment", to_string(c.negative_payment)}};
    if (!c.pairwise.empty()) cj["pairwise"] = c.pairwise;
    doc["combinatorial"] = cj;
  }
  return doc;
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(fmt::format("malformed JSON: {}", e.what()));
  }
  return scenario_from_json(doc);
}

std::string serialize_scenario(const Scenario& s) {
  return scenario_to_json(s).dump(2);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(fmt::format("cannot read scenario file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace segauc
