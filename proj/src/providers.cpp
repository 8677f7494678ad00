#include "segauc/providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

namespace segauc::providers {

using nlohmann::json;

StaticRelevance::StaticRelevance(std::vector<std::string> ids,
                                 RelevanceVector relevance)
    : relevance_(std::move(relevance)) {
  for (std::size_t i = 0; i < ids.size(); ++i) index_.emplace(ids[i], i);
}

double StaticRelevance::relevance(std::string_view /*query*/, const Ad& ad,
                                  const RelevanceContext& ctx) {
  auto it = index_.find(ad.id);
  if (it == index_.end() || it->second >= relevance_.q.size()) {
    throw Error(ErrorCode::MissingRelevance,
                fmt::format("no relevance score for ad '{}'", ad.id));
  }
  return relevance_.q[it->second] * relevance_.segment_factor(ctx.segment);
}

std::unique_ptr<RelevanceProvider> static_relevance(const Scenario& s) {
  if (s.relevance.q.empty()) {
    throw Error(ErrorCode::MissingRelevance,
                "scenario carries no static relevance vector");
  }
  std::vector<std::string> ids;
  for (const auto& ad : s.ads) ids.push_back(ad.id);
  return std::make_unique<StaticRelevance>(std::move(ids), s.relevance);
}

HeuristicSetRelevance::HeuristicSetRelevance(
    std::vector<double> q, std::vector<std::vector<double>> pairwise,
    double alpha, double beta, std::vector<double> delta)
    : q_(std::move(q)),
      pairwise_(std::move(pairwise)),
      alpha_(alpha),
      beta_(beta),
      delta_(std::move(delta)) {}

double HeuristicSetRelevance::prominence(std::string_view /*query*/,
                                         std::span<const Ad> /*ads*/,
                                         std::span<const std::size_t> set,
                                         std::size_t member,
                                         const RelevanceContext& ctx) {
  double solo = 0.0;
  for (auto i : set) solo += q_.at(i);
  double pairs = 0.0;
  if (beta_ > 0.0) {
    for (auto i : set) {
      for (auto j : set) {
        if (i != j) pairs += pairwise_.at(i).at(j);
      }
    }
  }
  const double set_score = alpha_ * solo + beta_ * pairs;
  const double share =
      solo > 0.0 ? q_.at(set[member]) / solo : 1.0 / static_cast<double>(set.size());
  const double factor = ctx.segment < delta_.size() ? delta_[ctx.segment] : 1.0;
  return set_score * share * factor;
}

// ---------------------------------------------------------------------------

struct HttpEmbeddingClient::Limiter {
  explicit Limiter(int n) : slots(std::clamp(n, 1, 64)) {}
  std::counting_semaphore<64> slots;
};

namespace {

httplib::Headers auth_headers(const std::string& api_key) {
  httplib::Headers h;
  if (!api_key.empty()) h.emplace("Authorization", "Bearer " + api_key);
  return h;
}

std::string read_api_key(const EndpointConfig& config) {
  if (config.api_key_env.empty()) return {};
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::AuthMissing,
                fmt::format("environment variable {} is not set",
                            config.api_key_env));
  }
  return key;
}

// POSTs `body`, retrying transport failures and 5xx responses.
json post_with_retries(const EndpointConfig& config, const std::string& api_key,
                       const json& body, std::atomic<std::uint64_t>* counter) {
  std::string last_error = "no attempt made";
  auto delay = config.backoff;
  const int attempts = std::max(config.attempts, 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(config.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    if (counter) ++*counter;
    auto res = client.Post(config.path, auth_headers(api_key), body.dump(),
                           "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ServiceUnavailable,
                  fmt::format("{}{} answered HTTP {}", config.base_url,
                              config.path, res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ServiceUnavailable,
                  fmt::format("malformed response: {}", e.what()));
    }
  }
  throw Error(ErrorCode::ServiceUnavailable,
              fmt::format("{}{} failed after {} attempts: {}", config.base_url,
                          config.path, attempts, last_error));
}

}  // namespace

HttpEmbeddingClient::HttpEmbeddingClient(EndpointConfig config)
    : config_(std::move(config)),
      limiter_(std::make_unique<Limiter>(config_.max_in_flight)) {}

HttpEmbeddingClient::~HttpEmbeddingClient() = default;

std::vector<std::vector<double>> HttpEmbeddingClient::embed(
    std::span<const std::string> texts) {
  const auto api_key = read_api_key(config_);
  json body{{"texts", json::array()}};
  if (!config_.model.empty()) body["model"] = config_.model;
  for (const auto& t : texts) body["texts"].push_back(t);

  limiter_->slots.acquire();
  json reply;
  try {
    reply = post_with_retries(config_, api_key, body, &requests_);
  } catch (...) {
    limiter_->slots.release();
    throw;
  }
  limiter_->slots.release();

  if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
      reply["vectors"].size() != texts.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("expected {} vectors in embedding response",
                            texts.size()));
  }
  std::vector<std::vector<double>> out;
  for (const auto& v : reply["vectors"]) {
    out.push_back(v.get<std::vector<double>>());
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding service returned vectors of different dimension");
    }
  }
  return out;
}

std::uint64_t content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> EmbeddingCache::embed(const std::string& text) {
  const auto key = content_hash(text);
  {
    std::shared_lock lock(mutex_);
    auto [lo, hi] = entries_.equal_range(key);
    for (auto it = lo; it != hi; ++it) {
      if (it->second.text == text) return it->second.vector;
    }
  }
  std::string one[] = {text};
  auto vectors = client_.embed(one);
  if (vectors.size() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "expected exactly one embedding");
  }
  std::unique_lock lock(mutex_);
  auto [lo, hi] = entries_.equal_range(key);
  for (auto it = lo; it != hi; ++it) {
    if (it->second.text == text) return it->second.vector;
  }
  entries_.emplace(key, Entry{text, vectors.front()});
  return vectors.front();
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("cosine of vectors with {} and {} entries",
                            a.size(), b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double EmbeddingRelevance::relevance(std::string_view query, const Ad& ad,
                                     const RelevanceContext& /*ctx*/) {
  const auto qv = cache_.embed(std::string(query));
  const auto av = cache_.embed(ad.document);
  return std::clamp(cosine(qv, av), 0.0, 1.0);
}

std::unique_ptr<RelevanceProvider> embedding_relevance(EmbeddingCache& cache) {
  return std::make_unique<EmbeddingRelevance>(cache);
}

double output_similarity(const std::string& a, const std::string& b,
                         EmbeddingCache& cache) {
  return std::clamp(cosine(cache.embed(a), cache.embed(b)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

std::string StubGenerator::base_sentence(const GenerationRequest& request) {
  return fmt::format("Segment {} answers: {}", request.segment + 1,
                     request.query);
}

std::string StubGenerator::generate(const GenerationRequest& request) {
  const auto base = base_sentence(request);
  if (request.winners.empty()) return base;
  if (request.mode == Composition::Append) {
    std::string out = base;
    for (const Ad* ad : request.winners) {
      out += fmt::format(" [Sponsored] {} {} ({})", ad->id, ad->document,
                         ad->link);
    }
    return out;
  }
  std::string names;
  for (std::size_t i = 0; i < request.winners.size(); ++i) {
    const Ad* ad = request.winners[i];
    if (i > 0) names += i + 1 == request.winners.size() ? " and " : ", ";
    names += fmt::format("{} ({})", ad->id, ad->link);
  }
  return fmt::format("Segment {} weaves in {} while answering: {}",
                     request.segment + 1, names, request.query);
}

std::unique_ptr<GeneratorAdapter> stub_generator() {
  return std::make_unique<StubGenerator>();
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ParseError,
                fmt::format("cannot read '{}'", path.string()));
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::filesystem::path default_prompt_dir() {
  if (const char* dir = std::getenv("SEGAUC_PROMPT_DIR"); dir && *dir) {
    return dir;
  }
  return std::filesystem::path(SEGAUC_DATA_DIR) / "prompts";
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  return {read_file(dir / "init_query.txt"), read_file(dir / "rest_query.txt"),
          read_file(dir / "multi_query.txt")};
}

PromptTemplates PromptTemplates::shipped() { return load(default_prompt_dir()); }

std::string fill_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) break;
    const auto name = tmpl.substr(open + 1, close - open - 1);
    out.append(tmpl.substr(pos, open - pos));
    auto it = std::find_if(values.begin(), values.end(),
                           [&](const auto& kv) { return kv.first == name; });
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

HttpChatTransport::HttpChatTransport(EndpointConfig config, double temperature,
                                     int max_tokens)
    : config_(std::move(config)),
      api_key_(read_api_key(config_)),
      temperature_(temperature),
      max_tokens_(max_tokens) {}

std::string HttpChatTransport::complete(const std::string& prompt) {
  json body{{"model", config_.model},
            {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", temperature_},
            {"max_tokens", max_tokens_}};
  auto reply = post_with_retries(config_, api_key_, body, nullptr);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ServiceUnavailable,
                fmt::format("unexpected chat response: {}", e.what()));
  }
}

std::string RecordedTransport::complete(const std::string& prompt) {
  prompts_.push_back(prompt);
  if (next_ >= replies_.size()) {
    throw Error(ErrorCode::ServiceUnavailable, "recorded replies exhausted");
  }
  return replies_[next_++];
}

std::string RemoteGenerator::build_prompt(const GenerationRequest& request) const {
  const std::string prompt(request.query);
  if (request.mode == Composition::Append || request.winners.empty()) {
    return prompt;
  }
  if (request.winners.size() == 1) {
    const Ad& ad = *request.winners.front();
    if (request.prior_segments.empty()) {
      return fill_template(templates_.init_query,
                           {{"prompt", prompt},
                            {"advertiser", ad.id},
                            {"ad", ad.document}});
    }
    return fill_template(templates_.rest_query,
                         {{"previous_output", request.prior_segments.back()},
                          {"advertiser", ad.id},
                          {"ad", ad.document}});
  }
  std::vector<std::pair<std::string, std::string>> values{{"prompt", prompt}};
  for (std::size_t i = 0; i < request.winners.size(); ++i) {
    const auto needle = fmt::format("advertisers[{}]", i);
    if (templates_.multi_query.find("{" + needle + "}") == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("multi-ad template has no slot for winner {}", i));
    }
    values.emplace_back(needle, request.winners[i]->id);
    values.emplace_back(fmt::format("ads[{}]", i), request.winners[i]->document);
  }
  auto out = fill_template(templates_.multi_query, values);
  if (out.find("{advertisers[") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "multi-ad template expects more winners than were selected");
  }
  return out;
}

std::string RemoteGenerator::generate(const GenerationRequest& request) {
  const auto prompt = build_prompt(request);
  std::string reply;
  {
    std::lock_guard lock(mutex_);
    reply = transport_->complete(prompt);
  }
  if (request.mode == Composition::Append) {
    for (const Ad* ad : request.winners) reply += " " + ad->document;
  }
  return reply;
}

std::unique_ptr<GeneratorAdapter> remote_generator(EndpointConfig config,
                                                   PromptTemplates templates) {
  auto transport = std::make_unique<HttpChatTransport>(std::move(config));
  return std::make_unique<RemoteGenerator>(std::move(templates),
                                           std::move(transport));
}

}  // namespace segauc::providers
