#pragma once

// Pluggable relevance and text-generation backends. The auction core only
// sees these interfaces, never a concrete AI service.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "segauc/core.hpp"

namespace segauc::providers {

struct RelevanceContext {
  std::size_t segment = 0;
  std::span<const std::string> prior_segments;
};

class RelevanceProvider {
 public:
  virtual ~RelevanceProvider() = default;
  /// q in [0,1] for `ad` under `query`. Independent providers ignore `ctx`.
  virtual double relevance(std::string_view query, const Ad& ad,
                           const RelevanceContext& ctx) = 0;
};

/// Per-member prominence q_{A,i} of a candidate set.
class SetRelevanceProvider {
 public:
  virtual ~SetRelevanceProvider() = default;
  virtual double prominence(std::string_view query, std::span<const Ad> ads,
                            std::span<const std::size_t> set,
                            std::size_t member, const RelevanceContext& ctx) = 0;
};

/// Counts calls before forwarding; one instance per session.
class CountingRelevance final : public RelevanceProvider {
 public:
  explicit CountingRelevance(RelevanceProvider& inner) : inner_(inner) {}
  double relevance(std::string_view query, const Ad& ad,
                   const RelevanceContext& ctx) override {
    ++calls_;
    return inner_.relevance(query, ad, ctx);
  }
  std::uint64_t calls() const { return calls_; }

 private:
  RelevanceProvider& inner_;
  std::uint64_t calls_ = 0;
};

class CountingSetRelevance final : public SetRelevanceProvider {
 public:
  explicit CountingSetRelevance(SetRelevanceProvider& inner) : inner_(inner) {}
  double prominence(std::string_view query, std::span<const Ad> ads,
                    std::span<const std::size_t> set, std::size_t member,
                    const RelevanceContext& ctx) override {
    ++calls_;
    return inner_.prominence(query, ads, set, member, ctx);
  }
  std::uint64_t calls() const { return calls_; }

 private:
  SetRelevanceProvider& inner_;
  std::uint64_t calls_ = 0;
};

/// Serves the scenario's tabulated q_i, scaled by delta^(t) when configured.
class StaticRelevance final : public RelevanceProvider {
 public:
  StaticRelevance(std::vector<std::string> ids, RelevanceVector relevance);

  double relevance(std::string_view query, const Ad& ad,
                   const RelevanceContext& ctx) override;

 private:
  std::unordered_map<std::string, std::size_t> index_;
  RelevanceVector relevance_;
};

/// Throws MissingRelevance if the scenario carries no relevance vector.
std::unique_ptr<RelevanceProvider> static_relevance(const Scenario& s);

/// Additive/pairwise set heuristic over fixed per-ad scores, scaled by
/// delta^(t).
class HeuristicSetRelevance final : public SetRelevanceProvider {
 public:
  HeuristicSetRelevance(std::vector<double> q,
                        std::vector<std::vector<double>> pairwise, double alpha,
                        double beta, std::vector<double> delta = {});

  double prominence(std::string_view query, std::span<const Ad> ads,
                    std::span<const std::size_t> set, std::size_t member,
                    const RelevanceContext& ctx) override;

 private:
  std::vector<double> q_;
  std::vector<std::vector<double>> pairwise_;
  double alpha_;
  double beta_;
  std::vector<double> delta_;
};

// ---------------------------------------------------------------------------
// Embeddings

/// Maps texts to fixed-dimension vectors.
class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual std::vector<std::vector<double>> embed(
      std::span<const std::string> texts) = 0;
};

struct EndpointConfig {
  /// scheme://host[:port]
  std::string base_url;
  std::string path;
  std::string model;
  /// Environment variable holding a bearer token; empty means none.
  std::string api_key_env;
  std::chrono::milliseconds timeout{10000};
  int attempts = 3;
  std::chrono::milliseconds backoff{200};
  int max_in_flight = 4;
};

/// Wire protocol: POST {"model": m, "texts": [..]} -> {"vectors": [[..]]}.
/// Retries transport errors and 5xx responses with exponential backoff, then
/// throws ServiceUnavailable.
class HttpEmbeddingClient final : public EmbeddingClient {
 public:
  explicit HttpEmbeddingClient(EndpointConfig config);
  ~HttpEmbeddingClient() override;

  std::vector<std::vector<double>> embed(
      std::span<const std::string> texts) override;

  /// Number of HTTP requests issued (including retries).
  std::uint64_t requests() const { return requests_.load(); }

 private:
  struct Limiter;
  EndpointConfig config_;
  std::unique_ptr<Limiter> limiter_;
  std::atomic<std::uint64_t> requests_{0};
};

/// FNV-1a, 64-bit.
std::uint64_t content_hash(std::string_view text);

/// Content-hash keyed cache in front of an EmbeddingClient; safe under
/// concurrent use.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(EmbeddingClient& client) : client_(client) {}

  std::vector<double> embed(const std::string& text);

  std::size_t size() const;

 private:
  struct Entry {
    std::string text;
    std::vector<double> vector;
  };
  EmbeddingClient& client_;
  mutable std::shared_mutex mutex_;
  std::unordered_multimap<std::uint64_t, Entry> entries_;
};

/// Cosine similarity; throws DimensionMismatch on unequal lengths. Zero
/// vectors have similarity 0.
double cosine(std::span<const double> a, std::span<const double> b);

/// q = clamp(cosine(embed(query), embed(ad.document)), 0, 1).
class EmbeddingRelevance final : public RelevanceProvider {
 public:
  explicit EmbeddingRelevance(EmbeddingCache& cache) : cache_(cache) {}

  double relevance(std::string_view query, const Ad& ad,
                   const RelevanceContext& ctx) override;

 private:
  EmbeddingCache& cache_;
};

std::unique_ptr<RelevanceProvider> embedding_relevance(EmbeddingCache& cache);

/// clamp(cosine(embed(a), embed(b)), 0, 1).
double output_similarity(const std::string& a, const std::string& b,
                         EmbeddingCache& cache);

// ---------------------------------------------------------------------------
// Generators

struct GenerationRequest {
  std::string_view query;
  std::span<const std::string> prior_segments;
  std::vector<const Ad*> winners;
  Composition mode = Composition::Integrated;
  std::size_t segment = 0;
};

class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Deterministic template text naming every winner and its link.
class StubGenerator final : public GeneratorAdapter {
 public:
  std::string generate(const GenerationRequest& request) override;

  /// The ad-free sentence that append mode starts with.
  static std::string base_sentence(const GenerationRequest& request);
};

std::unique_ptr<GeneratorAdapter> stub_generator();

/// Plain-text prompt templates with {prompt}, {advertiser}, {ad},
/// {previous_output} and indexed {advertisers[i]} / {ads[i]} placeholders.
struct PromptTemplates {
  std::string init_query;
  std::string rest_query;
  std::string multi_query;

  static PromptTemplates load(const std::filesystem::path& dir);
  static PromptTemplates shipped();
};

std::filesystem::path default_prompt_dir();

/// Replaces every {name} occurrence with its value; other braces are left
/// untouched.
std::string fill_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& values);

/// Sends one chat-completion request and returns the reply text.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Chat-completion style HTTP endpoint:
/// POST {"model", "messages": [{"role": "user", "content"}], "temperature",
/// "max_tokens"} -> {"choices": [{"message": {"content"}}]}.
class HttpChatTransport final : public ChatTransport {
 public:
  /// Throws AuthMissing if config.api_key_env is set but undefined.
  explicit HttpChatTransport(EndpointConfig config, double temperature = 1.0,
                             int max_tokens = 300);

  std::string complete(const std::string& prompt) override;

 private:
  EndpointConfig config_;
  std::string api_key_;
  double temperature_;
  int max_tokens_;
};

/// Plays back recorded replies in order and keeps the prompts it received.
class RecordedTransport final : public ChatTransport {
 public:
  explicit RecordedTransport(std::vector<std::string> replies)
      : replies_(std::move(replies)) {}

  std::string complete(const std::string& prompt) override;

  const std::vector<std::string>& prompts() const { return prompts_; }

 private:
  std::vector<std::string> replies_;
  std::vector<std::string> prompts_;
  std::size_t next_ = 0;
};

/// Fills the shipped prompt templates and issues one transport call per
/// segment.
class RemoteGenerator final : public GeneratorAdapter {
 public:
  RemoteGenerator(PromptTemplates templates,
                  std::unique_ptr<ChatTransport> transport)
      : templates_(std::move(templates)), transport_(std::move(transport)) {}

  std::string generate(const GenerationRequest& request) override;

  /// The prompt generate() would send, without sending it.
  std::string build_prompt(const GenerationRequest& request) const;

 private:
  PromptTemplates templates_;
  std::unique_ptr<ChatTransport> transport_;
  std::mutex mutex_;
};

/// Credentials are read from config.api_key_env before anything else; a
/// missing variable throws AuthMissing without touching the network.
std::unique_ptr<GeneratorAdapter> remote_generator(EndpointConfig config,
                                                   PromptTemplates templates);

}  // namespace segauc::providers
