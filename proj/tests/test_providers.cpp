#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include <httplib.h>

#include "segauc/providers.hpp"
#include "test_util.hpp"

using namespace segauc;
using namespace segauc::providers;
using nlohmann::json;

namespace {

// Embedding service double: fixed vectors per text, optional leading 500s.
class MockEmbeddings {
 public:
  MockEmbeddings() {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      if (failures_left_ > 0) {
        --failures_left_;
        res.status = 500;
        return;
      }
      const auto body = json::parse(req.body);
      json vectors = json::array();
      for (const auto& t : body.at("texts")) {
        auto it = table_.find(t.get<std::string>());
        vectors.push_back(it == table_.end() ? std::vector<double>{1, 1, 1} : it->second);
      }
      res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEmbeddings() {
    server_.stop();
    thread_.join();
  }

  EndpointConfig config() const {
    EndpointConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.path = "/embed";
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(2000);
    return c;
  }

  std::map<std::string, std::vector<double>> table_;
  std::atomic<int> hits_{0};
  std::atomic<int> failures_left_{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

Ad ad_with(const std::string& id, const std::string& doc) {
  return {id, 1.0, 1.0, doc, "https://" + id + ".example"};
}

}  // namespace

TEST_CASE("static relevance") {
  auto s = test::load_shipped("scenario1.json");
  auto p = static_relevance(s);
  const std::string prior[] = {"something earlier"};
  CHECK(p->relevance("x", s.ads[1], {0, {}}) == 0.87);
  CHECK(p->relevance("other", s.ads[1], {2, prior}) == 0.87);
  s.relevance.q[0] = 0.8;
  s.relevance.delta = {1.0, 0.5, 0.25};
  p = static_relevance(s);
  CHECK(p->relevance("x", s.ads[0], {1, {}}) == doctest::Approx(0.4));
  CHECK_THROWS_AS(p->relevance("x", ad_with("ghost", ""), {0, {}}), Error);
  s.relevance.q.clear();
  CHECK_THROWS_AS(static_relevance(s), Error);
}

TEST_CASE("counting decorators") {
  const auto s = test::load_shipped("scenario1.json");
  auto p = static_relevance(s);
  CountingRelevance c(*p);
  for (const auto& ad : s.ads) c.relevance("q", ad, {});
  CHECK(c.calls() == 4);
}

TEST_CASE("heuristic set relevance") {
  HeuristicSetRelevance h({.36, .87, .31, .26}, {}, 1.0, 0.0, {1.0, 0.5});
  const std::size_t set[] = {0, 1};
  CHECK(h.prominence("q", {}, set, 1, {0, {}}) == doctest::Approx(0.87));
  CHECK(h.prominence("q", {}, set, 0, {1, {}}) == doctest::Approx(0.18));
}

TEST_CASE("cosine") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{0.5, std::sqrt(3.0) / 2};
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(a, b) == 0.0);
  CHECK(cosine(a, c) == doctest::Approx(0.5));
  CHECK(cosine(a, std::vector<double>{0, 0}) == 0.0);
  CHECK_THROWS_AS(cosine(a, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("embedding relevance through a mock service") {
  MockEmbeddings mock;
  mock.table_["query"] = {1, 0, 0};
  mock.table_["same"] = {2, 0, 0};
  mock.table_["orth"] = {0, 3, 0};
  mock.table_["opposite"] = {-1, 0, 0};
  mock.table_["mixed"] = {1, 2, 2};
  mock.table_["sixty"] = {0.5, std::sqrt(3.0) / 2, 0};
  HttpEmbeddingClient client(mock.config());
  EmbeddingCache cache(client);
  auto rel = embedding_relevance(cache);

  CHECK(rel->relevance("query", ad_with("a", "same"), {}) == doctest::Approx(1.0));
  CHECK(rel->relevance("query", ad_with("b", "orth"), {}) == 0.0);
  CHECK(rel->relevance("query", ad_with("c", "opposite"), {}) == 0.0);
  CHECK(rel->relevance("query", ad_with("d", "mixed"), {}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(rel->relevance("query", ad_with("e", "query"), {}) == doctest::Approx(1.0));
  CHECK(output_similarity("query", "sixty", cache) == doctest::Approx(0.5));
  CHECK(output_similarity("query", "orth", cache) == 0.0);

  const auto before = client.requests();
  CHECK(rel->relevance("query", ad_with("d", "mixed"), {}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(client.requests() == before);
  CHECK(cache.size() == 6);
}

TEST_CASE("embedding client retries then fails loudly") {
  MockEmbeddings mock;
  HttpEmbeddingClient client(mock.config());
  const std::string text[] = {"x"};
  mock.failures_left_ = 2;
  CHECK(client.embed(text).size() == 1);
  CHECK(mock.hits_ == 3);

  mock.failures_left_ = 5;
  try {
    client.embed(text);
    FAIL("expected ServiceUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ServiceUnavailable);
  }

  EndpointConfig dead = mock.config();
  dead.base_url = "http://127.0.0.1:1";
  dead.attempts = 2;
  HttpEmbeddingClient unreachable(dead);
  CHECK_THROWS_AS(unreachable.embed(text), Error);
  CHECK(unreachable.requests() == 2);
}

TEST_CASE("embedding dimension mismatch") {
  MockEmbeddings mock;
  mock.table_["a"] = {1, 0};
  mock.table_["b"] = {1, 0, 0};
  HttpEmbeddingClient client(mock.config());
  EmbeddingCache cache(client);
  try {
    output_similarity("a", "b", cache);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("embedding cache under concurrent use") {
  MockEmbeddings mock;
  HttpEmbeddingClient client(mock.config());
  EmbeddingCache cache(client);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&cache, w] {
      for (int i = 0; i < 20; ++i) cache.embed("text" + std::to_string((i + w) % 5));
    });
  }
  for (auto& t : pool) t.join();
  CHECK(cache.size() == 5);
}

TEST_CASE("stub generator") {
  const Ad book = ad_with("BookHaven", "Books delivered.");
  GenerationRequest req;
  req.query = "Any books like this?";
  req.winners = {&book};
  auto gen = stub_generator();
  const auto text = gen->generate(req);
  CHECK(text.find("BookHaven") != std::string::npos);
  CHECK(text.find(book.link) != std::string::npos);
  CHECK(gen->generate(req) == text);

  req.mode = Composition::Append;
  const auto appended = gen->generate(req);
  const auto base = StubGenerator::base_sentence(req);
  CHECK(appended.rfind(base, 0) == 0);
  CHECK(appended.find(book.document) != std::string::npos);
}

TEST_CASE("prompt templates") {
  const auto t = PromptTemplates::shipped();
  CHECK(t.init_query.find("{advertiser}") != std::string::npos);
  CHECK(t.rest_query.find("{previous_output}") != std::string::npos);
  CHECK(t.multi_query.find("{advertisers[2]}") != std::string::npos);
  CHECK(fill_template("a {x} b {y} {z}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2 {z}");
}

TEST_CASE("remote generator prompts and playback") {
  const auto s = test::load_shipped("scenario1.json");
  auto transport = std::make_unique<RecordedTransport>(
      std::vector<std::string>{"first reply", "second reply", "third"});
  auto* recorded = transport.get();
  RemoteGenerator gen(PromptTemplates::shipped(), std::move(transport));

  GenerationRequest req;
  req.query = s.query;
  req.winners = {&s.ads[1]};
  CHECK(gen.generate(req) == "first reply");
  const auto& first = recorded->prompts().at(0);
  CHECK(first.find(s.ads[1].document) != std::string::npos);
  CHECK(first.find("Can you suggest some books similar to") != std::string::npos);
  CHECK(first.find("BookHaven") != std::string::npos);

  const std::string prior[] = {"first reply"};
  req.prior_segments = prior;
  CHECK(gen.generate(req) == "second reply");
  CHECK(recorded->prompts().at(1).find(">> first reply") != std::string::npos);

  req.winners = {&s.ads[0], &s.ads[1], &s.ads[2]};
  const auto multi = gen.build_prompt(req);
  for (const auto* ad : req.winners) CHECK(multi.find(ad->document) != std::string::npos);
  req.winners = {&s.ads[0], &s.ads[1]};
  CHECK_THROWS_AS(gen.build_prompt(req), Error);
}

TEST_CASE("remote generator needs credentials before any request") {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.path = "/v1/chat/completions";
  c.api_key_env = "SEGAUC_TEST_KEY_THAT_IS_NOT_SET";
  ::unsetenv(c.api_key_env.c_str());
  try {
    remote_generator(c, PromptTemplates::shipped());
    FAIL("expected AuthMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AuthMissing);
  }
}
