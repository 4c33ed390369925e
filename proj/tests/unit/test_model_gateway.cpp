#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <httplib.h>
#include <json.hpp>
#include <mutex>
#include <random>
#include <thread>

#include "nbsearch/embedding.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/model_gateway.hpp"
#include "test_support.hpp"

using namespace nbsearch;
using nlohmann::json;

namespace {

// Loopback provider whose replies are scripted per test.
class MockProvider {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockProvider(Handler handler) : handler_(std::move(handler)) {
    auto record = [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    };
    server_.Post("/v1/embeddings", record);
    server_.Post("/v1/chat/completions", record);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockProvider() {
    server_.stop();
    thread_.join();
  }

  ModelConfig config() const {
    ModelConfig cfg;
    const std::string base = "http://127.0.0.1:" + std::to_string(port_);
    cfg.embed_endpoint = base + "/v1/embeddings";
    cfg.completion_endpoint = base + "/v1/chat/completions";
    cfg.api_key_env = "NBSEARCH_TEST_KEY";
    cfg.retry.backoff_base_ms = 1;
    return cfg;
  }

  std::vector<std::string> bodies() {
    std::lock_guard<std::mutex> lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json completion(const std::string& text) {
  return {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
}

class CountingTransport : public HttpTransport {
 public:
  explicit CountingTransport(HttpResponse reply) : reply_(std::move(reply)) {}
  HttpResponse post_json(const std::string&, const HttpHeaders&, const std::string&) override {
    ++calls;
    return reply_;
  }
  std::atomic<int> calls{0};

 private:
  HttpResponse reply_;
};

ModelConfig offline_config() {
  ModelConfig cfg;
  cfg.offline_mode = true;
  return cfg;
}

struct EnvKey {
  EnvKey() { setenv("NBSEARCH_TEST_KEY", "secret", 1); }
  ~EnvKey() { unsetenv("NBSEARCH_TEST_KEY"); }
};

std::string two_sum() { return nbsearch::testing::read_file(nbsearch::testing::fixtures_dir() / "two_sum.py"); }

}  // namespace

TEST_CASE("offline embedding examples") {
  const ModelGateway gw(offline_config());
  CHECK(gw.embedding_model_id() == "offline-fnv1a-bow-256");
  const auto one = gw.embed_batch({"abc"});
  REQUIRE(one.size() == 1);
  CHECK(one[0].values == deterministic_embed("abc").values);
  const auto twice = gw.embed_batch({"x", "x"});
  CHECK(twice[0].values == twice[1].values);
  CHECK_THROWS_AS(gw.embed_batch({}), EmptyInput);
  CHECK(deterministic_embed("alpha").values == deterministic_embed("alpha alpha").values);
  CHECK_THROWS_AS(deterministic_embed("   \n"), NoTokens);
}

TEST_CASE("offline embedder agrees with the reference script") {
  const json cases =
      json::parse(nbsearch::testing::read_file(nbsearch::testing::fixtures_dir() / "embed_oracle.json"));
  REQUIRE(cases.size() == 10);
  for (const auto& c : cases) {
    const auto got = deterministic_embed(c.at("text").get<std::string>(), c.at("dim").get<std::size_t>());
    const auto want = c.at("vector").get<std::vector<double>>();
    REQUIRE(got.values.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got.values[i] - want[i]) < 1e-9);
  }
}

TEST_CASE("cosine distance of two oracle vectors") {
  // alpha and beta land in different buckets at dim 256, so they are orthogonal.
  CHECK(cosine_distance(deterministic_embed("alpha").values, deterministic_embed("beta").values) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_distance(deterministic_embed("alpha").values, deterministic_embed("ALPHA").values) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("offline vectors are unit length and batches stay aligned") {
  const ModelGateway gw(offline_config());
  std::mt19937_64 rng(5);
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back(nbsearch::testing::random_markdown(rng) + " t" + std::to_string(i));
  const auto base = gw.embed_batch(texts);
  for (const auto& v : base) CHECK(std::abs(l2_norm(v.values) - 1.0) < 1e-6);
  for (int round = 0; round < 10; ++round) {
    std::vector<std::size_t> perm(texts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> shuffled;
    for (auto p : perm) shuffled.push_back(texts[p]);
    const auto got = gw.embed_batch(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(got[i].values == base[perm[i]].values);
  }
}

TEST_CASE("offline summaries") {
  const ModelGateway gw(offline_config());
  CHECK(gw.summarize_code(two_sum()) == "summary: Solution twoSum");
  CHECK(gw.summarize_code("x=1") == "summary:");
  ModelConfig small = offline_config();
  small.completion_max_tokens = 5;
  const ModelGateway tight(small);
  CHECK(tight.summarize_code("def f():") == "summary: f");
  CHECK_THROWS_AS(tight.summarize_code("def f(): x"), OverCompletionBudget);
}

TEST_CASE("summary prompt is the fixed prefix followed by the code") {
  CHECK(ModelGateway::summary_prompt("x = 1") == "Generate a summary for the following code: \nx = 1");
}

TEST_CASE("completion requests carry the exact prompt") {
  EnvKey key;
  MockProvider mock([](const httplib::Request&, httplib::Response& res) { reply_json(res, completion("  sum idx map\n")); });
  const ModelGateway gw(mock.config());
  const std::string code = two_sum();
  CHECK(gw.summarize_code(code) == "sum idx map");
  const auto bodies = mock.bodies();
  REQUIRE(bodies.size() == 1);
  const json req = json::parse(bodies[0]);
  CHECK(req.at("model") == "gpt-4-32k");
  REQUIRE(req.at("messages").size() == 1);
  CHECK(req.at("messages")[0].at("role") == "user");
  CHECK(req.at("messages")[0].at("content") == "Generate a summary for the following code: \n" + code);
  CHECK(mock.auth() == std::vector<std::string>{"Bearer secret"});
}

TEST_CASE("persistent server errors are retried exactly three times") {
  EnvKey key;
  MockProvider mock([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"error", "boom"}}, 500); });
  std::vector<long long> sleeps;
  ModelConfig cfg = mock.config();
  cfg.retry.backoff_base_ms = 500;
  const ModelGateway gw(cfg, nullptr, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
  try {
    gw.summarize_code("x = 1");
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.status() == 500);
  }
  CHECK(mock.bodies().size() == 3);
  CHECK(sleeps == std::vector<long long>{500, 1000});
}

TEST_CASE("client errors are not retried, rate limits are") {
  EnvKey key;
  SUBCASE("400") {
    MockProvider mock([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"error", "bad"}}, 400); });
    const ModelGateway gw(mock.config());
    CHECK_THROWS_AS(gw.embed_batch({"a"}), ProviderError);
    CHECK(mock.bodies().size() == 1);
  }
  SUBCASE("429 then success") {
    std::atomic<int> n{0};
    MockProvider mock([&](const httplib::Request&, httplib::Response& res) {
      if (n++ == 0) return reply_json(res, {{"error", "slow down"}}, 429);
      reply_json(res, {{"data", {{{"index", 0}, {"embedding", {3.0, 4.0}}}}}});
    });
    const ModelGateway gw(mock.config());
    const auto v = gw.embed_batch({"a"});
    CHECK(mock.bodies().size() == 2);
    CHECK(v[0].values == std::vector<double>{0.6, 0.8});
    CHECK(v[0].model_id == "text-embedding-ada-002");
  }
}

TEST_CASE("connection failures count as retryable") {
  ModelConfig cfg;
  cfg.api_key_env.clear();
  cfg.retry.backoff_base_ms = 0;
  auto transport = std::make_shared<CountingTransport>(HttpResponse{0, "", "connection refused"});
  const ModelGateway gw(cfg, transport);
  try {
    gw.embed_batch({"a"});
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.status() == 0);
  }
  CHECK(transport->calls == 3);
}

TEST_CASE("embedding replies are reordered by index and validated") {
  EnvKey key;
  SUBCASE("shuffled indices") {
    MockProvider mock([](const httplib::Request& req, httplib::Response& res) {
      const json in = json::parse(req.body);
      CHECK(in.at("model") == "text-embedding-ada-002");
      CHECK(in.at("input") == json({"a", "b", "c"}));
      reply_json(res, {{"data",
                        {{{"index", 2}, {"embedding", {0.0, 0.0, 2.0}}},
                         {{"index", 0}, {"embedding", {5.0, 0.0, 0.0}}},
                         {{"index", 1}, {"embedding", {0.0, 1.0, 0.0}}}}}});
    });
    const auto v = ModelGateway(mock.config()).embed_batch({"a", "b", "c"});
    CHECK(v[0].values == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(v[1].values == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(v[2].values == std::vector<double>{0.0, 0.0, 1.0});
  }
  SUBCASE("dimension drift") {
    MockProvider mock([](const httplib::Request&, httplib::Response& res) {
      reply_json(res, {{"data", {{{"index", 0}, {"embedding", {1.0, 0.0}}}, {{"index", 1}, {"embedding", {1.0}}}}}});
    });
    CHECK_THROWS_AS(ModelGateway(mock.config()).embed_batch({"a", "b"}), DimensionDrift);
  }
  SUBCASE("wrong item count") {
    MockProvider mock([](const httplib::Request&, httplib::Response& res) {
      reply_json(res, {{"data", {{{"index", 0}, {"embedding", {1.0}}}}}});
    });
    CHECK_THROWS_AS(ModelGateway(mock.config()).embed_batch({"a", "b"}), ProviderError);
  }
  SUBCASE("zero vector") {
    MockProvider mock([](const httplib::Request&, httplib::Response& res) {
      reply_json(res, {{"data", {{{"index", 0}, {"embedding", {0.0, 0.0}}}}}});
    });
    CHECK_THROWS_AS(ModelGateway(mock.config()).embed_batch({"a"}), ProviderError);
  }
  SUBCASE("not json") {
    MockProvider mock([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
    CHECK_THROWS_AS(ModelGateway(mock.config()).embed_batch({"a"}), ProviderError);
  }
}

TEST_CASE("api key handling") {
  MockProvider mock([](const httplib::Request&, httplib::Response& res) { reply_json(res, completion("ok")); });
  ModelConfig cfg = mock.config();
  unsetenv("NBSEARCH_TEST_KEY");
  CHECK_THROWS_AS(ModelGateway(cfg).summarize_code("x"), ConfigError);
  CHECK(mock.bodies().empty());
  cfg.api_key_env.clear();
  CHECK(ModelGateway(cfg).summarize_code("x") == "ok");
  CHECK(mock.auth() == std::vector<std::string>{""});
}
