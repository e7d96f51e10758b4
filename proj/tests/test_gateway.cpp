#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include "testutil.hpp"

using namespace sail;
using testutil::TempDir;
using testutil::mock_gateway;

namespace {

ChatRequest simple_request(const std::string& text) {
    ChatRequest req;
    req.model = "mock-chat";
    req.messages = {user_message(text)};
    return req;
}

/// Counts transport calls and tracks peak concurrency.
class InstrumentedTransport final : public Transport {
public:
    explicit InstrumentedTransport(TransportPtr inner, int delay_ms = 0)
        : inner_(std::move(inner)), delay_ms_(delay_ms) {}

    json post(const std::string& path, const json& body) override {
        const int now = inflight_.fetch_add(1) + 1;
        int peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
        if (delay_ms_ > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        }
        calls_.fetch_add(1);
        auto out = inner_->post(path, body);
        inflight_.fetch_sub(1);
        return out;
    }

    int calls() const { return calls_.load(); }
    int peak() const { return peak_.load(); }

private:
    TransportPtr inner_;
    int delay_ms_;
    std::atomic<int> inflight_{0};
    std::atomic<int> calls_{0};
    std::atomic<int> peak_{0};
};

/// Plays back a canned response for every request.
class CannedTransport final : public Transport {
public:
    explicit CannedTransport(json response) : response_(std::move(response)) {}
    json post(const std::string&, const json&) override { return response_; }

private:
    json response_;
};

}  // namespace

TEST_CASE("cache_key digests are canonical") {
    json a{{"model", "m"}, {"temperature", 0.0}, {"messages", json::array()}};
    json b;
    b["temperature"] = 0.0;
    b["messages"] = json::array();
    b["model"] = "m";
    // oracle: canonicalization re-serializes both insertion orders identically
    CHECK(a.dump() == b.dump());
    const auto key_a = cache_key(canonical_request_bytes("/chat/completions", a));
    const auto key_b = cache_key(canonical_request_bytes("/chat/completions", b));
    CHECK(key_a == key_b);
    CHECK(key_a.size() == 64);
    CHECK(key_a.find_first_not_of("0123456789abcdef") == std::string::npos);

    json warmer = a;
    warmer["temperature"] = 0.7;
    CHECK(cache_key(canonical_request_bytes("/chat/completions", warmer)) != key_a);
}

TEST_CASE("chat request validation") {
    ChatRequest req = simple_request("hi");
    CHECK_NOTHROW(req.validate());

    ChatRequest empty;
    empty.model = "m";
    CHECK_THROWS_AS(empty.validate(), PreconditionError);

    ChatRequest assistant_first;
    assistant_first.model = "m";
    assistant_first.messages = {system_message("s"), assistant_message("a")};
    CHECK_THROWS_AS(assistant_first.validate(), PreconditionError);

    ChatRequest bad_logprobs = simple_request("hi");
    bad_logprobs.top_logprobs = 21;
    CHECK_THROWS_AS(bad_logprobs.validate(), PreconditionError);

    ChatRequest bad_temp = simple_request("hi");
    bad_temp.temperature = -0.5;
    CHECK_THROWS_AS(bad_temp.validate(), PreconditionError);
}

TEST_CASE("identical requests hit the cache with one backend call") {
    TempDir dir("cache");
    auto gw = mock_gateway(7, dir.path());
    auto counter = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>(7));
    gw->set_transport(BackendKind::chat, counter);

    const ChatRequest req = simple_request("cache me");
    const ChatResponse first = gw->chat_complete(req);
    const ChatResponse second = gw->chat_complete(req);
    CHECK_FALSE(first.cached);
    CHECK(second.cached);
    CHECK(first.content == second.content);
    CHECK(counter->calls() == 1);
}

TEST_CASE("persisted cache entries re-parse to the response that produced them") {
    TempDir dir("cache_rt");
    auto gw = mock_gateway(11, dir.path());
    ChatRequest req = simple_request("durable");
    req.top_logprobs = 5;
    const ChatResponse live = gw->chat_complete(req);

    // a fresh gateway over the same cache dir must replay the same bytes
    auto gw2 = mock_gateway(11, dir.path());
    const ChatResponse replay = gw2->chat_complete(req);
    CHECK(replay.cached);
    CHECK(replay.content == live.content);
    CHECK(replay.token_logprobs == live.token_logprobs);
    CHECK(replay.completion_tokens == live.completion_tokens);
}

TEST_CASE("mock backend is a pure function of canonical request and seed") {
    auto gw_a = mock_gateway(3);
    auto gw_b = mock_gateway(3);
    auto gw_c = mock_gateway(4);

    // property: random request bodies replay identically under the same seed
    std::mt19937_64 rng(99);
    for (int i = 0; i < 50; ++i) {
        ChatRequest req = simple_request("payload " + std::to_string(rng()));
        req.temperature = static_cast<double>(rng() % 3) * 0.5;
        if (rng() % 2 == 0) {
            req.top_logprobs = 5;
        }
        const auto a = gw_a->chat_complete(req);
        const auto b = gw_b->chat_complete(req);
        const auto c = gw_c->chat_complete(req);
        REQUIRE(a.content == b.content);
        REQUIRE(a.token_logprobs == b.token_logprobs);
        CHECK(a.content != c.content);  // different seed, different stream
    }
}

TEST_CASE("top_logprobs=5 yields at most five alternatives per token, sorted") {
    auto gw = mock_gateway(5);
    ChatRequest req = simple_request("the quick brown fox");
    req.top_logprobs = 5;
    const ChatResponse resp = gw->chat_complete(req);
    REQUIRE_FALSE(resp.token_logprobs.empty());
    CHECK(resp.completion_tokens >= resp.token_logprobs.size());
    for (const auto& t : resp.token_logprobs) {
        CHECK(t.logprob <= 0.0);
        CHECK(t.top5.size() <= 5);
        for (std::size_t j = 1; j < t.top5.size(); ++j) {
            CHECK(t.top5[j - 1].logprob >= t.top5[j].logprob);
        }
    }
}

TEST_CASE("bounded concurrency: at most max_inflight outstanding requests") {
    GatewayConfig cfg = GatewayConfig::offline(21);
    cfg.chat.max_inflight = 4;
    Gateway gw(cfg);
    auto counter = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>(21), 5);
    gw.set_transport(BackendKind::chat, counter);

    std::vector<std::thread> workers;
    for (int i = 0; i < 16; ++i) {
        workers.emplace_back([&gw, i] {
            gw.chat_complete(simple_request("worker " + std::to_string(i)));
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    CHECK(counter->calls() == 16);
    CHECK(counter->peak() <= 4);
    CHECK(counter->peak() >= 2);  // some overlap actually happened
}

TEST_CASE("embed: identical inputs give identical unit vectors, cached per text") {
    TempDir dir("embed");
    auto gw = mock_gateway(13, dir.path());
    auto counter = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>(13));
    gw->set_transport(BackendKind::embed, counter);

    const auto vecs = gw->embed({"a", "a"});
    REQUIRE(vecs.size() == 2);
    CHECK(vecs[0] == vecs[1]);
    double norm2 = 0.0;
    for (const double x : vecs[0]) norm2 += x * x;
    CHECK_THAT(norm2, Catch::Matchers::WithinAbs(1.0, 1e-9));

    // per-text caching: "a" was already answered, only "b" goes out
    const int calls_before = counter->calls();
    gw->embed({"a", "b"});
    CHECK(counter->calls() == calls_before + 1);

    CHECK_THROWS_AS(gw->embed({}), PreconditionError);
}

TEST_CASE("embed: dimension mismatch across a batch is a protocol error") {
    TempDir dir("embed_dim");
    auto gw = mock_gateway(1, dir.path());
    // canned transport returns vectors whose width depends on the input text
    class MismatchTransport final : public Transport {
    public:
        json post(const std::string&, const json& body) override {
            const auto text = body.at("input").at(0).get<std::string>();
            const std::size_t dim = text == "wide" ? 8 : 4;
            return json{{"data", json::array({{{"index", 0},
                                               {"embedding", std::vector<double>(dim, 0.5)}}})}};
        }
    };
    gw->set_transport(BackendKind::embed, std::make_shared<MismatchTransport>());
    CHECK_THROWS_AS(gw->embed({"narrow", "wide"}), ProtocolError);
}

TEST_CASE("rerank: self-similar document ranks first, ties break by index") {
    auto gw = mock_gateway(17);
    const std::string query = "what is the boiling point of water?";
    const auto hits = gw->rerank(query, {query, "unrelated text about geology"});
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].index == 0);
    CHECK(hits[0].relevance == 1.0);

    // duplicate documents score identically -> ascending index order (oracle:
    // stable sort over (score desc, index asc))
    const auto dup = gw->rerank(query, {"same text", "same text", "same text"});
    REQUIRE(dup.size() == 3);
    CHECK(dup[0].relevance == dup[1].relevance);
    CHECK(dup[0].index == 0);
    CHECK(dup[1].index == 1);
    CHECK(dup[2].index == 2);

    // 10 documents -> 10 scores, strictly ordered after tie-break
    std::vector<std::string> docs;
    for (int i = 0; i < 10; ++i) {
        docs.push_back("document " + std::to_string(i));
    }
    const auto ten = gw->rerank(query, docs);
    REQUIRE(ten.size() == 10);
    for (std::size_t i = 1; i < ten.size(); ++i) {
        const bool ordered = ten[i - 1].relevance > ten[i].relevance ||
                             (ten[i - 1].relevance == ten[i].relevance &&
                              ten[i - 1].index < ten[i].index);
        CHECK(ordered);
    }

    CHECK_THROWS_AS(gw->rerank(query, {}), PreconditionError);
}

TEST_CASE("rerank scores outside [0,1] are clamped with a warning") {
    auto gw = mock_gateway(2);
    gw->set_transport(
        BackendKind::rerank,
        std::make_shared<CannedTransport>(json{
            {"results", json::array({{{"index", 0}, {"relevance_score", 1.7}},
                                     {{"index", 1}, {"relevance_score", -0.2}}})}}));
    const auto hits = gw->rerank("q", {"a", "b"});
    CHECK(hits[0].relevance == 1.0);
    CHECK(hits[1].relevance == 0.0);
    CHECK(gw->warnings().size() == 2);
}

TEST_CASE("strict structured output violations surface and are not retried") {
    auto gw = mock_gateway(19);
    auto counter = std::make_shared<InstrumentedTransport>(
        std::make_shared<CannedTransport>(json{
            {"choices",
             json::array({{{"message", {{"role", "assistant"}, {"content", "not json"}}}}})},
            {"usage", {{"completion_tokens", 2}}}}));
    gw->set_transport(BackendKind::chat, counter);

    ChatRequest req = simple_request("answer me");
    req.response_format = ResponseFormatSpec{
        "Strict", true, json{{"type", "object"}, {"required", {"x"}}, {"properties", {{"x", {{"type", "string"}}}}}}};
    CHECK_THROWS_AS(gw->chat_complete(req), SchemaViolationError);
    CHECK(counter->calls() == 1);
}

TEST_CASE("http transport retries 5xx then fails with a transport error") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&hits](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 503;
        res.set_content("overloaded", "text/plain");
    });
    const int port = 18731;
    std::thread runner([&server, port] { server.listen("127.0.0.1", port); });
    server.wait_until_ready();

    HttpTransport transport("http://127.0.0.1:" + std::to_string(port) + "/v1", "k", 2, 1);
    CHECK_THROWS_AS(transport.post("/chat/completions", json{{"x", 1}}), TransportError);
    CHECK(hits.load() == 3);  // initial try + 2 retries

    server.stop();
    runner.join();
}

TEST_CASE("http transport performs the documented wire exchange") {
    httplib::Server server;
    json seen_body;
    std::string seen_auth;
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    seen_body = json::parse(req.body);
                    seen_auth = req.get_header_value("Authorization");
                    res.set_content(json{{"choices",
                                          json::array({{{"message",
                                                         {{"role", "assistant"},
                                                          {"content", "pong"}}}}})},
                                         {"usage", {{"completion_tokens", 1}}}}
                                        .dump(),
                                    "application/json");
                });
    const int port = 18732;
    std::thread runner([&server, port] { server.listen("127.0.0.1", port); });
    server.wait_until_ready();

    GatewayConfig cfg = GatewayConfig::offline(0);
    cfg.mock = false;
    cfg.chat.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.chat.api_key = "secret";
    cfg.chat.retry_backoff_ms = 1;
    Gateway gw(cfg);

    ChatRequest req = simple_request("ping");
    req.top_logprobs = 5;
    const ChatResponse resp = gw.chat_complete(req);
    CHECK(resp.content == "pong");
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_body.at("logprobs") == true);
    CHECK(seen_body.at("top_logprobs") == 5);
    CHECK(seen_body.at("temperature") == 0.0);

    server.stop();
    runner.join();
}

TEST_CASE("gateway slots must carry the matching backend kind") {
    GatewayConfig cfg = GatewayConfig::offline(0);
    cfg.chat.kind = BackendKind::embed;
    CHECK_THROWS_AS(Gateway(cfg), ConfigError);

    GatewayConfig bad_inflight = GatewayConfig::offline(0);
    bad_inflight.embed.max_inflight = 0;
    CHECK_THROWS_AS(Gateway(bad_inflight), ConfigError);
}
