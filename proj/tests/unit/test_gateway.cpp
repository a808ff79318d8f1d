#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "rankstab/error.hpp"
#include "rankstab/gateway.hpp"
#include "support.hpp"

using namespace rankstab;

namespace {

ChatRequest request(std::string user = "Hello   there\n") {
    ChatRequest r;
    r.model = "m";
    r.messages = {{"system", "be brief"}, {"user", std::move(user)}};
    return r;
}

/// Local HTTP server on an ephemeral port, stopped on destruction.
struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    template <class Handler>
    explicit LocalServer(Handler h) {
        server.Post("/v1/chat/completions", h);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

} // namespace

TEST_CASE("request validation") {
    auto r = request();
    CHECK_NOTHROW(validate_request(r));
    r.messages.front().role = "assistant";
    CHECK_THROWS_AS(validate_request(r), DataError);
    r = request();
    r.messages.push_back({"tool", "x"});
    CHECK_THROWS_AS(validate_request(r), DataError);
    r = request();
    r.temperature = -1;
    CHECK_THROWS_AS(validate_request(r), DataError);
    r = request();
    r.max_tokens = 0;
    CHECK_THROWS_AS(validate_request(r), DataError);
    CHECK_THROWS_AS(validate_request(ChatRequest{}), DataError);
}

TEST_CASE("cache keys ignore whitespace layout but not content or parameters") {
    const auto a = cache_key(request("Hello there"));
    CHECK(a == cache_key(request("  Hello \n\t there ")));
    CHECK(a.digest.size() == 64);
    CHECK_FALSE(a == cache_key(request("Hello there!")));
    auto hot = request("Hello there");
    hot.temperature = 0.7;
    CHECK_FALSE(a == cache_key(hot));
    auto capped = request("Hello there");
    capped.max_tokens = 10;
    CHECK_FALSE(a == cache_key(capped));
    // The wire body keeps the original bytes.
    CHECK(request_body(request("a  b")).find("a  b") != std::string::npos);
}

TEST_CASE("completion bodies") {
    const auto c = parse_completion_body(
        R"({"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})");
    CHECK(c.text == "hi");
    CHECK(c.usage.prompt_tokens == 3);
    CHECK_THROWS_AS(parse_completion_body("nope"), ProtocolError);
    CHECK_THROWS_AS(parse_completion_body(R"({"choices":[]})"), ProtocolError);
    CHECK_THROWS_AS(parse_completion_body(R"({"choices":[{"message":{"content":5}}]})"), ProtocolError);
}

TEST_CASE("gateway: retries transient failures with doubling backoff") {
    int n = 0;
    auto t = std::make_shared<testing::ScriptedTransport>([&](const nlohmann::json&) {
        return ++n < 3 ? HttpReply{503, ""} : testing::completion("ok");
    });
    GatewayOptions o;
    o.retries = 3;
    o.backoff_base_ms = 100;
    Gateway g(t, o);
    std::vector<long long> waits;
    g.set_sleeper([&](std::chrono::milliseconds d) { waits.push_back(d.count()); });
    CHECK(g.complete(request()).text == "ok");
    CHECK(waits == std::vector<long long>{100, 200});
    CHECK(g.network_attempts() == 3);

    // Cached now.
    const auto again = g.complete(request());
    CHECK(again.from_cache);
    CHECK(g.network_attempts() == 3);
    CHECK(g.cache_hits() == 1);
}

TEST_CASE("gateway: exhausted budget and non-transient statuses") {
    auto always = std::make_shared<testing::ScriptedTransport>([](const nlohmann::json&) { return HttpReply{429, ""}; });
    auto g = testing::quiet_gateway(always, 2);
    try {
        g.complete(request());
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 3);
    }
    CHECK(always->calls == 3);

    auto denied = std::make_shared<testing::ScriptedTransport>([](const nlohmann::json&) { return HttpReply{401, ""}; });
    auto g2 = testing::quiet_gateway(denied, 5);
    CHECK_THROWS_AS(g2.complete(request()), ProviderError);
    CHECK(denied->calls == 1);

    auto garbled = std::make_shared<testing::ScriptedTransport>([](const nlohmann::json&) { return HttpReply{200, "<html>"}; });
    auto g3 = testing::quiet_gateway(garbled);
    CHECK_THROWS_AS(g3.complete(request()), ProtocolError);
    CHECK_THROWS_AS(Gateway(nullptr, GatewayOptions{}), ConfigError);
}

TEST_CASE("gateway: live runs append a fixture that replay serves offline") {
    const auto dir = testing::scratch_dir("fixture");
    const auto fixture = dir / "fixture.jsonl";
    auto t = std::make_shared<testing::ScriptedTransport>(
        [](const nlohmann::json& body) { return testing::completion("echo: " + testing::user_text(body)); });
    GatewayOptions live;
    live.fixture = fixture;
    {
        Gateway g(t, live);
        g.complete(request("one"));
        g.complete(request("two"));
        const std::vector<ChatRequest> reqs{request("two")};
        g.record_fixture(reqs, dir / "subset.jsonl");
        const std::vector<ChatRequest> unknown{request("three")};
        CHECK_THROWS_AS(g.record_fixture(unknown, dir / "x.jsonl"), ReplayMissError);
    }
    CHECK(load_fixture(fixture).size() == 2);
    CHECK(load_fixture(dir / "subset.jsonl").size() == 1);

    GatewayOptions replay;
    replay.replay = true;
    replay.fixture = fixture;
    Gateway r(nullptr, replay);
    CHECK(r.complete(request("  one ")).text == "echo: one");
    CHECK_THROWS_AS(r.complete(request("three")), ReplayMissError);
    CHECK(r.network_attempts() == 0);

    replay.fixture = dir / "absent.jsonl";
    CHECK_THROWS_AS(Gateway(nullptr, replay), ConfigError);
}

TEST_CASE("http transport: credential stays in the header and out of stored data") {
    std::string seen_auth;
    LocalServer srv([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"content":"fine"}}]})", "application/json");
    });
    const auto dir = testing::scratch_dir("http");
    GatewayOptions o;
    o.fixture = dir / "fixture.jsonl";
    Gateway g(std::make_shared<HttpTransport>(srv.url(), "sk-unit-secret"), o);
    CHECK(g.complete(request()).text == "fine");
    CHECK(seen_auth == "Bearer sk-unit-secret");
    std::ifstream in(*o.fixture);
    const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(stored.find("sk-unit-secret") == std::string::npos);
}

TEST_CASE("http transport: a server that always fails sees retries + 1 attempts") {
    std::atomic<int> hits{0};
    LocalServer srv([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
    });
    GatewayOptions o;
    o.retries = 2;
    Gateway g(std::make_shared<HttpTransport>(srv.url(), "k"), o);
    g.set_sleeper([](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(g.complete(request()), TransportError);
    CHECK(hits == 3);
}

TEST_CASE("http transport: unreachable endpoint is a transient failure") {
    GatewayOptions o;
    o.retries = 1;
    Gateway g(std::make_shared<HttpTransport>("http://127.0.0.1:1/v1", "k", std::chrono::seconds(2)), o);
    g.set_sleeper([](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(g.complete(request()), TransportError);
    CHECK_THROWS_AS(HttpTransport("not a url", "k"), ConfigError);
}

TEST_CASE("from_environment needs both variables in live mode only") {
    ::unsetenv("RANKSTAB_TEST_URL");
    ::setenv("RANKSTAB_TEST_KEY", "k", 1);
    CHECK_THROWS_WITH_AS(Gateway::from_environment({}, "RANKSTAB_TEST_URL", "RANKSTAB_TEST_KEY"),
                         doctest::Contains("RANKSTAB_TEST_URL"), ConfigError);
    ::setenv("RANKSTAB_TEST_URL", "http://127.0.0.1:9/x", 1);
    ::unsetenv("RANKSTAB_TEST_KEY");
    CHECK_THROWS_AS(Gateway::from_environment({}, "RANKSTAB_TEST_URL", "RANKSTAB_TEST_KEY"), ConfigError);

    const auto dir = testing::scratch_dir("env");
    std::ofstream(dir / "f.jsonl") << "";
    GatewayOptions replay;
    replay.replay = true;
    replay.fixture = dir / "f.jsonl";
    CHECK_NOTHROW(Gateway::from_environment(replay, "RANKSTAB_TEST_URL", "RANKSTAB_TEST_KEY"));
}
