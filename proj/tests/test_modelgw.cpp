#include <doctest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "figcap/errors.hpp"
#include "figcap/modelgw.hpp"
#include "figcap/quality.hpp"
#include "support/fixtures.hpp"

using namespace figcap;
using namespace figcap::modelgw;
using testfix::TempDir;

namespace {

BackendConfig mock_config(const std::string& id, const std::string& url) {
    BackendConfig config;
    config.backend_id = id;
    config.base_url = url;
    config.model_name = "mock";
    return config;
}

BackendRequest text_request(const std::string& backend_id, const std::string& text) {
    BackendRequest request;
    request.backend_id = backend_id;
    request.model_name = "mock";
    request.messages = {MessageBlock::text(text)};
    return request;
}

/// Fails with TransportError a fixed number of times, then succeeds.
class FlakyBackend final : public ModelBackend {
public:
    explicit FlakyBackend(int failures) : remaining_(failures) {}

    BackendResponse complete(const BackendRequest&) override {
        if (remaining_.fetch_sub(1) > 0)
            throw TransportError("synthetic transport failure");
        BackendResponse response;
        response.text = "recovered";
        return response;
    }

private:
    std::atomic<int> remaining_;
};

} // namespace

TEST_SUITE_BEGIN("modelgw");

TEST_CASE("canonical form is order-stable and distinguishes fields") {
    const auto a = text_request("b1", "hello");
    const auto b = text_request("b1", "hello");
    CHECK(canonical_request_json(a) == canonical_request_json(b));
    CHECK(request_cache_key(a) == request_cache_key(b));

    auto different_text = text_request("b1", "other");
    CHECK(request_cache_key(a) != request_cache_key(different_text));

    auto different_backend = text_request("b2", "hello");
    CHECK(request_cache_key(a) != request_cache_key(different_backend));

    auto different_decode = text_request("b1", "hello");
    different_decode.decode.temperature = 0.7;
    CHECK(request_cache_key(a) != request_cache_key(different_decode));
}

TEST_CASE("image content, not its path, keys the request") {
    TempDir dir;
    testfix::write_lines(dir / "a.png", {"same bytes"});
    testfix::write_lines(dir / "b.png", {"same bytes"});
    testfix::write_lines(dir / "c.png", {"different bytes"});

    auto make = [&](const std::string& name) {
        BackendRequest request;
        request.backend_id = "b1";
        request.model_name = "m";
        request.messages = {MessageBlock::image((dir / name).string())};
        return request;
    };
    CHECK(request_cache_key(make("a.png")) == request_cache_key(make("b.png")));
    CHECK(request_cache_key(make("a.png")) != request_cache_key(make("c.png")));

    // dangling refs still canonicalize (by ref) rather than erroring
    BackendRequest dangling;
    dangling.backend_id = "b1";
    dangling.model_name = "m";
    dangling.messages = {MessageBlock::image((dir / "missing.png").string())};
    CHECK(request_cache_key(dangling) == request_cache_key(dangling));
}

TEST_CASE("cache: second send is a byte-identical hit with zero dispatches") {
    TempDir cache;
    Gateway gateway(cache.path());
    gateway.register_backend(mock_config("m", "mock:fixed=deterministic reply"));

    const auto request = text_request("m", "prompt");
    const auto first = gateway.send(request);
    CHECK_FALSE(first.from_cache);
    CHECK(gateway.live_dispatches() == 1);

    const auto second = gateway.send(request);
    CHECK(second.from_cache);
    CHECK(second.text == first.text);
    CHECK(gateway.live_dispatches() == 1);

    // a second gateway over the same cache dir sees the entry too
    Gateway other(cache.path());
    other.register_backend(mock_config("m", "mock:fixed=deterministic reply"));
    const auto third = other.send(request);
    CHECK(third.from_cache);
    CHECK(third.text == first.text);
    CHECK(other.live_dispatches() == 0);
}

TEST_CASE("cache layout is key-prefixed json files") {
    TempDir cache;
    Gateway gateway(cache.path());
    gateway.register_backend(mock_config("m", "mock:fixed=x"));

    const auto request = text_request("m", "layout probe");
    const auto key = request_cache_key(request);
    gateway.send(request);

    const auto expected = cache.path() / key.substr(0, 2) / (key + ".json");
    CHECK(std::filesystem::exists(expected));
}

TEST_CASE("retries: transport errors are retried, then succeed") {
    TempDir cache;
    Gateway gateway(cache.path());
    auto config = mock_config("flaky", "unused");
    config.max_retries = 3;
    gateway.register_backend(config, std::make_unique<FlakyBackend>(2));

    const auto response = gateway.send(text_request("flaky", "prompt"));
    CHECK(response.text == "recovered");
    CHECK(gateway.live_dispatches() == 1);
    CHECK(gateway.dispatch_attempts() == 3);
}

TEST_CASE("retries: exhaustion raises the typed error") {
    TempDir cache;
    Gateway gateway(cache.path());
    auto config = mock_config("flaky", "unused");
    config.max_retries = 2;
    gateway.register_backend(config, std::make_unique<FlakyBackend>(5));

    CHECK_THROWS_AS(gateway.send(text_request("flaky", "prompt")), RetriesExhaustedError);
    CHECK(gateway.dispatch_attempts() == 2);
}

TEST_CASE("unknown backend raises ConfigError") {
    TempDir cache;
    Gateway gateway(cache.path());
    CHECK_THROWS_AS(gateway.send(text_request("ghost", "x")), ConfigError);
    CHECK_THROWS_AS(gateway.config("ghost"), ConfigError);
    CHECK_FALSE(gateway.has_backend("ghost"));
}

TEST_CASE("concurrent identical requests collapse to one dispatch") {
    TempDir cache;
    Gateway gateway(cache.path());
    auto config = mock_config("m", "mock:score-by-hash");
    config.max_concurrency = 8;
    gateway.register_backend(config);

    const auto request = text_request("m", "hot prompt");
    std::vector<std::thread> threads;
    std::vector<std::string> replies(8);
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] { replies[t] = gateway.send(request).text; });
    for (auto& thread : threads)
        thread.join();

    CHECK(gateway.live_dispatches() == 1);
    for (const auto& reply : replies)
        CHECK(reply == replies.front());
}

TEST_CASE("mock policies") {
    TempDir cache;

    SUBCASE("echo-caption returns the first profile caption") {
        Gateway gateway(cache.path());
        gateway.register_backend(mock_config("m", "mock:echo-caption"));
        BackendRequest request;
        request.backend_id = "m";
        request.model_name = "mock";
        request.messages = {MessageBlock::text("intro"),
                            MessageBlock::text("Caption: first profile"),
                            MessageBlock::text("Caption: second profile")};
        CHECK(gateway.send(request).text == "first profile");

        const auto empty = gateway.send(text_request("m", "no captions at all"));
        CHECK(empty.text == "No profile caption available.");
    }

    SUBCASE("score-by-hash is parsable and request-dependent") {
        Gateway gateway(cache.path());
        gateway.register_backend(mock_config("m", "mock:score-by-hash"));
        bool saw_difference = false;
        std::string first_reply;
        for (int i = 0; i < 16; ++i) {
            const auto reply =
                gateway.send(text_request("m", "prompt " + std::to_string(i))).text;
            const auto score = quality::parse_score(reply);
            CHECK(score.value() >= 1);
            CHECK(score.value() <= 6);
            if (i == 0)
                first_reply = reply;
            else if (reply != first_reply)
                saw_difference = true;
        }
        CHECK(saw_difference);
    }

    SUBCASE("scripted matches bracketed keys, empty script falls back") {
        testfix::write_lines(cache / "script.json", {R"({"fig7":"scripted reply"})"});
        Gateway gateway(cache.path());
        gateway.register_backend(
            mock_config("m", "mock:scripted=" + (cache / "script.json").string()));
        CHECK(gateway.send(text_request("m", "about [fig7] here")).text == "scripted reply");
        CHECK(gateway.send(text_request("m", "about fig8")).text ==
              "No scripted reply available.");

        testfix::write_lines(cache / "empty.json", {"{}"});
        Gateway empty_gateway(cache.path());
        empty_gateway.register_backend(
            mock_config("m", "mock:scripted=" + (cache / "empty.json").string()));
        CHECK(empty_gateway.send(text_request("m", "[fig7]")).text ==
              "No scripted reply available.");
    }

    SUBCASE("policy parse failures") {
        CHECK_FALSE(MockPolicy::parse("http://host/v1").has_value());
        CHECK_THROWS_AS(MockPolicy::parse("mock:unknown"), ConfigError);
        CHECK_THROWS_AS(MockPolicy::parse("mock:fixed="), ConfigError);
        CHECK_THROWS_AS(MockPolicy::parse("mock:scripted=/no/such/file.json"), ConfigError);
    }
}

TEST_CASE("mock replies are referentially transparent across gateways") {
    TempDir cache_a, cache_b;
    Gateway a(cache_a.path()), b(cache_b.path());
    a.register_backend(mock_config("m", "mock:score-by-hash"));
    b.register_backend(mock_config("m", "mock:score-by-hash"));

    const auto request = text_request("m", "the same prompt");
    CHECK(a.send(request).text == b.send(request).text);
}

TEST_CASE("backend config file loads and digests") {
    TempDir dir;
    testfix::write_lines(
        dir / "backends.json",
        {R"([{"backend_id":"live","base_url":"http://localhost:9/v1","model_name":"m7b",)"
         R"("api_key_env_var":"KEY","max_concurrency":2,"max_retries":5},)"
         R"({"backend_id":"mockecho","base_url":"mock:echo-caption","model_name":"mock"}])"});

    const auto configs = load_backend_config(dir / "backends.json");
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].backend_id == "live");
    CHECK(configs[0].max_retries == 5);
    CHECK(configs[1].max_concurrency == 4); // default

    CHECK(backend_config_digest(configs[0]) != backend_config_digest(configs[1]));
    CHECK(backend_config_digest(configs[0]) == backend_config_digest(configs[0]));

    CHECK_THROWS_AS(load_backend_config(dir / "none.json"), ConfigError);
    testfix::write_lines(dir / "bad.json", {R"({"not":"an array"})"});
    CHECK_THROWS_AS(load_backend_config(dir / "bad.json"), ConfigError);
    testfix::write_lines(dir / "incomplete.json", {R"([{"backend_id":"x"}])"});
    CHECK_THROWS_AS(load_backend_config(dir / "incomplete.json"), ConfigError);
}

TEST_CASE("auth failure surfaces as AuthError without retries") {
    TempDir cache;
    auto config = mock_config("live", "http://127.0.0.1:1/v1");
    config.api_key_env_var = "FIGCAP_TEST_MISSING_KEY_VAR";
    Gateway gateway(cache.path());
    gateway.register_backend(config);
    CHECK_THROWS_AS(gateway.send(text_request("live", "x")), AuthError);
}

TEST_SUITE_END();
