#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "figcap/types.hpp"

namespace figcap::modelgw {

struct DecodeParams {
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::optional<std::uint64_t> seed = 0; // fixed by default: this is a test harness

    bool operator==(const DecodeParams&) const = default;
};

struct BackendRequest {
    std::string backend_id;
    std::string model_name;
    MessageSequence messages;
    DecodeParams decode;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct BackendResponse {
    std::string text;
    Usage usage;
    std::chrono::milliseconds latency{0};
    bool from_cache = false;
};

/// A chat backend. Implementations must be safe for concurrent complete().
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
};

/// One entry of the backend config file (see docs/formats.md). Credentials
/// come from the named env var only; they are never stored or cached.
struct BackendConfig {
    std::string backend_id;
    std::string base_url; // http(s)://... or mock:<policy>
    std::string model_name;
    std::string api_key_env_var;
    int max_concurrency = 4;
    int max_retries = 3; // total attempts per live dispatch
};

std::vector<BackendConfig> load_backend_config(const std::filesystem::path& path);
std::string backend_config_digest(const BackendConfig& config);

/// Deterministic reply policies for the in-process mock backend.
struct MockPolicy {
    enum class Kind {
        kEchoCaption, // first profile caption found in the prompt
        kFixedText,
        kScripted,   // reply whose key "[key]" occurs in the prompt text
        kScoreByHash // "Score: <1 + request-hash mod 6>"
    };

    Kind kind = Kind::kFixedText;
    std::string fixed_text;
    std::map<std::string, std::string> script;

    /// Parses "mock:echo-caption", "mock:score-by-hash", "mock:fixed=<text>",
    /// "mock:scripted=<file.json>". Returns nullopt for non-mock specs.
    static std::optional<MockPolicy> parse(std::string_view spec);
};

std::unique_ptr<ModelBackend> make_mock_backend(MockPolicy policy);
std::unique_ptr<ModelBackend> make_http_backend(const BackendConfig& config);

/// mock:* base URLs get a mock backend, anything else the HTTP client.
std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config);

/// Order-stable serialized form of a request. Image blocks enter as the
/// SHA-256 of the image bytes when the file resolves (transport-independent
/// cache keys), else as the verbatim ref.
std::string canonical_request_json(const BackendRequest& request);

/// SHA-256 hex of the canonical request bytes; the cache key.
std::string request_cache_key(const BackendRequest& request);

/// Dispatch front door: consults the content-addressed response cache, and
/// on a miss sends through the backend with bounded concurrency and
/// exponential-backoff retries, persisting the response before returning.
///
/// Register every backend before the first send(); send() itself is safe
/// for concurrent callers, and identical in-flight requests are collapsed
/// into one live dispatch.
class Gateway {
public:
    explicit Gateway(std::filesystem::path cache_dir);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void register_backend(const BackendConfig& config);
    void register_backend(const BackendConfig& config, std::unique_ptr<ModelBackend> backend);

    bool has_backend(const std::string& backend_id) const;
    const BackendConfig& config(const std::string& backend_id) const;

    BackendResponse send(const BackendRequest& request);

    /// Convenience: fills backend_id/model_name from the registered config.
    BackendResponse send(const std::string& backend_id, MessageSequence messages,
                         const DecodeParams& decode = {});

    const std::filesystem::path& cache_dir() const { return cache_dir_; }

    /// Cache misses that led to a live backend call (not counting retries).
    std::uint64_t live_dispatches() const { return live_dispatches_.load(); }
    /// Individual backend attempts, including retries.
    std::uint64_t dispatch_attempts() const { return dispatch_attempts_.load(); }

private:
    struct Slot;

    std::filesystem::path cache_path(const std::string& key) const;
    std::optional<BackendResponse> load_cached(const std::string& key) const;
    void store_cached(const std::string& key, const BackendRequest& request,
                      const BackendResponse& response) const;
    Slot& slot(const std::string& backend_id);

    std::filesystem::path cache_dir_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
    std::atomic<std::uint64_t> live_dispatches_{0};
    std::atomic<std::uint64_t> dispatch_attempts_{0};

    mutable std::mutex inflight_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> inflight_;
};

} // namespace figcap::modelgw
