#include "figcap/modelgw.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "figcap/errors.hpp"
#include "figcap/hash.hpp"

namespace figcap::modelgw {

using nlohmann::json;

namespace {

constexpr std::string_view kMockPrefix = "mock:";
constexpr const char* kScriptedFallback = "No scripted reply available.";
constexpr const char* kEchoFallback = "No profile caption available.";

std::chrono::milliseconds backoff_delay(int attempt) {
    // 25ms, 50ms, 100ms, ... capped at 1s.
    const auto ms = std::min<std::int64_t>(1000, 25LL << (attempt - 1));
    return std::chrono::milliseconds(ms);
}

Usage approximate_usage(const BackendRequest& request, const std::string& reply) {
    std::size_t prompt_chars = 0;
    for (const auto& block : request.messages)
        prompt_chars += block.content.size();
    return {static_cast<std::int64_t>(prompt_chars / 4),
            static_cast<std::int64_t>(reply.size() / 4)};
}

class MockBackend final : public ModelBackend {
public:
    explicit MockBackend(MockPolicy policy) : policy_(std::move(policy)) {}

    BackendResponse complete(const BackendRequest& request) override {
        BackendResponse response;
        response.text = reply_for(request);
        response.usage = approximate_usage(request, response.text);
        return response;
    }

private:
    std::string reply_for(const BackendRequest& request) const {
        switch (policy_.kind) {
        case MockPolicy::Kind::kFixedText:
            return policy_.fixed_text;
        case MockPolicy::Kind::kEchoCaption: {
            for (const auto& block : request.messages) {
                if (block.type == MessageBlock::Type::kText &&
                    block.content.starts_with("Caption: "))
                    return block.content.substr(9);
            }
            return kEchoFallback;
        }
        case MockPolicy::Kind::kScripted: {
            const std::string text = sequence_text(request.messages);
            // Longest key first so specific ids beat prefixes of themselves.
            std::vector<const std::pair<const std::string, std::string>*> entries;
            entries.reserve(policy_.script.size());
            for (const auto& entry : policy_.script)
                entries.push_back(&entry);
            std::sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
                if (a->first.size() != b->first.size())
                    return a->first.size() > b->first.size();
                return a->first < b->first;
            });
            for (const auto* entry : entries) {
                if (text.find("[" + entry->first + "]") != std::string::npos)
                    return entry->second;
            }
            return kScriptedFallback;
        }
        case MockPolicy::Kind::kScoreByHash: {
            const auto h = hex_prefix_u64(request_cache_key(request));
            return "Score: " + std::to_string(1 + h % 6);
        }
        }
        throw ConfigError("unknown mock policy");
    }

    MockPolicy policy_;
};

} // namespace

std::optional<MockPolicy> MockPolicy::parse(std::string_view spec) {
    if (!spec.starts_with(kMockPrefix))
        return std::nullopt;
    const std::string_view rest = spec.substr(kMockPrefix.size());

    MockPolicy policy;
    if (rest == "echo-caption") {
        policy.kind = Kind::kEchoCaption;
        return policy;
    }
    if (rest == "score-by-hash") {
        policy.kind = Kind::kScoreByHash;
        return policy;
    }
    if (rest.starts_with("fixed=")) {
        policy.kind = Kind::kFixedText;
        policy.fixed_text = std::string(rest.substr(6));
        if (policy.fixed_text.empty())
            throw ConfigError("mock:fixed= needs a reply text");
        return policy;
    }
    if (rest.starts_with("scripted=")) {
        policy.kind = Kind::kScripted;
        const std::string path(rest.substr(9));
        std::ifstream in(path);
        if (!in)
            throw ConfigError("mock script file not found: " + path);
        json obj;
        try {
            in >> obj;
        } catch (const json::exception& ex) {
            throw ConfigError("mock script file is not valid JSON: " + path + ": " +
                              ex.what());
        }
        if (!obj.is_object())
            throw ConfigError("mock script file must hold a JSON object: " + path);
        for (const auto& [key, value] : obj.items()) {
            if (!value.is_string())
                throw ConfigError("mock script replies must be strings: " + path);
            policy.script[key] = value.get<std::string>();
        }
        return policy;
    }
    throw ConfigError("unknown mock policy: " + std::string(spec));
}

std::unique_ptr<ModelBackend> make_mock_backend(MockPolicy policy) {
    return std::make_unique<MockBackend>(std::move(policy));
}

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config) {
    if (auto policy = MockPolicy::parse(config.base_url))
        return make_mock_backend(std::move(*policy));
    return make_http_backend(config);
}

std::vector<BackendConfig> load_backend_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("backend config file not found: " + path.string());
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& ex) {
        throw ConfigError("backend config is not valid JSON: " + std::string(ex.what()));
    }
    if (!arr.is_array())
        throw ConfigError("backend config must be a JSON array");

    std::vector<BackendConfig> configs;
    configs.reserve(arr.size());
    for (const auto& entry : arr) {
        BackendConfig config;
        if (!entry.contains("backend_id") || !entry.contains("base_url") ||
            !entry.contains("model_name"))
            throw ConfigError("backend entry needs backend_id, base_url, model_name");
        config.backend_id = entry["backend_id"].get<std::string>();
        config.base_url = entry["base_url"].get<std::string>();
        config.model_name = entry["model_name"].get<std::string>();
        config.api_key_env_var = entry.value("api_key_env_var", "");
        config.max_concurrency = entry.value("max_concurrency", 4);
        config.max_retries = entry.value("max_retries", 3);
        if (config.max_concurrency < 1 || config.max_retries < 1)
            throw ConfigError("backend limits must be >= 1: " + config.backend_id);
        configs.push_back(std::move(config));
    }
    return configs;
}

std::string backend_config_digest(const BackendConfig& config) {
    json obj;
    obj["api_key_env_var"] = config.api_key_env_var;
    obj["backend_id"] = config.backend_id;
    obj["base_url"] = config.base_url;
    obj["max_concurrency"] = config.max_concurrency;
    obj["max_retries"] = config.max_retries;
    obj["model_name"] = config.model_name;
    return sha256_hex(obj.dump());
}

std::string canonical_request_json(const BackendRequest& request) {
    json messages = json::array();
    for (const auto& block : request.messages) {
        if (block.type == MessageBlock::Type::kText) {
            messages.push_back({{"type", "text"}, {"text", block.content}});
        } else if (std::filesystem::exists(block.content)) {
            messages.push_back(
                {{"type", "image"}, {"image_sha256", sha256_file_hex(block.content)}});
        } else {
            messages.push_back({{"type", "image"}, {"image_ref", block.content}});
        }
    }

    json decode;
    decode["max_output_tokens"] = request.decode.max_output_tokens;
    decode["temperature"] = request.decode.temperature;
    if (request.decode.seed)
        decode["seed"] = *request.decode.seed;

    json obj;
    obj["backend_id"] = request.backend_id;
    obj["decode"] = std::move(decode);
    obj["messages"] = std::move(messages);
    obj["model_name"] = request.model_name;
    return obj.dump();
}

std::string request_cache_key(const BackendRequest& request) {
    return sha256_hex(canonical_request_json(request));
}

// Bounded-concurrency permit. A plain condition variable keeps the count a
// runtime value (std::counting_semaphore fixes its ceiling at compile time).
struct Gateway::Slot {
    BackendConfig config;
    std::unique_ptr<ModelBackend> backend;

    std::mutex mutex;
    std::condition_variable cv;
    int available = 0;

    void acquire() {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mutex);
            ++available;
        }
        cv.notify_one();
    }
};

Gateway::Gateway(std::filesystem::path cache_dir) : cache_dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(cache_dir_);
}

Gateway::~Gateway() = default;

void Gateway::register_backend(const BackendConfig& config) {
    register_backend(config, make_backend(config));
}

void Gateway::register_backend(const BackendConfig& config,
                               std::unique_ptr<ModelBackend> backend) {
    if (config.backend_id.empty())
        throw ConfigError("backend_id must be non-empty");
    auto slot = std::make_unique<Slot>();
    slot->config = config;
    slot->backend = std::move(backend);
    slot->available = config.max_concurrency;
    if (!slots_.emplace(config.backend_id, std::move(slot)).second)
        throw ConfigError("backend registered twice: " + config.backend_id);
}

bool Gateway::has_backend(const std::string& backend_id) const {
    return slots_.count(backend_id) > 0;
}

const BackendConfig& Gateway::config(const std::string& backend_id) const {
    auto it = slots_.find(backend_id);
    if (it == slots_.end())
        throw ConfigError("backend not configured: " + backend_id);
    return it->second->config;
}

Gateway::Slot& Gateway::slot(const std::string& backend_id) {
    auto it = slots_.find(backend_id);
    if (it == slots_.end())
        throw ConfigError("backend not configured: " + backend_id);
    return *it->second;
}

std::filesystem::path Gateway::cache_path(const std::string& key) const {
    return cache_dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<BackendResponse> Gateway::load_cached(const std::string& key) const {
    const auto path = cache_path(key);
    std::ifstream in(path);
    if (!in)
        return std::nullopt;
    json obj;
    try {
        in >> obj;
    } catch (const json::exception& ex) {
        throw Error("corrupt cache entry " + path.string() + ": " + ex.what());
    }
    BackendResponse response;
    response.text = obj.at("text").get<std::string>();
    response.usage.input_tokens = obj.value("input_tokens", std::int64_t{0});
    response.usage.output_tokens = obj.value("output_tokens", std::int64_t{0});
    response.latency = std::chrono::milliseconds(obj.value("latency_ms", std::int64_t{0}));
    response.from_cache = true;
    return response;
}

void Gateway::store_cached(const std::string& key, const BackendRequest& request,
                           const BackendResponse& response) const {
    const auto path = cache_path(key);
    std::filesystem::create_directories(path.parent_path());

    json obj;
    obj["request_sha256"] = key;
    obj["backend_id"] = request.backend_id;
    obj["model_name"] = request.model_name;
    obj["text"] = response.text;
    obj["input_tokens"] = response.usage.input_tokens;
    obj["output_tokens"] = response.usage.output_tokens;
    obj["latency_ms"] = response.latency.count();

    // Write-then-rename keeps readers from ever seeing a partial entry.
    const auto tmp = path.parent_path() / (key + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw Error("cannot write cache entry: " + tmp.string());
        out << obj.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

BackendResponse Gateway::send(const BackendRequest& request) {
    const std::string key = request_cache_key(request);
    if (auto cached = load_cached(key))
        return *cached;

    // Collapse concurrent identical requests into a single live dispatch.
    std::shared_ptr<std::mutex> key_mutex;
    {
        std::lock_guard lock(inflight_mutex_);
        auto& entry = inflight_[key];
        if (!entry)
            entry = std::make_shared<std::mutex>();
        key_mutex = entry;
    }
    std::lock_guard key_lock(*key_mutex);
    if (auto cached = load_cached(key))
        return *cached;

    Slot& s = slot(request.backend_id);
    live_dispatches_.fetch_add(1);

    BackendResponse response;
    std::string last_error;
    for (int attempt = 1;; ++attempt) {
        dispatch_attempts_.fetch_add(1);
        s.acquire();
        try {
            const auto start = std::chrono::steady_clock::now();
            response = s.backend->complete(request);
            response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            s.release();
            break;
        } catch (const TransportError& ex) {
            s.release();
            last_error = ex.what();
            if (attempt >= s.config.max_retries)
                throw RetriesExhaustedError("backend " + request.backend_id + " failed " +
                                            std::to_string(attempt) +
                                            " attempts; last error: " + last_error);
            std::this_thread::sleep_for(backoff_delay(attempt));
        } catch (...) {
            s.release();
            throw;
        }
    }

    response.from_cache = false;
    store_cached(key, request, response);
    return response;
}

BackendResponse Gateway::send(const std::string& backend_id, MessageSequence messages,
                              const DecodeParams& decode) {
    BackendRequest request;
    request.backend_id = backend_id;
    request.model_name = config(backend_id).model_name;
    request.messages = std::move(messages);
    request.decode = decode;
    return send(request);
}

} // namespace figcap::modelgw
