#include <chrono>
#include <cstdlib>
#include <fstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "figcap/errors.hpp"
#include "figcap/modelgw.hpp"

namespace figcap::modelgw {

using nlohmann::json;

namespace {

std::string base64_encode(const std::string& bytes) {
    static const char* kAlphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back(kAlphabet[v & 63]);
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string mime_for(const std::string& path) {
    const auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == "jpg" || ext == "jpeg")
        return "image/jpeg";
    if (ext == "gif")
        return "image/gif";
    if (ext == "webp")
        return "image/webp";
    return "image/png";
}

std::string data_url_for(const std::string& image_ref) {
    std::ifstream in(image_ref, std::ios::binary);
    if (!in)
        throw MissingImageError("cannot read image for request: " + image_ref);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return "data:" + mime_for(image_ref) + ";base64," + base64_encode(bytes);
}

// Splits "http://host:1234/v1" into client origin and path prefix.
struct ParsedUrl {
    std::string origin;
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("backend base_url needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

/// Client for the de-facto chat-completions wire shape: one user message
/// whose content is a list of text and image_url parts.
class HttpChatBackend final : public ModelBackend {
public:
    explicit HttpChatBackend(BackendConfig config) : config_(std::move(config)) {}

    BackendResponse complete(const BackendRequest& request) override {
        json parts = json::array();
        for (const auto& block : request.messages) {
            if (block.type == MessageBlock::Type::kText)
                parts.push_back({{"type", "text"}, {"text", block.content}});
            else
                parts.push_back({{"type", "image_url"},
                                 {"image_url", {{"url", data_url_for(block.content)}}}});
        }

        json body;
        body["model"] = request.model_name;
        body["messages"] = json::array({json{{"role", "user"}, {"content", parts}}});
        body["temperature"] = request.decode.temperature;
        body["max_tokens"] = request.decode.max_output_tokens;
        if (request.decode.seed)
            body["seed"] = *request.decode.seed;

        const auto url = parse_base_url(config_.base_url);
        httplib::Client client(url.origin);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(std::chrono::seconds(300));

        httplib::Headers headers;
        if (!config_.api_key_env_var.empty()) {
            const char* key = std::getenv(config_.api_key_env_var.c_str());
            if (!key || *key == '\0')
                throw AuthError("credential env var not set: " + config_.api_key_env_var);
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        const auto start = std::chrono::steady_clock::now();
        auto result = client.Post(url.path_prefix + "/chat/completions", headers,
                                  body.dump(), "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);

        if (!result)
            throw TransportError("connection to " + config_.base_url + " failed: " +
                                 httplib::to_string(result.error()));
        if (result->status == 401 || result->status == 403)
            throw AuthError("backend " + config_.backend_id + " rejected credentials (HTTP " +
                            std::to_string(result->status) + ")");
        if (retryable_status(result->status))
            throw TransportError("backend " + config_.backend_id + " returned HTTP " +
                                 std::to_string(result->status));
        if (result->status != 200)
            throw BackendError("backend " + config_.backend_id + " returned HTTP " +
                               std::to_string(result->status) + ": " + result->body);

        return parse_reply(result->body, elapsed);
    }

private:
    BackendResponse parse_reply(const std::string& body,
                                std::chrono::milliseconds elapsed) const {
        json obj;
        try {
            obj = json::parse(body);
        } catch (const json::exception& ex) {
            throw MalformedReplyError("backend " + config_.backend_id +
                                      " reply is not JSON: " + ex.what());
        }

        BackendResponse response;
        response.latency = elapsed;
        try {
            const auto& choices = obj.at("choices");
            if (!choices.is_array() || choices.empty())
                throw MalformedReplyError("backend reply has no choices");
            const auto& content = choices.at(0).at("message").at("content");
            if (content.is_string()) {
                response.text = content.get<std::string>();
            } else if (content.is_array()) {
                // Some servers return content as a part list; join text parts.
                for (const auto& part : content)
                    if (part.value("type", "") == "text")
                        response.text += part.value("text", "");
            } else {
                throw MalformedReplyError("backend reply content has unknown shape");
            }
        } catch (const json::exception& ex) {
            throw MalformedReplyError("backend " + config_.backend_id +
                                      " reply missing fields: " + ex.what());
        }

        if (obj.contains("usage") && obj["usage"].is_object()) {
            response.usage.input_tokens = obj["usage"].value("prompt_tokens", std::int64_t{0});
            response.usage.output_tokens =
                obj["usage"].value("completion_tokens", std::int64_t{0});
        }
        return response;
    }

    BackendConfig config_;
};

} // namespace

std::unique_ptr<ModelBackend> make_http_backend(const BackendConfig& config) {
    return std::make_unique<HttpChatBackend>(config);
}

} // namespace figcap::modelgw
