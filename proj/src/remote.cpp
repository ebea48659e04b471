#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/gateway.hpp"

namespace mobforge {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
    if (options_.api_key.empty()) {
        if (const char* key = std::getenv("MOBFORGE_LLM_API_KEY")) options_.api_key = key;
    }
    split_url(options_.endpoint);
}

std::string RemoteBackend::dispatch(const LlmRequest& request, const std::string& rendered, const std::string&) {
    const auto ep = split_url(options_.endpoint);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(options_.timeout_s);
    client.set_read_timeout(options_.timeout_s);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    nlohmann::json body{{"model", options_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", rendered}}})},
                        {"temperature", request.params.temperature},
                        {"max_tokens", request.params.max_tokens}};
    const auto payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = static_cast<long long>(options_.backoff_ms) << std::min(attempt - 1, 16);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (transient_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(ErrorCode::BackendError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BackendError, std::string("malformed completion response: ") + e.what());
        }
    }
    throw Error(ErrorCode::BackendUnreachable, options_.endpoint + " after " + std::to_string(options_.max_retries + 1) +
                                                   " attempts: " + last_error);
}

}  // namespace mobforge
