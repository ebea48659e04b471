#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/prompts.hpp"
#include "mobforge/rng.hpp"

namespace mobforge {

struct GenerationParams {
    double temperature = 0.2;
    int max_tokens = 1024;
    std::uint64_t seed = 0;
};

struct PromptTranscript {
    TemplateId template_id = TemplateId::DailyPlan;
    std::string rendered_prompt;
    std::string response_text;
    std::string backend_id;
    std::string model_name;
    std::string request_hash;
    std::string timestamp;  // ISO-8601 UTC
};

nlohmann::json transcript_to_json(const PromptTranscript& t);
PromptTranscript transcript_from_json(const nlohmann::json& j);

// Answers a prompt offline from statistics the caller attached; receives a
// generator keyed by (run_seed, request_hash).
using ReplayResponder = std::function<std::string(CounterRng&)>;

struct LlmRequest {
    TemplateId template_id = TemplateId::DailyPlan;
    std::vector<std::string> slots;
    // Appended after the rendered template (validation feedback on re-prompts).
    std::string feedback;
    GenerationParams params;
    ReplayResponder replay;

    std::string rendered() const;
};

// sha256 over (backend_id, model_name, rendered_prompt, temperature).
std::string request_hash(std::string_view backend_id, std::string_view model_name, std::string_view rendered,
                         double temperature);
// Fixture key for the scripted backend: sha256 over the slots and feedback.
std::string slots_hash(const std::vector<std::string>& slots, std::string_view feedback = {});

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual std::string model_name() const = 0;
    virtual std::string dispatch(const LlmRequest& request, const std::string& rendered,
                                 const std::string& request_hash) = 0;
};

struct RemoteOptions {
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key;  // usually from MOBFORGE_LLM_API_KEY
    int max_retries = 4;
    int backoff_ms = 500;
    int timeout_s = 120;
};

class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteOptions options);
    std::string id() const override { return "remote"; }
    std::string model_name() const override { return options_.model; }
    std::string dispatch(const LlmRequest& request, const std::string& rendered, const std::string& hash) override;

private:
    RemoteOptions options_;
};

class ScriptedBackend : public Backend {
public:
    struct Fixture {
        std::string template_id;
        std::string slots_hash;  // "*" matches any request for the template
        std::string response;
    };

    ScriptedBackend(std::vector<Fixture> fixtures, bool strict);
    static std::vector<Fixture> read_fixtures(const std::string& path);
    std::string id() const override { return "scripted"; }
    std::string model_name() const override { return "fixtures"; }
    std::string dispatch(const LlmRequest& request, const std::string& rendered, const std::string& hash) override;

private:
    std::map<std::pair<std::string, std::string>, std::string> table_;
    bool strict_;
};

class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(std::uint64_t run_seed) : run_seed_(run_seed) {}
    std::string id() const override { return "replay"; }
    // The seed is part of the model name so cache entries never cross runs.
    std::string model_name() const override { return "replay/seed=" + std::to_string(run_seed_); }
    std::string dispatch(const LlmRequest& request, const std::string& rendered, const std::string& hash) override;

private:
    std::uint64_t run_seed_;
};

struct Completion {
    std::string text;
    PromptTranscript transcript;
    bool cached = false;
};

struct GatewayOptions {
    std::string cache_path;  // empty: in-memory only
    int max_in_flight = 8;
};

// Cache-first completion over one backend; safe for concurrent callers.
class Gateway {
public:
    explicit Gateway(std::unique_ptr<Backend> backend, GatewayOptions options = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    Completion complete(const LlmRequest& request);

    const Backend& backend() const { return *backend_; }
    std::uint64_t dispatch_count() const { return dispatches_.load(); }
    std::uint64_t cache_hits() const { return hits_.load(); }

private:
    struct Impl;
    std::unique_ptr<Backend> backend_;
    std::unique_ptr<Impl> impl_;
    std::atomic<std::uint64_t> dispatches_{0};
    std::atomic<std::uint64_t> hits_{0};
};

}  // namespace mobforge
