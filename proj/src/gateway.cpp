#include "mobforge/gateway.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <semaphore>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"

namespace mobforge {

using nlohmann::json;

nlohmann::json transcript_to_json(const PromptTranscript& t) {
    return json{{"template_id", template_name(t.template_id)},
                {"rendered_prompt", t.rendered_prompt},
                {"response_text", t.response_text},
                {"backend_id", t.backend_id},
                {"model_name", t.model_name},
                {"request_hash", t.request_hash},
                {"timestamp", t.timestamp}};
}

PromptTranscript transcript_from_json(const nlohmann::json& j) {
    PromptTranscript t;
    const auto id = parse_template_id(j.at("template_id").get<std::string>());
    if (!id) throw Error(ErrorCode::InvalidSpec, "unknown template_id " + j.at("template_id").dump());
    t.template_id = *id;
    t.rendered_prompt = j.at("rendered_prompt").get<std::string>();
    t.response_text = j.at("response_text").get<std::string>();
    t.backend_id = j.at("backend_id").get<std::string>();
    t.model_name = j.at("model_name").get<std::string>();
    t.request_hash = j.at("request_hash").get<std::string>();
    t.timestamp = j.value("timestamp", "");
    return t;
}

std::string LlmRequest::rendered() const {
    auto text = render_prompt(template_id, slots);
    if (!feedback.empty()) text += "\n\n" + feedback;
    return text;
}

std::string request_hash(std::string_view backend_id, std::string_view model_name, std::string_view rendered,
                         double temperature) {
    std::string material;
    material.append(backend_id).push_back('\0');
    material.append(model_name).push_back('\0');
    material.append(rendered).push_back('\0');
    material += format_double(temperature);
    return sha256_hex(material);
}

std::string slots_hash(const std::vector<std::string>& slots, std::string_view feedback) {
    std::string material;
    for (const auto& s : slots) {
        material += s;
        material.push_back('\x1f');
    }
    if (!feedback.empty()) {
        material.push_back('\x1e');
        material.append(feedback);
    }
    return sha256_hex(material);
}

ScriptedBackend::ScriptedBackend(std::vector<Fixture> fixtures, bool strict) : strict_(strict) {
    for (auto& f : fixtures) table_[{f.template_id, f.slots_hash}] = std::move(f.response);
}

std::vector<ScriptedBackend::Fixture> ScriptedBackend::read_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open fixture file " + path);
    std::vector<Fixture> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("template_id").get<std::string>(), j.at("slots_hash").get<std::string>(),
                           j.at("response").get<std::string>()});
        } catch (const json::exception& e) {
            throw RowError(ErrorCode::MalformedRow, n, std::string("fixture: ") + e.what());
        }
    }
    return out;
}

std::string ScriptedBackend::dispatch(const LlmRequest& request, const std::string&, const std::string&) {
    const std::string name(template_name(request.template_id));
    const auto key = slots_hash(request.slots, request.feedback);
    if (auto it = table_.find({name, key}); it != table_.end()) return it->second;
    if (auto it = table_.find({name, "*"}); it != table_.end()) return it->second;
    if (strict_) throw Error(ErrorCode::FixtureMiss, name + " slots_hash " + key);
    return {};
}

std::string ReplayBackend::dispatch(const LlmRequest& request, const std::string&, const std::string& hash) {
    if (!request.replay)
        throw Error(ErrorCode::MissingContext,
                    std::string(template_name(request.template_id)) + " request carries no cohort statistics");
    CounterRng rng(mix_seed(run_seed_, std::string_view(hash)));
    return request.replay(rng);
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

struct Gateway::Impl {
    explicit Impl(int max_in_flight) : slots(std::max(1, max_in_flight)) {}

    std::shared_mutex cache_mu;
    std::unordered_map<std::string, PromptTranscript> cache;

    std::mutex inflight_mu;
    std::unordered_map<std::string, std::shared_future<PromptTranscript>> inflight;

    std::counting_semaphore<4096> slots;

    std::mutex writer_mu;
    std::ofstream writer;
};

Gateway::Gateway(std::unique_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), impl_(std::make_unique<Impl>(std::min(options.max_in_flight, 4096))) {
    if (options.cache_path.empty()) return;
    if (std::ifstream in(options.cache_path); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            try {
                auto t = transcript_from_json(json::parse(line));
                impl_->cache.emplace(t.request_hash, std::move(t));
            } catch (const std::exception&) {
                // A torn last line from an interrupted run; the entry is simply re-requested.
            }
        }
    }
    const auto parent = std::filesystem::path(options.cache_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    bool torn_tail = false;
    if (std::ifstream in(options.cache_path, std::ios::binary | std::ios::ate); in && in.tellg() > 0) {
        in.seekg(-1, std::ios::end);
        torn_tail = in.get() != '\n';
    }
    impl_->writer.open(options.cache_path, std::ios::app);
    if (!impl_->writer) throw Error(ErrorCode::IoError, "cannot open cache file " + options.cache_path);
    // Otherwise the next entry would be glued onto the torn line.
    if (torn_tail) impl_->writer << '\n';
}

Gateway::~Gateway() = default;

Completion Gateway::complete(const LlmRequest& request) {
    const auto rendered = request.rendered();
    const auto hash = request_hash(backend_->id(), backend_->model_name(), rendered, request.params.temperature);
    {
        std::shared_lock lock(impl_->cache_mu);
        if (auto it = impl_->cache.find(hash); it != impl_->cache.end()) {
            ++hits_;
            return {it->second.response_text, it->second, true};
        }
    }
    std::promise<PromptTranscript> promise;
    {
        std::unique_lock lock(impl_->inflight_mu);
        if (auto it = impl_->inflight.find(hash); it != impl_->inflight.end()) {
            auto fut = it->second;
            lock.unlock();
            const auto t = fut.get();
            ++hits_;
            return {t.response_text, t, true};
        }
        {
            std::shared_lock cl(impl_->cache_mu);
            if (auto it = impl_->cache.find(hash); it != impl_->cache.end()) {
                ++hits_;
                return {it->second.response_text, it->second, true};
            }
        }
        impl_->inflight.emplace(hash, promise.get_future().share());
    }
    auto finish = [&] {
        std::lock_guard lock(impl_->inflight_mu);
        impl_->inflight.erase(hash);
    };

    PromptTranscript t;
    try {
        impl_->slots.acquire();
        std::string text;
        try {
            ++dispatches_;
            text = backend_->dispatch(request, rendered, hash);
        } catch (...) {
            impl_->slots.release();
            throw;
        }
        impl_->slots.release();
        t.template_id = request.template_id;
        t.rendered_prompt = rendered;
        t.response_text = std::move(text);
        t.backend_id = backend_->id();
        t.model_name = backend_->model_name();
        t.request_hash = hash;
        t.timestamp = utc_now();
    } catch (...) {
        promise.set_exception(std::current_exception());
        finish();
        throw;
    }
    {
        std::unique_lock lock(impl_->cache_mu);
        impl_->cache.emplace(hash, t);
    }
    if (impl_->writer.is_open()) {
        std::lock_guard lock(impl_->writer_mu);
        impl_->writer << transcript_to_json(t).dump() << '\n';
        impl_->writer.flush();
    }
    promise.set_value(t);
    finish();
    return {t.response_text, t, false};
}

}  // namespace mobforge
