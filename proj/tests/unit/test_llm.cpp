#include <doctest.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "mobforge/error.hpp"
#include "mobforge/gateway.hpp"
#include "mobforge/prompts.hpp"

using namespace mobforge;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
    return s;
}

// Counts dispatches and answers after a short delay, so concurrent callers overlap.
class SlowEcho : public Backend {
public:
    std::atomic<int>* calls;
    explicit SlowEcho(std::atomic<int>* c) : calls(c) {}
    std::string id() const override { return "echo"; }
    std::string model_name() const override { return "echo-1"; }
    std::string dispatch(const LlmRequest& r, const std::string&, const std::string&) override {
        ++*calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        return "echo:" + r.slots.front();
    }
};

class Failing : public Backend {
public:
    std::string id() const override { return "failing"; }
    std::string model_name() const override { return "none"; }
    std::string dispatch(const LlmRequest&, const std::string&, const std::string&) override {
        throw Error(ErrorCode::BackendUnreachable, "offline");
    }
};

LlmRequest plan_request(const std::string& first) {
    LlmRequest r;
    r.template_id = TemplateId::DailyPlan;
    r.slots = {first, "patterns", "2016-11-15"};
    return r;
}

}  // namespace

TEST_CASE("templates match the published prompt text") {
    for (auto id : kAllTemplates) {
        const auto& t = prompt_template(id);
        const auto golden = read_file(std::string(MOBFORGE_SOURCE_DIR) + "/tests/golden/" + std::string(t.name) + ".txt");
        INFO(t.name);
        REQUIRE_FALSE(golden.empty());
        CHECK(rstrip(std::string(t.body)) == rstrip(golden));
        CHECK(parse_template_id(t.name) == id);

        // Slot count equals the number of distinct placeholders.
        std::size_t highest = 0;
        for (std::size_t pos = 0; (pos = golden.find("<INPUT ", pos)) != std::string::npos; ++pos)
            highest = std::max<std::size_t>(highest, std::stoul(golden.substr(pos + 7)));
        CHECK(t.slot_count == highest);

        std::vector<std::string> slots;
        for (std::size_t i = 0; i < t.slot_count; ++i) slots.push_back("{slot" + std::to_string(i + 1) + "}");
        const auto text = render_prompt(id, slots);
        CHECK(text.find("<INPUT") == std::string::npos);
        for (const auto& s : slots) CHECK(text.find(s) != std::string::npos);
        CHECK(text.size() > t.output_contract.size());
        CHECK(text.substr(text.size() - t.output_contract.size()) == t.output_contract);

        slots.push_back("extra");
        try {
            render_prompt(id, slots);
            FAIL("expected SlotArityMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SlotArityMismatch);
        }
    }
    CHECK_FALSE(parse_template_id("nope").has_value());
}

TEST_CASE("request hash covers backend, model, prompt and temperature") {
    const auto h = request_hash("replay", "m", "prompt", 0.2);
    CHECK(h.size() == 64);
    CHECK(h == request_hash("replay", "m", "prompt", 0.2));
    CHECK(h != request_hash("remote", "m", "prompt", 0.2));
    CHECK(h != request_hash("replay", "n", "prompt", 0.2));
    CHECK(h != request_hash("replay", "m", "prompt!", 0.2));
    CHECK(h != request_hash("replay", "m", "prompt", 0.3));
    CHECK(slots_hash({"a", "b"}) != slots_hash({"ab"}));
    CHECK(slots_hash({"a"}) != slots_hash({"a"}, "feedback"));
}

TEST_CASE("gateway caches, persists and survives a torn cache file") {
    testing::TempDir dir("gateway");
    const auto cache = dir.str("cache.ndjson");
    std::atomic<int> calls{0};
    {
        Gateway gw(std::make_unique<SlowEcho>(&calls), {cache, 4});
        const auto a = gw.complete(plan_request("x"));
        CHECK_FALSE(a.cached);
        CHECK(a.text == "echo:x");
        CHECK(a.transcript.backend_id == "echo");
        CHECK(a.transcript.rendered_prompt == plan_request("x").rendered());
        const auto b = gw.complete(plan_request("x"));
        CHECK(b.cached);
        CHECK(b.text == "echo:x");
        CHECK(gw.dispatch_count() == 1);
        CHECK(gw.cache_hits() == 1);

        auto other = plan_request("x");
        other.params.temperature = 0.7;
        CHECK_FALSE(gw.complete(other).cached);
    }
    CHECK(calls == 2);
    {
        std::ofstream(cache, std::ios::app) << "{\"request_hash\": \"trunc";
    }
    Gateway again(std::make_unique<SlowEcho>(&calls), {cache, 4});
    CHECK(again.complete(plan_request("x")).cached);
    CHECK_FALSE(again.complete(plan_request("y")).cached);
    CHECK(calls == 3);

    // Reloading after the torn line still finds every complete entry.
    Gateway third(std::make_unique<SlowEcho>(&calls), {cache, 4});
    CHECK(third.complete(plan_request("y")).cached);
    CHECK(calls == 3);
}

TEST_CASE("concurrent identical requests dispatch once") {
    std::atomic<int> calls{0};
    Gateway gw(std::make_unique<SlowEcho>(&calls), {"", 2});
    std::vector<std::thread> pool;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i)
        pool.emplace_back([&] {
            if (gw.complete(plan_request("same")).text == "echo:same") ++ok;
        });
    for (auto& t : pool) t.join();
    CHECK(ok == 8);
    CHECK(calls == 1);
    CHECK(gw.dispatch_count() == 1);
    CHECK(gw.cache_hits() == 7);
}

TEST_CASE("backend failures propagate and are not cached") {
    Gateway gw(std::make_unique<Failing>());
    for (int i = 0; i < 2; ++i) {
        try {
            gw.complete(plan_request("x"));
            FAIL("expected BackendUnreachable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BackendUnreachable);
        }
    }
    CHECK(gw.dispatch_count() == 2);
}

TEST_CASE("scripted backend") {
    const auto req = plan_request("p");
    std::vector<ScriptedBackend::Fixture> fx{
        {"daily_plan", slots_hash(req.slots), "exact"},
        {"recursive_reasoning", "*", "any"},
    };
    Gateway strict(std::make_unique<ScriptedBackend>(fx, true));
    CHECK(strict.complete(req).text == "exact");
    LlmRequest rr;
    rr.template_id = TemplateId::RecursiveReasoning;
    rr.slots = {"1", "2", "3", "4", "5"};
    CHECK(strict.complete(rr).text == "any");
    try {
        strict.complete(plan_request("q"));
        FAIL("expected FixtureMiss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FixtureMiss);
    }
    Gateway lax(std::make_unique<ScriptedBackend>(fx, false));
    CHECK(lax.complete(plan_request("q")).text.empty());

    testing::TempDir dir("fixtures");
    {
        std::ofstream out(dir.str("f.ndjson"));
        out << nlohmann::json{{"template_id", "daily_plan"}, {"slots_hash", "*"}, {"response", "r"}}.dump() << "\n\n";
        out << "not json\n";
    }
    try {
        ScriptedBackend::read_fixtures(dir.str("f.ndjson"));
        FAIL("expected a row error");
    } catch (const RowError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("replay backend is a pure function of seed and request") {
    auto req = plan_request("p");
    req.replay = [](CounterRng& rng) { return std::to_string(rng.next_u64()); };
    Gateway a(std::make_unique<ReplayBackend>(7)), b(std::make_unique<ReplayBackend>(7)), c(std::make_unique<ReplayBackend>(8));
    const auto ta = a.complete(req).text;
    CHECK(ta == b.complete(req).text);
    CHECK(ta != c.complete(req).text);
    auto other = plan_request("other");
    other.replay = req.replay;
    CHECK(ta != a.complete(other).text);

    try {
        a.complete(plan_request("no stats"));
        FAIL("expected MissingContext");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingContext);
    }
}

TEST_CASE("transcripts round trip through json") {
    PromptTranscript t{TemplateId::PatternExtraction, "prompt", "answer", "replay", "m", "abc", "2026-01-01T00:00:00Z"};
    const auto back = transcript_from_json(transcript_to_json(t));
    CHECK(back.template_id == t.template_id);
    CHECK(back.rendered_prompt == t.rendered_prompt);
    CHECK(back.response_text == t.response_text);
    CHECK(back.request_hash == t.request_hash);
    CHECK(back.timestamp == t.timestamp);
}
