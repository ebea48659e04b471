#include "mobforge/reasoner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/parallel.hpp"
#include "mobforge/synth.hpp"

namespace mobforge {

namespace {

constexpr std::array<PoiCategory, 1> kWork{PoiCategory::Workplace};
constexpr std::array<PoiCategory, 1> kSchool{PoiCategory::School};
constexpr std::array<PoiCategory, 1> kFun{PoiCategory::Entertainment};
constexpr std::array<PoiCategory, 1> kHospital{PoiCategory::Hospital};
constexpr std::array<PoiCategory, 2> kPickUp{PoiCategory::School, PoiCategory::Residence};
constexpr std::array<PoiCategory, 1> kResidence{PoiCategory::Residence};
constexpr std::array<PoiCategory, 1> kShop{PoiCategory::Shop};
constexpr std::array<PoiCategory, 6> kAny{PoiCategory::Workplace,     PoiCategory::School,
                                          PoiCategory::Entertainment, PoiCategory::Hospital,
                                          PoiCategory::Residence,     PoiCategory::Shop};

constexpr std::array<std::string_view, 7> kWeekdayNames{"Monday", "Tuesday",  "Wednesday", "Thursday",
                                                        "Friday", "Saturday", "Sunday"};

bool category_fits(Purpose p, PoiCategory c) {
    const auto allowed = categories_for(p);
    return std::find(allowed.begin(), allowed.end(), c) != allowed.end();
}

struct KeyLine {
    std::string key;  // upper-cased
    std::string value;
};

std::vector<KeyLine> key_lines(std::string_view block) {
    std::vector<KeyLine> out;
    std::istringstream in{std::string(block)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = std::string(trim(line));
        while (!t.empty() && (t.front() == '-' || t.front() == '*')) t.erase(0, 1);
        const auto colon = t.find(':');
        if (colon == std::string::npos) continue;
        auto key = std::string(trim(std::string_view(t).substr(0, colon)));
        for (auto& ch : key) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        auto value = std::string(trim(std::string_view(t).substr(colon + 1)));
        while (!value.empty() && (value.back() == '*' || value.back() == '.' || value.back() == ','))
            value.pop_back();
        out.push_back({key, std::string(trim(value))});
    }
    return out;
}

std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty() || s.size() > 9) return std::nullopt;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

// "lo-hi" in meters, an optional trailing unit, or a single value.
std::optional<std::pair<double, double>> parse_range(std::string value) {
    auto v = to_lower(value);
    for (std::string_view unit : {"meters", "metres", "m"}) {
        if (v.size() > unit.size() && v.ends_with(unit)) {
            v.resize(v.size() - unit.size());
            break;
        }
    }
    const auto dash = v.find('-');
    if (dash == std::string::npos) {
        auto one = parse_int(v);
        if (!one) return std::nullopt;
        return std::pair<double, double>{*one, *one};
    }
    auto lo = parse_int(std::string_view(v).substr(0, dash));
    auto hi = parse_int(std::string_view(v).substr(dash + 1));
    if (!lo || !hi) return std::nullopt;
    return std::pair<double, double>{*lo, *hi};
}

std::optional<std::pair<int, int>> parse_window(std::string_view value) {
    const auto dash = value.find('-');
    if (dash == std::string_view::npos) return std::nullopt;
    auto a = parse_clock(trim(value.substr(0, dash)));
    auto b = parse_clock(trim(value.substr(dash + 1)));
    if (!a || !b) return std::nullopt;
    return std::pair<int, int>{*a, *b};
}

std::string range_text(double lo, double hi) {
    return std::to_string(std::lround(lo)) + "-" + std::to_string(std::lround(hi));
}

std::string render_schedule(const std::vector<CommittedStep>& steps) {
    if (steps.empty()) return "none yet";
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& p = steps[i].point;
        if (i) out += "\n";
        out += std::to_string(i + 1) + ". depart " + format_clock(p.depart_time()) + ", arrive " +
               format_clock(p.arrive_time) + ", " + std::string(name_of(p.purpose)) + " at a " +
               std::string(name_of(steps[i].decision.category)) + ", " + std::string(name_of(p.mode)) + ", " +
               std::to_string(std::lround(p.distance_m)) + " m";
    }
    return out;
}

const DayStats& day_stats(const MobilityPattern& pattern, DayType t) {
    const auto& s = pattern.stats.split(t);
    return s.trips() > 0 ? s : pattern.stats.all;
}

int sample_window_start(const Counts& quarter_hours, CounterRng& rng, int fallback) {
    const auto i = rng.weighted(std::span<const std::uint64_t>(quarter_hours));
    if (i >= quarter_hours.size()) return fallback;
    return static_cast<int>(i) * 15;
}

std::pair<double, double> sample_range(const DayStats& s, Purpose p, const LogBinning& b, CounterRng& rng) {
    const Counts* hist = &s.distance_by_purpose[index_of(p)];
    std::size_t bin = rng.weighted(std::span<const std::uint64_t>(*hist));
    if (bin >= hist->size()) {
        hist = &s.distance_hist;
        bin = rng.weighted(std::span<const std::uint64_t>(*hist));
    }
    if (bin >= hist->size()) return {500.0, 1500.0};
    const double lo = std::floor(b.low(bin));
    const double hi = bin + 1 == b.size() ? lo : std::ceil(b.high(bin));
    return {lo, std::max(lo, hi)};
}

TravelMode sample_mode(const DayStats& s, double mid, const IndividualProfile& profile, CounterRng& rng) {
    const auto& row = s.mode_by_band[mode_band(mid)];
    auto i = rng.weighted(std::span<const std::uint64_t>(row));
    if (i < row.size()) return from_index<TravelMode>(i);
    i = rng.weighted(std::span<const std::uint64_t>(s.mode_freq));
    if (i < s.mode_freq.size()) return from_index<TravelMode>(i);
    return profile.primary_mode;
}

// Purpose chain of exactly k trips: a Markov walk over observed transitions
// with an end state weighted by how often each purpose closes a day.
std::vector<Purpose> sample_purposes(const DayStats& s, std::size_t k, CounterRng& rng) {
    auto draw_first = [&]() {
        auto i = rng.weighted(std::span<const std::uint64_t>(s.first_purpose));
        if (i >= kPurposes) i = rng.weighted(std::span<const std::uint64_t>(s.purpose_freq));
        return i >= kPurposes ? Purpose::Other : from_index<Purpose>(i);
    };
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<Purpose> chain{draw_first()};
        bool ok = true;
        while (ok) {
            Counts w = s.purpose_transition[index_of(chain.back())];
            w.push_back(s.last_purpose[index_of(chain.back())]);
            const auto i = rng.weighted(std::span<const std::uint64_t>(w));
            const bool end = i >= kPurposes;
            if (end) {
                ok = chain.size() == k;
                break;
            }
            if (chain.size() == k) {
                ok = false;
                break;
            }
            chain.push_back(from_index<Purpose>(i));
        }
        if (ok) return chain;
    }
    // Rejection failed: walk without the end state.
    std::vector<Purpose> chain{draw_first()};
    while (chain.size() < k) {
        const auto& row = s.purpose_transition[index_of(chain.back())];
        auto i = rng.weighted(std::span<const std::uint64_t>(row));
        if (i >= kPurposes) i = rng.weighted(std::span<const std::uint64_t>(s.purpose_freq));
        chain.push_back(i >= kPurposes ? Purpose::ReturningHome : from_index<Purpose>(i));
    }
    return chain;
}

std::string plan_block(const DailyPlan& plan) {
    return "Plan for " + render_day(plan.date) + ":\n```\n" + render_plan(plan) + (plan.entries.empty() ? "" : "\n") +
           "```";
}

std::string decision_text(const ActivityDecision& d) {
    return "```\nPURPOSE: " + std::string(name_of(d.purpose)) + "\nCATEGORY: " + std::string(name_of(d.category)) +
           "\nDEPART: " + format_clock(d.depart_time) + "\nDISTANCE_M: " + range_text(d.d_lo, d.d_hi) +
           "\nMODE: " + std::string(name_of(d.mode)) + "\n```";
}

ActivityDecision decision_from_entry(const PlanEntry& e, int depart) {
    ActivityDecision d;
    d.depart_time = depart;
    d.purpose = e.purpose;
    d.category = e.category;
    d.d_lo = e.d_lo;
    d.d_hi = e.d_hi;
    d.mode = e.mode;
    return d;
}

}  // namespace

std::span<const PoiCategory> categories_for(Purpose p) {
    switch (p) {
        case Purpose::CommutingToWork:
        case Purpose::BusinessTrip: return kWork;
        case Purpose::GoingToSchool: return kSchool;
        case Purpose::EntertainmentDining: return kFun;
        case Purpose::MedicalAppointment: return kHospital;
        case Purpose::PickUpDropOff: return kPickUp;
        case Purpose::ReturningHome:
        case Purpose::VisitingFriends: return kResidence;
        case Purpose::Shopping: return kShop;
        case Purpose::Other: return kAny;
    }
    return kAny;
}

std::string decision_block(std::string_view text, bool* fenced) {
    const auto close = text.rfind("```");
    if (close != std::string_view::npos && close > 0) {
        const auto open = text.rfind("```", close - 1);
        if (open != std::string_view::npos) {
            auto body = text.substr(open + 3, close - open - 3);
            // Drop an info string such as ```text.
            const auto nl = body.find('\n');
            if (nl != std::string_view::npos && body.substr(0, nl).find(':') == std::string_view::npos)
                body.remove_prefix(nl + 1);
            else if (nl == std::string_view::npos && body.find(':') == std::string_view::npos)
                body = {};
            if (fenced) *fenced = true;
            return std::string(body);
        }
    }
    if (fenced) *fenced = false;
    return std::string(text);
}

std::string render_profile(const IndividualProfile& p) {
    std::string out = "person " + p.person_id + "; age " + std::string(name_of(p.age_band)) + "; " +
                      std::string(name_of(p.gender)) + "; occupation: " + std::string(name_of(p.occupation)) +
                      "; income: " + std::string(name_of(p.income)) + "; education: " +
                      std::string(name_of(p.education)) + "; owns a car: " + (p.owns_car ? "Yes" : "No") +
                      "; housing: " + std::string(name_of(p.housing)) + "; primary travel mode: " +
                      std::string(name_of(p.primary_mode)) + "; home at " + format_coord(p.home);
    out += p.work ? "; works at " + format_coord(*p.work) : std::string("; no fixed workplace");
    return out;
}

std::string render_pattern(const MobilityPattern& p) { return pattern_summary(p); }

std::string render_plan(const DailyPlan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto& e = plan.entries[i];
        if (i) out += "\n\n";
        out += "WINDOW: " + format_clock(e.window_start) + "-" + format_clock(e.window_end) +
               "\nPURPOSE: " + std::string(name_of(e.purpose)) + "\nCATEGORY: " + std::string(name_of(e.category)) +
               "\nDISTANCE_M: " + range_text(e.d_lo, e.d_hi) + "\nMODE: " + std::string(name_of(e.mode));
    }
    return out;
}

std::string render_day(const Date& date) {
    return date.iso() + " (" + std::string(kWeekdayNames[static_cast<std::size_t>(date.weekday())]) + ", " +
           std::string(day_type_name(day_type_of(date))) + ")";
}

DailyPlan parse_plan(std::string_view response, const std::string& person_id, const Date& date) {
    bool fenced = false;
    const auto block = decision_block(response, &fenced);
    DailyPlan plan{person_id, date, day_type_of(date), {}};
    std::optional<PlanEntry> cur;
    std::array<bool, 5> seen{};
    auto flush = [&]() {
        if (!cur) return;
        static constexpr std::array<std::string_view, 5> names{"WINDOW", "PURPOSE", "CATEGORY", "DISTANCE_M", "MODE"};
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                throw Error(ErrorCode::PlanUnparseable,
                            "trip " + std::to_string(plan.entries.size() + 1) + " lacks " + std::string(names[i]));
        plan.entries.push_back(*cur);
    };
    auto bad = [&](const KeyLine& kl, std::string_view what) {
        throw Error(ErrorCode::PlanUnparseable, std::string(what) + " '" + kl.value + "'");
    };
    for (const auto& kl : key_lines(block)) {
        if (kl.key == "WINDOW") {
            flush();
            auto w = parse_window(kl.value);
            if (!w) bad(kl, "bad window");
            cur = PlanEntry{};
            seen = {};
            cur->window_start = w->first;
            cur->window_end = w->second;
            seen[0] = true;
            continue;
        }
        if (!cur) continue;
        if (kl.key == "PURPOSE") {
            auto p = parse_vocab<Purpose>(kl.value);
            if (!p) bad(kl, "unknown purpose");
            cur->purpose = *p;
            seen[1] = true;
        } else if (kl.key == "CATEGORY") {
            auto c = parse_vocab<PoiCategory>(kl.value);
            if (!c) bad(kl, "unknown category");
            cur->category = *c;
            seen[2] = true;
        } else if (kl.key == "DISTANCE_M") {
            auto r = parse_range(kl.value);
            if (!r) bad(kl, "bad distance range");
            cur->d_lo = r->first;
            cur->d_hi = r->second;
            seen[3] = true;
        } else if (kl.key == "MODE") {
            auto m = parse_vocab<TravelMode>(kl.value);
            if (!m) bad(kl, "unknown mode");
            cur->mode = *m;
            seen[4] = true;
        }
    }
    flush();
    if (plan.entries.empty() && !fenced) throw Error(ErrorCode::PlanUnparseable, "no fenced plan block in response");
    return plan;
}

ValidationResult validate_plan(const DailyPlan& plan) {
    ValidationResult r;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto& e = plan.entries[i];
        const std::string at = "entries[" + std::to_string(i) + "].";
        if (e.window_end < e.window_start)
            r.add(at + "window", format_clock(e.window_start) + "-" + format_clock(e.window_end),
                  "window ends before it starts");
        if (i > 0 && e.window_start <= plan.entries[i - 1].window_end)
            r.add(at + "window", format_clock(e.window_start), "overlaps the previous window");
        if (e.d_lo > e.d_hi) r.add(at + "distance_m", range_text(e.d_lo, e.d_hi), "lower bound above upper bound");
        if (!category_fits(e.purpose, e.category))
            r.add(at + "category", std::string(name_of(e.category)),
                  "does not fit purpose " + std::string(name_of(e.purpose)));
    }
    return r;
}

ParsedDecision parse_decision(std::string_view response) {
    const auto block = decision_block(response);
    ParsedDecision out;
    std::array<bool, 5> seen{};
    for (const auto& kl : key_lines(block)) {
        auto bad = [&](std::string_view what) {
            throw Error(ErrorCode::DecisionUnparseable, std::string(what) + " '" + kl.value + "'");
        };
        auto& d = out.decision;
        if (kl.key == "DONE") {
            const auto v = to_lower(kl.value);
            if (v == "yes" || v == "true") out.done = true;
        } else if (kl.key == "PURPOSE") {
            auto p = parse_vocab<Purpose>(kl.value);
            if (!p) bad("unknown purpose");
            d.purpose = *p;
            seen[0] = true;
        } else if (kl.key == "CATEGORY") {
            auto c = parse_vocab<PoiCategory>(kl.value);
            if (!c) bad("unknown category");
            d.category = *c;
            seen[1] = true;
        } else if (kl.key == "DEPART") {
            auto t = parse_clock(kl.value);
            if (!t) bad("bad departure time");
            d.depart_time = *t;
            seen[2] = true;
        } else if (kl.key == "DISTANCE_M") {
            auto r = parse_range(kl.value);
            if (!r) bad("bad distance range");
            d.d_lo = r->first;
            d.d_hi = r->second;
            seen[3] = true;
        } else if (kl.key == "MODE") {
            auto m = parse_vocab<TravelMode>(kl.value);
            if (!m) bad("unknown mode");
            d.mode = *m;
            seen[4] = true;
        }
    }
    if (out.done) return out;
    static constexpr std::array<std::string_view, 5> names{"PURPOSE", "CATEGORY", "DEPART", "DISTANCE_M", "MODE"};
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw Error(ErrorCode::DecisionUnparseable, "missing " + std::string(names[i]));
    return out;
}

ValidationResult validate_decision(const ActivityDecision& d, const ReasonerState& state, const SpeedTable& caps,
                                   double max_range_m) {
    ValidationResult r;
    if (d.depart_time <= state.current_time)
        r.add("depart", format_clock(d.depart_time),
              "time regression: must be after " + format_clock(std::max(state.current_time, 0)));
    if (d.d_lo < 0.0) r.add("distance_m", range_text(d.d_lo, d.d_hi), "negative distance");
    if (d.d_lo > d.d_hi) r.add("distance_m", range_text(d.d_lo, d.d_hi), "lower bound above upper bound");
    if (d.d_hi > max_range_m)
        r.add("distance_m", range_text(d.d_lo, d.d_hi), "beyond " + std::to_string(std::lround(max_range_m)) + " m");
    const double cap = caps[index_of(d.mode)];
    const double minutes = d.d_lo / 1000.0 / cap * 60.0;
    if (d.depart_time + minutes >= kMinutesPerDay)
        r.add("depart", format_clock(d.depart_time),
              "cannot complete before midnight at " + format_double(cap) + " km/h");
    if (!category_fits(d.purpose, d.category))
        r.add("category", std::string(name_of(d.category)),
              "does not fit purpose " + std::string(name_of(d.purpose)));
    return r;
}

DailyPlan sample_plan(const MobilityPattern& pattern, const IndividualProfile& profile, const Date& date,
                      const SpeedTable& cruise_speeds, CounterRng& rng) {
    const auto& s = day_stats(pattern, day_type_of(date));
    const auto& b = pattern.stats.distance_binning;
    DailyPlan plan{profile.person_id, date, day_type_of(date), {}};
    const auto kbin = rng.weighted(std::span<const std::uint64_t>(s.trips_per_day_hist));
    if (kbin >= s.trips_per_day_hist.size() || kbin == 0) return plan;
    const auto purposes = sample_purposes(s, kbin, rng);

    int start = sample_window_start(s.first_depart, rng, 8 * 60);
    for (std::size_t i = 0; i < purposes.size(); ++i) {
        const Purpose p = purposes[i];
        if (i > 0) {
            const auto& prev = plan.entries.back();
            const double mid = 0.5 * (prev.d_lo + prev.d_hi);
            const int travel = leg_duration_min(mid, cruise_speeds[index_of(prev.mode)]);
            const auto& dwell_row = s.dwell_by_purpose[index_of(prev.purpose)];
            const auto dbin = rng.weighted(std::span<const std::uint64_t>(dwell_row));
            const int dwell = dbin >= dwell_row.size() ? 60 : static_cast<int>(dbin) * 15 +
                                                                  static_cast<int>(rng.uniform_int(0, 14));
            start = std::max(prev.window_start + travel + dwell, prev.window_end + 1);
        }
        if (start >= kMinutesPerDay) break;
        PlanEntry e;
        e.window_start = start;
        e.window_end = std::min(start + 14, kMinutesPerDay - 1);
        e.purpose = p;
        const auto cats = categories_for(p);
        e.category = cats[rng.uniform_int(cats.size())];
        std::tie(e.d_lo, e.d_hi) = sample_range(s, p, b, rng);
        e.mode = sample_mode(s, 0.5 * (e.d_lo + e.d_hi), profile, rng);
        plan.entries.push_back(e);
    }
    return plan;
}

DailyPlan generate_plan(const IndividualProfile& profile, const MobilityPattern& pattern, const Date& date,
                        Gateway& gateway, const ReasonerConfig& config) {
    LlmRequest req;
    req.template_id = TemplateId::DailyPlan;
    req.slots = {render_profile(profile), render_pattern(pattern), render_day(date)};
    req.params.temperature = config.temperature;
    const SpeedTable cruise = config.cruise_speeds;
    req.replay = [&profile, &pattern, date, cruise](CounterRng& rng) {
        return plan_block(sample_plan(pattern, profile, date, cruise, rng));
    };
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt) req.feedback = "Your previous plan was rejected: " + last_error + ". Answer again in the format.";
        const auto c = gateway.complete(req);
        try {
            auto plan = parse_plan(c.text, profile.person_id, date);
            const auto v = validate_plan(plan);
            if (v.ok()) return plan;
            last_error = v.summary();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PlanUnparseable) throw;
            last_error = e.detail();
        }
    }
    throw Error(ErrorCode::PlanUnparseable, profile.person_id + " " + date.iso() + ": " + last_error);
}

StepResult reason_step(const ReasonerState& state, Gateway& gateway, const ReasonerConfig& config,
                       const std::string& feedback) {
    if (!state.profile || !state.pattern || state.next_entry >= state.plan.entries.size())
        throw Error(ErrorCode::InvalidSpec, "reason_step needs a profile, a pattern and a pending plan entry");
    LlmRequest req;
    req.template_id = TemplateId::RecursiveReasoning;
    req.slots = {format_clock(std::max(state.current_time, 0)), render_plan(state.plan),
                 render_schedule(state.schedule), render_profile(*state.profile), render_pattern(*state.pattern)};
    req.feedback = feedback;
    req.params.temperature = config.temperature;
    const PlanEntry entry = state.plan.entries[state.next_entry];
    req.replay = [entry](CounterRng& rng) {
        const int depart = static_cast<int>(rng.uniform_int(entry.window_start, entry.window_end));
        return "Following the plan.\n" + decision_text(decision_from_entry(entry, depart));
    };
    const auto c = gateway.complete(req);
    return {parse_decision(c.text), c.transcript.request_hash};
}

DiaryOutcome generate_diary(const IndividualProfile& profile, const MobilityPattern& pattern, const Date& date,
                            Gateway& gateway, const SpatialAnchor& anchor, const ReasonerConfig& config) {
    DiaryOutcome out;
    out.diary.person_id = profile.person_id;
    out.diary.date = date;
    const std::string day_tag = profile.person_id + "/" + date.iso();

    try {
        out.plan = generate_plan(profile, pattern, date, gateway, config);
        ++out.backend_calls;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::PlanUnparseable) throw;
        CounterRng rng(mix_seed(config.run_seed, "plan-fallback/" + day_tag));
        out.plan = sample_plan(pattern, profile, date, config.cruise_speeds, rng);
        out.warnings.push_back("plan fallback: " + e.detail());
    }

    ReasonerState st;
    st.profile = &profile;
    st.pattern = &pattern;
    st.plan = out.plan;
    st.home_node = anchor.snap(profile.home);
    st.current_node = st.home_node;

    const int attempts_allowed = config.disable_rethink ? 1 : 1 + config.max_rethinks;
    bool day_over = false;
    while (!day_over && st.next_entry < st.plan.entries.size()) {
        const auto& entry = st.plan.entries[st.next_entry];
        std::optional<ActivityDecision> decision;
        std::string feedback, transcript;
        int attempts = 0;
        for (; attempts < attempts_allowed && !decision; ++attempts) {
            StepResult step;
            try {
                step = reason_step(st, gateway, config, feedback);
                ++out.backend_calls;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DecisionUnparseable) throw;
                ++out.backend_calls;
                feedback = "Your previous answer could not be read (" + e.detail() + "). Answer again in the format.";
                continue;
            }
            if (step.parsed.done) {
                day_over = true;
                break;
            }
            const auto v = validate_decision(step.parsed.decision, st, config.speed_caps, config.max_range_m);
            if (v.ok()) {
                decision = step.parsed.decision;
                transcript = step.transcript_id;
            } else {
                feedback = "The previous decision was rejected: " + v.summary() + ". Please revise it.";
                ++st.rethink_count;
            }
        }
        if (day_over) break;

        bool fallback = false;
        if (!decision) {
            CounterRng rng(mix_seed(config.run_seed, "step-fallback/" + day_tag + "/" + std::to_string(st.next_entry)));
            const int jitter = static_cast<int>(rng.uniform_int(entry.window_start, entry.window_end));
            auto d = decision_from_entry(entry, std::max(jitter, st.current_time + 1));
            if (!validate_decision(d, st, config.speed_caps, config.max_range_m).ok()) break;
            decision = d;
            fallback = true;
            ++out.fallbacks;
            out.warnings.push_back("step " + std::to_string(st.next_entry + 1) + ": fallback after " +
                                   std::to_string(attempts) + " attempts");
        }

        const auto& d = *decision;
        AnchorResult a;
        try {
            if (d.purpose == Purpose::ReturningHome) {
                a.node = st.home_node;
                a.location = anchor.network().coord(st.home_node);
                a.network_distance_m = anchor.distance(st.current_node, st.home_node);
                if (!std::isfinite(a.network_distance_m))
                    throw Error(ErrorCode::NoReachablePoi, "home is unreachable");
            } else {
                a = anchor.anchor(st.current_node, d.category, 0.5 * (d.d_lo + d.d_hi));
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoPoiOfCategory && e.code() != ErrorCode::NoReachablePoi) throw;
            out.warnings.push_back("step " + std::to_string(st.next_entry + 1) + " dropped: " + e.detail());
            ++st.next_entry;
            continue;
        }

        TrajectoryPoint p;
        p.duration_min = leg_duration_min(a.network_distance_m, config.cruise_speeds[index_of(d.mode)]);
        p.arrive_time = d.depart_time + p.duration_min;
        if (p.arrive_time >= kMinutesPerDay) break;
        p.location = a.location;
        p.purpose = d.purpose;
        p.distance_m = a.network_distance_m;
        p.mode = d.mode;

        out.diary.points.push_back(p);
        out.diary.provenance.push_back("step " + std::to_string(out.diary.points.size()) + ": poi=" +
                                       std::to_string(a.poi) + " node=" + std::to_string(a.node) +
                                       " distance_m=" + format_double(a.network_distance_m) +
                                       " transcript=" + (fallback ? std::string("fallback") : transcript));
        st.schedule.push_back({d, a, p, transcript, fallback, attempts});
        st.current_time = p.arrive_time;
        st.current_node = a.node;
        ++st.next_entry;
    }

    out.steps = st.schedule;
    out.no_trip = out.diary.points.empty();
    if (!out.no_trip) {
        const auto v = validate_diary(out.diary, config.speed_caps);
        if (!v.ok()) throw std::logic_error("reasoner emitted an invalid diary for " + day_tag + ": " + v.summary());
    }
    return out;
}

std::vector<IndividualProfile> sample_population(const Dataset& source, const CohortTree& tree, std::size_t count,
                                                 std::uint64_t seed) {
    const auto leaves = tree.leaves();
    std::vector<double> weights;
    for (int id : leaves) weights.push_back(static_cast<double>(tree.nodes[static_cast<std::size_t>(id)].members.size()));
    std::vector<IndividualProfile> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        CounterRng rng(mix_seed(seed, "population/" + std::to_string(i)));
        const auto li = rng.weighted(std::span<const double>(weights));
        if (li >= leaves.size()) throw Error(ErrorCode::EmptyCohort, "cohort tree has no members to sample from");
        const auto& members = tree.nodes[static_cast<std::size_t>(leaves[li])].members;
        auto pick = [&]() -> const IndividualProfile& {
            const auto& id = members[rng.uniform_int(members.size())];
            const auto it = source.profiles.find(id);
            if (it == source.profiles.end()) throw Error(ErrorCode::UnknownPersonId, id + " is not in the dataset");
            return it->second;
        };
        IndividualProfile p = pick();
        p.home = pick().home;
        std::vector<GeoCoord> work_pool;
        for (const auto& id : members) {
            const auto it = source.profiles.find(id);
            if (it != source.profiles.end() && it->second.work) work_pool.push_back(*it->second.work);
        }
        if (p.work && !work_pool.empty()) p.work = work_pool[rng.uniform_int(work_pool.size())];
        char buf[32];
        std::snprintf(buf, sizeof buf, "g-%06zu", i + 1);
        p.person_id = buf;
        out.push_back(std::move(p));
    }
    return out;
}

Dataset generate_dataset(std::span<const IndividualProfile> persons, std::span<const Date> dates,
                         const CohortTree& tree, std::span<const MobilityPattern> patterns, Gateway& gateway,
                         const SpatialAnchor& anchor, const ReasonerConfig& config, int workers,
                         GenerationSummary* summary) {
    const std::size_t n = persons.size() * dates.size();
    std::vector<DiaryOutcome> outcomes(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& person = persons[i / dates.size()];
        const auto& pattern = lookup_pattern(tree, patterns, person);
        outcomes[i] = generate_diary(person, pattern, dates[i % dates.size()], gateway, anchor, config);
    });
    Dataset out;
    for (const auto& p : persons) out.profiles.emplace(p.person_id, p);
    GenerationSummary s;
    s.person_days = n;
    for (auto& o : outcomes) {
        s.backend_calls += static_cast<std::size_t>(o.backend_calls);
        s.fallbacks += static_cast<std::size_t>(o.fallbacks);
        for (auto& w : o.warnings) s.warnings.push_back(o.diary.person_id + "/" + o.diary.date.iso() + ": " + w);
        if (o.no_trip) {
            ++s.no_trip_days;
            out.empty_days.push_back({o.diary.person_id, o.diary.date});
        } else {
            ++s.diaries;
            out.diaries.push_back(std::move(o.diary));
        }
    }
    out.normalize_order();
    if (summary) *summary = std::move(s);
    return out;
}

}  // namespace mobforge
