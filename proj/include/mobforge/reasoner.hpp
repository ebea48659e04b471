#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobforge/cohort.hpp"
#include "mobforge/domain.hpp"
#include "mobforge/gateway.hpp"
#include "mobforge/network.hpp"
#include "mobforge/patterns.hpp"

namespace mobforge {

// POI categories a purpose may anchor to.
std::span<const PoiCategory> categories_for(Purpose p);

struct PlanEntry {
    int window_start = 0;  // minutes, inclusive
    int window_end = 0;    // minutes, inclusive
    Purpose purpose = Purpose::Other;
    PoiCategory category = PoiCategory::Shop;
    double d_lo = 0.0;
    double d_hi = 0.0;
    TravelMode mode = TravelMode::Walking;
    friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

struct DailyPlan {
    std::string person_id;
    Date date;
    DayType day_type = DayType::Weekday;
    std::vector<PlanEntry> entries;
    friend bool operator==(const DailyPlan&, const DailyPlan&) = default;
};

struct ActivityDecision {
    int depart_time = 0;
    Purpose purpose = Purpose::Other;
    PoiCategory category = PoiCategory::Shop;
    double d_lo = 0.0;
    double d_hi = 0.0;
    TravelMode mode = TravelMode::Walking;
    std::string rationale;
};

struct ParsedDecision {
    bool done = false;  // the model ended the day
    ActivityDecision decision;
};

struct CommittedStep {
    ActivityDecision decision;
    AnchorResult anchor;  // poi 0 when anchored to home
    TrajectoryPoint point;
    std::string transcript_id;
    bool fallback = false;
    int attempts = 0;
};

struct ReasonerState {
    const IndividualProfile* profile = nullptr;
    const MobilityPattern* pattern = nullptr;
    DailyPlan plan;
    std::vector<CommittedStep> schedule;
    int current_time = -1;  // last committed arrival; -1 before the first trip
    NodeId current_node = 0;
    NodeId home_node = 0;
    std::size_t next_entry = 0;
    int rethink_count = 0;
};

struct ReasonerConfig {
    int max_rethinks = 3;
    bool disable_rethink = false;
    SpeedTable speed_caps = default_speed_caps();
    SpeedTable cruise_speeds = default_cruise_speeds();
    double temperature = 0.2;
    std::uint64_t run_seed = 1;
    double max_range_m = 100000.0;
};

// Text of the last fenced block, or the whole text when there is none.
std::string decision_block(std::string_view text, bool* fenced = nullptr);

std::string render_profile(const IndividualProfile& p);
std::string render_pattern(const MobilityPattern& p);
std::string render_plan(const DailyPlan& plan);
std::string render_day(const Date& date);

// Throws Error(PlanUnparseable).
DailyPlan parse_plan(std::string_view response, const std::string& person_id, const Date& date);
ValidationResult validate_plan(const DailyPlan& plan);
// Throws Error(DecisionUnparseable).
ParsedDecision parse_decision(std::string_view response);

ValidationResult validate_decision(const ActivityDecision& d, const ReasonerState& state, const SpeedTable& caps,
                                   double max_range_m = 100000.0);

// Replay planner: trip count, purpose chain, windows, distances and modes
// sampled from the cohort statistics of the plan's day type.
DailyPlan sample_plan(const MobilityPattern& pattern, const IndividualProfile& profile, const Date& date,
                      const SpeedTable& cruise_speeds, CounterRng& rng);

DailyPlan generate_plan(const IndividualProfile& profile, const MobilityPattern& pattern, const Date& date,
                        Gateway& gateway, const ReasonerConfig& config);

struct StepResult {
    ParsedDecision parsed;
    std::string transcript_id;
};

// Reasons about state.plan.entries[state.next_entry]. `feedback` carries the
// violations of the previous attempt on re-prompts.
StepResult reason_step(const ReasonerState& state, Gateway& gateway, const ReasonerConfig& config,
                       const std::string& feedback = {});

struct DiaryOutcome {
    TravelDiary diary;
    bool no_trip = false;
    DailyPlan plan;
    std::vector<std::string> warnings;
    std::vector<CommittedStep> steps;
    int backend_calls = 0;
    int fallbacks = 0;
};

DiaryOutcome generate_diary(const IndividualProfile& profile, const MobilityPattern& pattern, const Date& date,
                            Gateway& gateway, const SpatialAnchor& anchor, const ReasonerConfig& config);

// Generated population: each person copies the attributes of a random member
// of a leaf cohort drawn in proportion to its size; home and work come from
// that cohort's coordinate pools. Ids are "g-000001", ...
std::vector<IndividualProfile> sample_population(const Dataset& source, const CohortTree& tree, std::size_t count,
                                                 std::uint64_t seed);

struct GenerationSummary {
    std::size_t person_days = 0;
    std::size_t diaries = 0;
    std::size_t no_trip_days = 0;
    std::size_t backend_calls = 0;
    std::size_t fallbacks = 0;
    std::vector<std::string> warnings;  // "<person>/<date>: ..."
};

// Every (person, date) pair, generated in parallel; output order is
// (person, date) regardless of scheduling.
Dataset generate_dataset(std::span<const IndividualProfile> persons, std::span<const Date> dates,
                         const CohortTree& tree, std::span<const MobilityPattern> patterns, Gateway& gateway,
                         const SpatialAnchor& anchor, const ReasonerConfig& config, int workers = 1,
                         GenerationSummary* summary = nullptr);

}  // namespace mobforge
