#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/binning.hpp"
#include "mobforge/domain.hpp"

namespace mobforge {

inline constexpr std::size_t kHours = 24;
inline constexpr std::size_t kQuarterHours = 96;
inline constexpr std::size_t kTripCountBins = 16;  // 0..14, 15+
inline constexpr std::size_t kModeBands = 4;       // [0,1 km) [1,3 km) [3,10 km) [10 km, inf)
inline constexpr std::size_t kPurposes = vocab_size<Purpose>;
inline constexpr std::size_t kModes = vocab_size<TravelMode>;

std::size_t mode_band(double meters);

using Counts = std::vector<std::uint64_t>;

// Trip counts for one day-type split of a cohort.
struct DayStats {
    std::uint64_t person_days = 0;
    Counts start_time_hist = Counts(kHours);
    Counts distance_hist;  // sized by the log binning
    Counts mode_freq = Counts(kModes);
    Counts purpose_freq = Counts(kPurposes);
    Counts trips_per_day_hist = Counts(kTripCountBins);
    std::vector<Counts> purpose_transition = std::vector<Counts>(kPurposes, Counts(kPurposes));
    // Used by the replay sampler.
    Counts first_purpose = Counts(kPurposes);
    Counts last_purpose = Counts(kPurposes);
    Counts first_depart = Counts(kQuarterHours);
    std::vector<Counts> dwell_by_purpose = std::vector<Counts>(kPurposes, Counts(kQuarterHours));
    std::vector<Counts> distance_by_purpose;
    std::vector<Counts> mode_by_band = std::vector<Counts>(kModeBands, Counts(kModes));

    explicit DayStats(const LogBinning& b = {});
    std::uint64_t trips() const;
    void add_day(const TravelDiary& diary, const LogBinning& b);
    void add_empty_day();
    DayStats& operator+=(const DayStats& other);
    friend bool operator==(const DayStats&, const DayStats&) = default;
};

struct CohortStats {
    std::uint64_t member_count = 0;
    LogBinning distance_binning;
    DayStats all;
    DayStats weekday;
    DayStats weekend;

    explicit CohortStats(const LogBinning& b = {}) : distance_binning(b), all(b), weekday(b), weekend(b) {}
    const DayStats& split(DayType t) const { return t == DayType::Weekday ? weekday : weekend; }
    friend bool operator==(const CohortStats&, const CohortStats&) = default;
};

// Counts over every diary and empty day of `members`. Throws EmptyCohort.
CohortStats summarize(const Dataset& dataset, std::span<const std::string> members, const LogBinning& b = {});
CohortStats summarize(const Dataset& dataset, const std::vector<std::string>& members, const LogBinning& b = {});

nlohmann::json stats_to_json(const CohortStats& s);
CohortStats stats_from_json(const nlohmann::json& j);

// Full count digest embedded in prompts.
std::string describe_stats(const CohortStats& s);
// Short readable highlights (peak hour, median distance, ...).
std::string stats_highlights(const DayStats& s, const LogBinning& b);

// Argmax with ties to the smallest index; npos when all counts are zero.
std::size_t modal_index(std::span<const std::uint64_t> counts);
// Midpoint of the bin holding the median; negative when empty.
double median_of_bins(std::span<const std::uint64_t> counts, const LogBinning& b);

}  // namespace mobforge
