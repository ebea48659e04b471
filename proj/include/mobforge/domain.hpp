#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mobforge/geo.hpp"
#include "mobforge/vocab.hpp"

namespace mobforge {

inline constexpr int kMinutesPerDay = 1440;

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static std::optional<Date> parse(std::string_view iso);
    static Date from_days(std::int64_t days_since_epoch);

    std::string iso() const;
    std::int64_t days_since_epoch() const;
    // 0 = Monday ... 6 = Sunday.
    int weekday() const;
    bool is_weekend() const { return weekday() >= 5; }

    friend auto operator<=>(const Date&, const Date&) = default;
};

enum class DayType { Weekday, Weekend };
inline DayType day_type_of(const Date& d) { return d.is_weekend() ? DayType::Weekend : DayType::Weekday; }
std::string_view day_type_name(DayType t);

// "HH:MM" <-> minutes since midnight. parse_clock accepts 0:00 .. 23:59.
std::optional<int> parse_clock(std::string_view text);
std::string format_clock(int minutes);

struct IndividualProfile {
    std::string person_id;
    AgeBand age_band = AgeBand::From26To30;
    Gender gender = Gender::Male;
    Occupation occupation = Occupation::Others;
    Income income = Income::Low;
    Education education = Education::Bachelor;
    bool owns_car = false;
    Housing housing = Housing::Rented;
    TravelMode primary_mode = TravelMode::BusSubway;
    GeoCoord home;
    std::optional<GeoCoord> work;

    // Vocabulary index of the given dimension's value.
    std::size_t value_index(Dimension d) const;
    std::string value_name(Dimension d) const;

    friend bool operator==(const IndividualProfile&, const IndividualProfile&) = default;
};

// A profile as read from a source, before vocabulary resolution.
struct ProfileRecord {
    std::string person_id;
    std::string age_band;
    std::string gender;
    std::string occupation;
    std::string income;
    std::string education;
    std::string owns_car;
    std::string housing;
    std::string primary_mode;
    GeoCoord home;
    std::optional<GeoCoord> work;
};

struct TrajectoryPoint {
    int arrive_time = 0;  // minutes since midnight
    GeoCoord location;
    Purpose purpose = Purpose::Other;
    double distance_m = 0.0;  // distance of the leg that reached this point
    TravelMode mode = TravelMode::Walking;
    int duration_min = 1;

    int depart_time() const { return arrive_time - duration_min; }

    friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct TravelDiary {
    std::string person_id;
    Date date;
    std::vector<TrajectoryPoint> points;
    std::vector<std::string> provenance;

    friend bool operator==(const TravelDiary&, const TravelDiary&) = default;
};

struct PersonDay {
    std::string person_id;
    Date date;

    friend auto operator<=>(const PersonDay&, const PersonDay&) = default;
};

struct Dataset {
    std::map<std::string, IndividualProfile> profiles;
    std::vector<TravelDiary> diaries;
    // Person-days observed with zero trips. They carry no points, so they are
    // not diaries, but they count toward trip-count and daily-location stats.
    std::vector<PersonDay> empty_days;

    std::size_t person_day_count() const { return diaries.size() + empty_days.size(); }
    // Sorts diaries and empty days by (person_id, date).
    void normalize_order();

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Violation {
    std::string field;
    std::string value;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    void add(std::string field, std::string value, std::string message) {
        violations.push_back({std::move(field), std::move(value), std::move(message)});
    }
    std::string summary() const;
};

using SpeedTable = std::array<double, vocab_size<TravelMode>>;  // km/h per mode
SpeedTable default_speed_caps();
SpeedTable default_cruise_speeds();

ValidationResult validate_profile(const ProfileRecord& record);
ValidationResult validate_profile(const IndividualProfile& profile);
// Resolves vocabulary strings; throws Error(InvalidSpec) listing violations.
IndividualProfile to_profile(const ProfileRecord& record);
ProfileRecord to_record(const IndividualProfile& profile);

ValidationResult validate_diary(const TravelDiary& diary, const SpeedTable& speed_caps);
// Cross-record checks: ids resolve, no duplicate (person_id, date), and every
// diary and profile individually valid.
ValidationResult validate_dataset(const Dataset& dataset, const SpeedTable& speed_caps);

// Implied leg speed in km/h.
inline double leg_speed_kmh(const TrajectoryPoint& p) {
    return (p.distance_m / 1000.0) / (static_cast<double>(p.duration_min) / 60.0);
}

}  // namespace mobforge
