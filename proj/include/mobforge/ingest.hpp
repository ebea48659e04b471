#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/domain.hpp"
#include "mobforge/error.hpp"

namespace mobforge {

// One row of the trip table.
struct TripRecord {
    std::string person_id;
    Date travel_date;
    GeoCoord origin;
    GeoCoord destination;
    int start_time = 0;
    int end_time = 0;
    int duration_min = 0;
    double distance_m = 0.0;
    TravelMode mode = TravelMode::Walking;
    Purpose purpose = Purpose::Other;
    std::size_t line = 0;
};

struct LoadOptions {
    // When false, the first invalid row aborts loading with a RowError.
    bool lenient = false;
    SpeedTable speed_caps = default_speed_caps();
};

struct RowIssue {
    std::string source;  // "profiles" or "trips"
    std::size_t line = 0;
    ErrorCode code = ErrorCode::MalformedRow;
    std::string reason;
};

struct LoadReport {
    std::size_t profile_rows = 0;
    std::size_t trip_rows = 0;
    std::size_t skipped = 0;
    std::vector<RowIssue> issues;
};

struct LoadResult {
    Dataset dataset;
    LoadReport report;
};

// Column names of the two survey tables.
namespace columns {
inline constexpr const char* kProfileColumns[] = {
    "person_id", "age",         "gender",          "occupation", "income", "education", "own_a_car", "living_situation",
    "primary_mode_of_transportation", "residential_gps_coordinates", "company_gps_coordinates",
};
inline constexpr const char* kTripColumns[] = {
    "person_id",         "travel_date",     "origin_address",  "origin_gps_coordinates", "destination_address",
    "destination_gps_coordinates", "travel_start_time", "travel_end_time", "travel_duration", "travel_distance",
    "travel_mode",       "travel_purpose",
};
}  // namespace columns

LoadResult load_survey(std::istream& profiles, std::istream& trips, const LoadOptions& options = {});
LoadResult load_survey(const std::string& profiles_path, const std::string& trips_path,
                       const LoadOptions& options = {});

// Groups trips by (person, date), sorts by start time and converts each trip
// into the point it arrives at. Throws Error(OverlappingTrips).
std::vector<TravelDiary> build_diaries(std::vector<TripRecord> trips, const SpeedTable& speed_caps = default_speed_caps());

// Writes the dataset back as the two survey tables. Trip origins are the
// previous point of the diary (home for the first trip).
void write_survey(const Dataset& dataset, std::ostream& profiles, std::ostream& trips);
void write_profiles_csv(const Dataset& dataset, std::ostream& out);

// Newline-delimited JSON diaries. Keys are emitted in sorted order so the
// bytes are stable. Optional first line {"_meta": {...}}.
nlohmann::json diary_to_json(const TravelDiary& diary);
TravelDiary diary_from_json(const nlohmann::json& j);
void write_diaries_ndjson(const Dataset& dataset, std::ostream& out, const nlohmann::json* meta = nullptr);
// Reads diaries and no-trip markers into `dataset` (profiles untouched).
void read_diaries_ndjson(std::istream& in, Dataset& dataset);

// A normalized dataset directory: profiles.csv + diaries.ndjson.
void save_dataset(const Dataset& dataset, const std::string& dir, const nlohmann::json* meta = nullptr);
Dataset load_dataset(const std::string& dir);
Dataset load_profiles_csv(std::istream& in, const LoadOptions& options = {});

}  // namespace mobforge
