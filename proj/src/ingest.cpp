#include "mobforge/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mobforge/csv.hpp"
#include "mobforge/format.hpp"

namespace mobforge {

namespace {

using nlohmann::json;

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<GeoCoord> parse_coord(std::string_view s) {
    const auto parts = split(trim(s), ',');
    if (parts.size() != 2) return std::nullopt;
    auto lat = parse_number(parts[0]);
    auto lon = parse_number(parts[1]);
    if (!lat || !lon) return std::nullopt;
    return GeoCoord{*lat, *lon};
}

// Maps required header names to column indexes, or reports the missing one.
struct ColumnMap {
    std::map<std::string, std::size_t> index;

    const std::string& get(const csv::Row& row, const std::string& name) const {
        static const std::string kEmpty;
        auto it = index.find(name);
        if (it == index.end() || it->second >= row.fields.size()) return kEmpty;
        return row.fields[it->second];
    }
};

ColumnMap map_columns(const csv::Table& table, std::span<const char* const> wanted,
                      std::span<const char* const> optional_cols, const std::string& source) {
    ColumnMap m;
    for (const char* name : wanted) {
        auto idx = table.column(name);
        const bool optional =
            std::find_if(optional_cols.begin(), optional_cols.end(), [&](const char* o) { return std::string_view(o) == name; }) !=
            optional_cols.end();
        if (!idx) {
            if (optional) continue;
            throw RowError(ErrorCode::MalformedRow, 1, source + " header lacks column '" + name + "'");
        }
        m.index[name] = *idx;
    }
    return m;
}

class IssueSink {
public:
    IssueSink(const LoadOptions& opt, LoadReport& report) : opt_(opt), report_(report) {}

    // Returns normally in lenient mode; throws otherwise.
    void raise(const std::string& source, std::size_t line, ErrorCode code, const std::string& reason) {
        if (!opt_.lenient) throw RowError(code, line, source + ": " + reason);
        report_.issues.push_back({source, line, code, reason});
        ++report_.skipped;
    }

private:
    const LoadOptions& opt_;
    LoadReport& report_;
};

std::optional<ProfileRecord> read_profile_row(const csv::Row& row, const ColumnMap& cols, IssueSink& sink,
                                              std::size_t expected_fields) {
    if (row.fields.size() != expected_fields) {
        sink.raise("profiles", row.line, ErrorCode::MalformedRow,
                   "expected " + std::to_string(expected_fields) + " fields, got " + std::to_string(row.fields.size()));
        return std::nullopt;
    }
    ProfileRecord rec;
    rec.person_id = std::string(trim(cols.get(row, "person_id")));
    rec.age_band = cols.get(row, "age");
    rec.gender = cols.get(row, "gender");
    rec.occupation = cols.get(row, "occupation");
    rec.income = cols.get(row, "income");
    rec.education = cols.get(row, "education");
    rec.owns_car = cols.get(row, "own_a_car");
    rec.housing = cols.get(row, "living_situation");
    rec.primary_mode = cols.get(row, "primary_mode_of_transportation");
    auto home = parse_coord(cols.get(row, "residential_gps_coordinates"));
    if (!home) {
        sink.raise("profiles", row.line, ErrorCode::MalformedRow,
                   "residential_gps_coordinates '" + cols.get(row, "residential_gps_coordinates") +
                       "' is not 'lat,lon'");
        return std::nullopt;
    }
    rec.home = *home;
    const auto& work_text = cols.get(row, "company_gps_coordinates");
    if (!trim(work_text).empty()) {
        auto work = parse_coord(work_text);
        if (!work) {
            sink.raise("profiles", row.line, ErrorCode::MalformedRow,
                       "company_gps_coordinates '" + work_text + "' is not 'lat,lon'");
            return std::nullopt;
        }
        rec.work = *work;
    }
    if (auto v = validate_profile(rec); !v.ok()) {
        sink.raise("profiles", row.line, ErrorCode::MalformedRow, v.summary());
        return std::nullopt;
    }
    return rec;
}

std::optional<TripRecord> read_trip_row(const csv::Row& row, const ColumnMap& cols, IssueSink& sink,
                                        std::size_t expected_fields) {
    auto bad = [&](const std::string& reason) {
        sink.raise("trips", row.line, ErrorCode::MalformedRow, reason);
        return std::nullopt;
    };
    if (row.fields.size() != expected_fields)
        return bad("expected " + std::to_string(expected_fields) + " fields, got " + std::to_string(row.fields.size()));

    // Collect every problem of the row so corrupted fixtures report them all.
    std::vector<std::string> problems;
    TripRecord t;
    t.line = row.line;
    t.person_id = std::string(trim(cols.get(row, "person_id")));
    if (t.person_id.empty()) problems.push_back("person_id is empty");
    if (auto d = Date::parse(cols.get(row, "travel_date"))) t.travel_date = *d;
    else problems.push_back("travel_date '" + cols.get(row, "travel_date") + "' is not an ISO date");
    if (auto c = parse_coord(cols.get(row, "origin_gps_coordinates")); c && coord_in_range(*c)) t.origin = *c;
    else problems.push_back("origin_gps_coordinates '" + cols.get(row, "origin_gps_coordinates") + "' invalid");
    if (auto c = parse_coord(cols.get(row, "destination_gps_coordinates")); c && coord_in_range(*c)) t.destination = *c;
    else problems.push_back("destination_gps_coordinates '" + cols.get(row, "destination_gps_coordinates") + "' invalid");
    auto start = parse_clock(cols.get(row, "travel_start_time"));
    auto end = parse_clock(cols.get(row, "travel_end_time"));
    if (!start) problems.push_back("travel_start_time '" + cols.get(row, "travel_start_time") + "' is not HH:MM");
    if (!end) problems.push_back("travel_end_time '" + cols.get(row, "travel_end_time") + "' is not HH:MM");
    auto duration = parse_number(cols.get(row, "travel_duration"));
    if (!duration || *duration != std::floor(*duration))
        problems.push_back("travel_duration '" + cols.get(row, "travel_duration") + "' is not whole minutes");
    auto distance = parse_number(cols.get(row, "travel_distance"));
    if (!distance || *distance < 0.0)
        problems.push_back("travel_distance '" + cols.get(row, "travel_distance") + "' must be meters >= 0");
    if (auto m = parse_vocab<TravelMode>(cols.get(row, "travel_mode"))) t.mode = *m;
    else
        problems.push_back("travel_mode '" + cols.get(row, "travel_mode") + "' not in vocabulary {" +
                           vocab_listing<TravelMode>() + "}");
    if (auto p = parse_vocab<Purpose>(cols.get(row, "travel_purpose"))) t.purpose = *p;
    else
        problems.push_back("travel_purpose '" + cols.get(row, "travel_purpose") + "' not in vocabulary {" +
                           vocab_listing<Purpose>() + "}");

    if (start && end) {
        t.start_time = *start;
        t.end_time = *end;
        if (*end <= *start) problems.push_back("end_time must be after start_time (overnight trips are not supported)");
        if (duration) {
            t.duration_min = static_cast<int>(*duration);
            if (t.duration_min <= 0) problems.push_back("travel_duration must be > 0");
            else if (std::abs(t.duration_min - (t.end_time - t.start_time)) > 1)
                problems.push_back("travel_duration " + std::to_string(t.duration_min) +
                                   " disagrees with end - start = " + std::to_string(t.end_time - t.start_time));
        }
    }
    if (distance) t.distance_m = *distance;
    if (!problems.empty()) {
        std::string reason;
        for (auto& p : problems) reason += (reason.empty() ? "" : "; ") + p;
        return bad(reason);
    }
    return t;
}

json point_to_json(const TrajectoryPoint& p) {
    return json{{"arrive_time", p.arrive_time},
                {"distance_m", p.distance_m},
                {"duration_min", p.duration_min},
                {"lat", p.location.lat},
                {"lon", p.location.lon},
                {"mode", name_of(p.mode)},
                {"purpose", name_of(p.purpose)}};
}

template <class E>
E vocab_from_json(const json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    auto v = parse_vocab<E>(text);
    if (!v) throw Error(ErrorCode::MalformedRow, std::string(key) + " '" + text + "' not in vocabulary");
    return *v;
}

}  // namespace

LoadResult load_survey(std::istream& profiles_in, std::istream& trips_in, const LoadOptions& options) {
    LoadResult result;
    IssueSink sink(options, result.report);

    const auto ptable = csv::parse(profiles_in);
    const auto ttable = csv::parse(trips_in);
    if (ptable.rows.empty()) throw Error(ErrorCode::EmptySource, "profiles source has no rows");
    if (ttable.rows.empty()) throw Error(ErrorCode::EmptySource, "trips source has no rows");

    static constexpr const char* kOptionalProfile[] = {"company_gps_coordinates"};
    static constexpr const char* kOptionalTrip[] = {"origin_address", "destination_address"};
    const auto pcols = map_columns(ptable, columns::kProfileColumns, kOptionalProfile, "profiles");
    const auto tcols = map_columns(ttable, columns::kTripColumns, kOptionalTrip, "trips");

    result.report.profile_rows = ptable.rows.size();
    for (const auto& row : ptable.rows) {
        auto rec = read_profile_row(row, pcols, sink, ptable.header.size());
        if (!rec) continue;
        if (result.dataset.profiles.contains(rec->person_id)) {
            sink.raise("profiles", row.line, ErrorCode::DuplicateProfile, "duplicate person_id '" + rec->person_id + "'");
            continue;
        }
        auto prof = to_profile(*rec);
        result.dataset.profiles.emplace(prof.person_id, std::move(prof));
    }

    result.report.trip_rows = ttable.rows.size();
    std::vector<TripRecord> trips;
    for (const auto& row : ttable.rows) {
        auto trip = read_trip_row(row, tcols, sink, ttable.header.size());
        if (!trip) continue;
        if (!result.dataset.profiles.contains(trip->person_id)) {
            sink.raise("trips", row.line, ErrorCode::UnknownPersonId, "unknown person_id '" + trip->person_id + "'");
            continue;
        }
        const auto& caps = options.speed_caps;
        const double kmh = (trip->distance_m / 1000.0) / (trip->duration_min / 60.0);
        if (kmh > caps[index_of(trip->mode)]) {
            sink.raise("trips", row.line, ErrorCode::MalformedRow,
                       "speed cap exceeded: " + format_double(kmh) + " km/h for " + std::string(name_of(trip->mode)));
            continue;
        }
        trips.push_back(std::move(*trip));
    }

    if (options.lenient) {
        // Drop overlapping trips one at a time so the rest of the day survives.
        std::map<PersonDay, std::vector<TripRecord>> by_day;
        for (auto& t : trips) by_day[{t.person_id, t.travel_date}].push_back(std::move(t));
        trips.clear();
        for (auto& [key, day] : by_day) {
            std::sort(day.begin(), day.end(), [](auto& a, auto& b) { return a.start_time < b.start_time; });
            int last_end = -1;
            int last_arrive = -1;
            for (auto& t : day) {
                const int depart = t.end_time - t.duration_min;
                if (t.start_time < last_end || depart < last_arrive || depart < 0) {
                    result.report.issues.push_back({"trips", t.line, ErrorCode::OverlappingTrips,
                                                    "overlaps an earlier trip of " + key.person_id + " on " +
                                                        key.date.iso()});
                    ++result.report.skipped;
                    continue;
                }
                last_end = t.end_time;
                last_arrive = t.end_time;
                trips.push_back(std::move(t));
            }
        }
    }
    result.dataset.diaries = build_diaries(std::move(trips), options.speed_caps);
    result.dataset.normalize_order();
    return result;
}

LoadResult load_survey(const std::string& profiles_path, const std::string& trips_path, const LoadOptions& options) {
    std::ifstream p(profiles_path, std::ios::binary);
    if (!p) throw Error(ErrorCode::IoError, "cannot open " + profiles_path);
    std::ifstream t(trips_path, std::ios::binary);
    if (!t) throw Error(ErrorCode::IoError, "cannot open " + trips_path);
    return load_survey(p, t, options);
}

std::vector<TravelDiary> build_diaries(std::vector<TripRecord> trips, const SpeedTable& speed_caps) {
    std::map<PersonDay, std::vector<TripRecord>> by_day;
    for (auto& t : trips) by_day[{t.person_id, t.travel_date}].push_back(std::move(t));

    std::vector<TravelDiary> out;
    out.reserve(by_day.size());
    for (auto& [key, day] : by_day) {
        std::stable_sort(day.begin(), day.end(), [](auto& a, auto& b) { return a.start_time < b.start_time; });
        TravelDiary diary;
        diary.person_id = key.person_id;
        diary.date = key.date;
        for (std::size_t i = 0; i < day.size(); ++i) {
            const auto& t = day[i];
            if (i > 0 && t.start_time < day[i - 1].end_time)
                throw Error(ErrorCode::OverlappingTrips, key.person_id + " on " + key.date.iso() + ": trip at line " +
                                                             std::to_string(t.line) + " starts before the previous ends");
            diary.points.push_back(
                {t.end_time, t.destination, t.purpose, t.distance_m, t.mode, t.duration_min});
        }
        if (auto v = validate_diary(diary, speed_caps); !v.ok())
            throw Error(ErrorCode::OverlappingTrips, key.person_id + " on " + key.date.iso() + ": " + v.summary());
        out.push_back(std::move(diary));
    }
    return out;
}

void write_profiles_csv(const Dataset& ds, std::ostream& out) {
    csv::write_row(out, {std::begin(columns::kProfileColumns), std::end(columns::kProfileColumns)});
    for (const auto& [id, p] : ds.profiles) {
        const auto r = to_record(p);
        csv::write_row(out, {r.person_id, r.age_band, r.gender, r.occupation, r.income, r.education, r.owns_car,
                             r.housing, r.primary_mode, format_coord(r.home), r.work ? format_coord(*r.work) : ""});
    }
}

void write_survey(const Dataset& ds, std::ostream& profiles, std::ostream& trips) {
    write_profiles_csv(ds, profiles);
    csv::write_row(trips, {std::begin(columns::kTripColumns), std::end(columns::kTripColumns)});
    for (const auto& d : ds.diaries) {
        const auto& prof = ds.profiles.at(d.person_id);
        GeoCoord origin = prof.home;
        for (const auto& p : d.points) {
            csv::write_row(trips, {d.person_id, d.date.iso(), "", format_coord(origin), "", format_coord(p.location),
                                   format_clock(p.depart_time()), format_clock(p.arrive_time),
                                   std::to_string(p.duration_min), format_double(p.distance_m),
                                   std::string(name_of(p.mode)), std::string(name_of(p.purpose))});
            origin = p.location;
        }
    }
}

nlohmann::json diary_to_json(const TravelDiary& d) {
    json points = json::array();
    for (const auto& p : d.points) points.push_back(point_to_json(p));
    return json{{"date", d.date.iso()}, {"person_id", d.person_id}, {"points", points}, {"provenance", d.provenance}};
}

TravelDiary diary_from_json(const nlohmann::json& j) {
    TravelDiary d;
    d.person_id = j.at("person_id").get<std::string>();
    auto date = Date::parse(j.at("date").get<std::string>());
    if (!date) throw Error(ErrorCode::MalformedRow, "bad date in diary record");
    d.date = *date;
    for (const auto& pj : j.at("points")) {
        TrajectoryPoint p;
        p.arrive_time = pj.at("arrive_time").get<int>();
        p.distance_m = pj.at("distance_m").get<double>();
        p.duration_min = pj.at("duration_min").get<int>();
        p.location = {pj.at("lat").get<double>(), pj.at("lon").get<double>()};
        p.mode = vocab_from_json<TravelMode>(pj, "mode");
        p.purpose = vocab_from_json<Purpose>(pj, "purpose");
        d.points.push_back(p);
    }
    if (j.contains("provenance")) d.provenance = j.at("provenance").get<std::vector<std::string>>();
    return d;
}

void write_diaries_ndjson(const Dataset& ds, std::ostream& out, const nlohmann::json* meta) {
    if (meta) out << json{{"_meta", *meta}}.dump() << '\n';
    // Diaries and markers interleaved in (person, date) order.
    std::size_t i = 0, k = 0;
    while (i < ds.diaries.size() || k < ds.empty_days.size()) {
        const bool take_diary =
            k >= ds.empty_days.size() ||
            (i < ds.diaries.size() && std::tie(ds.diaries[i].person_id, ds.diaries[i].date) <
                                          std::tie(ds.empty_days[k].person_id, ds.empty_days[k].date));
        if (take_diary) {
            out << diary_to_json(ds.diaries[i++]).dump() << '\n';
        } else {
            const auto& e = ds.empty_days[k++];
            out << json{{"date", e.date.iso()}, {"no_trip", true}, {"person_id", e.person_id}}.dump() << '\n';
        }
    }
}

void read_diaries_ndjson(std::istream& in, Dataset& ds) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw RowError(ErrorCode::MalformedRow, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (j.contains("_meta")) continue;
        try {
            if (j.value("no_trip", false)) {
                auto date = Date::parse(j.at("date").get<std::string>());
                if (!date) throw Error(ErrorCode::MalformedRow, "bad date");
                ds.empty_days.push_back({j.at("person_id").get<std::string>(), *date});
            } else {
                ds.diaries.push_back(diary_from_json(j));
            }
        } catch (const json::exception& e) {
            throw RowError(ErrorCode::MalformedRow, lineno, e.what());
        } catch (const Error& e) {
            throw RowError(ErrorCode::MalformedRow, lineno, e.detail());
        }
    }
}

Dataset load_profiles_csv(std::istream& in, const LoadOptions& options) {
    LoadReport report;
    IssueSink sink(options, report);
    const auto table = csv::parse(in);
    static constexpr const char* kOptionalProfile[] = {"company_gps_coordinates"};
    const auto cols = map_columns(table, columns::kProfileColumns, kOptionalProfile, "profiles");
    Dataset ds;
    for (const auto& row : table.rows) {
        auto rec = read_profile_row(row, cols, sink, table.header.size());
        if (!rec) continue;
        if (ds.profiles.contains(rec->person_id)) {
            sink.raise("profiles", row.line, ErrorCode::DuplicateProfile, "duplicate person_id '" + rec->person_id + "'");
            continue;
        }
        auto prof = to_profile(*rec);
        ds.profiles.emplace(prof.person_id, std::move(prof));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir, const nlohmann::json* meta) {
    std::filesystem::create_directories(dir);
    std::ofstream p(dir + "/profiles.csv", std::ios::binary);
    std::ofstream d(dir + "/diaries.ndjson", std::ios::binary);
    if (!p || !d) throw Error(ErrorCode::IoError, "cannot write dataset to " + dir);
    write_profiles_csv(ds, p);
    write_diaries_ndjson(ds, d, meta);
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream p(dir + "/profiles.csv", std::ios::binary);
    if (!p) throw Error(ErrorCode::IoError, "cannot open " + dir + "/profiles.csv");
    Dataset ds = load_profiles_csv(p);
    std::ifstream d(dir + "/diaries.ndjson", std::ios::binary);
    if (!d) throw Error(ErrorCode::IoError, "cannot open " + dir + "/diaries.ndjson");
    read_diaries_ndjson(d, ds);
    ds.normalize_order();
    if (auto v = validate_dataset(ds, default_speed_caps()); !v.ok())
        throw Error(ErrorCode::MalformedRow, "dataset in " + dir + " is invalid: " + v.summary());
    return ds;
}

}  // namespace mobforge
