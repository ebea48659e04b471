#include "mobforge/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <tuple>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"

namespace mobforge {

namespace {

// Civil-calendar conversions after H. Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

template <class E>
bool enum_in_range(E v) {
    return index_of(v) < vocab_size<E>;
}

template <class E>
std::string enum_text(E v) {
    return enum_in_range(v) ? std::string(name_of(v)) : "#" + std::to_string(index_of(v));
}

template <class E>
void check_vocab(ValidationResult& r, std::string_view field, const std::string& value) {
    if (!parse_vocab<E>(value))
        r.add(std::string(field), value, "not in vocabulary {" + vocab_listing<E>() + "}");
}

}  // namespace

std::optional<Date> Date::parse(std::string_view iso) {
    iso = trim(iso);
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    auto y = parse_int(iso.substr(0, 4));
    auto m = parse_int(iso.substr(5, 2));
    auto d = parse_int(iso.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
    return Date{*y, *m, *d};
}

Date Date::from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::int64_t Date::days_since_epoch() const {
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
}

int Date::weekday() const {
    // 1970-01-01 was a Thursday (index 3).
    const std::int64_t z = days_since_epoch();
    return static_cast<int>(((z % 7) + 7 + 3) % 7);
}

std::string_view day_type_name(DayType t) { return t == DayType::Weekend ? "weekend" : "weekday"; }

std::optional<int> parse_clock(std::string_view text) {
    text = trim(text);
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon > 2) return std::nullopt;
    auto h = parse_int(text.substr(0, colon));
    auto rest = text.substr(colon + 1);
    // Tolerate seconds ("08:30:00").
    if (rest.size() == 5 && rest[2] == ':') rest = rest.substr(0, 2);
    if (rest.size() != 2) return std::nullopt;
    auto m = parse_int(rest);
    if (!h || !m || *h < 0 || *h > 23 || *m < 0 || *m > 59) return std::nullopt;
    return *h * 60 + *m;
}

std::string format_clock(int minutes) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

std::size_t IndividualProfile::value_index(Dimension d) const {
    switch (d) {
        case Dimension::Occupation: return index_of(occupation);
        case Dimension::AgeBand: return index_of(age_band);
        case Dimension::Income: return index_of(income);
        case Dimension::Gender: return index_of(gender);
        case Dimension::OwnsCar: return owns_car ? 0 : 1;
        case Dimension::Education: return index_of(education);
        case Dimension::Housing: return index_of(housing);
        case Dimension::PrimaryMode: return index_of(primary_mode);
    }
    return 0;
}

std::string IndividualProfile::value_name(Dimension d) const {
    switch (d) {
        case Dimension::Occupation: return std::string(name_of(occupation));
        case Dimension::AgeBand: return std::string(name_of(age_band));
        case Dimension::Income: return std::string(name_of(income));
        case Dimension::Gender: return std::string(name_of(gender));
        case Dimension::OwnsCar: return owns_car ? "Yes" : "No";
        case Dimension::Education: return std::string(name_of(education));
        case Dimension::Housing: return std::string(name_of(housing));
        case Dimension::PrimaryMode: return std::string(name_of(primary_mode));
    }
    return {};
}

void Dataset::normalize_order() {
    auto key = [](const auto& x) { return std::tie(x.person_id, x.date); };
    std::sort(diaries.begin(), diaries.end(), [&](const TravelDiary& a, const TravelDiary& b) { return key(a) < key(b); });
    std::sort(empty_days.begin(), empty_days.end());
}

std::string ValidationResult::summary() const {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.field + "='" + v.value + "': " + v.message;
    }
    return out;
}

SpeedTable default_speed_caps() {
    SpeedTable t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = default_speed_cap_kmh(from_index<TravelMode>(i));
    return t;
}

SpeedTable default_cruise_speeds() {
    SpeedTable t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = default_cruise_speed_kmh(from_index<TravelMode>(i));
    return t;
}

ValidationResult validate_profile(const ProfileRecord& rec) {
    ValidationResult r;
    if (rec.person_id.empty()) r.add("person_id", "", "must be nonempty");
    check_vocab<AgeBand>(r, "age_band", rec.age_band);
    check_vocab<Gender>(r, "gender", rec.gender);
    check_vocab<Occupation>(r, "occupation", rec.occupation);
    check_vocab<Income>(r, "income", rec.income);
    check_vocab<Education>(r, "education", rec.education);
    if (!detail::iequals_trimmed(rec.owns_car, "Yes") && !detail::iequals_trimmed(rec.owns_car, "No"))
        r.add("owns_car", rec.owns_car, "not in vocabulary {Yes, No}");
    check_vocab<Housing>(r, "housing", rec.housing);
    check_vocab<TravelMode>(r, "primary_mode", rec.primary_mode);
    if (!coord_in_range(rec.home)) r.add("home", format_coord(rec.home), "coordinate out of range");
    if (rec.work && !coord_in_range(*rec.work)) r.add("work", format_coord(*rec.work), "coordinate out of range");
    return r;
}

ValidationResult validate_profile(const IndividualProfile& p) {
    ValidationResult r;
    if (p.person_id.empty()) r.add("person_id", "", "must be nonempty");
    if (!enum_in_range(p.age_band)) r.add("age_band", enum_text(p.age_band), "not in vocabulary");
    if (!enum_in_range(p.gender)) r.add("gender", enum_text(p.gender), "not in vocabulary");
    if (!enum_in_range(p.occupation)) r.add("occupation", enum_text(p.occupation), "not in vocabulary");
    if (!enum_in_range(p.income)) r.add("income", enum_text(p.income), "not in vocabulary");
    if (!enum_in_range(p.education)) r.add("education", enum_text(p.education), "not in vocabulary");
    if (!enum_in_range(p.housing)) r.add("housing", enum_text(p.housing), "not in vocabulary");
    if (!enum_in_range(p.primary_mode)) r.add("primary_mode", enum_text(p.primary_mode), "not in vocabulary");
    if (!coord_in_range(p.home)) r.add("home", format_coord(p.home), "coordinate out of range");
    if (p.work && !coord_in_range(*p.work)) r.add("work", format_coord(*p.work), "coordinate out of range");
    return r;
}

IndividualProfile to_profile(const ProfileRecord& rec) {
    if (auto r = validate_profile(rec); !r.ok()) throw Error(ErrorCode::InvalidSpec, r.summary());
    IndividualProfile p;
    p.person_id = rec.person_id;
    p.age_band = *parse_vocab<AgeBand>(rec.age_band);
    p.gender = *parse_vocab<Gender>(rec.gender);
    p.occupation = *parse_vocab<Occupation>(rec.occupation);
    p.income = *parse_vocab<Income>(rec.income);
    p.education = *parse_vocab<Education>(rec.education);
    p.owns_car = detail::iequals_trimmed(rec.owns_car, "Yes");
    p.housing = *parse_vocab<Housing>(rec.housing);
    p.primary_mode = *parse_vocab<TravelMode>(rec.primary_mode);
    p.home = rec.home;
    p.work = rec.work;
    return p;
}

ProfileRecord to_record(const IndividualProfile& p) {
    ProfileRecord rec;
    rec.person_id = p.person_id;
    rec.age_band = name_of(p.age_band);
    rec.gender = name_of(p.gender);
    rec.occupation = name_of(p.occupation);
    rec.income = name_of(p.income);
    rec.education = name_of(p.education);
    rec.owns_car = p.owns_car ? "Yes" : "No";
    rec.housing = name_of(p.housing);
    rec.primary_mode = name_of(p.primary_mode);
    rec.home = p.home;
    rec.work = p.work;
    return rec;
}

ValidationResult validate_diary(const TravelDiary& diary, const SpeedTable& caps) {
    ValidationResult r;
    if (diary.person_id.empty()) r.add("person_id", "", "must be nonempty");
    if (diary.points.empty()) r.add("points", "[]", "diary has no points");
    for (std::size_t i = 0; i < diary.points.size(); ++i) {
        const auto& p = diary.points[i];
        const std::string at = "points[" + std::to_string(i) + "].";
        if (p.arrive_time < 0 || p.arrive_time >= kMinutesPerDay)
            r.add(at + "arrive_time", std::to_string(p.arrive_time), "outside [0, 1440)");
        if (!enum_in_range(p.purpose)) r.add(at + "purpose", enum_text(p.purpose), "not in vocabulary");
        if (!enum_in_range(p.mode)) r.add(at + "mode", enum_text(p.mode), "not in vocabulary");
        if (!coord_in_range(p.location)) r.add(at + "location", format_coord(p.location), "coordinate out of range");
        if (!(p.distance_m >= 0.0)) r.add(at + "distance_m", format_double(p.distance_m), "must be >= 0");
        if (p.duration_min <= 0) {
            r.add(at + "duration_min", std::to_string(p.duration_min), "must be > 0");
        } else if (enum_in_range(p.mode) && p.distance_m >= 0.0) {
            const double kmh = leg_speed_kmh(p);
            if (kmh > caps[index_of(p.mode)])
                r.add(at + "distance_m", format_double(p.distance_m),
                      "speed cap exceeded: " + format_double(kmh) + " km/h > " +
                          format_double(caps[index_of(p.mode)]) + " km/h for " + std::string(name_of(p.mode)));
        }
        if (p.duration_min > 0 && p.depart_time() < 0)
            r.add(at + "duration_min", std::to_string(p.duration_min), "leg starts before midnight");
        if (i > 0) {
            const auto& prev = diary.points[i - 1];
            if (p.arrive_time <= prev.arrive_time)
                r.add(at + "arrive_time", std::to_string(p.arrive_time), "non-monotone arrive_time");
            else if (p.depart_time() < prev.arrive_time)
                r.add(at + "duration_min", std::to_string(p.duration_min),
                      "overlapping legs: departs before previous arrival");
        }
    }
    return r;
}

ValidationResult validate_dataset(const Dataset& ds, const SpeedTable& caps) {
    ValidationResult r;
    for (const auto& [id, prof] : ds.profiles) {
        if (id != prof.person_id) r.add("profiles", id, "key does not match person_id");
        for (auto& v : validate_profile(prof).violations) r.add("profile " + id + ": " + v.field, v.value, v.message);
    }
    std::set<PersonDay> seen;
    auto check_key = [&](const std::string& pid, const Date& date) {
        if (!ds.profiles.contains(pid)) r.add("person_id", pid, "diary references unknown person");
        if (!seen.insert({pid, date}).second) r.add("diary", pid + "@" + date.iso(), "duplicate (person_id, date)");
    };
    for (const auto& d : ds.diaries) {
        check_key(d.person_id, d.date);
        for (auto& v : validate_diary(d, caps).violations)
            r.add("diary " + d.person_id + "@" + d.date.iso() + ": " + v.field, v.value, v.message);
    }
    for (const auto& e : ds.empty_days) check_key(e.person_id, e.date);
    return r;
}

}  // namespace mobforge
