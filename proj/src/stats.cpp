#include "mobforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"

namespace mobforge {

namespace {

using nlohmann::json;

std::uint64_t total(std::span<const std::uint64_t> c) { return std::accumulate(c.begin(), c.end(), std::uint64_t{0}); }

void add_into(Counts& a, const Counts& b) {
    if (a.size() < b.size()) a.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
}

json day_to_json(const DayStats& d) {
    return json{{"person_days", d.person_days},
                {"start_time_hist", d.start_time_hist},
                {"distance_hist", d.distance_hist},
                {"mode_freq", d.mode_freq},
                {"purpose_freq", d.purpose_freq},
                {"trips_per_day_hist", d.trips_per_day_hist},
                {"purpose_transition", d.purpose_transition},
                {"first_purpose", d.first_purpose},
                {"last_purpose", d.last_purpose},
                {"first_depart", d.first_depart},
                {"dwell_by_purpose", d.dwell_by_purpose},
                {"distance_by_purpose", d.distance_by_purpose},
                {"mode_by_band", d.mode_by_band}};
}

template <class T>
void read_sized(const json& j, const char* key, T& out) {
    T v = j.at(key).get<T>();
    if (v.size() != out.size()) throw Error(ErrorCode::InvalidSpec, std::string("stats field '") + key + "' has the wrong size");
    out = std::move(v);
}

DayStats day_from_json(const json& j, const LogBinning& b) {
    DayStats d(b);
    d.person_days = j.at("person_days").get<std::uint64_t>();
    read_sized(j, "start_time_hist", d.start_time_hist);
    read_sized(j, "distance_hist", d.distance_hist);
    read_sized(j, "mode_freq", d.mode_freq);
    read_sized(j, "purpose_freq", d.purpose_freq);
    read_sized(j, "trips_per_day_hist", d.trips_per_day_hist);
    read_sized(j, "purpose_transition", d.purpose_transition);
    read_sized(j, "first_purpose", d.first_purpose);
    read_sized(j, "last_purpose", d.last_purpose);
    read_sized(j, "first_depart", d.first_depart);
    read_sized(j, "dwell_by_purpose", d.dwell_by_purpose);
    read_sized(j, "distance_by_purpose", d.distance_by_purpose);
    read_sized(j, "mode_by_band", d.mode_by_band);
    return d;
}

template <class E>
std::string named_counts(const Counts& c) {
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!c[i]) continue;
        if (!out.empty()) out += "; ";
        out += std::string(name_of(from_index<E>(i))) + ": " + std::to_string(c[i]);
    }
    return out.empty() ? "none" : out;
}

std::string indexed_counts(const Counts& c) {
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!c[i]) continue;
        if (!out.empty()) out += ", ";
        out += std::to_string(i) + ": " + std::to_string(c[i]);
    }
    return out.empty() ? "none" : out;
}

std::string distance_counts(const Counts& c, const LogBinning& b) {
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!c[i]) continue;
        if (!out.empty()) out += ", ";
        out += std::to_string(std::lround(b.low(i))) + "-" + std::to_string(std::lround(b.high(i))) + ": " +
               std::to_string(c[i]);
    }
    return out.empty() ? "none" : out;
}

}  // namespace

std::size_t mode_band(double meters) {
    if (meters < 1000.0) return 0;
    if (meters < 3000.0) return 1;
    if (meters < 10000.0) return 2;
    return 3;
}

DayStats::DayStats(const LogBinning& b)
    : distance_hist(b.size()), distance_by_purpose(kPurposes, Counts(b.size())) {}

std::uint64_t DayStats::trips() const { return total(mode_freq); }

void DayStats::add_day(const TravelDiary& diary, const LogBinning& b) {
    ++person_days;
    const auto& pts = diary.points;
    ++trips_per_day_hist[std::min(pts.size(), kTripCountBins - 1)];
    if (pts.empty()) return;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        const int dep = std::clamp(p.depart_time(), 0, kMinutesPerDay - 1);
        const auto purpose = index_of(p.purpose);
        const auto mode = index_of(p.mode);
        const auto dbin = b.index(p.distance_m);
        ++start_time_hist[static_cast<std::size_t>(dep / 60)];
        ++distance_hist[dbin];
        ++mode_freq[mode];
        ++purpose_freq[purpose];
        ++distance_by_purpose[purpose][dbin];
        ++mode_by_band[mode_band(p.distance_m)][mode];
        if (i + 1 < pts.size()) {
            ++purpose_transition[purpose][index_of(pts[i + 1].purpose)];
            const int dwell = pts[i + 1].depart_time() - p.arrive_time;
            ++dwell_by_purpose[purpose][static_cast<std::size_t>(std::clamp(dwell / 15, 0, 95))];
        }
    }
    ++first_purpose[index_of(pts.front().purpose)];
    ++last_purpose[index_of(pts.back().purpose)];
    ++first_depart[static_cast<std::size_t>(std::clamp(pts.front().depart_time(), 0, kMinutesPerDay - 1) / 15)];
}

void DayStats::add_empty_day() {
    ++person_days;
    ++trips_per_day_hist[0];
}

DayStats& DayStats::operator+=(const DayStats& o) {
    person_days += o.person_days;
    add_into(start_time_hist, o.start_time_hist);
    add_into(distance_hist, o.distance_hist);
    add_into(mode_freq, o.mode_freq);
    add_into(purpose_freq, o.purpose_freq);
    add_into(trips_per_day_hist, o.trips_per_day_hist);
    add_into(first_purpose, o.first_purpose);
    add_into(last_purpose, o.last_purpose);
    add_into(first_depart, o.first_depart);
    for (std::size_t p = 0; p < kPurposes; ++p) {
        add_into(purpose_transition[p], o.purpose_transition[p]);
        add_into(dwell_by_purpose[p], o.dwell_by_purpose[p]);
        add_into(distance_by_purpose[p], o.distance_by_purpose[p]);
    }
    for (std::size_t b = 0; b < kModeBands; ++b) add_into(mode_by_band[b], o.mode_by_band[b]);
    return *this;
}

CohortStats summarize(const Dataset& dataset, std::span<const std::string> members, const LogBinning& b) {
    if (members.empty()) throw Error(ErrorCode::EmptyCohort, "cohort has no members");
    const std::set<std::string> ids(members.begin(), members.end());
    CohortStats s(b);
    s.member_count = ids.size();
    for (const auto& d : dataset.diaries) {
        if (!ids.count(d.person_id)) continue;
        s.all.add_day(d, b);
        (d.date.is_weekend() ? s.weekend : s.weekday).add_day(d, b);
    }
    for (const auto& e : dataset.empty_days) {
        if (!ids.count(e.person_id)) continue;
        s.all.add_empty_day();
        (e.date.is_weekend() ? s.weekend : s.weekday).add_empty_day();
    }
    return s;
}

CohortStats summarize(const Dataset& dataset, const std::vector<std::string>& members, const LogBinning& b) {
    return summarize(dataset, std::span<const std::string>(members), b);
}

json stats_to_json(const CohortStats& s) {
    return json{{"member_count", s.member_count},
                {"distance_binning", {{"lo", s.distance_binning.lo}, {"hi", s.distance_binning.hi}, {"bins", s.distance_binning.bins}}},
                {"all", day_to_json(s.all)},
                {"weekday", day_to_json(s.weekday)},
                {"weekend", day_to_json(s.weekend)}};
}

CohortStats stats_from_json(const json& j) {
    try {
        LogBinning b;
        const auto& jb = j.at("distance_binning");
        b.lo = jb.at("lo").get<double>();
        b.hi = jb.at("hi").get<double>();
        b.bins = jb.at("bins").get<int>();
        CohortStats s(b);
        s.member_count = j.at("member_count").get<std::uint64_t>();
        s.all = day_from_json(j.at("all"), b);
        s.weekday = day_from_json(j.at("weekday"), b);
        s.weekend = day_from_json(j.at("weekend"), b);
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, std::string("malformed stats: ") + e.what());
    }
}

std::size_t modal_index(std::span<const std::uint64_t> counts) {
    std::size_t best = static_cast<std::size_t>(-1);
    std::uint64_t best_count = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > best_count) {
            best = i;
            best_count = counts[i];
        }
    }
    return best;
}

double median_of_bins(std::span<const std::uint64_t> counts, const LogBinning& b) {
    const auto n = total(counts);
    if (n == 0) return -1.0;
    std::uint64_t cum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        cum += counts[i];
        if (2 * cum >= n) return (b.low(i) + b.high(i)) / 2.0;
    }
    return b.hi;
}

std::string stats_highlights(const DayStats& s, const LogBinning& b) {
    if (s.trips() == 0) return "no trips recorded over " + std::to_string(s.person_days) + " person-days";
    std::ostringstream out;
    out << "peak start hour: " << modal_index(s.start_time_hist) << "\n";
    out << "median trip distance: " << std::lround(median_of_bins(s.distance_hist, b)) << " m\n";
    out << "most common mode: " << name_of(from_index<TravelMode>(modal_index(s.mode_freq))) << "\n";
    out << "most common purpose: " << name_of(from_index<Purpose>(modal_index(s.purpose_freq))) << "\n";
    const double mean = s.person_days ? static_cast<double>(s.trips()) / static_cast<double>(s.person_days) : 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", mean);
    out << "mean trips per day: " << buf;
    return out.str();
}

std::string describe_stats(const CohortStats& s) {
    const auto& a = s.all;
    const auto& b = s.distance_binning;
    std::ostringstream out;
    out << "members: " << s.member_count << ", person-days: " << a.person_days << ", trips: " << a.trips() << "\n";
    out << "trip start hour counts: " << indexed_counts(a.start_time_hist) << "\n";
    out << "trip distance counts (m): " << distance_counts(a.distance_hist, b) << "\n";
    out << "travel mode counts: " << named_counts<TravelMode>(a.mode_freq) << "\n";
    out << "travel purpose counts: " << named_counts<Purpose>(a.purpose_freq) << "\n";
    out << "trips per day counts: " << indexed_counts(a.trips_per_day_hist) << "\n";
    std::string transitions;
    for (std::size_t p = 0; p < kPurposes; ++p) {
        for (std::size_t q = 0; q < kPurposes; ++q) {
            if (!a.purpose_transition[p][q]) continue;
            if (!transitions.empty()) transitions += "; ";
            transitions += std::string(name_of(from_index<Purpose>(p))) + " -> " +
                           std::string(name_of(from_index<Purpose>(q))) + ": " +
                           std::to_string(a.purpose_transition[p][q]);
        }
    }
    out << "purpose transitions: " << (transitions.empty() ? "none" : transitions) << "\n";
    out << "weekday: person-days " << s.weekday.person_days << ", trips " << s.weekday.trips()
        << ", trip start hour counts: " << indexed_counts(s.weekday.start_time_hist) << "\n";
    out << "weekend: person-days " << s.weekend.person_days << ", trips " << s.weekend.trips()
        << ", trip start hour counts: " << indexed_counts(s.weekend.start_time_hist);
    return out.str();
}

}  // namespace mobforge
