#include "mobforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/toml.hpp"

namespace mobforge {

namespace {

using nlohmann::json;

constexpr double kWeightTolerance = 1e-9;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); }

template <std::size_t N>
double sum_of(const std::array<double, N>& w) {
    return std::accumulate(w.begin(), w.end(), 0.0);
}

template <std::size_t N>
bool is_unset(const std::array<double, N>& w) {
    return std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; });
}

template <std::size_t N>
void check_weights(const std::array<double, N>& w, const std::string& what) {
    for (double x : w)
        if (!(x >= 0.0)) invalid(what + ": negative weight");
    if (std::abs(sum_of(w) - 1.0) > kWeightTolerance)
        invalid(what + ": weights sum to " + format_double(sum_of(w)) + ", expected 1");
}

void check_distribution(const Distribution& d, const std::string& what) {
    using K = Distribution::Kind;
    switch (d.kind) {
        case K::Fixed: break;
        case K::Normal:
            if (!(d.b >= 0.0)) invalid(what + ": sd must be >= 0");
            break;
        case K::LogNormal:
            if (!(d.a > 0.0) || !(d.b >= 0.0)) invalid(what + ": lognormal needs median > 0 and sigma >= 0");
            break;
        case K::Uniform:
            if (!(d.a <= d.b)) invalid(what + ": uniform needs low <= high");
            break;
        case K::Discrete: {
            if (d.values.empty() || d.values.size() != d.weights.size())
                invalid(what + ": discrete needs equally many values and weights");
            double total = 0.0;
            for (double w : d.weights) {
                if (!(w >= 0.0)) invalid(what + ": negative weight");
                total += w;
            }
            if (std::abs(total - 1.0) > kWeightTolerance)
                invalid(what + ": weights sum to " + format_double(total) + ", expected 1");
            break;
        }
    }
}

template <class E>
std::array<double, vocab_size<E>> normalized(std::array<double, vocab_size<E>> w) {
    const double total = sum_of(w);
    for (auto& x : w) x /= total;
    return w;
}

template <class E>
E sample_vocab(CounterRng& rng, const Weights<E>& w) {
    const auto i = rng.weighted(std::span<const double>(w));
    return from_index<E>(std::min(i, vocab_size<E> - 1));
}

// ---- JSON readers ----

template <class E>
Weights<E> weights_from_json(const json& j, const std::string& what) {
    Weights<E> w{};
    if (j.is_string()) {
        auto v = parse_vocab<E>(j.get<std::string>());
        if (!v) invalid(what + ": '" + j.get<std::string>() + "' not in {" + vocab_listing<E>() + "}");
        w[index_of(*v)] = 1.0;
        return w;
    }
    if (!j.is_object()) invalid(what + ": expected a value name or a table of weights");
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto v = parse_vocab<E>(it.key());
        if (!v) invalid(what + ": '" + it.key() + "' not in {" + vocab_listing<E>() + "}");
        if (!it.value().is_number()) invalid(what + ": weight for '" + it.key() + "' is not a number");
        w[index_of(*v)] = it.value().get<double>();
    }
    return w;
}

Distribution distribution_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return Distribution::fixed(j.get<double>());
    if (!j.is_object() || !j.contains("kind")) invalid(what + ": expected a number or a table with 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    auto num = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number()) invalid(what + ": '" + kind + "' needs numeric '" + key + "'");
        return j.at(key).get<double>();
    };
    if (kind == "fixed") return Distribution::fixed(num("value"));
    if (kind == "normal") return Distribution::normal(num("mean"), num("sd"));
    if (kind == "lognormal") return Distribution::lognormal(num("median"), num("sigma"));
    if (kind == "uniform") return Distribution::uniform(num("low"), num("high"));
    if (kind == "discrete") {
        if (!j.contains("values") || !j.contains("weights")) invalid(what + ": discrete needs values and weights");
        return Distribution::discrete(j.at("values").get<std::vector<double>>(),
                                      j.at("weights").get<std::vector<double>>());
    }
    invalid(what + ": unknown distribution kind '" + kind + "'");
}

template <class E>
void read_profile_weights(const json& prof, const char* key, std::optional<Weights<E>>& slot) {
    if (prof.contains(key)) slot = weights_from_json<E>(prof.at(key), std::string("profile.") + key);
}

Archetype archetype_from_json(const json& j, std::size_t index) {
    Archetype a;
    a.name = j.value("name", "archetype" + std::to_string(index));
    const std::string at = "archetype '" + a.name + "'";
    a.share = j.value("share", 1.0);
    if (j.contains("profile")) {
        const auto& p = j.at("profile");
        read_profile_weights<AgeBand>(p, "age_band", a.profile.age_band);
        read_profile_weights<Gender>(p, "gender", a.profile.gender);
        read_profile_weights<Occupation>(p, "occupation", a.profile.occupation);
        read_profile_weights<Income>(p, "income", a.profile.income);
        read_profile_weights<Education>(p, "education", a.profile.education);
        read_profile_weights<Housing>(p, "housing", a.profile.housing);
        read_profile_weights<TravelMode>(p, "primary_mode", a.profile.primary_mode);
        if (p.contains("owns_car")) {
            const auto& c = p.at("owns_car");
            a.profile.owns_car_probability = c.is_boolean() ? (c.get<bool>() ? 1.0 : 0.0) : c.get<double>();
        }
    }
    if (j.contains("first_departure")) a.first_departure = distribution_from_json(j.at("first_departure"), at + " first_departure");
    if (j.contains("trips_per_day")) a.trips_per_day = distribution_from_json(j.at("trips_per_day"), at + " trips_per_day");
    if (j.contains("first_purpose")) a.first_purpose = weights_from_json<Purpose>(j.at("first_purpose"), at + " first_purpose");
    if (j.contains("transitions")) {
        for (auto it = j.at("transitions").begin(); it != j.at("transitions").end(); ++it) {
            auto from = parse_vocab<Purpose>(it.key());
            if (!from) invalid(at + " transitions: '" + it.key() + "' is not a purpose");
            a.transitions[index_of(*from)] = weights_from_json<Purpose>(it.value(), at + " transitions." + it.key());
        }
    }
    a.end_at_home = j.value("end_at_home", true);
    auto per_purpose = [&](const char* key, auto& slots, Distribution& fallback) {
        if (!j.contains(key)) return;
        const auto& t = j.at(key);
        if (!t.is_object() || t.contains("kind")) {
            fallback = distribution_from_json(t, at + " " + key);
            return;
        }
        for (auto it = t.begin(); it != t.end(); ++it) {
            if (it.key() == "default") {
                fallback = distribution_from_json(it.value(), at + " " + key + ".default");
                continue;
            }
            auto p = parse_vocab<Purpose>(it.key());
            if (!p) invalid(at + " " + key + ": '" + it.key() + "' is not a purpose");
            slots[index_of(*p)] = distribution_from_json(it.value(), at + " " + key + "." + it.key());
        }
    };
    per_purpose("distance", a.distance_by_purpose, a.default_distance);
    per_purpose("dwell", a.dwell_by_purpose, a.default_dwell);
    if (j.contains("mode")) {
        const auto w = weights_from_json<TravelMode>(j.at("mode"), at + " mode");
        a.mode_by_band.fill(w);
    }
    if (j.contains("mode_by_band")) {
        const auto& rows = j.at("mode_by_band");
        if (!rows.is_array() || rows.size() != kDistanceBands)
            invalid(at + " mode_by_band: expected " + std::to_string(kDistanceBands) + " rows");
        for (std::size_t b = 0; b < kDistanceBands; ++b)
            a.mode_by_band[b] = weights_from_json<TravelMode>(rows[b], at + " mode_by_band[" + std::to_string(b) + "]");
    }
    return a;
}

void apply_defaults(Archetype& a) {
    if (is_unset(a.first_purpose)) a.first_purpose[index_of(Purpose::CommutingToWork)] = 1.0;
    for (std::size_t p = 0; p < vocab_size<Purpose>; ++p) {
        if (!is_unset(a.transitions[p])) continue;
        if (from_index<Purpose>(p) == Purpose::ReturningHome) {
            a.transitions[p][index_of(Purpose::Shopping)] = 0.5;
            a.transitions[p][index_of(Purpose::EntertainmentDining)] = 0.5;
        } else {
            a.transitions[p][index_of(Purpose::ReturningHome)] = 1.0;
        }
    }
    static const std::array<std::array<std::pair<TravelMode, double>, 3>, kDistanceBands> kDefaultModes{{
        {{{TravelMode::Walking, 0.6}, {TravelMode::BikeEbike, 0.2}, {TravelMode::BusSubway, 0.2}}},
        {{{TravelMode::BusSubway, 0.5}, {TravelMode::BikeEbike, 0.3}, {TravelMode::Driving, 0.2}}},
        {{{TravelMode::BusSubway, 0.6}, {TravelMode::Driving, 0.3}, {TravelMode::TaxiRideHailing, 0.1}}},
        {{{TravelMode::BusSubway, 0.5}, {TravelMode::Driving, 0.4}, {TravelMode::TaxiRideHailing, 0.1}}},
    }};
    for (std::size_t b = 0; b < kDistanceBands; ++b) {
        if (!is_unset(a.mode_by_band[b])) continue;
        for (auto [m, w] : kDefaultModes[b]) a.mode_by_band[b][index_of(m)] = w;
    }
}

bool uses_commute(const Archetype& a) {
    const auto c = index_of(Purpose::CommutingToWork);
    if (a.first_purpose[c] > 0.0) return true;
    return std::any_of(a.transitions.begin(), a.transitions.end(), [&](const auto& row) { return row[c] > 0.0; });
}

struct Local {
    double x = 0.0;
    double y = 0.0;
};

double l1(const Local& a, const Local& b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

class CityFrame {
public:
    explicit CityFrame(const CityBox& box) : box_(box), proj_{box.center} {}

    bool inside(const Local& p) const {
        if (!box_.bounded()) return true;
        return std::abs(p.x) <= box_.width_m / 2 && std::abs(p.y) <= box_.height_m / 2;
    }
    Local clamp(Local p) const {
        if (!box_.bounded()) return p;
        p.x = std::clamp(p.x, -box_.width_m / 2, box_.width_m / 2);
        p.y = std::clamp(p.y, -box_.height_m / 2, box_.height_m / 2);
        return p;
    }
    // A point at street (L1) distance `d` from `from` in a random direction.
    Local displace(const Local& from, double d, CounterRng& rng) const {
        for (int attempt = 0; attempt < 32; ++attempt) {
            const double theta = rng.uniform() * 2.0 * kPi;
            const double c = std::cos(theta), s = std::sin(theta);
            const double norm = std::abs(c) + std::abs(s);
            Local p{from.x + d * c / norm, from.y + d * s / norm};
            if (inside(p)) return p;
        }
        const double theta = rng.uniform() * 2.0 * kPi;
        const double c = std::cos(theta), s = std::sin(theta);
        const double norm = std::abs(c) + std::abs(s);
        return clamp({from.x + d * c / norm, from.y + d * s / norm});
    }
    GeoCoord geo(const Local& p) const { return proj_.unproject(p.x, p.y); }

    const CityBox& box() const { return box_; }

private:
    CityBox box_;
    LocalProjection proj_;
};

template <class E>
E pick(CounterRng& rng, const std::optional<Weights<E>>& w, const Weights<E>& fallback) {
    return sample_vocab<E>(rng, w ? *w : fallback);
}

IndividualProfile make_profile(const Archetype& a, std::size_t archetype_index, std::size_t person_index,
                               CounterRng& rng) {
    IndividualProfile p;
    char id[48];
    std::snprintf(id, sizeof id, "a%zu-%06zu", archetype_index, person_index);
    p.person_id = id;
    p.age_band = pick<AgeBand>(rng, a.profile.age_band, survey_age_marginals());
    p.gender = pick<Gender>(rng, a.profile.gender, Weights<Gender>{0.52, 0.48});
    p.occupation = pick<Occupation>(rng, a.profile.occupation, survey_occupation_marginals());
    p.income = pick<Income>(rng, a.profile.income, survey_income_marginals());
    p.education = pick<Education>(rng, a.profile.education, survey_education_marginals());
    p.owns_car = rng.uniform() < a.profile.owns_car_probability.value_or(0.2232);
    p.housing = pick<Housing>(rng, a.profile.housing, survey_housing_marginals());
    p.primary_mode = pick<TravelMode>(rng, a.profile.primary_mode, survey_mode_marginals());
    return p;
}

double sample_distance(const Archetype& a, Purpose p, CounterRng& rng) {
    const auto& d = a.distance_by_purpose[index_of(p)];
    return std::max(0.0, (d ? *d : a.default_distance).sample(rng));
}

int sample_dwell(const Archetype& a, Purpose p, CounterRng& rng) {
    const auto& d = a.dwell_by_purpose[index_of(p)];
    return std::max(1, static_cast<int>(std::lround((d ? *d : a.default_dwell).sample(rng))));
}

}  // namespace

double Distribution::sample(CounterRng& rng) const {
    switch (kind) {
        case Kind::Fixed: return a;
        case Kind::Normal: return b == 0.0 ? a : a + b * rng.normal();
        case Kind::LogNormal: return b == 0.0 ? a : a * std::exp(b * rng.normal());
        case Kind::Uniform: return a + (b - a) * rng.uniform();
        case Kind::Discrete: {
            const auto i = rng.weighted(std::span<const double>(weights));
            return values[std::min(i, values.size() - 1)];
        }
    }
    return a;
}

std::size_t distance_band(double meters) {
    std::size_t b = 0;
    while (b < kDistanceBandEdges.size() && meters >= kDistanceBandEdges[b]) ++b;
    return b;
}

int leg_duration_min(double distance_m, double cruise_kmh) {
    const double meters_per_min = cruise_kmh * 1000.0 / 60.0;
    return std::max(1, static_cast<int>(std::ceil(distance_m / meters_per_min - 1e-9)));
}

Weights<AgeBand> survey_age_marginals() {
    return normalized<AgeBand>({2.7, 27.2, 31.4, 21.7, 9.3, 4.6, 1.8, 1.3});
}
Weights<Occupation> survey_occupation_marginals() {
    return normalized<Occupation>({8.84, 8.96, 17.33, 4.55, 9.68, 21.1, 14.25, 7.48, 1.8, 14.85});
}
Weights<Income> survey_income_marginals() { return normalized<Income>({39.96, 30.79, 16.87, 8.8, 3.58}); }
Weights<Education> survey_education_marginals() {
    return normalized<Education>({32.21, 28.72, 14.23, 10.55, 7.53, 6.01, 0.75});
}
Weights<Housing> survey_housing_marginals() { return normalized<Housing>({47.62, 34.69, 13.5, 4.19}); }
Weights<TravelMode> survey_mode_marginals() {
    return normalized<TravelMode>({58.17, 9.95, 4.8, 10.45, 15.77, 0.86});
}

void validate_synth_spec(const SynthSpec& spec) {
    if (spec.person_count == 0) invalid("person_count must be >= 1");
    if (spec.days_per_person == 0) invalid("days_per_person must be >= 1");
    if (spec.archetypes.empty()) invalid("at least one archetype is required");
    if (!coord_in_range(spec.city.center)) invalid("city center out of range");
    if (spec.city.width_m < 0 || spec.city.height_m < 0) invalid("city extent must be >= 0");
    double shares = 0.0;
    for (const auto& a : spec.archetypes) {
        const std::string at = "archetype '" + a.name + "'";
        if (!(a.share >= 0.0)) invalid(at + ": negative share");
        shares += a.share;
        check_distribution(a.first_departure, at + " first_departure");
        check_distribution(a.trips_per_day, at + " trips_per_day");
        check_distribution(a.default_distance, at + " distance.default");
        check_distribution(a.default_dwell, at + " dwell.default");
        check_weights(a.first_purpose, at + " first_purpose");
        for (std::size_t p = 0; p < vocab_size<Purpose>; ++p) {
            const std::string pname(name_of(from_index<Purpose>(p)));
            check_weights(a.transitions[p], at + " transitions." + pname);
            if (a.distance_by_purpose[p]) check_distribution(*a.distance_by_purpose[p], at + " distance." + pname);
            if (a.dwell_by_purpose[p]) check_distribution(*a.dwell_by_purpose[p], at + " dwell." + pname);
        }
        for (std::size_t b = 0; b < kDistanceBands; ++b)
            check_weights(a.mode_by_band[b], at + " mode_by_band[" + std::to_string(b) + "]");
        const auto& pt = a.profile;
        if (pt.age_band) check_weights(*pt.age_band, at + " profile.age_band");
        if (pt.gender) check_weights(*pt.gender, at + " profile.gender");
        if (pt.occupation) check_weights(*pt.occupation, at + " profile.occupation");
        if (pt.income) check_weights(*pt.income, at + " profile.income");
        if (pt.education) check_weights(*pt.education, at + " profile.education");
        if (pt.housing) check_weights(*pt.housing, at + " profile.housing");
        if (pt.primary_mode) check_weights(*pt.primary_mode, at + " profile.primary_mode");
        if (pt.owns_car_probability && !(*pt.owns_car_probability >= 0.0 && *pt.owns_car_probability <= 1.0))
            invalid(at + " profile.owns_car must be a probability");
    }
    if (std::abs(shares - 1.0) > kWeightTolerance)
        invalid("archetype shares sum to " + format_double(shares) + ", expected 1");
    for (double v : spec.cruise_speeds)
        if (!(v > 0.0)) invalid("cruise speeds must be > 0");
}

SynthSpec synth_spec_from_json(const json& doc) {
    SynthSpec spec;
    try {
        spec.person_count = doc.value("person_count", spec.person_count);
        spec.days_per_person = doc.value("days_per_person", spec.days_per_person);
        if (doc.contains("start_date")) {
            auto d = Date::parse(doc.at("start_date").get<std::string>());
            if (!d) invalid("start_date is not an ISO date");
            spec.start_date = *d;
        }
        spec.rng_seed = doc.value("seed", spec.rng_seed);
        spec.home_spread_m = doc.value("home_spread_m", spec.home_spread_m);
        if (doc.contains("city")) {
            const auto& c = doc.at("city");
            spec.city.center.lat = c.value("center_lat", spec.city.center.lat);
            spec.city.center.lon = c.value("center_lon", spec.city.center.lon);
            spec.city.width_m = c.value("width_m", 0.0);
            spec.city.height_m = c.value("height_m", spec.city.width_m);
        }
        if (doc.contains("cruise_speeds")) {
            for (auto it = doc.at("cruise_speeds").begin(); it != doc.at("cruise_speeds").end(); ++it) {
                auto m = parse_vocab<TravelMode>(it.key());
                if (!m) invalid("cruise_speeds: '" + it.key() + "' is not a mode");
                spec.cruise_speeds[index_of(*m)] = it.value().get<double>();
            }
        }
        if (!doc.contains("archetype")) invalid("at least one [[archetype]] is required");
        std::size_t i = 0;
        for (const auto& a : doc.at("archetype")) spec.archetypes.push_back(archetype_from_json(a, i++));
    } catch (const json::exception& e) {
        invalid(std::string("malformed synth spec: ") + e.what());
    }
    for (auto& a : spec.archetypes) apply_defaults(a);
    validate_synth_spec(spec);
    return spec;
}

SynthSpec read_synth_spec(const std::string& path) { return synth_spec_from_json(read_config_document(path)); }

std::size_t archetype_of(const std::string& person_id) {
    if (person_id.size() < 2 || person_id[0] != 'a') return 0;
    return static_cast<std::size_t>(std::strtoul(person_id.c_str() + 1, nullptr, 10));
}

Dataset synth_dataset(const SynthSpec& input) {
    SynthSpec spec = input;
    for (auto& a : spec.archetypes) apply_defaults(a);
    validate_synth_spec(spec);

    const CityFrame frame(spec.city);
    std::vector<double> shares;
    for (const auto& a : spec.archetypes) shares.push_back(a.share);

    Dataset ds;
    for (std::size_t i = 0; i < spec.person_count; ++i) {
        const std::uint64_t person_seed = mix_seed(spec.rng_seed, static_cast<std::uint64_t>(i));
        CounterRng rng(person_seed);
        const std::size_t k = std::min(rng.weighted(std::span<const double>(shares)), shares.size() - 1);
        const Archetype& arch = spec.archetypes[k];
        IndividualProfile profile = make_profile(arch, k, i, rng);

        Local home;
        if (spec.city.bounded()) {
            home = {(rng.uniform() - 0.5) * spec.city.width_m, (rng.uniform() - 0.5) * spec.city.height_m};
        } else {
            home = {rng.normal() * spec.home_spread_m, rng.normal() * spec.home_spread_m};
        }
        profile.home = frame.geo(home);
        std::optional<Local> work;
        if (uses_commute(arch)) {
            work = frame.displace(home, sample_distance(arch, Purpose::CommutingToWork, rng), rng);
            profile.work = frame.geo(*work);
        }

        for (std::size_t day = 0; day < spec.days_per_person; ++day) {
            CounterRng drng(mix_seed(person_seed, static_cast<std::uint64_t>(day) + 1));
            const Date date = Date::from_days(spec.start_date.days_since_epoch() + static_cast<std::int64_t>(day));
            const auto trips =
                static_cast<int>(std::clamp<long>(std::lround(arch.trips_per_day.sample(drng)), 0, 15));

            std::vector<Purpose> purposes;
            for (int t = 0; t < trips; ++t) {
                purposes.push_back(t == 0 ? sample_vocab<Purpose>(drng, arch.first_purpose)
                                          : sample_vocab<Purpose>(drng, arch.transitions[index_of(purposes.back())]));
            }
            if (arch.end_at_home && trips >= 2) purposes.back() = Purpose::ReturningHome;

            TravelDiary diary;
            diary.person_id = profile.person_id;
            diary.date = date;
            int depart = static_cast<int>(std::clamp<long>(std::lround(arch.first_departure.sample(drng)), 0, 1439));
            Local here = home;
            for (const Purpose purpose : purposes) {
                Local there;
                if (purpose == Purpose::ReturningHome) there = home;
                else if (purpose == Purpose::CommutingToWork && work) there = *work;
                else there = frame.displace(here, sample_distance(arch, purpose, drng), drng);
                const double distance = l1(here, there);
                const auto& row = arch.mode_by_band[distance_band(distance)];
                const TravelMode mode = sample_vocab<TravelMode>(drng, row);
                const int duration = leg_duration_min(distance, spec.cruise_speeds[index_of(mode)]);
                const int arrive = depart + duration;
                if (arrive >= kMinutesPerDay) break;
                diary.points.push_back({arrive, frame.geo(there), purpose, distance, mode, duration});
                here = there;
                depart = arrive + sample_dwell(arch, purpose, drng);
                if (depart >= kMinutesPerDay) break;
            }
            if (diary.points.empty())
                ds.empty_days.push_back({profile.person_id, date});
            else
                ds.diaries.push_back(std::move(diary));
        }
        ds.profiles.emplace(profile.person_id, std::move(profile));
    }
    ds.normalize_order();
    return ds;
}

}  // namespace mobforge
