#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/domain.hpp"
#include "mobforge/rng.hpp"

namespace mobforge {

// A univariate distribution in a synth spec.
struct Distribution {
    enum class Kind { Fixed, Normal, LogNormal, Uniform, Discrete };
    Kind kind = Kind::Fixed;
    double a = 0.0;  // fixed value | mean | median | low
    double b = 0.0;  // sd | sigma | high
    std::vector<double> values;
    std::vector<double> weights;

    static Distribution fixed(double v) { return {Kind::Fixed, v, 0.0, {}, {}}; }
    static Distribution normal(double mean, double sd) { return {Kind::Normal, mean, sd, {}, {}}; }
    static Distribution lognormal(double median, double sigma) { return {Kind::LogNormal, median, sigma, {}, {}}; }
    static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi, {}, {}}; }
    static Distribution discrete(std::vector<double> v, std::vector<double> w) {
        return {Kind::Discrete, 0.0, 0.0, std::move(v), std::move(w)};
    }

    double sample(CounterRng& rng) const;
};

// Categorical weights over a vocabulary; all-zero means "unset".
template <class E>
using Weights = std::array<double, vocab_size<E>>;

// Distance bands for mode choice: [0,1 km), [1,3 km), [3,10 km), [10 km, inf).
inline constexpr std::array<double, 3> kDistanceBandEdges{1000.0, 3000.0, 10000.0};
inline constexpr std::size_t kDistanceBands = kDistanceBandEdges.size() + 1;
std::size_t distance_band(double meters);

struct ProfileTemplate {
    // Unset entries fall back to the survey-wide marginals.
    std::optional<Weights<AgeBand>> age_band;
    std::optional<Weights<Gender>> gender;
    std::optional<Weights<Occupation>> occupation;
    std::optional<Weights<Income>> income;
    std::optional<Weights<Education>> education;
    std::optional<double> owns_car_probability;
    std::optional<Weights<Housing>> housing;
    std::optional<Weights<TravelMode>> primary_mode;
};

struct Archetype {
    std::string name;
    double share = 1.0;  // fraction of persons
    ProfileTemplate profile;
    Distribution first_departure = Distribution::normal(480, 30);  // minutes
    Distribution trips_per_day = Distribution::fixed(2);
    Weights<Purpose> first_purpose{};
    std::array<Weights<Purpose>, vocab_size<Purpose>> transitions{};
    bool end_at_home = true;
    std::array<std::optional<Distribution>, vocab_size<Purpose>> distance_by_purpose;
    Distribution default_distance = Distribution::lognormal(1500, 0.5);
    std::array<std::optional<Distribution>, vocab_size<Purpose>> dwell_by_purpose;  // minutes at destination
    Distribution default_dwell = Distribution::normal(90, 30);
    std::array<Weights<TravelMode>, kDistanceBands> mode_by_band{};
};

// Rectangular study area; destinations are kept inside it when bounded.
struct CityBox {
    GeoCoord center{22.5431, 114.0579};
    double width_m = 0.0;  // 0 = unbounded
    double height_m = 0.0;
    bool bounded() const { return width_m > 0.0 && height_m > 0.0; }
};

struct SynthSpec {
    std::size_t person_count = 100;
    std::size_t days_per_person = 1;
    Date start_date{2016, 11, 15};
    CityBox city;
    // Home scatter when the city is unbounded (meters, isotropic normal).
    double home_spread_m = 1500.0;
    std::vector<Archetype> archetypes;
    std::uint64_t rng_seed = 1;
    SpeedTable cruise_speeds = default_cruise_speeds();
};

// Throws Error(InvalidSpec) naming the first violated constraint.
void validate_synth_spec(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& doc);
SynthSpec read_synth_spec(const std::string& path);

// Deterministic in spec (including seed). Person i is drawn from
// sub-seed (rng_seed, i) so generation order does not matter.
Dataset synth_dataset(const SynthSpec& spec);

// Name of the archetype each synthetic person came from ("a<k>" prefix in id).
std::size_t archetype_of(const std::string& person_id);

// Survey-wide profile marginals used for unset template entries.
Weights<AgeBand> survey_age_marginals();
Weights<Occupation> survey_occupation_marginals();
Weights<Income> survey_income_marginals();
Weights<Education> survey_education_marginals();
Weights<Housing> survey_housing_marginals();
Weights<TravelMode> survey_mode_marginals();

// Leg duration for a distance at a cruise speed, whole minutes >= 1.
int leg_duration_min(double distance_m, double cruise_kmh);

}  // namespace mobforge
