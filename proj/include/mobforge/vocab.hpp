#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace mobforge {

// Closed vocabularies of the travel survey. Enumerator order is the order of
// the survey questionnaire and is used as a stable index everywhere (histogram
// rows, CSV encodings, tie-breaks).

enum class AgeBand { Under18, From18To25, From26To30, From31To35, From36To40, From41To45, From46To50, Over51 };
enum class Gender { Male, Female };
enum class Occupation {
    GovernmentManagement,
    EnterprisesAndPublicInstitutions,
    ProfessionalTechnical,
    CivilServantsOperational,
    Students,
    CommercialService,
    SkilledWorkers,
    SelfEmployed,
    RetiredUnemployed,
    Others,
};
enum class Income { Low, RelativelyLow, Medium, RelativelyHigh, High };
enum class Education { Bachelor, Associate, HighSchool, TechnicalSchool, Master, JuniorHigh, Primary };
enum class Housing { Rented, Owned, Dormitory, Others };
enum class TravelMode { BusSubway, Driving, TaxiRideHailing, BikeEbike, Walking, Other };
enum class Purpose {
    CommutingToWork,
    GoingToSchool,
    EntertainmentDining,
    MedicalAppointment,
    PickUpDropOff,
    ReturningHome,
    Shopping,
    BusinessTrip,
    VisitingFriends,
    Other,
};
enum class PoiCategory { Workplace, School, Entertainment, Hospital, Residence, Shop };

// Profile attributes that cohorts can be split on.
enum class Dimension { Occupation, AgeBand, Income, Gender, OwnsCar, Education, Housing, PrimaryMode };

template <class E>
struct Vocab;

template <>
struct Vocab<AgeBand> {
    static constexpr std::string_view kind = "age_band";
    static constexpr std::array<std::string_view, 8> names{"<18",   "18-25", "26-30", "31-35",
                                                           "36-40", "41-45", "46-50", ">51"};
};
template <>
struct Vocab<Gender> {
    static constexpr std::string_view kind = "gender";
    static constexpr std::array<std::string_view, 2> names{"Male", "Female"};
};
template <>
struct Vocab<Occupation> {
    static constexpr std::string_view kind = "occupation";
    static constexpr std::array<std::string_view, 10> names{
        "Management of Government Agencies",
        "Enterprises, and Public Institutions",
        "Professional and Technical Personnel",
        "Civil Servants and Operational Staff in Firefighting, Postal, and Telecommunications Services",
        "Students",
        "Commercial and Service Industry Personnel",
        "Skilled Workers",
        "Self-employed Individuals",
        "Retired/Unemployed",
        "Others",
    };
};
template <>
struct Vocab<Income> {
    static constexpr std::string_view kind = "income";
    static constexpr std::array<std::string_view, 5> names{"Low", "Relatively Low", "Medium", "Relatively High",
                                                           "High"};
};
template <>
struct Vocab<Education> {
    static constexpr std::string_view kind = "education";
    static constexpr std::array<std::string_view, 7> names{
        "Bachelor's Degree",        "Associate Degree",          "High School Diploma",   "Technical School Diploma",
        "Master's Degree",          "Junior High School Diploma", "Primary School Diploma",
    };
};
template <>
struct Vocab<Housing> {
    static constexpr std::string_view kind = "housing";
    static constexpr std::array<std::string_view, 4> names{"Rented House", "Owned House", "Dormitory", "Others"};
};
template <>
struct Vocab<TravelMode> {
    static constexpr std::string_view kind = "mode";
    static constexpr std::array<std::string_view, 6> names{
        "Bus and Subway", "Driving", "Taxi/Ride-Hailing", "Electric Bike/Bicycle", "Walking", "Other",
    };
};
template <>
struct Vocab<Purpose> {
    static constexpr std::string_view kind = "purpose";
    static constexpr std::array<std::string_view, 10> names{
        "Commuting to Work",
        "Going to School",
        "Entertainment/Dining",
        "Medical Appointment",
        "Picking Up/Dropping Off Someone",
        "Returning Home",
        "Shopping",
        "Business Trip",
        "Visiting Friends",
        "Other",
    };
};
template <>
struct Vocab<PoiCategory> {
    static constexpr std::string_view kind = "category";
    static constexpr std::array<std::string_view, 6> names{"workplace", "school",    "entertainment",
                                                           "hospital",  "residence", "shop"};
};
template <>
struct Vocab<Dimension> {
    static constexpr std::string_view kind = "dimension";
    static constexpr std::array<std::string_view, 8> names{"occupation", "age_band", "income",  "gender",
                                                           "owns_car",   "education", "housing", "primary_mode"};
};

template <class E>
inline constexpr std::size_t vocab_size = Vocab<E>::names.size();

template <class E>
constexpr std::size_t index_of(E value) {
    return static_cast<std::size_t>(value);
}

template <class E>
constexpr E from_index(std::size_t i) {
    return static_cast<E>(i);
}

template <class E>
constexpr std::string_view name_of(E value) {
    return Vocab<E>::names[index_of(value)];
}

namespace detail {
bool iequals_trimmed(std::string_view a, std::string_view b);
}

// Case-insensitive, whitespace-trimmed lookup.
template <class E>
std::optional<E> parse_vocab(std::string_view text) {
    for (std::size_t i = 0; i < vocab_size<E>; ++i) {
        if (detail::iequals_trimmed(text, Vocab<E>::names[i])) return from_index<E>(i);
    }
    return std::nullopt;
}

// Comma-joined list of the vocabulary, for error messages.
template <class E>
std::string vocab_listing() {
    std::string out;
    for (std::size_t i = 0; i < vocab_size<E>; ++i) {
        if (i) out += ", ";
        out += Vocab<E>::names[i];
    }
    return out;
}

// Short label used for multiscale slice names (A, I, O, ...).
char dimension_letter(Dimension d);

// Mode speed caps used for feasibility checks, km/h.
double default_speed_cap_kmh(TravelMode mode);
// Cruise speeds used to synthesize leg durations, km/h (strictly below caps).
double default_cruise_speed_kmh(TravelMode mode);

}  // namespace mobforge
