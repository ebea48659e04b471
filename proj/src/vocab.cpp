#include "mobforge/vocab.hpp"

#include <cctype>

#include "mobforge/error.hpp"

namespace mobforge {

namespace detail {

bool iequals_trimmed(std::string_view a, std::string_view b) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    a = trim(a);
    b = trim(b);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

}  // namespace detail

char dimension_letter(Dimension d) {
    switch (d) {
        case Dimension::AgeBand: return 'A';
        case Dimension::Income: return 'I';
        case Dimension::Occupation: return 'O';
        case Dimension::Gender: return 'G';
        case Dimension::OwnsCar: return 'C';
        case Dimension::Education: return 'E';
        case Dimension::Housing: return 'H';
        case Dimension::PrimaryMode: return 'M';
    }
    return '?';
}

double default_speed_cap_kmh(TravelMode mode) {
    switch (mode) {
        case TravelMode::Walking: return 7.0;
        case TravelMode::BikeEbike: return 25.0;
        case TravelMode::BusSubway: return 60.0;
        case TravelMode::Driving: return 90.0;
        case TravelMode::TaxiRideHailing: return 90.0;
        case TravelMode::Other: return 90.0;
    }
    return 0.0;
}

double default_cruise_speed_kmh(TravelMode mode) {
    switch (mode) {
        case TravelMode::Walking: return 5.0;
        case TravelMode::BikeEbike: return 15.0;
        case TravelMode::BusSubway: return 25.0;
        case TravelMode::Driving: return 40.0;
        case TravelMode::TaxiRideHailing: return 40.0;
        case TravelMode::Other: return 30.0;
    }
    return 0.0;
}

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::UnknownPersonId: return "UnknownPersonId";
        case ErrorCode::DuplicateProfile: return "DuplicateProfile";
        case ErrorCode::DuplicateDiary: return "DuplicateDiary";
        case ErrorCode::EmptySource: return "EmptySource";
        case ErrorCode::OverlappingTrips: return "OverlappingTrips";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::UnknownDimension: return "UnknownDimension";
        case ErrorCode::EmptyCohort: return "EmptyCohort";
        case ErrorCode::UnparseableScore: return "UnparseableScore";
        case ErrorCode::BackendError: return "BackendError";
        case ErrorCode::BackendUnreachable: return "BackendUnreachable";
        case ErrorCode::FixtureMiss: return "FixtureMiss";
        case ErrorCode::MissingContext: return "MissingContext";
        case ErrorCode::SlotArityMismatch: return "SlotArityMismatch";
        case ErrorCode::HoldoutViolation: return "HoldoutViolation";
        case ErrorCode::PlanUnparseable: return "PlanUnparseable";
        case ErrorCode::DecisionUnparseable: return "DecisionUnparseable";
        case ErrorCode::AnchorFailure: return "AnchorFailure";
        case ErrorCode::DanglingEdge: return "DanglingEdge";
        case ErrorCode::NonPositiveLength: return "NonPositiveLength";
        case ErrorCode::PoiUnsnappable: return "PoiUnsnappable";
        case ErrorCode::Unsnappable: return "Unsnappable";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::NoPoiOfCategory: return "NoPoiOfCategory";
        case ErrorCode::NoReachablePoi: return "NoReachablePoi";
        case ErrorCode::BinningMismatch: return "BinningMismatch";
        case ErrorCode::EmptyDistribution: return "EmptyDistribution";
    }
    return "Unknown";
}

}  // namespace mobforge
