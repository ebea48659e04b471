#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "mobforge/domain.hpp"
#include "mobforge/geo.hpp"

namespace testing {

inline const mobforge::GeoCoord kCenter{22.5431, 114.0579};

// Offset from kCenter by (east, north) meters.
inline mobforge::GeoCoord at(double east_m, double north_m) {
    return mobforge::LocalProjection{kCenter}.unproject(east_m, north_m);
}

inline mobforge::IndividualProfile person(const std::string& id,
                                          mobforge::Occupation occ = mobforge::Occupation::ProfessionalTechnical,
                                          mobforge::AgeBand age = mobforge::AgeBand::From26To30) {
    mobforge::IndividualProfile p;
    p.person_id = id;
    p.occupation = occ;
    p.age_band = age;
    p.home = kCenter;
    return p;
}

inline mobforge::TrajectoryPoint point(int arrive, mobforge::GeoCoord where, mobforge::Purpose purpose,
                                       double distance_m, mobforge::TravelMode mode, int duration) {
    return {arrive, where, purpose, distance_m, mode, duration};
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("mobforge-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str(const std::string& leaf = {}) const { return leaf.empty() ? path.string() : (path / leaf).string(); }
};

}  // namespace testing
