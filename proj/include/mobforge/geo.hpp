#pragma once

#include <cmath>

namespace mobforge {

struct GeoCoord {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoCoord&, const GeoCoord&) = default;
};

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

// Great-circle distance in meters.
inline double haversine_m(const GeoCoord& a, const GeoCoord& b) {
    const double dlat = deg2rad(b.lat - a.lat);
    const double dlon = deg2rad(b.lon - a.lon);
    const double s = std::sin(dlat / 2.0);
    const double t = std::sin(dlon / 2.0);
    const double h = s * s + std::cos(deg2rad(a.lat)) * std::cos(deg2rad(b.lat)) * t * t;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::fmin(1.0, h)));
}

inline bool coord_in_range(const GeoCoord& c) {
    return std::isfinite(c.lat) && std::isfinite(c.lon) && c.lat >= -90.0 && c.lat <= 90.0 && c.lon >= -180.0 &&
           c.lon <= 180.0;
}

// Local equirectangular projection around an origin; x east, y north, meters.
struct LocalProjection {
    GeoCoord origin;

    double x_m(const GeoCoord& c) const {
        return kEarthRadiusM * deg2rad(c.lon - origin.lon) * std::cos(deg2rad(origin.lat));
    }
    double y_m(const GeoCoord& c) const { return kEarthRadiusM * deg2rad(c.lat - origin.lat); }

    GeoCoord unproject(double x, double y) const {
        return {origin.lat + y / kEarthRadiusM * 180.0 / kPi,
                origin.lon + x / (kEarthRadiusM * std::cos(deg2rad(origin.lat))) * 180.0 / kPi};
    }
};

}  // namespace mobforge
