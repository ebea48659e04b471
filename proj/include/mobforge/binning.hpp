#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/geo.hpp"

namespace mobforge {

// Log-spaced bins over [lo, hi) plus an underflow bin (index 0) and an
// overflow bin (index bins + 1).
struct LogBinning {
    double lo = 100.0;
    double hi = 100000.0;
    int bins = 32;

    std::size_t size() const { return static_cast<std::size_t>(bins) + 2; }
    std::size_t index(double x) const {
        if (!(x >= lo)) return 0;
        if (x >= hi) return size() - 1;
        const auto k = static_cast<std::size_t>(std::floor(std::log(x / lo) / std::log(hi / lo) * bins));
        return 1 + std::min(k, static_cast<std::size_t>(bins) - 1);
    }
    double low(std::size_t i) const {
        if (i == 0) return 0.0;
        if (i >= size() - 1) return hi;
        return lo * std::pow(hi / lo, static_cast<double>(i - 1) / bins);
    }
    double high(std::size_t i) const {
        if (i == 0) return lo;
        if (i >= size() - 1) return hi;
        return lo * std::pow(hi / lo, static_cast<double>(i) / bins);
    }
    friend bool operator==(const LogBinning&, const LogBinning&) = default;
};

struct Binning {
    LogBinning sd;
    int si_bin_min = 30;
    int si_bins = 48;
    double cell_m = 1000.0;
    int dailyloc_max = 15;  // bins 0..max, then one overflow bin
    // Grid-cell origin; the real dataset's centroid when unset.
    std::optional<GeoCoord> grid_origin;

    friend bool operator==(const Binning&, const Binning&) = default;
};

nlohmann::json binning_to_json(const Binning& b);
Binning binning_from_json(const nlohmann::json& j);

}  // namespace mobforge
