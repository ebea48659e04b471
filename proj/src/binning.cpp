#include "mobforge/binning.hpp"

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"

namespace mobforge {

nlohmann::json binning_to_json(const Binning& b) {
    nlohmann::json j{{"sd", {{"kind", "log-distance"}, {"lo_m", b.sd.lo}, {"hi_m", b.sd.hi}, {"bins", b.sd.bins}}},
                     {"si", {{"kind", "interval"}, {"bin_min", b.si_bin_min}, {"bins", b.si_bins}}},
                     {"stloc", {{"kind", "categorical-od"}, {"cell_m", b.cell_m}}},
                     {"dailyloc", {{"kind", "integer-count"}, {"max", b.dailyloc_max}}}};
    if (b.grid_origin) j["grid_origin"] = {{"lat", b.grid_origin->lat}, {"lon", b.grid_origin->lon}};
    return j;
}

Binning binning_from_json(const nlohmann::json& j) {
    Binning b;
    try {
        if (j.contains("sd")) {
            b.sd.lo = j["sd"].value("lo_m", b.sd.lo);
            b.sd.hi = j["sd"].value("hi_m", b.sd.hi);
            b.sd.bins = j["sd"].value("bins", b.sd.bins);
        }
        if (j.contains("si")) {
            b.si_bin_min = j["si"].value("bin_min", b.si_bin_min);
            b.si_bins = j["si"].value("bins", b.si_bins);
        }
        if (j.contains("stloc")) b.cell_m = j["stloc"].value("cell_m", b.cell_m);
        if (j.contains("dailyloc")) b.dailyloc_max = j["dailyloc"].value("max", b.dailyloc_max);
        if (j.contains("grid_origin")) b.grid_origin = GeoCoord{j["grid_origin"].at("lat"), j["grid_origin"].at("lon")};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad binning: ") + e.what());
    }
    if (!(b.sd.lo > 0 && b.sd.hi > b.sd.lo && b.sd.bins > 0 && b.si_bin_min > 0 && b.si_bins > 0 && b.cell_m > 0 &&
          b.dailyloc_max >= 0))
        throw Error(ErrorCode::ConfigError, "binning parameters out of range");
    return b;
}

}  // namespace mobforge
