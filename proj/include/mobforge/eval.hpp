#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/binning.hpp"
#include "mobforge/domain.hpp"

namespace mobforge {

enum class Metric { SD, SI, STLOC, DAILYLOC };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::SD, Metric::SI, Metric::STLOC, Metric::DAILYLOC};
// Column names of the comparison table: SD, SI, ST-LOC, DailyLoc.
std::string_view metric_name(Metric m);

enum class DayFilter { All, Weekday, Weekend };
std::string_view day_filter_name(DayFilter f);
std::optional<DayFilter> parse_day_filter(std::string_view s);

struct Histogram {
    Metric metric = Metric::SD;
    std::string kind;  // log-distance | half-hour | integer-count | categorical-OD
    // Dense kinds: bin edges and counts. The last edge may be +inf.
    std::vector<double> bin_low;
    std::vector<double> bin_high;
    std::vector<std::uint64_t> counts;
    // categorical-OD: "ox,oy>dx,dy@hour" -> count
    std::map<std::string, std::uint64_t> categories;
    std::uint64_t total = 0;

    Histogram& operator+=(const Histogram& other);
};

// Grid cell of a coordinate, as "col,row" under a local projection.
std::string grid_cell(const GeoCoord& c, const GeoCoord& origin, double cell_m);
// Mean of diary point locations, else of home coordinates.
GeoCoord dataset_centroid(const Dataset& dataset);

// Uses binning.grid_origin for cells, or the dataset's own centroid when it is
// unset. Empty datasets give all-zero histograms.
Histogram metric_histogram(const Dataset& dataset, Metric metric, const Binning& binning,
                           DayFilter filter = DayFilter::All, int workers = 1);

// Throws Error(BinningMismatch) on different kinds or edges and
// Error(EmptyDistribution) when either side is empty.
double histogram_jsd(const Histogram& p, const Histogram& q);

struct MetricValues {
    std::array<std::optional<double>, 4> jsd;  // indexed like kAllMetrics
    std::array<std::string, 4> errors;

    std::optional<double> operator[](Metric m) const { return jsd[static_cast<std::size_t>(m)]; }
};

struct SliceResult {
    std::string label;  // cohort key label
    std::size_t real_members = 0;
    std::size_t generated_members = 0;
    MetricValues values;
};

struct SubsetReport {
    std::string label;  // "A+I+O"
    std::vector<Dimension> dimensions;
    // Weighted by combined member counts over slices where the metric exists.
    std::array<std::optional<double>, 4> weighted_mean;
    std::vector<SliceResult> slices;
    std::vector<std::string> uncovered_real;       // slices with no generated members
    std::vector<std::string> uncovered_generated;  // slices with no real members
};

struct EvalReport {
    MetricValues values;
    std::size_t real_person_days = 0;
    std::size_t generated_person_days = 0;
    std::size_t real_diaries = 0;
    std::size_t generated_diaries = 0;
    Binning binning;  // grid origin resolved
    DayFilter filter = DayFilter::All;
    std::vector<SubsetReport> subsets;
};

// Four JSDs under shared binning; per-metric failures land in values.errors.
EvalReport evaluate(const Dataset& real, const Dataset& generated, const Binning& binning,
                    DayFilter filter = DayFilter::All, int workers = 1);

std::string subset_label(std::span<const Dimension> dims);
// Throws Error(UnknownDimension) on bad names.
std::vector<std::vector<Dimension>> parse_subsets(const std::vector<std::string>& specs);

EvalReport multiscale_evaluate(const Dataset& real, const Dataset& generated,
                               const std::vector<std::vector<Dimension>>& subsets, const Binning& binning,
                               DayFilter filter = DayFilter::All, int workers = 1);

nlohmann::json report_to_json(const EvalReport& r, const nlohmann::json* meta = nullptr);

// SD/SI/DailyLoc: bin_low,bin_high,count_real,count_generated.
// ST-LOC: origin_cell,destination_cell,hour,count_real,count_generated.
std::string plot_csv(const Histogram& real, const Histogram& generated);
// Writes <dir>/plot_<metric>.csv for the four metrics.
void write_plot_data(const Dataset& real, const Dataset& generated, const Binning& binning, DayFilter filter,
                     const std::string& dir, int workers = 1);

// Human-readable report summary.
std::string report_text(const EvalReport& r);

}  // namespace mobforge
