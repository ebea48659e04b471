#include "mobforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mobforge/cohort.hpp"
#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/parallel.hpp"

namespace mobforge {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool keep(const Date& d, DayFilter f) {
    switch (f) {
        case DayFilter::All: return true;
        case DayFilter::Weekday: return !d.is_weekend();
        case DayFilter::Weekend: return d.is_weekend();
    }
    return true;
}

Histogram empty_histogram(Metric m, const Binning& b) {
    Histogram h;
    h.metric = m;
    switch (m) {
        case Metric::SD:
            h.kind = "log-distance";
            for (std::size_t i = 0; i < b.sd.size(); ++i) {
                h.bin_low.push_back(b.sd.low(i));
                h.bin_high.push_back(i + 1 == b.sd.size() ? kInf : b.sd.high(i));
            }
            break;
        case Metric::SI:
            h.kind = "half-hour";
            for (int i = 0; i < b.si_bins; ++i) {
                h.bin_low.push_back(i * b.si_bin_min);
                h.bin_high.push_back((i + 1) * b.si_bin_min);
            }
            break;
        case Metric::DAILYLOC:
            h.kind = "integer-count";
            for (int i = 0; i <= b.dailyloc_max + 1; ++i) {
                h.bin_low.push_back(i);
                h.bin_high.push_back(i > b.dailyloc_max ? kInf : i + 1);
            }
            break;
        case Metric::STLOC: h.kind = "categorical-OD"; break;
    }
    h.counts.assign(h.bin_low.size(), 0);
    return h;
}

void bump(Histogram& h, std::size_t bin) {
    ++h.counts[std::min(bin, h.counts.size() - 1)];
    ++h.total;
}

void add_diary(Histogram& h, const TravelDiary& d, const IndividualProfile* profile, const Binning& b,
               const GeoCoord& origin) {
    const auto& pts = d.points;
    switch (h.metric) {
        case Metric::SD:
            for (std::size_t i = 1; i < pts.size(); ++i) bump(h, b.sd.index(haversine_m(pts[i - 1].location, pts[i].location)));
            break;
        case Metric::SI:
            for (std::size_t i = 1; i < pts.size(); ++i) {
                const int gap = pts[i].arrive_time - pts[i - 1].arrive_time;
                bump(h, static_cast<std::size_t>(std::max(gap, 0) / b.si_bin_min));
            }
            break;
        case Metric::STLOC:
            for (std::size_t i = 0; i < pts.size(); ++i) {
                // The first leg leaves from home when the profile is known.
                std::string from;
                if (i > 0) from = grid_cell(pts[i - 1].location, origin, b.cell_m);
                else if (profile) from = grid_cell(profile->home, origin, b.cell_m);
                else continue;
                const int hour = std::clamp(pts[i].depart_time(), 0, kMinutesPerDay - 1) / 60;
                ++h.categories[from + ">" + grid_cell(pts[i].location, origin, b.cell_m) + "@" + std::to_string(hour)];
                ++h.total;
            }
            break;
        case Metric::DAILYLOC: {
            std::set<std::string> cells;
            for (const auto& p : pts) cells.insert(grid_cell(p.location, origin, b.cell_m));
            bump(h, cells.size());
            break;
        }
    }
}

Binning resolve(const Binning& b, const Dataset& real) {
    Binning out = b;
    if (!out.grid_origin) out.grid_origin = dataset_centroid(real);
    return out;
}

std::size_t count_days(const Dataset& d, DayFilter f) {
    std::size_t n = 0;
    for (const auto& x : d.diaries) n += keep(x.date, f);
    for (const auto& x : d.empty_days) n += keep(x.date, f);
    return n;
}

MetricValues compare(const Dataset& real, const Dataset& gen, const Binning& b, DayFilter f, int workers) {
    MetricValues v;
    for (std::size_t i = 0; i < kAllMetrics.size(); ++i) {
        const auto hp = metric_histogram(real, kAllMetrics[i], b, f, workers);
        const auto hq = metric_histogram(gen, kAllMetrics[i], b, f, workers);
        try {
            v.jsd[i] = histogram_jsd(hp, hq);
        } catch (const Error& e) {
            v.errors[i] = e.what();
        }
    }
    return v;
}

Dataset restrict_to(const Dataset& d, const std::vector<std::string>& members) {
    Dataset out;
    const std::set<std::string> keep_ids(members.begin(), members.end());
    for (const auto& id : members) out.profiles.emplace(id, d.profiles.at(id));
    for (const auto& x : d.diaries)
        if (keep_ids.contains(x.person_id)) out.diaries.push_back(x);
    for (const auto& x : d.empty_days)
        if (keep_ids.contains(x.person_id)) out.empty_days.push_back(x);
    return out;
}

json values_json(const MetricValues& v) {
    json m = json::object();
    for (std::size_t i = 0; i < kAllMetrics.size(); ++i)
        m[std::string(metric_name(kAllMetrics[i]))] = v.jsd[i] ? json(*v.jsd[i]) : json(nullptr);
    return m;
}

std::string edge_text(double x) { return std::isinf(x) ? "inf" : format_double(x); }

}  // namespace

std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::SD: return "SD";
        case Metric::SI: return "SI";
        case Metric::STLOC: return "ST-LOC";
        case Metric::DAILYLOC: return "DailyLoc";
    }
    return "";
}

std::string_view day_filter_name(DayFilter f) {
    switch (f) {
        case DayFilter::All: return "all";
        case DayFilter::Weekday: return "weekday";
        case DayFilter::Weekend: return "weekend";
    }
    return "";
}

std::optional<DayFilter> parse_day_filter(std::string_view s) {
    for (auto f : {DayFilter::All, DayFilter::Weekday, DayFilter::Weekend})
        if (to_lower(trim(s)) == day_filter_name(f)) return f;
    return std::nullopt;
}

Histogram& Histogram::operator+=(const Histogram& o) {
    if (kind != o.kind || counts.size() != o.counts.size())
        throw Error(ErrorCode::BinningMismatch, "cannot merge " + kind + " with " + o.kind);
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    for (const auto& [k, c] : o.categories) categories[k] += c;
    total += o.total;
    return *this;
}

std::string grid_cell(const GeoCoord& c, const GeoCoord& origin, double cell_m) {
    const LocalProjection proj{origin};
    const auto col = static_cast<long long>(std::floor(proj.x_m(c) / cell_m));
    const auto row = static_cast<long long>(std::floor(proj.y_m(c) / cell_m));
    return std::to_string(col) + "," + std::to_string(row);
}

GeoCoord dataset_centroid(const Dataset& d) {
    double lat = 0.0, lon = 0.0;
    std::size_t n = 0;
    for (const auto& x : d.diaries)
        for (const auto& p : x.points) {
            lat += p.location.lat;
            lon += p.location.lon;
            ++n;
        }
    if (n == 0)
        for (const auto& [id, p] : d.profiles) {
            lat += p.home.lat;
            lon += p.home.lon;
            ++n;
        }
    if (n == 0) return {};
    return {lat / static_cast<double>(n), lon / static_cast<double>(n)};
}

Histogram metric_histogram(const Dataset& d, Metric metric, const Binning& b, DayFilter filter, int workers) {
    const GeoCoord origin = b.grid_origin ? *b.grid_origin : dataset_centroid(d);
    Histogram h = empty_histogram(metric, b);
    // Chunked by diary, merged by bin-wise addition.
    const std::size_t chunks = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)) * 4, 1,
                                                       std::max<std::size_t>(d.diaries.size(), 1));
    std::vector<Histogram> parts(chunks, h);
    parallel_for(chunks, workers, [&](std::size_t c) {
        for (std::size_t i = c; i < d.diaries.size(); i += chunks) {
            const auto& diary = d.diaries[i];
            if (!keep(diary.date, filter)) continue;
            const auto it = d.profiles.find(diary.person_id);
            add_diary(parts[c], diary, it == d.profiles.end() ? nullptr : &it->second, b, origin);
        }
    });
    for (const auto& p : parts) h += p;
    if (metric == Metric::DAILYLOC)
        for (const auto& e : d.empty_days)
            if (keep(e.date, filter)) bump(h, 0);
    return h;
}

double histogram_jsd(const Histogram& p, const Histogram& q) {
    if (p.kind != q.kind || p.bin_low != q.bin_low || p.bin_high != q.bin_high)
        throw Error(ErrorCode::BinningMismatch, std::string(metric_name(p.metric)) + " histograms use different bins");
    if (p.kind == "categorical-OD") {
        std::map<std::string, double> a, c;
        for (const auto& [k, v] : p.categories) a[k] = static_cast<double>(v);
        for (const auto& [k, v] : q.categories) c[k] = static_cast<double>(v);
        return jsd(a, c);
    }
    return jsd(std::span<const std::uint64_t>(p.counts), std::span<const std::uint64_t>(q.counts));
}

EvalReport evaluate(const Dataset& real, const Dataset& generated, const Binning& binning, DayFilter filter,
                    int workers) {
    EvalReport r;
    r.binning = resolve(binning, real);
    r.filter = filter;
    r.real_person_days = count_days(real, filter);
    r.generated_person_days = count_days(generated, filter);
    for (const auto& x : real.diaries) r.real_diaries += keep(x.date, filter);
    for (const auto& x : generated.diaries) r.generated_diaries += keep(x.date, filter);
    if (r.real_person_days == 0 || r.generated_person_days == 0)
        throw Error(ErrorCode::EmptyDistribution, "evaluation needs person-days on both sides");
    r.values = compare(real, generated, r.binning, filter, workers);
    return r;
}

std::string subset_label(std::span<const Dimension> dims) {
    std::string out;
    for (auto d : dims) {
        if (!out.empty()) out += "+";
        out += dimension_letter(d);
    }
    return out;
}

std::vector<std::vector<Dimension>> parse_subsets(const std::vector<std::string>& specs) {
    std::vector<std::vector<Dimension>> out;
    for (const auto& s : specs) {
        std::vector<Dimension> dims;
        for (const auto& part : split(s, '+')) {
            const auto t = trim(part);
            std::optional<Dimension> d;
            if (t.size() == 1) {
                for (std::size_t i = 0; i < vocab_size<Dimension>; ++i)
                    if (dimension_letter(from_index<Dimension>(i)) == std::toupper(static_cast<unsigned char>(t[0])))
                        d = from_index<Dimension>(i);
            }
            dims.push_back(d ? *d : require_dimension(t));
        }
        out.push_back(std::move(dims));
    }
    return out;
}

EvalReport multiscale_evaluate(const Dataset& real, const Dataset& generated,
                               const std::vector<std::vector<Dimension>>& subsets, const Binning& binning,
                               DayFilter filter, int workers) {
    EvalReport r = evaluate(real, generated, binning, filter, workers);
    for (const auto& dims : subsets) {
        SubsetReport s;
        s.label = subset_label(dims);
        s.dimensions = dims;
        const auto rs = partition(real, dims);
        const auto gs = partition(generated, dims);
        std::map<CohortKey, std::pair<const Cohort*, const Cohort*>> joined;
        for (const auto& c : rs) joined[c.key].first = &c;
        for (const auto& c : gs) joined[c.key].second = &c;
        std::array<double, 4> num{}, den{};
        for (const auto& [key, pair] : joined) {
            const auto [rc, gc] = pair;
            if (!gc) {
                s.uncovered_real.push_back(key.label());
                continue;
            }
            if (!rc) {
                s.uncovered_generated.push_back(key.label());
                continue;
            }
            SliceResult sl;
            sl.label = key.label();
            sl.real_members = rc->members.size();
            sl.generated_members = gc->members.size();
            sl.values = compare(restrict_to(real, rc->members), restrict_to(generated, gc->members), r.binning,
                                filter, workers);
            const double w = static_cast<double>(sl.real_members + sl.generated_members);
            for (std::size_t i = 0; i < 4; ++i)
                if (sl.values.jsd[i]) {
                    num[i] += w * *sl.values.jsd[i];
                    den[i] += w;
                }
            s.slices.push_back(std::move(sl));
        }
        for (std::size_t i = 0; i < 4; ++i)
            if (den[i] > 0.0) s.weighted_mean[i] = num[i] / den[i];
        r.subsets.push_back(std::move(s));
    }
    return r;
}

json report_to_json(const EvalReport& r, const json* meta) {
    json j = json::object();
    if (meta) j["_meta"] = *meta;
    j["metrics"] = values_json(r.values);
    json errors = json::object();
    for (std::size_t i = 0; i < 4; ++i)
        if (!r.values.errors[i].empty()) errors[std::string(metric_name(kAllMetrics[i]))] = r.values.errors[i];
    j["errors"] = errors;
    j["samples"] = {{"real_person_days", r.real_person_days},
                    {"generated_person_days", r.generated_person_days},
                    {"real_diaries", r.real_diaries},
                    {"generated_diaries", r.generated_diaries}};
    j["binning"] = binning_to_json(r.binning);
    j["day_filter"] = day_filter_name(r.filter);
    json subsets = json::array();
    for (const auto& s : r.subsets) {
        json sj;
        sj["label"] = s.label;
        json dims = json::array();
        for (auto d : s.dimensions) dims.push_back(name_of(d));
        sj["dimensions"] = dims;
        json wm = json::object();
        for (std::size_t i = 0; i < 4; ++i)
            wm[std::string(metric_name(kAllMetrics[i]))] = s.weighted_mean[i] ? json(*s.weighted_mean[i]) : json(nullptr);
        sj["metrics"] = wm;
        json slices = json::array();
        for (const auto& sl : s.slices)
            slices.push_back({{"slice", sl.label},
                              {"real_members", sl.real_members},
                              {"generated_members", sl.generated_members},
                              {"metrics", values_json(sl.values)}});
        sj["slices"] = slices;
        sj["uncovered_slices"] = {{"real_only", s.uncovered_real}, {"generated_only", s.uncovered_generated}};
        subsets.push_back(sj);
    }
    j["multiscale"] = subsets;
    return j;
}

std::string plot_csv(const Histogram& real, const Histogram& gen) {
    if (real.kind != gen.kind) throw Error(ErrorCode::BinningMismatch, "plot needs matching histograms");
    std::ostringstream out;
    if (real.kind == "categorical-OD") {
        out << "origin_cell,destination_cell,hour,count_real,count_generated\n";
        std::set<std::string> keys;
        for (const auto& [k, v] : real.categories) keys.insert(k);
        for (const auto& [k, v] : gen.categories) keys.insert(k);
        auto count = [](const Histogram& h, const std::string& k) {
            const auto it = h.categories.find(k);
            return it == h.categories.end() ? std::uint64_t{0} : it->second;
        };
        for (const auto& k : keys) {
            const auto gt = k.find('>');
            const auto at = k.find('@');
            out << '"' << k.substr(0, gt) << "\",\"" << k.substr(gt + 1, at - gt - 1) << "\"," << k.substr(at + 1)
                << ',' << count(real, k) << ',' << count(gen, k) << '\n';
        }
        return out.str();
    }
    out << "bin_low,bin_high,count_real,count_generated\n";
    for (std::size_t i = 0; i < real.counts.size(); ++i)
        out << edge_text(real.bin_low[i]) << ',' << edge_text(real.bin_high[i]) << ',' << real.counts[i] << ','
            << gen.counts[i] << '\n';
    return out.str();
}

void write_plot_data(const Dataset& real, const Dataset& generated, const Binning& binning, DayFilter filter,
                     const std::string& dir, int workers) {
    const Binning b = resolve(binning, real);
    std::filesystem::create_directories(dir);
    for (auto m : kAllMetrics) {
        std::string name = to_lower(metric_name(m));
        name.erase(std::remove(name.begin(), name.end(), '-'), name.end());
        const auto path = dir + "/plot_" + name + ".csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
        out << plot_csv(metric_histogram(real, m, b, filter, workers), metric_histogram(generated, m, b, filter, workers));
    }
}

std::string report_text(const EvalReport& r) {
    std::ostringstream out;
    auto value = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    out << "days (" << day_filter_name(r.filter) << "): real " << r.real_person_days << " (" << r.real_diaries
        << " with trips), generated " << r.generated_person_days << " (" << r.generated_diaries << " with trips)\n";
    out << "          SD       SI       ST-LOC   DailyLoc\n";
    out << "overall   ";
    for (std::size_t i = 0; i < 4; ++i) out << value(r.values.jsd[i]) << (i < 3 ? "   " : "\n");
    for (const auto& s : r.subsets) {
        char head[16];
        std::snprintf(head, sizeof head, "%-10s", s.label.c_str());
        out << head;
        for (std::size_t i = 0; i < 4; ++i) out << value(s.weighted_mean[i]) << (i < 3 ? "   " : "\n");
        if (!s.uncovered_real.empty() || !s.uncovered_generated.empty())
            out << "  uncovered: " << s.uncovered_real.size() << " real-only, " << s.uncovered_generated.size()
                << " generated-only slices\n";
    }
    for (std::size_t i = 0; i < 4; ++i)
        if (!r.values.errors[i].empty()) out << metric_name(kAllMetrics[i]) << ": " << r.values.errors[i] << "\n";
    return out.str();
}

}  // namespace mobforge
