// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobforge/cohort.hpp"
#include "mobforge/error.hpp"
#include "mobforge/eval.hpp"
#include "mobforge/format.hpp"
#include "mobforge/ingest.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/network.hpp"
#include "mobforge/patterns.hpp"
#include "mobforge/pipeline.hpp"
#include "mobforge/prompts.hpp"
#include "mobforge/rng.hpp"
#include "mobforge/csv.hpp"

using namespace mobforge;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kSource = MOBFORGE_SOURCE_DIR;
fs::path g_work;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Natural-log KL terms, converted to bits at the end.
double jsd_reference(const std::vector<double>& p, const std::vector<double>& q) {
    double tp = 0, tq = 0;
    for (double x : p) tp += x;
    for (double x : q) tq += x;
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i] / tp, b = q[i] / tq, m = 0.5 * (a + b);
        if (a > 0) s += 0.5 * a * std::log(a / m);
        if (b > 0) s += 0.5 * b * std::log(b / m);
    }
    return s / std::log(2.0);
}

RunConfig config_at(const std::string& name, const std::string& out, const Overrides& extra = {}) {
    auto c = load_run_config(kSource + "/configs/" + name);
    Overrides o = extra;
    o.out_dir = (g_work / out).string();
    apply_overrides(c, o);
    return c;
}

void run_pipeline(const RunConfig& c) {
    fs::remove_all(c.out_dir);
    for (auto s : {"synth", "cohort", "patterns", "generate", "evaluate"}) run_subcommand(s, c);
}

std::array<double, 4> metrics_of(const RunConfig& c) {
    const auto j = json::parse(slurp(c.output(c.report_path)));
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& x = j["metrics"][std::string(metric_name(kAllMetrics[i]))];
        v[i] = x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
    }
    return v;
}

std::string metrics_text(const std::array<double, 4>& v) {
    std::string s;
    for (std::size_t i = 0; i < 4; ++i)
        s += (i ? " " : "") + std::string(metric_name(kAllMetrics[i])) + "=" + fmt("%.4f", v[i]);
    return s;
}

// ---------------------------------------------------------------------------

Outcome jsd_oracle() {
    CounterRng rng(mix_seed(1, "acceptance/jsd"));
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(std::int64_t{2}, std::int64_t{64}));
        std::vector<double> p(n), q(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng.uniform() < 0.25 ? 0.0 : rng.uniform();
            q[i] = rng.uniform() < 0.25 ? 0.0 : rng.uniform();
        }
        p[rng.uniform_int(n)] += 0.5;
        q[rng.uniform_int(n)] += 0.5;
        const double v = jsd(p, q);
        worst = std::max(worst, std::abs(v - jsd_reference(p, q)));
        if (jsd(p, p) != 0.0) return {false, "jsd(P,P) != 0 at pair " + std::to_string(t)};
        if (jsd(q, p) != v) return {false, "asymmetric at pair " + std::to_string(t)};
        if (!(v >= 0.0 && v <= 1.0)) return {false, "out of [0,1] at pair " + std::to_string(t)};
    }
    return {worst <= 1e-12, "1000 pairs, max |jsd - reference| = " + fmt("%.3g", worst)};
}

Outcome jsd_spots() {
    const double a = jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1});
    const double b = jsd(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5});
    return {a == 1.0 && std::abs(b - 0.311278) <= 1e-6, "jsd([1,0],[0,1]) = " + fmt("%.17g", a) +
                                                             ", jsd([1,0],[.5,.5]) = " + fmt("%.9f", b)};
}

Outcome shortest_paths() {
    CounterRng rng(mix_seed(1, "acceptance/graphs"));
    std::size_t pairs = 0;
    for (int g = 0; g < 200; ++g) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(std::int64_t{2}, std::int64_t{40}));
        const double density = 0.1 + 0.4 * rng.uniform();
        RoadNetwork net;
        for (std::size_t i = 0; i < n; ++i) net.add_node(static_cast<NodeId>(i + 1), {22.5 + 0.001 * i, 114.0});
        std::vector<std::vector<double>> fw(n, std::vector<double>(n, kUnreachable));
        for (std::size_t i = 0; i < n; ++i) fw[i][i] = 0;
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = 0; v < n; ++v) {
                if (u == v || rng.uniform() >= density) continue;
                const double len = static_cast<double>(rng.uniform_int(std::int64_t{1}, std::int64_t{1000}));
                net.add_edge(static_cast<NodeId>(u + 1), static_cast<NodeId>(v + 1), len, true);
                fw[u][v] = std::min(fw[u][v], len);
            }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (fw[i][k] + fw[k][j] < fw[i][j]) fw[i][j] = fw[i][k] + fw[k][j];
        for (std::size_t s = 0; s < n; ++s) {
            const auto d = shortest_distances(net, net.index(static_cast<NodeId>(s + 1)));
            for (std::size_t t = 0; t < n; ++t, ++pairs)
                if (d[net.index(static_cast<NodeId>(t + 1))] != fw[s][t])
                    return {false, "graph " + std::to_string(g) + " source " + std::to_string(s + 1) + " target " +
                                       std::to_string(t + 1)};
        }
    }
    return {true, "200 graphs, " + std::to_string(pairs) + " source-target pairs equal Floyd-Warshall"};
}

Outcome anchor_optimality() {
    CounterRng rng(mix_seed(1, "acceptance/anchor"));
    int queries = 0;
    for (int g = 0; g < 50; ++g) {
        GridSpec spec;
        spec.rows = static_cast<int>(rng.uniform_int(std::int64_t{5}, std::int64_t{14}));
        spec.cols = static_cast<int>(rng.uniform_int(std::int64_t{5}, std::int64_t{14}));
        spec.spacing_m = static_cast<double>(rng.uniform_int(std::int64_t{50}, std::int64_t{250}));
        spec.seed = rng.next_u64();
        // Five categories in use, at most 200 POIs.
        const auto skip = rng.uniform_int(std::uint64_t{6});
        for (std::size_t c = 0; c < 6; ++c)
            spec.pois_per_category[c] = c == skip ? 0 : static_cast<int>(rng.uniform_int(std::int64_t{1}, std::int64_t{40}));
        auto loaded = std::make_shared<const LoadedNetwork>(make_grid_network(spec));
        const SpatialAnchor anchor(loaded);
        const auto& net = loaded->network;
        const auto n = net.node_count();
        // All-pairs by Floyd-Warshall from the edge list.
        std::vector<std::vector<double>> fw(n, std::vector<double>(n, kUnreachable));
        for (std::size_t i = 0; i < n; ++i) fw[i][i] = 0;
        for (const auto& e : net.edges()) {
            const auto u = net.index(e.from), v = net.index(e.to);
            fw[u][v] = std::min(fw[u][v], e.length_m);
            if (!e.oneway) fw[v][u] = std::min(fw[v][u], e.length_m);
        }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (fw[i][k] + fw[k][j] < fw[i][j]) fw[i][j] = fw[i][k] + fw[k][j];
        for (int q = 0; q < 40; ++q, ++queries) {
            const auto origin = net.id_at(rng.uniform_int(n));
            PoiCategory cat;
            do cat = from_index<PoiCategory>(rng.uniform_int(std::uint64_t{6}));
            while (index_of(cat) == skip);
            const double target = rng.uniform() * spec.spacing_m * (spec.rows + spec.cols);
            const auto got = anchor.anchor(origin, cat, target);
            PoiId best = -1;
            double best_err = kUnreachable;
            for (const auto& [id, poi] : loaded->pois.pois) {
                if (poi.category != cat) continue;
                const double d = fw[net.index(origin)][net.index(poi.node)];
                if (!std::isfinite(d)) continue;
                const double err = std::abs(d - target);
                if (err < best_err || (err == best_err && id < best)) {
                    best_err = err;
                    best = id;
                }
            }
            if (got.poi != best)
                return {false, "network " + std::to_string(g) + " query " + std::to_string(q) + ": got poi " +
                                   std::to_string(got.poi) + ", exhaustive search says " + std::to_string(best)};
        }
    }
    return {true, std::to_string(queries) + " queries on 50 grids match exhaustive search"};
}

Outcome end_to_end_determinism() {
    const auto a = config_at("demo.toml", "demo-a");
    const auto b = config_at("demo.toml", "demo-b");
    run_pipeline(a);
    run_pipeline(b);
    std::vector<std::string> differ;
    for (auto leaf : {"generated/diaries.ndjson", "generated/profiles.csv", "report.json"})
        if (slurp(a.output(leaf)) != slurp(b.output(leaf)) || slurp(a.output(leaf)).empty()) differ.push_back(leaf);
    const auto gen = load_dataset(a.output(a.generated_dir));
    if (!differ.empty()) return {false, "differs: " + differ.front()};
    return {gen.person_day_count() == 500, "two runs byte-identical; " + std::to_string(gen.person_day_count()) +
                                               " person-days, " + std::to_string(gen.diaries.size()) + " diaries"};
}

Outcome diary_validity() {
    const auto c = config_at("demo.toml", "demo-a");
    const auto gen = load_dataset(c.output(c.generated_dir));
    const auto net = load_run_network(c);
    const SpatialAnchor anchor(net, c.network.snap_radius_m);
    std::size_t invalid = 0, mismatched = 0, points = 0;
    const auto caps = default_speed_caps();
    for (const auto& d : gen.diaries) {
        if (!validate_diary(d, caps).ok()) ++invalid;
        if (d.provenance.size() != d.points.size()) {
            ++mismatched;
            continue;
        }
        // Walk the anchored nodes from home and recompute each leg.
        std::size_t at = net->network.index(anchor.snap(gen.profiles.at(d.person_id).home));
        for (std::size_t i = 0; i < d.points.size(); ++i, ++points) {
            const auto& line = d.provenance[i];
            const auto k = line.find("node=");
            const auto node = static_cast<NodeId>(std::stoll(line.substr(k + 5)));
            const auto to = net->network.index(node);
            const double leg = shortest_distances(net->network, at)[to];
            if (d.points[i].distance_m != leg || d.points[i].location != net->network.coord_at(to)) ++mismatched;
            at = to;
        }
    }
    return {invalid == 0 && mismatched == 0 && !gen.diaries.empty(),
            std::to_string(gen.diaries.size()) + " diaries, " + std::to_string(invalid) + " invalid; " +
                std::to_string(points) + " points, " + std::to_string(mismatched) + " distance mismatches"};
}

std::array<double, 4> g_full{};

Outcome fidelity() {
    const auto c = config_at("fidelity.toml", "fidelity");
    run_pipeline(c);
    const auto src = load_dataset(c.output(c.source_dir));
    g_full = metrics_of(c);
    const bool ok = src.person_day_count() >= 2000 && g_full[0] <= 0.10 && g_full[1] <= 0.10 &&
                    g_full[2] <= 0.25 && g_full[3] <= 0.10;
    return {ok, std::to_string(src.person_day_count()) + " source person-days; " + metrics_text(g_full)};
}

Outcome ablation() {
    Overrides none;
    auto c = config_at("fidelity.toml", "fidelity-ablated", none);
    c.disable_self_evaluation = true;
    c.disable_rethink = true;
    run_pipeline(c);
    const auto v = metrics_of(c);
    double worst = -1;
    for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, g_full[i] - v[i]);
    return {worst <= 0.01, "ablated " + metrics_text(v) + "; largest improvement " + fmt("%.4f", worst)};
}

Outcome self_evaluation() {
    const auto c = config_at("demo.toml", "demo-a");
    const auto src = load_dataset(c.output(c.source_dir));
    const auto tree = read_tree_ndjson(c.output(c.tree_path));
    const auto pats = read_patterns_ndjson(c.output(c.patterns_path));
    std::vector<MobilityPattern> leaves;
    std::vector<std::size_t> leaf_index;
    for (int l : tree.leaves()) leaves.push_back(pats[static_cast<std::size_t>(l)]);
    const auto& b = leaves.front().stats.distance_binning;

    // Brute force: JSD(start hour) + JSD(distance bin) to every leaf, first minimum.
    auto nearest = [&](const TravelDiary& d) {
        std::vector<double> hours(kHours, 0.0), dist(b.size(), 0.0);
        for (const auto& p : d.points) {
            hours[static_cast<std::size_t>(std::clamp(p.depart_time(), 0, 1439) / 60)] += 1;
            dist[b.index(p.distance_m)] += 1;
        }
        std::size_t best = leaves.size();
        double best_v = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            const auto& s = leaves[i].stats.all;
            if (s.trips() == 0) continue;
            const std::vector<double> sh(s.start_time_hist.begin(), s.start_time_hist.end());
            const std::vector<double> sd(s.distance_hist.begin(), s.distance_hist.end());
            const double v = jsd_reference(hours, sh) + jsd_reference(dist, sd);
            if (v < best_v) {
                best_v = v;
                best = i;
            }
        }
        return best;
    };

    double min_acc = 1.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto& p = leaves[i];
        if (!p.eval_scores) return {false, p.label + " has no self-evaluation"};
        const std::set<std::string> hold(p.holdout_members.begin(), p.holdout_members.end());
        std::size_t n = 0, correct = 0;
        for (const auto& d : src.diaries) {
            if (!hold.contains(d.person_id) || d.points.empty()) continue;
            ++n;
            correct += nearest(d) == i;
        }
        if (n != p.eval_scores->evaluated)
            return {false, p.label + ": " + std::to_string(n) + " holdout diaries but " +
                               std::to_string(p.eval_scores->evaluated) + " evaluated"};
        const double acc = static_cast<double>(correct) / static_cast<double>(n);
        if (std::abs(acc - p.eval_scores->group_inference_accuracy) > 1e-12)
            return {false, p.label + ": reported " + fmt("%.4f", p.eval_scores->group_inference_accuracy) +
                               ", brute force " + fmt("%.4f", acc)};
        min_acc = std::min(min_acc, acc);
        checked += n;
    }
    return {min_acc >= 0.9, std::to_string(leaves.size()) + " leaf cohorts, " + std::to_string(checked) +
                                " holdout diaries; lowest accuracy " + fmt("%.4f", min_acc)};
}

Outcome slicing() {
    const auto c = config_at("demo.toml", "demo-a");
    const auto real = load_dataset(c.output(c.source_dir));
    const auto gen = load_dataset(c.output(c.generated_dir));
    const auto subsets = parse_subsets({"A", "A+I", "A+O", "A+I+O"});
    const auto r = multiscale_evaluate(real, gen, subsets, c.binning, DayFilter::All, c.workers);
    for (const auto& s : r.subsets) {
        std::size_t rs = 0, gs = 0;
        for (const auto& sl : s.slices) rs += sl.real_members, gs += sl.generated_members;
        for (const auto& cohort : partition(real, std::span<const Dimension>(s.dimensions)))
            if (std::find(s.uncovered_real.begin(), s.uncovered_real.end(), cohort.key.label()) != s.uncovered_real.end())
                rs += cohort.members.size();
        for (const auto& cohort : partition(gen, std::span<const Dimension>(s.dimensions)))
            if (std::find(s.uncovered_generated.begin(), s.uncovered_generated.end(), cohort.key.label()) !=
                s.uncovered_generated.end())
                gs += cohort.members.size();
        if (rs != real.profiles.size() || gs != gen.profiles.size())
            return {false, s.label + ": slices hold " + std::to_string(rs) + "/" + std::to_string(gs) + " persons"};
    }
    const auto same = multiscale_evaluate(real, real, subsets, c.binning, DayFilter::All, c.workers);
    std::size_t slices = 0;
    for (const auto& s : same.subsets)
        for (const auto& sl : s.slices) {
            ++slices;
            for (auto m : kAllMetrics)
                if (sl.values[m].value_or(0.0) != 0.0) return {false, s.label + " " + sl.label + " nonzero on identical data"};
        }
    return {true, "member counts partition both datasets for A, A+I, A+O, A+I+O; " + std::to_string(slices) +
                      " identical-data slices all 0"};
}

std::string normalize_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += ch;
    }
    return out;
}

Outcome prompts() {
    for (auto id : kAllTemplates) {
        const auto& t = prompt_template(id);
        std::vector<std::string> slots;
        for (std::size_t i = 1; i <= t.slot_count; ++i) slots.push_back("<INPUT " + std::to_string(i) + ">");
        auto text = render_prompt(id, slots);
        if (text.size() < t.output_contract.size() || text.substr(text.size() - t.output_contract.size()) != t.output_contract)
            return {false, std::string(t.name) + ": output contract not appended"};
        text.resize(text.size() - t.output_contract.size());
        const auto golden = slurp(kSource + "/tests/golden/" + std::string(t.name) + ".txt");
        if (golden.empty() || normalize_ws(text) != normalize_ws(golden)) return {false, std::string(t.name) + " differs"};
    }
    return {true, "6 templates match the golden prompt text"};
}

Outcome ingest() {
    const auto d = kSource + "/tests/data/";
    const auto first = load_survey(d + "survey_profiles.csv", d + "survey_trips.csv");
    std::ostringstream p1, t1;
    write_survey(first.dataset, p1, t1);
    std::istringstream pin(p1.str()), tin(t1.str());
    const auto second = load_survey(pin, tin);
    std::ostringstream p2, t2;
    write_survey(second.dataset, p2, t2);
    if (first.report.trip_rows != 1000) return {false, std::to_string(first.report.trip_rows) + " trip rows"};
    if (!(second.dataset == first.dataset) || p1.str() != p2.str() || t1.str() != t2.str())
        return {false, "round trip is not a fixpoint"};

    LoadOptions lenient;
    lenient.lenient = true;
    const auto bad = load_survey(d + "corrupt_profiles.csv", d + "corrupt_trips.csv", lenient);
    std::ifstream exp(d + "corrupt_expected.csv");
    const auto expected = csv::parse(exp);
    std::size_t found = 0;
    for (const auto& row : expected.rows) {
        const auto line = static_cast<std::size_t>(std::stoul(row.fields[1]));
        for (const auto& issue : bad.report.issues)
            if (issue.source == row.fields[0] && issue.line == line &&
                issue.reason.find("'" + row.fields[3] + "'") != std::string::npos) {
                ++found;
                break;
            }
    }
    return {found == expected.rows.size() && !expected.rows.empty(),
            "1000-row fixpoint; " + std::to_string(found) + "/" + std::to_string(expected.rows.size()) +
                " vocabulary violations reported at their lines"};
}

}  // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mobforge-acceptance";
    fs::create_directories(g_work);

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "JSD oracle equivalence", 5, jsd_oracle},
        {2, "JSD spot values", 1, jsd_spots},
        {3, "shortest-path oracle", 30, shortest_paths},
        {4, "anchor optimality", 30, anchor_optimality},
        {5, "end-to-end determinism", 120, end_to_end_determinism},
        {6, "diary validity", 60, diary_validity},
        {7, "statistical fidelity", 180, fidelity},
        {8, "ablation direction", 180, ablation},
        {9, "self-evaluation classifier", 60, self_evaluation},
        {10, "slicing partition", 60, slicing},
        {11, "prompt fidelity", 5, prompts},
        {12, "ingest round trip", 30, ingest},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s > c.budget_s) {
            o.pass = false;
            o.detail += " (over the " + fmt("%.0f", c.budget_s) + " s budget)";
        }
        failed += !o.pass;
        std::printf("%s  %2d  %-28s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, s, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
