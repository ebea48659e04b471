#include "mobforge/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/ingest.hpp"
#include "mobforge/synth.hpp"
#include "mobforge/toml.hpp"

namespace mobforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// Typed access to one config table; remembers which keys were read so that
// leftovers can be reported as typos.
class Table {
public:
    Table(const json& doc, std::string name) : name_(std::move(name)) {
        if (doc.contains(name_)) {
            if (!doc[name_].is_object()) throw Error(ErrorCode::ConfigError, "[" + name_ + "] must be a table");
            j_ = doc[name_];
        }
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_[key].get<T>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::ConfigError, name_ + "." + key + " has the wrong type");
        }
    }
    const json* sub(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_[key] : nullptr;
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k)) throw Error(ErrorCode::ConfigError, "unknown key " + name_ + "." + k);
    }

private:
    std::string name_;
    json j_ = json::object();
    std::set<std::string> seen_;
};

std::vector<Dimension> dims_of(const std::vector<std::string>& names) {
    std::vector<Dimension> out;
    for (const auto& n : names) out.push_back(require_dimension(n));
    return out;
}

Date parse_date_or_throw(const std::string& s) {
    auto d = Date::parse(s);
    if (!d) throw Error(ErrorCode::ConfigError, "bad date '" + s + "'");
    return *d;
}

std::string file_sha256(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

Gateway make_gateway(const RunConfig& c) {
    GatewayOptions o;
    o.cache_path = c.cache_path.empty() ? "" : c.output(c.cache_path);
    o.max_in_flight = c.backend.max_in_flight;
    return Gateway(make_backend(c), o);
}

CohortConfig cohort_config(const RunConfig& c) {
    CohortConfig cc = c.cohort;
    if (!c.pattern_dims_override.empty()) cc.dimensions = c.pattern_dims_override;
    cc.binning = c.binning.sd;
    cc.workers = c.workers;
    return cc;
}

PatternConfig pattern_config(const RunConfig& c) {
    PatternConfig pc = c.patterns;
    pc.seed = mix_seed(c.run_seed, "patterns");
    pc.workers = c.workers;
    pc.raw_digest_only = c.disable_self_evaluation;
    return pc;
}

ReasonerConfig reasoner_config(const RunConfig& c) {
    ReasonerConfig rc = c.reasoner;
    rc.run_seed = c.run_seed;
    rc.disable_rethink = c.disable_rethink;
    return rc;
}

std::vector<Date> source_dates(const Dataset& ds) {
    std::set<Date> s;
    for (const auto& d : ds.diaries) s.insert(d.date);
    for (const auto& d : ds.empty_days) s.insert(d.date);
    return {s.begin(), s.end()};
}

std::vector<std::vector<Dimension>> default_subsets() {
    return parse_subsets({"A", "A+I", "A+O", "A+I+O"});
}

}  // namespace

std::string RunConfig::input(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(config_dir) / p).lexically_normal().string();
}

std::string RunConfig::output(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(out_dir) / p).lexically_normal().string();
}

RunConfig run_config_from_json(const json& doc, const std::string& config_dir) {
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a table");
    static const std::set<std::string> tables{"run",     "paths",    "backend",  "network", "cohort",
                                              "patterns", "reasoner", "generate", "eval",    "ablation"};
    for (const auto& [k, v] : doc.items())
        if (!tables.contains(k)) throw Error(ErrorCode::ConfigError, "unknown table [" + k + "]");

    RunConfig c;
    c.config_dir = config_dir;

    Table run(doc, "run");
    std::int64_t seed = static_cast<std::int64_t>(c.run_seed);
    run.get("seed", seed);
    c.run_seed = static_cast<std::uint64_t>(seed);
    run.get("workers", c.workers);
    run.get("out_dir", c.out_dir);
    run.finish();

    Table paths(doc, "paths");
    paths.get("profiles", c.profiles_csv);
    paths.get("trips", c.trips_csv);
    paths.get("synth_spec", c.synth_spec);
    paths.get("lenient_ingest", c.lenient_ingest);
    paths.get("source", c.source_dir);
    paths.get("tree", c.tree_path);
    paths.get("patterns", c.patterns_path);
    paths.get("generated", c.generated_dir);
    paths.get("cache", c.cache_path);
    paths.get("report", c.report_path);
    paths.finish();

    Table be(doc, "backend");
    be.get("kind", c.backend.kind);
    be.get("fixtures", c.backend.fixtures);
    be.get("strict", c.backend.strict);
    be.get("endpoint", c.backend.remote.endpoint);
    be.get("model", c.backend.remote.model);
    be.get("max_retries", c.backend.remote.max_retries);
    be.get("backoff_ms", c.backend.remote.backoff_ms);
    be.get("timeout_s", c.backend.remote.timeout_s);
    be.get("max_in_flight", c.backend.max_in_flight);
    be.finish();

    Table net(doc, "network");
    net.get("nodes", c.network.nodes);
    net.get("edges", c.network.edges);
    net.get("pois", c.network.pois);
    net.get("snap_radius_m", c.network.snap_radius_m);
    if (const json* g = net.sub("grid")) {
        Table grid(json{{"grid", *g}}, "grid");
        auto& gs = c.network.grid;
        grid.get("rows", gs.rows);
        grid.get("cols", gs.cols);
        grid.get("spacing_m", gs.spacing_m);
        grid.get("center_lat", gs.center.lat);
        grid.get("center_lon", gs.center.lon);
        std::vector<int> per;
        grid.get("pois_per_category", per);
        if (!per.empty()) {
            if (per.size() != gs.pois_per_category.size())
                throw Error(ErrorCode::ConfigError, "network.grid.pois_per_category needs 6 entries");
            std::copy(per.begin(), per.end(), gs.pois_per_category.begin());
        }
        std::int64_t gseed = static_cast<std::int64_t>(gs.seed);
        grid.get("seed", gseed);
        gs.seed = static_cast<std::uint64_t>(gseed);
        grid.finish();
    }
    net.finish();

    Table co(doc, "cohort");
    std::vector<std::string> dims;
    co.get("dimensions", dims);
    if (!dims.empty()) c.cohort.dimensions = dims_of(dims);
    co.get("min_cohort_size", c.cohort.min_cohort_size);
    co.get("max_depth", c.cohort.max_depth);
    co.get("split_threshold", c.cohort.gate.split_threshold);
    co.get("gate_max_attempts", c.cohort.gate.max_attempts);
    co.get("gate_temperature", c.cohort.gate.temperature);
    co.finish();

    Table pa(doc, "patterns");
    pa.get("holdout_fraction", c.patterns.holdout_fraction);
    pa.get("eval_min_trajectories", c.patterns.eval_min_trajectories);
    pa.get("eval_max_trajectories", c.patterns.eval_max_trajectories);
    pa.get("revision_threshold", c.patterns.revision_threshold);
    pa.get("max_revision_rounds", c.patterns.max_revision_rounds);
    pa.get("time_tolerance_min", c.patterns.time_tolerance_min);
    pa.get("distance_tolerance", c.patterns.distance_tolerance);
    pa.get("temperature", c.patterns.temperature);
    pa.finish();

    Table re(doc, "reasoner");
    re.get("max_rethinks", c.reasoner.max_rethinks);
    re.get("temperature", c.reasoner.temperature);
    re.get("max_range_m", c.reasoner.max_range_m);
    re.finish();

    Table ge(doc, "generate");
    ge.get("persons", c.generate_persons);
    std::vector<std::string> dates;
    ge.get("dates", dates);
    for (const auto& d : dates) c.generate_dates.push_back(parse_date_or_throw(d));
    ge.finish();

    Table ev(doc, "eval");
    if (const json* b = ev.sub("binning")) c.binning = binning_from_json(*b);
    std::string filter = "all";
    ev.get("day_filter", filter);
    auto f = parse_day_filter(filter);
    if (!f) throw Error(ErrorCode::ConfigError, "eval.day_filter must be all, weekday or weekend");
    c.day_filter = *f;
    std::vector<std::string> subsets;
    ev.get("subsets", subsets);
    c.subsets = subsets.empty() ? default_subsets() : parse_subsets(subsets);
    ev.finish();

    Table ab(doc, "ablation");
    ab.get("disable_self_evaluation", c.disable_self_evaluation);
    ab.get("disable_rethink", c.disable_rethink);
    std::vector<std::string> over;
    ab.get("pattern_dims_override", over);
    c.pattern_dims_override = dims_of(over);
    ab.finish();

    if (c.workers < 1) throw Error(ErrorCode::ConfigError, "run.workers must be >= 1");
    if (c.backend.kind != "replay" && c.backend.kind != "scripted" && c.backend.kind != "remote")
        throw Error(ErrorCode::ConfigError, "backend.kind must be replay, scripted or remote");
    if (!(c.patterns.holdout_fraction >= 0.0 && c.patterns.holdout_fraction < 1.0))
        throw Error(ErrorCode::ConfigError, "patterns.holdout_fraction must lie in [0, 1)");
    if (c.reasoner.max_rethinks < 0) throw Error(ErrorCode::ConfigError, "reasoner.max_rethinks must be >= 0");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    const auto dir = fs::path(path).parent_path().string();
    return run_config_from_json(read_config_document(path), dir.empty() ? "." : dir);
}

void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.seed) c.run_seed = *o.seed;
    if (o.backend) {
        if (*o.backend != "replay" && *o.backend != "scripted" && *o.backend != "remote")
            throw Error(ErrorCode::ConfigError, "--backend must be replay, scripted or remote");
        c.backend.kind = *o.backend;
    }
    if (o.workers) {
        if (*o.workers < 1) throw Error(ErrorCode::ConfigError, "--workers must be >= 1");
        c.workers = *o.workers;
    }
    if (o.out_dir) c.out_dir = *o.out_dir;
}

json effective_config(const RunConfig& c) {
    json dims = json::array();
    for (auto d : cohort_config(c).dimensions) dims.push_back(name_of(d));
    json subsets = json::array();
    for (const auto& s : c.subsets) subsets.push_back(subset_label(s));
    json dates = json::array();
    for (const auto& d : c.generate_dates) dates.push_back(d.iso());
    json override_dims = json::array();
    for (auto d : c.pattern_dims_override) override_dims.push_back(name_of(d));
    json j;
    j["run_seed"] = c.run_seed;
    j["backend"] = {{"kind", c.backend.kind}};
    if (c.backend.kind == "remote") j["backend"]["model"] = c.backend.remote.model;
    if (c.backend.kind == "scripted") {
        j["backend"]["strict"] = c.backend.strict;
        if (!c.backend.fixtures.empty()) j["backend"]["fixtures_sha256"] = file_sha256(c.input(c.backend.fixtures));
    }
    if (!c.synth_spec.empty() && fs::exists(c.input(c.synth_spec)))
        j["synth_spec_sha256"] = file_sha256(c.input(c.synth_spec));
    if (c.network.nodes.empty()) {
        const auto& g = c.network.grid;
        j["network"] = {{"grid", {{"rows", g.rows},
                                  {"cols", g.cols},
                                  {"spacing_m", g.spacing_m},
                                  {"center", {g.center.lat, g.center.lon}},
                                  {"pois_per_category", g.pois_per_category},
                                  {"seed", g.seed}}}};
    }
    j["network"]["snap_radius_m"] = c.network.snap_radius_m;
    j["cohort"] = {{"dimensions", dims},
                   {"min_cohort_size", c.cohort.min_cohort_size},
                   {"max_depth", c.cohort.max_depth},
                   {"split_threshold", c.cohort.gate.split_threshold},
                   {"gate_max_attempts", c.cohort.gate.max_attempts},
                   {"gate_temperature", c.cohort.gate.temperature}};
    const auto& p = c.patterns;
    j["patterns"] = {{"holdout_fraction", p.holdout_fraction},
                     {"eval_min_trajectories", p.eval_min_trajectories},
                     {"eval_max_trajectories", p.eval_max_trajectories},
                     {"revision_threshold", p.revision_threshold},
                     {"max_revision_rounds", p.max_revision_rounds},
                     {"time_tolerance_min", p.time_tolerance_min},
                     {"distance_tolerance", p.distance_tolerance},
                     {"temperature", p.temperature}};
    j["reasoner"] = {{"max_rethinks", c.reasoner.max_rethinks},
                     {"temperature", c.reasoner.temperature},
                     {"max_range_m", c.reasoner.max_range_m}};
    j["generate"] = {{"persons", c.generate_persons}, {"dates", dates}};
    j["eval"] = {{"binning", binning_to_json(c.binning)},
                 {"day_filter", day_filter_name(c.day_filter)},
                 {"subsets", subsets}};
    j["ablation"] = {{"disable_self_evaluation", c.disable_self_evaluation},
                     {"disable_rethink", c.disable_rethink},
                     {"pattern_dims_override", override_dims}};
    return j;
}

std::string config_hash(const RunConfig& c) { return sha256_hex(effective_config(c).dump()); }

json run_meta(const RunConfig& c) {
    return {{"tool", "mobforge"}, {"version", kVersion}, {"config_hash", config_hash(c)}, {"run_seed", c.run_seed}};
}

std::unique_ptr<Backend> make_backend(const RunConfig& c) {
    if (c.backend.kind == "replay") return std::make_unique<ReplayBackend>(c.run_seed);
    if (c.backend.kind == "scripted") {
        std::vector<ScriptedBackend::Fixture> fx;
        if (!c.backend.fixtures.empty()) fx = ScriptedBackend::read_fixtures(c.input(c.backend.fixtures));
        return std::make_unique<ScriptedBackend>(std::move(fx), c.backend.strict);
    }
    if (c.backend.kind == "remote") return std::make_unique<RemoteBackend>(c.backend.remote);
    throw Error(ErrorCode::ConfigError, "unknown backend " + c.backend.kind);
}

std::shared_ptr<const LoadedNetwork> load_run_network(const RunConfig& c) {
    if (c.network.nodes.empty()) return std::make_shared<const LoadedNetwork>(make_grid_network(c.network.grid));
    if (c.network.edges.empty() || c.network.pois.empty())
        throw Error(ErrorCode::ConfigError, "network needs nodes, edges and pois paths");
    return std::make_shared<const LoadedNetwork>(load_network(c.input(c.network.nodes), c.input(c.network.edges),
                                                              c.input(c.network.pois), c.network.snap_radius_m));
}

json run_ingest(const RunConfig& c) {
    if (c.profiles_csv.empty() || c.trips_csv.empty())
        throw Error(ErrorCode::ConfigError, "ingest needs paths.profiles and paths.trips");
    LoadOptions opt;
    opt.lenient = c.lenient_ingest;
    auto res = load_survey(c.input(c.profiles_csv), c.input(c.trips_csv), opt);
    const auto meta = run_meta(c);
    save_dataset(res.dataset, c.output(c.source_dir), &meta);
    json issues = json::array();
    for (const auto& i : res.report.issues)
        issues.push_back({{"source", i.source}, {"line", i.line}, {"code", error_code_name(i.code)}, {"reason", i.reason}});
    return {{"subcommand", "ingest"},
            {"profiles", res.dataset.profiles.size()},
            {"diaries", res.dataset.diaries.size()},
            {"skipped_rows", res.report.skipped},
            {"issues", issues},
            {"dataset", c.output(c.source_dir)}};
}

json run_synth(const RunConfig& c) {
    if (c.synth_spec.empty()) throw Error(ErrorCode::ConfigError, "synth needs paths.synth_spec");
    auto spec = read_synth_spec(c.input(c.synth_spec));
    spec.rng_seed = mix_seed(c.run_seed, spec.rng_seed);
    const auto ds = synth_dataset(spec);
    const auto meta = run_meta(c);
    save_dataset(ds, c.output(c.source_dir), &meta);
    return {{"subcommand", "synth"},
            {"profiles", ds.profiles.size()},
            {"diaries", ds.diaries.size()},
            {"empty_days", ds.empty_days.size()},
            {"dataset", c.output(c.source_dir)}};
}

json run_cohort(const RunConfig& c) {
    const auto ds = load_dataset(c.output(c.source_dir));
    auto gw = make_gateway(c);
    const auto tree = refine_hierarchy(ds, gw, cohort_config(c));
    const auto meta = run_meta(c);
    write_tree_ndjson(c.output(c.tree_path), tree, &meta);
    return {{"subcommand", "cohort"},
            {"nodes", tree.nodes.size()},
            {"leaves", tree.leaves().size()},
            {"backend_calls", gw.dispatch_count()},
            {"tree", c.output(c.tree_path)}};
}

json run_patterns(const RunConfig& c) {
    const auto ds = load_dataset(c.output(c.source_dir));
    const auto tree = read_tree_ndjson(c.output(c.tree_path));
    auto gw = make_gateway(c);
    const auto patterns = build_patterns(ds, tree, gw, pattern_config(c), c.binning.sd);
    const auto meta = run_meta(c);
    write_patterns_ndjson(c.output(c.patterns_path), patterns, &meta);
    json scores = json::array();
    for (const auto& p : patterns)
        if (p.eval_scores)
            scores.push_back({{"cohort", p.label},
                              {"group_inference_accuracy", p.eval_scores->group_inference_accuracy},
                              {"masked_completion_score", p.eval_scores->masked_completion_score},
                              {"revision", p.revision}});
    return {{"subcommand", "patterns"},
            {"patterns", patterns.size()},
            {"self_evaluation", scores},
            {"backend_calls", gw.dispatch_count()},
            {"file", c.output(c.patterns_path)}};
}

json run_generate(const RunConfig& c) {
    const auto source = load_dataset(c.output(c.source_dir));
    const auto tree = read_tree_ndjson(c.output(c.tree_path));
    const auto patterns = read_patterns_ndjson(c.output(c.patterns_path));
    if (patterns.size() != tree.nodes.size())
        throw Error(ErrorCode::ConfigError, "patterns file does not match the cohort tree");
    const std::size_t persons = c.generate_persons ? c.generate_persons : source.profiles.size();
    const auto dates = c.generate_dates.empty() ? source_dates(source) : c.generate_dates;
    if (dates.empty()) throw Error(ErrorCode::ConfigError, "no dates to generate");
    const auto population = sample_population(source, tree, persons, mix_seed(c.run_seed, "population"));
    SpatialAnchor anchor(load_run_network(c), c.network.snap_radius_m);
    auto gw = make_gateway(c);
    GenerationSummary summary;
    const auto ds = generate_dataset(population, dates, tree, patterns, gw, anchor, reasoner_config(c), c.workers,
                                     &summary);
    const auto meta = run_meta(c);
    save_dataset(ds, c.output(c.generated_dir), &meta);
    std::string warnings;
    for (const auto& w : summary.warnings) warnings += w + "\n";
    write_text(c.output(c.generated_dir) + "/warnings.txt", warnings);
    return {{"subcommand", "generate"},
            {"person_days", summary.person_days},
            {"diaries", summary.diaries},
            {"no_trip_days", summary.no_trip_days},
            {"backend_calls", summary.backend_calls},
            {"fallbacks", summary.fallbacks},
            {"warnings", summary.warnings.size()},
            {"dataset", c.output(c.generated_dir)}};
}

json run_evaluate(const RunConfig& c) {
    const auto real = load_dataset(c.output(c.source_dir));
    const auto gen = load_dataset(c.output(c.generated_dir));
    const auto report = multiscale_evaluate(real, gen, c.subsets, c.binning, c.day_filter, c.workers);
    const auto meta = run_meta(c);
    write_text(c.output(c.report_path), report_to_json(report, &meta).dump(2) + "\n");
    write_plot_data(real, gen, report.binning, c.day_filter, c.out_dir, c.workers);
    json metrics = json::object();
    for (std::size_t i = 0; i < 4; ++i)
        metrics[std::string(metric_name(kAllMetrics[i]))] =
            report.values.jsd[i] ? json(*report.values.jsd[i]) : json(nullptr);
    return {{"subcommand", "evaluate"}, {"metrics", metrics}, {"report", c.output(c.report_path)}};
}

json run_report(const RunConfig& c) {
    std::ifstream in(c.output(c.report_path), std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + c.output(c.report_path) + " (run evaluate first)");
    json r;
    try {
        r = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("bad report: ") + e.what());
    }
    std::ostringstream out;
    auto num = [](const json& v) {
        if (v.is_null()) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
        return std::string(buf);
    };
    const auto& s = r.at("samples");
    out << "mobforge report (seed " << r["_meta"].value("run_seed", std::uint64_t{0}) << ", config "
        << r["_meta"].value("config_hash", std::string()).substr(0, 12) << ")\n";
    out << "real: " << s.at("real_person_days") << " person-days, " << s.at("real_diaries") << " with trips\n";
    out << "generated: " << s.at("generated_person_days") << " person-days, " << s.at("generated_diaries")
        << " with trips\n\n";
    out << "JSD         SD       SI       ST-LOC   DailyLoc\n";
    auto row = [&](const std::string& label, const json& m) {
        char head[16];
        std::snprintf(head, sizeof head, "%-10s", label.c_str());
        out << head << "  " << num(m.at("SD")) << "   " << num(m.at("SI")) << "   " << num(m.at("ST-LOC")) << "   "
            << num(m.at("DailyLoc")) << "\n";
    };
    row("overall", r.at("metrics"));
    for (const auto& sub : r.at("multiscale")) {
        row(sub.at("label").get<std::string>(), sub.at("metrics"));
        const auto& u = sub.at("uncovered_slices");
        if (!u.at("real_only").empty() || !u.at("generated_only").empty())
            out << "            uncovered: " << u.at("real_only").size() << " real-only, "
                << u.at("generated_only").size() << " generated-only\n";
    }
    if (fs::exists(c.output(c.patterns_path))) {
        out << "\nself-evaluation (leaf cohorts)\n";
        for (const auto& p : read_patterns_ndjson(c.output(c.patterns_path))) {
            if (!p.eval_scores) continue;
            out << "  " << p.label << ": group accuracy " << num(p.eval_scores->group_inference_accuracy)
                << ", masked completion " << num(p.eval_scores->masked_completion_score) << ", revision "
                << p.revision << "\n";
        }
    }
    const auto text = out.str();
    const auto path = c.output("report.txt");
    write_text(path, text);
    return {{"subcommand", "report"}, {"text", text}, {"file", path}};
}

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"ingest",   "synth",    "cohort", "patterns",
                                                "generate", "evaluate", "report"};
    return names;
}

json run_subcommand(const std::string& name, const RunConfig& c) {
    if (name == "ingest") return run_ingest(c);
    if (name == "synth") return run_synth(c);
    if (name == "cohort") return run_cohort(c);
    if (name == "patterns") return run_patterns(c);
    if (name == "generate") return run_generate(c);
    if (name == "evaluate") return run_evaluate(c);
    if (name == "report") return run_report(c);
    throw Error(ErrorCode::ConfigError, "unknown subcommand " + name);
}

json error_record(const std::string& subcommand, const std::exception& e) {
    json rec{{"subcommand", subcommand}, {"message", e.what()}};
    if (const auto* me = dynamic_cast<const Error*>(&e)) {
        rec["code"] = error_code_name(me->code());
        rec["message"] = me->detail();
        if (const auto* re = dynamic_cast<const RowError*>(&e)) rec["line"] = re->line();
    } else {
        rec["code"] = "InternalError";
    }
    return {{"error", rec}};
}

}  // namespace mobforge
