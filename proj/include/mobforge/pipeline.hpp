#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobforge/binning.hpp"
#include "mobforge/cohort.hpp"
#include "mobforge/eval.hpp"
#include "mobforge/gateway.hpp"
#include "mobforge/network.hpp"
#include "mobforge/patterns.hpp"
#include "mobforge/reasoner.hpp"

namespace mobforge {

struct BackendConfig {
    std::string kind = "replay";  // replay | scripted | remote
    std::string fixtures;         // scripted
    bool strict = true;
    RemoteOptions remote;
    int max_in_flight = 8;
};

struct NetworkConfig {
    std::string nodes, edges, pois;  // CSV sources; empty: build the grid
    GridSpec grid;
    double snap_radius_m = 500.0;
};

struct RunConfig {
    std::uint64_t run_seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    std::string config_dir = ".";  // base for input paths

    // Inputs (relative to config_dir).
    std::string profiles_csv;
    std::string trips_csv;
    std::string synth_spec;
    bool lenient_ingest = false;
    // Artifacts (relative to out_dir).
    std::string source_dir = "source";
    std::string tree_path = "cohort_tree.ndjson";
    std::string patterns_path = "patterns.ndjson";
    std::string generated_dir = "generated";
    std::string cache_path = "llm_cache.ndjson";
    std::string report_path = "report.json";

    BackendConfig backend;
    NetworkConfig network;
    CohortConfig cohort;
    PatternConfig patterns;
    ReasonerConfig reasoner;
    std::size_t generate_persons = 0;  // 0: as many as the source has
    std::vector<Date> generate_dates;  // empty: the source's dates
    Binning binning;
    DayFilter day_filter = DayFilter::All;
    std::vector<std::vector<Dimension>> subsets;

    bool disable_self_evaluation = false;
    bool disable_rethink = false;
    std::vector<Dimension> pattern_dims_override;

    std::string input(const std::string& p) const;
    std::string output(const std::string& p) const;
};

// Throws Error(ConfigError) on unknown keys or bad values.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& config_dir = ".");
RunConfig load_run_config(const std::string& path);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
};
void apply_overrides(RunConfig& config, const Overrides& o);

// Resolved settings that determine outputs (no paths, worker counts or keys).
nlohmann::json effective_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);
nlohmann::json run_meta(const RunConfig& config);

std::unique_ptr<Backend> make_backend(const RunConfig& config);
std::shared_ptr<const LoadedNetwork> load_run_network(const RunConfig& config);

// Each returns a JSON summary of what it did and wrote.
nlohmann::json run_ingest(const RunConfig& config);
nlohmann::json run_synth(const RunConfig& config);
nlohmann::json run_cohort(const RunConfig& config);
nlohmann::json run_patterns(const RunConfig& config);
nlohmann::json run_generate(const RunConfig& config);
nlohmann::json run_evaluate(const RunConfig& config);
nlohmann::json run_report(const RunConfig& config);

const std::vector<std::string>& subcommand_names();
// Throws Error(ConfigError) on an unknown subcommand.
nlohmann::json run_subcommand(const std::string& name, const RunConfig& config);

// Machine-readable error record for a failed run.
nlohmann::json error_record(const std::string& subcommand, const std::exception& e);

}  // namespace mobforge
