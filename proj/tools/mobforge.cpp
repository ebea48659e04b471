#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mobforge/error.hpp"
#include "mobforge/pipeline.hpp"

using namespace mobforge;

int main(int argc, char** argv) {
    CLI::App app{"mobforge: survey-driven travel diary generation"};
    app.require_subcommand(1, 1);

    std::string config_path;
    Overrides over;
    std::uint64_t seed = 0;
    std::string backend, out;
    int workers = 0;
    bool quiet = false;

    const std::map<std::string, std::string> about{
        {"ingest", "load and validate survey CSVs, write the normalized dataset"},
        {"synth", "generate a synthetic source dataset"},
        {"cohort", "build the cohort tree"},
        {"patterns", "extract and self-evaluate cohort patterns"},
        {"generate", "reason out diaries for a sampled population"},
        {"evaluate", "compare generated against source, write report and plot CSVs"},
        {"report", "print a summary of report.json"},
    };
    for (const auto& name : subcommand_names()) {
        auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : "");
        sub->add_option("--config", config_path, "run config (TOML or JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "run seed");
        sub->add_option("--backend", backend, "replay | scripted | remote");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
        sub->add_flag("--quiet", quiet, "print nothing on success");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) over.seed = seed;
    if (sub->count("--backend")) over.backend = backend;
    if (sub->count("--workers")) over.workers = workers;
    if (sub->count("--out")) over.out_dir = out;

    try {
        auto config = load_run_config(config_path);
        apply_overrides(config, over);
        auto summary = run_subcommand(name, config);
        if (!quiet) {
            if (name == "report") std::cout << summary["text"].get<std::string>();
            else std::cout << summary.dump() << "\n";
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << error_record(name, e).dump() << "\n";
        return e.code() == ErrorCode::ConfigError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << error_record(name, e).dump() << "\n";
        return 1;
    }
}
