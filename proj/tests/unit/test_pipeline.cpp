#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "mobforge/error.hpp"
#include "mobforge/pipeline.hpp"
#include "mobforge/toml.hpp"

using namespace mobforge;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode config_code(const std::string& toml) {
    try {
        run_config_from_json(parse_toml(toml), ".");
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::IoError;
}

// Small end-to-end config: the demo synth spec, 60 generated persons.
std::string small_config(const std::string& out_dir, const std::string& extra = {}) {
    return "[run]\nseed = 7\nworkers = 2\nout_dir = \"" + out_dir + "\"\n\n[paths]\nsynth_spec = \"" +
           std::string(MOBFORGE_SOURCE_DIR) +
           "/configs/synth_demo.toml\"\n\n[network.grid]\nrows = 31\ncols = 31\npois_per_category = [15, 15, 15, 15, "
           "15, 15]\n\n[cohort]\nmax_depth = 2\n\n[generate]\npersons = 60\ndates = [\"2016-11-15\"]\n\n[eval]\n"
           "subsets = [\"A\", \"A+O\"]\n" +
           extra;
}

struct Run {
    int status;
    std::string out, err;
};

Run run_cli(const std::string& args, const testing::TempDir& dir) {
    const auto out = dir.str("stdout.txt"), err = dir.str("stderr.txt");
    const auto cmd = std::string(MOBFORGE_CLI) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

void run_all(const RunConfig& c) {
    for (auto name : {"synth", "cohort", "patterns", "generate", "evaluate", "report"}) run_subcommand(name, c);
}

}  // namespace

TEST_CASE("config parsing and errors") {
    const auto c = load_run_config(std::string(MOBFORGE_SOURCE_DIR) + "/configs/demo.toml");
    CHECK(c.run_seed == 20161115);
    CHECK(c.workers == 4);
    CHECK(c.backend.kind == "replay");
    CHECK(c.generate_persons == 500);
    CHECK(c.subsets.size() == 4);
    CHECK(c.input(c.synth_spec) == std::string(MOBFORGE_SOURCE_DIR) + "/configs/synth_demo.toml");
    CHECK(c.output("report.json") == "out/demo/report.json");

    CHECK(config_code("[bogus]\nx = 1\n") == ErrorCode::ConfigError);
    CHECK(config_code("[run]\nsede = 1\n") == ErrorCode::ConfigError);
    CHECK(config_code("[run]\nseed = \"one\"\n") == ErrorCode::ConfigError);
    CHECK(config_code("[run]\nworkers = 0\n") == ErrorCode::ConfigError);
    CHECK(config_code("[backend]\nkind = \"oracle\"\n") == ErrorCode::ConfigError);
    CHECK(config_code("[eval]\nday_filter = \"holiday\"\n") == ErrorCode::ConfigError);
    CHECK(config_code("[generate]\ndates = [\"2016-13-01\"]\n") == ErrorCode::ConfigError);
    CHECK(config_code("[network.grid]\npois_per_category = [1, 2]\n") == ErrorCode::ConfigError);
    CHECK(config_code("[network.grid]\nrowz = 3\n") == ErrorCode::ConfigError);
    CHECK(config_code("[cohort]\ndimensions = [\"shoe_size\"]\n") == ErrorCode::UnknownDimension);
}

TEST_CASE("flags beat the config, which beats defaults") {
    auto c = run_config_from_json(parse_toml("[run]\nseed = 5\nworkers = 3\n"), ".");
    CHECK(c.run_seed == 5);
    CHECK(c.out_dir == "out");  // default
    Overrides o;
    o.seed = 9;
    o.out_dir = "elsewhere";
    apply_overrides(c, o);
    CHECK(c.run_seed == 9);
    CHECK(c.workers == 3);
    CHECK(c.out_dir == "elsewhere");
    o = {};
    o.backend = "telepathy";
    CHECK_THROWS_AS(apply_overrides(c, o), Error);
}

TEST_CASE("config hash ignores paths and worker counts") {
    const auto base = run_config_from_json(parse_toml("[run]\nseed = 5\n"), ".");
    auto moved = base;
    moved.out_dir = "x";
    moved.workers = 16;
    moved.cache_path = "other.ndjson";
    CHECK(config_hash(moved) == config_hash(base));
    auto reseeded = base;
    reseeded.run_seed = 6;
    CHECK(config_hash(reseeded) != config_hash(base));
    auto ablated = base;
    ablated.disable_rethink = true;
    CHECK(config_hash(ablated) != config_hash(base));
    CHECK(run_meta(base)["config_hash"] == config_hash(base));
    CHECK(run_meta(base)["run_seed"] == 5);
}

TEST_CASE("pipeline end to end is deterministic and echoes its config") {
    testing::TempDir dir("pipeline");
    const auto write_config = [&](const std::string& name, const std::string& out, const std::string& extra = {}) {
        std::ofstream(dir.str(name)) << small_config(dir.str(out), extra);
        return load_run_config(dir.str(name));
    };
    const auto a = write_config("a.toml", "a");
    const auto b = write_config("b.toml", "b");
    run_all(a);
    run_all(b);
    for (auto leaf : {"generated/diaries.ndjson", "generated/profiles.csv", "report.json", "patterns.ndjson",
                      "cohort_tree.ndjson", "plot_stloc.csv"}) {
        INFO(leaf);
        const auto x = slurp(a.output(leaf));
        CHECK_FALSE(x.empty());
        CHECK(x == slurp(b.output(leaf)));
    }
    const auto report = json::parse(slurp(a.output("report.json")));
    CHECK(report["_meta"]["config_hash"] == config_hash(a));
    CHECK(report["_meta"]["run_seed"] == 7);
    std::string first_line;
    std::getline(std::istringstream(slurp(a.output("generated/diaries.ndjson"))) >> std::ws, first_line);
    CHECK(json::parse(first_line)["_meta"]["config_hash"] == config_hash(a));
    CHECK(slurp(a.output("report.txt")).find("ST-LOC") != std::string::npos);

    // Re-running generate with a warm cache, or without the cache, changes nothing.
    const auto before = slurp(a.output("generated/diaries.ndjson"));
    run_subcommand("generate", a);
    CHECK(slurp(a.output("generated/diaries.ndjson")) == before);
    std::filesystem::remove(a.output(a.cache_path));
    run_subcommand("generate", a);
    CHECK(slurp(a.output("generated/diaries.ndjson")) == before);

    // A different seed gives different diaries.
    auto c = b;
    c.run_seed = 8;
    c.out_dir = dir.str("c");
    run_all(c);
    CHECK(slurp(c.output("generated/diaries.ndjson")) != before);

    // Ablations run through the same subcommands.
    const auto ab = write_config("ab.toml", "ab", "\n[ablation]\ndisable_self_evaluation = true\ndisable_rethink = true\n");
    run_all(ab);
    for (const auto& p : read_patterns_ndjson(ab.output("patterns.ndjson"))) CHECK_FALSE(p.eval_scores.has_value());
    bool scored = false;
    for (const auto& p : read_patterns_ndjson(a.output("patterns.ndjson"))) scored = scored || p.eval_scores.has_value();
    CHECK(scored);
}

TEST_CASE("error records") {
    const RowError row(ErrorCode::MalformedRow, 17, "bad age");
    const auto r = error_record("ingest", row)["error"];
    CHECK(r["subcommand"] == "ingest");
    CHECK(r["code"] == "MalformedRow");
    CHECK(r["line"] == 17);
    const auto plain = error_record("cohort", std::runtime_error("boom"))["error"];
    CHECK(plain["code"] == "InternalError");
    CHECK_FALSE(plain.contains("line"));
    CHECK_THROWS_AS(run_subcommand("dance", RunConfig{}), Error);
    CHECK(subcommand_names().size() == 7);
}

TEST_CASE("command line") {
    testing::TempDir dir("cli");
    std::ofstream(dir.str("good.toml")) << small_config(dir.str("out"));
    std::ofstream(dir.str("bad.toml")) << "[run]\nseeds = 3\n";
    std::ofstream(dir.str("noinput.toml")) << "[run]\nout_dir = \"" + dir.str("o2") + "\"\n";

    const auto ok = run_cli("synth --config " + dir.str("good.toml") + " --seed 3", dir);
    CHECK(ok.status == 0);
    const auto summary = json::parse(ok.out);
    CHECK(summary["subcommand"] == "synth");
    CHECK(summary["profiles"] == 500);
    CHECK(json::parse(slurp(dir.str("out/source/diaries.ndjson")).substr(0, slurp(dir.str("out/source/diaries.ndjson")).find('\n')))
              ["_meta"]["run_seed"] == 3);

    const auto moved = run_cli("synth --quiet --config " + dir.str("good.toml") + " --out " + dir.str("moved"), dir);
    CHECK(moved.status == 0);
    CHECK(moved.out.empty());
    CHECK(std::filesystem::exists(dir.path / "moved" / "source" / "profiles.csv"));

    const auto bad = run_cli("cohort --config " + dir.str("bad.toml"), dir);
    CHECK(bad.status == 2);
    const auto rec = json::parse(bad.err)["error"];
    CHECK(rec["code"] == "ConfigError");
    CHECK(rec["subcommand"] == "cohort");
    CHECK(rec["message"].get<std::string>().find("run.seeds") != std::string::npos);

    const auto missing = run_cli("ingest --config " + dir.str("noinput.toml"), dir);
    CHECK(missing.status == 2);
    const auto io = run_cli("cohort --config " + dir.str("noinput.toml"), dir);
    CHECK(io.status == 1);
    CHECK(json::parse(io.err)["error"]["code"] == "IoError");

    CHECK(run_cli("synth --config " + dir.str("absent.toml"), dir).status != 0);
    CHECK(run_cli("fly --config " + dir.str("good.toml"), dir).status != 0);
}
