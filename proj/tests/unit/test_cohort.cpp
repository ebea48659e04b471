#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "mobforge/cohort.hpp"
#include "mobforge/error.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/synth.hpp"

using namespace mobforge;

namespace {

const Dataset& demo() {
    static const Dataset ds = synth_dataset(read_synth_spec(std::string(MOBFORGE_SOURCE_DIR) + "/configs/synth_demo.toml"));
    return ds;
}

Gateway scripted_rating(const std::string& answer) {
    return Gateway(std::make_unique<ScriptedBackend>(
        std::vector<ScriptedBackend::Fixture>{{"initial_group_division", "*", answer}}, true));
}

}  // namespace

TEST_CASE("dimension names") {
    CHECK(parse_dimension("occupation") == Dimension::Occupation);
    CHECK(parse_dimension("age_band") == Dimension::AgeBand);
    CHECK_FALSE(parse_dimension("shoe_size").has_value());
    try {
        require_dimension("shoe_size");
        FAIL("expected UnknownDimension");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownDimension);
    }
}

TEST_CASE("partition is exact and ordered by value index") {
    Dataset ds;
    ds.profiles["a"] = testing::person("a", Occupation::Students, AgeBand::From18To25);
    ds.profiles["b"] = testing::person("b", Occupation::Students, AgeBand::From26To30);
    ds.profiles["c"] = testing::person("c", Occupation::ProfessionalTechnical, AgeBand::From26To30);
    ds.profiles["d"] = testing::person("d", Occupation::Students, AgeBand::From18To25);
    const std::vector<Dimension> dims{Dimension::Occupation, Dimension::AgeBand};
    const auto cohorts = partition(ds, dims);
    REQUIRE(cohorts.size() == 3);
    std::size_t total = 0;
    for (std::size_t i = 0; i < cohorts.size(); ++i) {
        total += cohorts[i].members.size();
        CHECK(std::is_sorted(cohorts[i].members.begin(), cohorts[i].members.end()));
        for (const auto& m : cohorts[i].members) CHECK(cohorts[i].key.matches(ds.profiles.at(m)));
        if (i) CHECK(cohorts[i - 1].key < cohorts[i].key);
    }
    CHECK(total == 4);
    // Students aged 18-25: a and d.
    const auto it = std::find_if(cohorts.begin(), cohorts.end(), [](const Cohort& c) { return c.members.size() == 2; });
    REQUIRE(it != cohorts.end());
    CHECK(it->members == std::vector<std::string>{"a", "d"});
    CHECK(it->key.label().find("occupation=Students") != std::string::npos);
    CHECK(CohortKey{}.label() == "all");
    CHECK(key_from_json(key_to_json(it->key)) == it->key);

    CHECK(partition(ds, std::vector<std::string>{"occupation"}).size() == 2);
    CHECK_THROWS_AS(partition(ds, std::vector<std::string>{"nope"}), Error);
}

TEST_CASE("rating parser") {
    CHECK(parse_rating("RATING: 8") == 8);
    CHECK(parse_rating("Across 3 groups the split looks strong.\nRating: 9") == 9);
    CHECK(parse_rating("rating is 10/10") == 10);
    CHECK(parse_rating("I would give it a 4.") == 4);
    CHECK(parse_rating("divergence 0.25, rating 6") == 6);
    CHECK_FALSE(parse_rating("no number here").has_value());
    CHECK_FALSE(parse_rating("Rating: 0").has_value());
    CHECK_FALSE(parse_rating("about 250 of them").has_value());
}

TEST_CASE("replay gate score follows the divergence") {
    CHECK(replay_gate_score(0.0) == 1);
    CHECK(replay_gate_score(0.15) == 6);  // 1 + 9 * 0.5 rounds up
    CHECK(replay_gate_score(0.3) == 10);
    CHECK(replay_gate_score(0.9) == 10);

    const auto& ds = demo();
    const auto occ = partition(ds, std::vector<std::string>{"occupation"});
    std::vector<CohortStats> stats;
    for (const auto& c : occ) stats.push_back(summarize(ds, c.members));
    // Oracle: max over pairs and both histograms, straight from jsd().
    double expected = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i)
        for (std::size_t j = i + 1; j < stats.size(); ++j) {
            if (!stats[i].all.trips() || !stats[j].all.trips()) continue;
            expected = std::max(expected, jsd(std::span<const std::uint64_t>(stats[i].all.start_time_hist),
                                              std::span<const std::uint64_t>(stats[j].all.start_time_hist)));
            expected = std::max(expected, jsd(std::span<const std::uint64_t>(stats[i].all.distance_hist),
                                              std::span<const std::uint64_t>(stats[j].all.distance_hist)));
        }
    CHECK(gate_max_jsd(stats) == doctest::Approx(expected));
    CHECK(expected > 0.3);  // archetypes start hours apart
    CHECK(gate_max_jsd({stats[0]}) == 0.0);
    CHECK(gate_max_jsd({stats[0], stats[0]}) == doctest::Approx(0.0));
}

TEST_CASE("segmentation gate with scripted ratings") {
    const auto& ds = demo();
    const auto occ = partition(ds, std::vector<std::string>{"occupation"});
    std::vector<CohortStats> stats;
    for (const auto& c : occ) stats.push_back(summarize(ds, c.members));
    const auto parent = summarize(ds, occ[0].members);

    auto yes = scripted_rating("Strong differences. RATING: 8");
    const auto r = segmentation_gate(parent, {}, stats, Dimension::Occupation, yes);
    CHECK(r.score == 8);
    CHECK(r.split);
    CHECK(r.transcript_id.size() == 64);

    auto no = scripted_rating("RATING: 6");
    CHECK_FALSE(segmentation_gate(parent, {}, stats, Dimension::Occupation, no).split);

    auto junk = scripted_rating("I cannot say.");
    try {
        segmentation_gate(parent, {}, stats, Dimension::Occupation, junk);
        FAIL("expected UnparseableScore");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnparseableScore);
    }
    CHECK(junk.dispatch_count() == 2);
}

TEST_CASE("hierarchy refinement") {
    const auto& ds = demo();
    CohortConfig cfg;
    cfg.min_cohort_size = 30;
    cfg.max_depth = 3;

    SUBCASE("rating 1 everywhere keeps the root") {
        auto gw = scripted_rating("RATING: 1");
        const auto tree = refine_hierarchy(ds, gw, cfg);
        CHECK(tree.nodes.size() == 1);
        CHECK(tree.root().members.size() == ds.profiles.size());
        CHECK_FALSE(tree.root().gates.empty());
    }

    SUBCASE("replay backend splits the archetypes apart") {
        Gateway gw(std::make_unique<ReplayBackend>(1));
        cfg.workers = 4;
        const auto tree = refine_hierarchy(ds, gw, cfg);
        REQUIRE(tree.nodes.size() > 1);
        CHECK(tree.root().split_dimension.has_value());
        for (const auto& n : tree.nodes) {
            CHECK(n.depth <= cfg.max_depth);
            if (n.parent >= 0) CHECK(n.members.size() >= cfg.min_cohort_size);
            for (const auto& m : n.members) CHECK(n.key.matches(ds.profiles.at(m)));
            if (n.leaf()) continue;
            // Children partition the parent.
            std::vector<std::string> joined;
            for (int c : n.children) {
                const auto& ch = tree.nodes[static_cast<std::size_t>(c)];
                CHECK(ch.parent == n.id);
                CHECK(ch.key.parts.size() == n.key.parts.size() + 1);
                joined.insert(joined.end(), ch.members.begin(), ch.members.end());
            }
            std::sort(joined.begin(), joined.end());
            CHECK(joined == n.members);
            CHECK(std::none_of(n.gates.begin(), n.gates.end(), [&](const GateRecord& g) {
                return g.result && g.result->split && g.dimension != *n.split_dimension;
            }));
        }
        // The size guard never asks the backend.
        for (const auto& n : tree.nodes)
            for (const auto& g : n.gates)
                if (!g.size_ok) CHECK_FALSE(g.result.has_value());

        for (const auto& [id, p] : ds.profiles) {
            const int leaf = tree.locate(p);
            CHECK(tree.nodes[static_cast<std::size_t>(leaf)].leaf());
            const auto& mem = tree.nodes[static_cast<std::size_t>(leaf)].members;
            CHECK(std::binary_search(mem.begin(), mem.end(), id));
        }

        // Same seed, same tree; worker count does not matter.
        Gateway gw2(std::make_unique<ReplayBackend>(1));
        cfg.workers = 1;
        const auto again = refine_hierarchy(ds, gw2, cfg);
        REQUIRE(again.nodes.size() == tree.nodes.size());
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) CHECK(again.nodes[i].key == tree.nodes[i].key);

        std::stringstream buf;
        write_tree_ndjson(buf, tree);
        const auto back = read_tree_ndjson(buf);
        REQUIRE(back.nodes.size() == tree.nodes.size());
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            CHECK(back.nodes[i].key == tree.nodes[i].key);
            CHECK(back.nodes[i].members == tree.nodes[i].members);
            CHECK(back.nodes[i].children == tree.nodes[i].children);
            CHECK(back.nodes[i].stats == tree.nodes[i].stats);
            CHECK(back.nodes[i].split_dimension == tree.nodes[i].split_dimension);
            CHECK(back.nodes[i].gates.size() == tree.nodes[i].gates.size());
        }
    }

    SUBCASE("a huge minimum size rules out every split") {
        cfg.min_cohort_size = 10000;
        auto gw = scripted_rating("RATING: 10");
        const auto tree = refine_hierarchy(ds, gw, cfg);
        CHECK(tree.nodes.size() == 1);
        CHECK(gw.dispatch_count() == 0);
    }
}
