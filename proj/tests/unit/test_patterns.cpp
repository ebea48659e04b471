#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "mobforge/error.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/patterns.hpp"
#include "mobforge/synth.hpp"

using namespace mobforge;
using testing::at;
using testing::point;

namespace {

const Dataset& demo() {
    static const Dataset ds = synth_dataset(read_synth_spec(std::string(MOBFORGE_SOURCE_DIR) + "/configs/synth_demo.toml"));
    return ds;
}

struct Built {
    CohortTree tree;
    std::vector<MobilityPattern> patterns;
    std::uint64_t dispatches = 0;
};

Built build(bool raw) {
    Gateway gw(std::make_unique<ReplayBackend>(3));
    CohortConfig cc;
    cc.max_depth = 3;
    Built b;
    b.tree = refine_hierarchy(demo(), gw, cc);
    const auto before = gw.dispatch_count();
    PatternConfig pc;
    pc.seed = 3;
    pc.workers = 4;
    pc.raw_digest_only = raw;
    b.patterns = build_patterns(demo(), b.tree, gw, pc);
    b.dispatches = gw.dispatch_count() - before;
    return b;
}

const Built& built() {
    static const Built b = build(false);
    return b;
}

// Independent nearest-cohort: sum of the two JSDs, smallest wins, first on ties.
std::size_t brute_nearest(const TravelDiary& d, const std::vector<MobilityPattern>& pats) {
    Counts hours(kHours), dist(pats.front().stats.distance_binning.size());
    for (const auto& p : d.points) {
        ++hours[static_cast<std::size_t>(std::clamp(p.depart_time(), 0, 1439) / 60)];
        ++dist[pats.front().stats.distance_binning.index(p.distance_m)];
    }
    std::size_t best = static_cast<std::size_t>(-1);
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pats.size(); ++i) {
        const auto& s = pats[i].stats.all;
        if (s.trips() == 0) continue;
        const double v = jsd(std::span<const std::uint64_t>(hours), std::span<const std::uint64_t>(s.start_time_hist)) +
                         jsd(std::span<const std::uint64_t>(dist), std::span<const std::uint64_t>(s.distance_hist));
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

Gateway answers(const std::string& text) {
    return Gateway(std::make_unique<ScriptedBackend>(
        std::vector<ScriptedBackend::Fixture>{{"patterns_update_step2", "*", text}, {"patterns_update_step1", "*", text}},
        true));
}

}  // namespace

TEST_CASE("holdout split is disjoint and statistics use training members only") {
    const auto& [tree, pats, dispatches] = built();
    REQUIRE(pats.size() == tree.nodes.size());
    for (int leaf : tree.leaves()) {
        const auto& p = pats[static_cast<std::size_t>(leaf)];
        const auto& members = tree.nodes[static_cast<std::size_t>(leaf)].members;
        std::vector<std::string> both;
        std::set_intersection(p.train_members.begin(), p.train_members.end(), p.holdout_members.begin(),
                              p.holdout_members.end(), std::back_inserter(both));
        CHECK(both.empty());
        CHECK(p.train_members.size() + p.holdout_members.size() == members.size());
        CHECK(p.holdout_members.size() == static_cast<std::size_t>(std::floor(members.size() * 0.2)));
        CHECK(p.stats == summarize(demo(), p.train_members));
        REQUIRE(p.eval_scores.has_value());
        CHECK(p.eval_scores->evaluated > 0);
        CHECK(p.eval_scores->group_inference_accuracy >= 0.0);
        CHECK(p.eval_scores->group_inference_accuracy <= 1.0);
    }
    for (const auto& n : tree.nodes) {
        const auto& p = pats[static_cast<std::size_t>(n.id)];
        CHECK(p.cohort_key == n.key);
        CHECK(p.node_id == n.id);
        if (!n.leaf()) CHECK_FALSE(p.eval_scores.has_value());
        if (!n.key.empty()) CHECK_FALSE(p.narrative.empty());
        CHECK(pattern_summary(p).find(p.label) != std::string::npos);
    }
    // A profile resolves to its leaf's pattern.
    const auto& someone = demo().profiles.begin()->second;
    CHECK(lookup_pattern(tree, pats, someone).node_id == tree.locate(someone));
}

TEST_CASE("replay group inference equals a brute-force nearest cohort") {
    const auto& [tree, pats, dispatches] = built();
    std::vector<MobilityPattern> leaves;
    for (int l : tree.leaves()) leaves.push_back(pats[static_cast<std::size_t>(l)]);
    REQUIRE(leaves.size() >= 2);
    Gateway gw(std::make_unique<ReplayBackend>(3));
    std::size_t n = 0;
    for (const auto& d : demo().diaries) {
        if (n++ == 80) break;
        auto anon = d;
        anon.person_id.clear();
        const auto expected = brute_nearest(anon, leaves);
        CHECK(nearest_cohort(anon, leaves) == expected);
        const auto g = infer_group(anon, leaves, gw);
        REQUIRE(g.predicted.has_value());
        CHECK(*g.predicted == expected);
    }
}

TEST_CASE("group labels are read from the answer") {
    std::vector<MobilityPattern> pats(3);
    pats[0].label = "occupation=Students";
    pats[1].label = "occupation=Students, age_band=18-25";
    pats[2].label = "occupation=Retirees";
    CHECK(match_group_label("reasoning...\nGROUP: occupation=Retirees", pats) == 2);
    CHECK(match_group_label("It is most like occupation=Students, age_band=18-25 overall", pats) == 1);
    CHECK(match_group_label("group: OCCUPATION=students", pats) == 0);
    CHECK_FALSE(match_group_label("no idea", pats).has_value());
}

TEST_CASE("masked completion scoring") {
    TravelDiary d{"p", {2016, 11, 15},
                  {point(8 * 60 + 30, at(1000, 0), Purpose::CommutingToWork, 1000, TravelMode::Walking, 15),
                   point(18 * 60, at(0, 0), Purpose::ReturningHome, 1000, TravelMode::BusSubway, 10)},
                  {}};
    MaskedDiary m{d, {{0, MaskField::ArriveTime}, {1, MaskField::Mode}, {1, MaskField::DistanceM}, {0, MaskField::Purpose}}};
    const auto rendered = render_diary(d, m.masks);
    CHECK(rendered.find("[MASK_1]") != std::string::npos);
    CHECK(rendered.find("[MASK_4]") != std::string::npos);
    CHECK(rendered.find("08:30") == std::string::npos);

    MobilityPattern pat;
    pat.label = "all";
    SUBCASE("all right within tolerance") {
        auto gw = answers("MASK_1: 09:25\nMASK_2: bus and subway\n- MASK_3: 1450 m\nMASK_4: Commuting to Work.");
        const auto r = complete_masked(m, pat, gw);
        CHECK(r.field_scores == std::vector<double>{1, 1, 1, 1});
        CHECK(r.score == 1.0);
        CHECK(r.filled.points[0].arrive_time == 9 * 60 + 25);
        CHECK(r.filled.points[1].distance_m == 1450);
    }
    SUBCASE("outside tolerance or missing") {
        auto gw = answers("MASK_1: 09:31\nMASK_2: Driving\nMASK_3: 1501");
        const auto r = complete_masked(m, pat, gw);
        CHECK(r.field_scores == std::vector<double>{0, 0, 0, 0});
        CHECK(r.score == 0.0);
    }
    SUBCASE("half right") {
        auto gw = answers("MASK_1: 07:30\nMASK_2: Walking\nMASK_3: 600\nMASK_4: Returning Home");
        CHECK(complete_masked(m, pat, gw).score == doctest::Approx(0.5));
    }
    auto gw = answers("x");
    CHECK_THROWS_AS(complete_masked(MaskedDiary{d, {}}, pat, gw), Error);
    CHECK_THROWS_AS(complete_masked(MaskedDiary{d, {{5, MaskField::Mode}}}, pat, gw), Error);
}

TEST_CASE("raw digest mode skips narratives and self-evaluation") {
    const auto raw = build(true);
    for (const auto& p : raw.patterns) CHECK_FALSE(p.eval_scores.has_value());
    CHECK(raw.dispatches == 0);
    CHECK(built().dispatches > raw.dispatches);
}

TEST_CASE("patterns round trip through ndjson") {
    const auto& pats = built().patterns;
    testing::TempDir dir("patterns");
    const nlohmann::json meta{{"run_seed", 3}};
    write_patterns_ndjson(dir.str("p.ndjson"), pats, &meta);
    const auto back = read_patterns_ndjson(dir.str("p.ndjson"));
    REQUIRE(back.size() == pats.size());
    for (std::size_t i = 0; i < pats.size(); ++i) {
        CHECK(back[i].label == pats[i].label);
        CHECK(back[i].stats == pats[i].stats);
        CHECK(back[i].narrative == pats[i].narrative);
        CHECK(back[i].train_members == pats[i].train_members);
        CHECK(back[i].holdout_members == pats[i].holdout_members);
        CHECK(back[i].eval_scores.has_value() == pats[i].eval_scores.has_value());
        CHECK(pattern_to_json(back[i]) == pattern_to_json(pats[i]));
    }
}

TEST_CASE("pattern building is deterministic") {
    const auto again = build(false);
    REQUIRE(again.patterns.size() == built().patterns.size());
    for (std::size_t i = 0; i < again.patterns.size(); ++i)
        CHECK(pattern_to_json(again.patterns[i]) == pattern_to_json(built().patterns[i]));
}
