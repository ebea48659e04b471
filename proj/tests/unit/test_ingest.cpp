#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mobforge/csv.hpp"
#include "mobforge/error.hpp"
#include "mobforge/ingest.hpp"

#include <nlohmann/json.hpp>

using namespace mobforge;

namespace {

std::string data(const std::string& leaf) { return std::string(MOBFORGE_SOURCE_DIR) + "/tests/data/" + leaf; }

std::string survey_text(const Dataset& ds, bool trips) {
    std::ostringstream p, t;
    write_survey(ds, p, t);
    return trips ? t.str() : p.str();
}

const char* kProfileHeader =
    "person_id,age,gender,occupation,income,education,own_a_car,living_situation,primary_mode_of_transportation,"
    "residential_gps_coordinates,company_gps_coordinates\n";
const char* kTripHeader =
    "person_id,travel_date,origin_address,origin_gps_coordinates,destination_address,destination_gps_coordinates,"
    "travel_start_time,travel_end_time,travel_duration,travel_distance,travel_mode,travel_purpose\n";
const char* kProfileRow =
    "p1,26-30,Female,Students,Low,Bachelor's Degree,No,Dormitory,Walking,\"22.54,114.05\",\n";

}  // namespace

TEST_CASE("csv quoting survives commas, quotes and newlines") {
    std::istringstream in("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\n\"multi\nline\",z\n");
    const auto t = csv::parse(in);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].fields[0] == "x,1");
    CHECK(t.rows[0].fields[1] == "say \"hi\"");
    CHECK(t.rows[1].fields[0] == "multi\nline");
    CHECK(t.rows[0].line == 2);
    CHECK(t.rows[1].line == 4);
    CHECK(csv::quote("a\"b") == "\"a\"\"b\"");
}

TEST_CASE("survey round trip is a fixpoint on the 1000-row fixture") {
    const auto first = load_survey(data("survey_profiles.csv"), data("survey_trips.csv"));
    CHECK(first.report.trip_rows == 1000);
    CHECK(first.report.issues.empty());

    const auto p1 = survey_text(first.dataset, false);
    const auto t1 = survey_text(first.dataset, true);
    std::istringstream pin(p1), tin(t1);
    const auto second = load_survey(pin, tin);
    CHECK(second.dataset == first.dataset);
    CHECK(survey_text(second.dataset, false) == p1);
    CHECK(survey_text(second.dataset, true) == t1);
    CHECK(validate_dataset(second.dataset, default_speed_caps()).ok());
}

TEST_CASE("corrupted fixture reports every vocabulary violation with its line") {
    LoadOptions opt;
    opt.lenient = true;
    const auto res = load_survey(data("corrupt_profiles.csv"), data("corrupt_trips.csv"), opt);

    std::ifstream exp(data("corrupt_expected.csv"));
    const auto expected = csv::parse(exp);
    REQUIRE(expected.rows.size() == 14);
    std::set<std::pair<std::string, std::size_t>> bad_rows;
    for (const auto& row : expected.rows) {
        const auto& source = row.fields[0];
        const auto line = static_cast<std::size_t>(std::stoul(row.fields[1]));
        const auto& value = row.fields[3];
        bad_rows.insert({source, line});
        bool found = false;
        for (const auto& issue : res.report.issues)
            if (issue.source == source && issue.line == line && issue.reason.find("'" + value + "'") != std::string::npos &&
                issue.reason.find("not in vocabulary") != std::string::npos)
                found = true;
        INFO(source << " line " << line << " value " << value);
        CHECK(found);
    }
    // Nothing else is flagged as a vocabulary problem; the lower-cased mode on
    // line 777 is accepted.
    std::set<std::pair<std::string, std::size_t>> vocab_rows;
    for (const auto& issue : res.report.issues)
        if (issue.reason.find("not in vocabulary") != std::string::npos) vocab_rows.insert({issue.source, issue.line});
    CHECK(vocab_rows == bad_rows);
    for (const auto& issue : res.report.issues) CHECK(issue.line != 777);
}

TEST_CASE("strict loading stops at the first bad row") {
    try {
        load_survey(data("corrupt_profiles.csv"), data("corrupt_trips.csv"));
        FAIL("expected a row error");
    } catch (const RowError& e) {
        CHECK(e.line() == 3);
        CHECK(e.code() == ErrorCode::MalformedRow);
    }
}

TEST_CASE("row-level errors") {
    SUBCASE("unknown person") {
        std::istringstream p(std::string(kProfileHeader) + kProfileRow);
        std::istringstream t(std::string(kTripHeader) +
                             "p2,2016-11-15,,\"22.54,114.05\",,\"22.55,114.05\",08:00,08:20,20,1000,Walking,Shopping\n");
        try {
            load_survey(p, t);
            FAIL("expected UnknownPersonId");
        } catch (const RowError& e) {
            CHECK(e.code() == ErrorCode::UnknownPersonId);
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("missing column") {
        std::istringstream p("person_id,age\np1,26-30\n");
        std::istringstream t(std::string(kTripHeader) + "x\n");
        CHECK_THROWS_AS(load_survey(p, t), RowError);
    }
    SUBCASE("empty source") {
        std::istringstream p(kProfileHeader);
        std::istringstream t(kTripHeader);
        try {
            load_survey(p, t);
            FAIL("expected EmptySource");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptySource);
        }
    }
    SUBCASE("duration disagrees with clock times") {
        std::istringstream p(std::string(kProfileHeader) + kProfileRow);
        std::istringstream t(std::string(kTripHeader) +
                             "p1,2016-11-15,,\"22.54,114.05\",,\"22.55,114.05\",08:00,08:20,45,1000,Walking,Shopping\n");
        CHECK_THROWS_AS(load_survey(p, t), RowError);
    }
    SUBCASE("overlapping trips are rejected, or dropped when lenient") {
        const std::string trips = std::string(kTripHeader) +
                                  "p1,2016-11-15,,\"22.54,114.05\",,\"22.55,114.05\",08:00,08:20,20,1000,Walking,Shopping\n"
                                  "p1,2016-11-15,,\"22.55,114.05\",,\"22.54,114.05\",08:10,08:30,20,1000,Walking,Returning Home\n";
        std::istringstream p(std::string(kProfileHeader) + kProfileRow), t(trips);
        try {
            load_survey(p, t);
            FAIL("expected OverlappingTrips");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::OverlappingTrips);
        }
        std::istringstream p2(std::string(kProfileHeader) + kProfileRow), t2(trips);
        LoadOptions opt;
        opt.lenient = true;
        const auto res = load_survey(p2, t2, opt);
        REQUIRE(res.dataset.diaries.size() == 1);
        CHECK(res.dataset.diaries[0].points.size() == 1);
        REQUIRE(res.report.issues.size() == 1);
        CHECK(res.report.issues[0].code == ErrorCode::OverlappingTrips);
        CHECK(res.report.issues[0].line == 3);
    }
}

TEST_CASE("trips become arrival points in time order") {
    std::istringstream p(std::string(kProfileHeader) + kProfileRow);
    std::istringstream t(std::string(kTripHeader) +
                         "p1,2016-11-15,,\"22.55,114.05\",,\"22.54,114.05\",17:00,17:20,20,1000,Walking,Returning Home\n"
                         "p1,2016-11-15,,\"22.54,114.05\",,\"22.55,114.05\",08:00,08:20,20,1000,Walking,Going to School\n");
    const auto res = load_survey(p, t);
    REQUIRE(res.dataset.diaries.size() == 1);
    const auto& pts = res.dataset.diaries[0].points;
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].arrive_time == 8 * 60 + 20);
    CHECK(pts[0].purpose == Purpose::GoingToSchool);
    CHECK(pts[0].location == GeoCoord{22.55, 114.05});
    CHECK(pts[1].depart_time() == 17 * 60);
}

TEST_CASE("diary ndjson keeps markers and a meta line") {
    const auto res = load_survey(data("survey_profiles.csv"), data("survey_trips.csv"));
    Dataset ds = res.dataset;
    ds.empty_days.push_back({ds.profiles.begin()->first, {2016, 11, 20}});
    ds.normalize_order();
    ds.diaries[0].provenance = {"step 1: poi=3"};
    const nlohmann::json meta{{"run_seed", 5}};
    std::stringstream buf;
    write_diaries_ndjson(ds, buf, &meta);
    CHECK(buf.str().rfind("{\"_meta\"", 0) == 0);
    Dataset back;
    back.profiles = ds.profiles;
    read_diaries_ndjson(buf, back);
    back.normalize_order();
    CHECK(back == ds);

    testing::TempDir dir("dataset");
    save_dataset(ds, dir.str("d"), &meta);
    CHECK(load_dataset(dir.str("d")) == ds);
}
