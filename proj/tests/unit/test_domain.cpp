#include <doctest.h>

#include "helpers.hpp"
#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/vocab.hpp"

using namespace mobforge;

TEST_CASE("vocabulary lookup is case-insensitive and trims") {
    CHECK(parse_vocab<TravelMode>("  bus and subway ") == TravelMode::BusSubway);
    CHECK(parse_vocab<Purpose>("RETURNING HOME") == Purpose::ReturningHome);
    CHECK(parse_vocab<AgeBand>(">51") == AgeBand::Over51);
    CHECK_FALSE(parse_vocab<Gender>("other").has_value());
    CHECK(vocab_size<Occupation> == 10);
    CHECK(vocab_size<Purpose> == 10);
    CHECK(vocab_size<TravelMode> == 6);
}

TEST_CASE("dates and weekdays") {
    auto d = Date::parse("2016-11-15");
    REQUIRE(d);
    CHECK(d->weekday() == 1);  // a Tuesday
    CHECK_FALSE(d->is_weekend());
    CHECK(Date::parse("2016-11-19")->is_weekend());
    CHECK(Date::from_days(d->days_since_epoch()) == *d);
    CHECK(Date{1970, 1, 1}.days_since_epoch() == 0);
    CHECK(Date::parse("2016-02-30") == std::nullopt);
    CHECK(Date::parse("2016-2-3") == std::nullopt);
    CHECK(Date::parse("2016-02-29").has_value());
    CHECK(Date::parse("2015-02-29") == std::nullopt);
}

TEST_CASE("clock strings") {
    CHECK(parse_clock("10:30") == 630);
    CHECK(parse_clock("0:00") == 0);
    CHECK(parse_clock("23:59") == 1439);
    CHECK(parse_clock("24:00") == std::nullopt);
    CHECK(parse_clock("7:5") == std::nullopt);
    CHECK(format_clock(630) == "10:30");
    CHECK(format_clock(5) == "00:05");
}

TEST_CASE("speed tables keep cruise below caps") {
    const auto caps = default_speed_caps();
    const auto cruise = default_cruise_speeds();
    for (std::size_t i = 0; i < caps.size(); ++i) CHECK(cruise[i] < caps[i]);
    CHECK(caps[index_of(TravelMode::Walking)] == 7.0);
}

TEST_CASE("diary validation catches each defect") {
    TravelDiary d{"p1", {2016, 11, 15}, {}, {}};
    d.points.push_back(testing::point(500, testing::kCenter, Purpose::CommutingToWork, 2000, TravelMode::Driving, 10));
    d.points.push_back(testing::point(1000, testing::kCenter, Purpose::ReturningHome, 2000, TravelMode::Driving, 10));
    CHECK(validate_diary(d, default_speed_caps()).ok());

    SUBCASE("non-monotone") {
        d.points[1].arrive_time = 500;
        CHECK_FALSE(validate_diary(d, default_speed_caps()).ok());
    }
    SUBCASE("overlapping legs") {
        d.points[1].arrive_time = 505;
        d.points[1].duration_min = 10;
        const auto v = validate_diary(d, default_speed_caps());
        REQUIRE_FALSE(v.ok());
        CHECK(v.summary().find("overlapping") != std::string::npos);
    }
    SUBCASE("speed cap") {
        // 2 km walked in 10 minutes is 12 km/h.
        d.points[0].mode = TravelMode::Walking;
        const auto v = validate_diary(d, default_speed_caps());
        REQUIRE_FALSE(v.ok());
        CHECK(v.summary().find("speed cap") != std::string::npos);
    }
    SUBCASE("out of day") {
        d.points[1].arrive_time = 1440;
        CHECK_FALSE(validate_diary(d, default_speed_caps()).ok());
    }
    SUBCASE("leg before midnight") {
        d.points[0].arrive_time = 5;
        CHECK_FALSE(validate_diary(d, default_speed_caps()).ok());
    }
    SUBCASE("bad coordinate") {
        d.points[0].location.lat = 91;
        CHECK_FALSE(validate_diary(d, default_speed_caps()).ok());
    }
}

TEST_CASE("profile records resolve vocabularies") {
    auto rec = to_record(testing::person("p1"));
    CHECK(validate_profile(rec).ok());
    const auto back = to_profile(rec);
    CHECK(back == testing::person("p1"));

    rec.occupation = "Astronaut";
    rec.age_band = "26-31";
    const auto v = validate_profile(rec);
    CHECK(v.violations.size() == 2);
    CHECK_THROWS_AS(to_profile(rec), Error);
}

TEST_CASE("dataset validation finds duplicates and unknown persons") {
    Dataset ds;
    ds.profiles.emplace("p1", testing::person("p1"));
    TravelDiary d{"p1", {2016, 11, 15}, {}, {}};
    d.points.push_back(testing::point(500, testing::kCenter, Purpose::Shopping, 500, TravelMode::Walking, 10));
    ds.diaries = {d, d};
    CHECK_FALSE(validate_dataset(ds, default_speed_caps()).ok());
    ds.diaries.pop_back();
    CHECK(validate_dataset(ds, default_speed_caps()).ok());
    ds.diaries[0].person_id = "ghost";
    CHECK_FALSE(validate_dataset(ds, default_speed_caps()).ok());
}

TEST_CASE("haversine against a hand-computed value") {
    // One degree of latitude on the mean-radius sphere: pi * R / 180.
    const double expected = kPi * kEarthRadiusM / 180.0;
    CHECK(haversine_m({0, 0}, {1, 0}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(haversine_m(testing::kCenter, testing::kCenter) == 0.0);
}

TEST_CASE("format helpers") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(split("a,,b", ',').size() == 3);
    CHECK(trim("  x ") == "x");
}
