#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "raccon/errors.hpp"
#include "raccon/scenario.hpp"

using namespace raccon;

TEST_CASE("24 distinct environments with round-trip names") {
    const auto envs = all_environments();
    REQUIRE(envs.size() == 24);
    std::set<std::string> names;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        names.insert(envs[i].name());
        CHECK(Environment::parse(envs[i].name()) == envs[i]);
        CHECK(environment_index(envs[i]) == i);
    }
    CHECK(names.size() == 24);
    CHECK(envs.front().name() == "highway-day-clear");
    CHECK_THROWS_AS(Environment::parse("moon-day-clear"), ConfigError);
}

TEST_CASE("profile table lookups") {
    const auto hdc = profile_for(Environment::parse("highway-day-clear"));
    CHECK(hdc.cruise_speed_mean == 30.0);
    CHECK(profile_for(Environment::parse("highway-night-clear")).cruise_speed_mean == doctest::Approx(27.0));
    const auto city_clear = profile_for(Environment::parse("city-day-clear"));
    const auto city_snow = profile_for(Environment::parse("city-day-snowy"));
    CHECK(city_snow.accel_magnitude_std == doctest::Approx(0.7 * city_clear.accel_magnitude_std));
    CHECK(city_clear.accel_event_rate == 12.0);
    CHECK(profile_for(Environment::parse("suburban-day-windy")).accel_event_rate == 6.0);
}

TEST_CASE("generator: length, determinism, degenerate profile") {
    auto profile = profile_for(Environment::parse("highway-day-clear"));
    profile.rng_seed = 99;
    const auto a = generate_lead_trajectory(profile);
    const auto b = generate_lead_trajectory(profile);
    CHECK(a.size() == 90000);
    CHECK(a.accel == b.accel);
    profile.accel_event_rate = 0;
    profile.accel_magnitude_std = 0;
    profile.stop_probability = 0;
    profile.cruise_speed_std = 0;
    const auto flat = generate_lead_trajectory(profile);
    CHECK(std::all_of(flat.accel.begin(), flat.accel.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("generated lead speed stays inside [0, 1.3 cruise]") {
    const GeneratorSettings gs;
    for (const auto& env : all_environments()) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            auto profile = profile_for(env);
            profile.duration = 300;
            profile.rng_seed = seed;
            const auto lead = generate_lead_trajectory(profile, gs);
            double v = lead.initial_speed;
            for (double a : lead.accel) {
                v += a * lead.dt;
                REQUIRE(v >= -1e-9);
                REQUIRE(v <= 1.3 * profile.cruise_speed_mean + 1e-9);
            }
        }
    }
}

TEST_CASE("trajectory CSV import") {
    auto t = parse_trajectory_csv("t,a\n0,0\n1,0\n", 0.5, 10.0);
    CHECK(t.accel == std::vector<double>{0, 0, 0});
    CHECK(t.initial_speed == 10.0);
    t = parse_trajectory_csv("t,a\n0,0\n1,2\n", 0.5, 10.0);
    REQUIRE(t.accel.size() == 3);
    CHECK(t.accel[1] == doctest::Approx(1.0));
    CHECK(t.accel[2] == doctest::Approx(2.0));
    try {
        parse_trajectory_csv("t,b\n0,0\n1,0\n", 0.5, 0.0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
    try {
        parse_trajectory_csv("t,a\n0,0\n1,0\n0.5,1\n", 0.5, 0.0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 4);
    }
    CHECK_THROWS_AS(parse_trajectory_csv("t,a\n0,0\n1,nan\n", 0.5, 0.0), ParseError);
}

TEST_CASE("benign dataset: controller is the oracle, never collides, tail split") {
    CollectionSettings cs;
    cs.master_seed = 5;
    cs.excitation_rate = 3.0;
    cs.excitation_gap = 3.0;
    cs.excitation_speed = 1.5;
    ProfileTable table;
    table.duration = 120;
    const std::vector<Environment> envs{Environment::parse("city-night-rainy"), Environment::parse("highway-day-windy")};
    const auto ds = collect_benign_dataset(envs, cs, table, 2);
    REQUIRE(ds.size() == 2);
    for (const auto& d : ds) {
        CHECK(d.records.size() == 12000);
        CHECK(d.train_count == 9600);
        for (const auto& r : d.records) {
            REQUIRE_FALSE(r.anomaly_flag);
            REQUIRE(r.gap > 0.0);
            REQUIRE(r.a_e_response == comp({r.a_p, r.v_p, r.v_e, r.gap}, cs.controller).accel);
        }
    }
    const auto again = collect_benign_dataset(envs, cs, table, 1);
    CHECK(format_dataset_csv(again[0].records) == format_dataset_csv(ds[0].records));
    const auto g = aggregate(ds);
    CHECK(g.train.size() == 19200);
    CHECK(g.test.size() == 4800);
    CHECK(g.test.front().t == ds[0].records[9600].t);
}

TEST_CASE("dataset CSV round trip and errors") {
    std::vector<DatasetRecord> recs{{0.0, 0.5, 20.0, 19.5, 12.25, 0.123456, false},
                                    {0.01, -1.0, 20.0, 19.5, 12.0, -8.0, true}};
    const auto text = format_dataset_csv(recs);
    CHECK(text.rfind("t,a_p,v_p,v_e,gap,a_e_response,anomaly_flag\n", 0) == 0);
    CHECK(text.find("0.010000,-1.000000,20.000000,19.500000,12.000000,-8.000000,1\n") != std::string::npos);
    const auto back = parse_dataset_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[1].anomaly_flag);
    CHECK(back[0].a_e_response == 0.123456);
    CHECK_THROWS_AS(parse_dataset_csv("t,a\n"), ParseError);
    CHECK_THROWS_AS(parse_dataset_csv(std::string(kDatasetHeader) + "\n1,2,3\n"), ParseError);
    CHECK_THROWS_AS(read_dataset_csv("/nonexistent/dir/file.csv"), IoError);
}

TEST_CASE("collection settings validation") {
    CollectionSettings cs;
    cs.train_fraction = 1.0;
    CHECK_THROWS_AS(cs.validate(), ConfigError);
    cs.train_fraction = 0.8;
    cs.excitation_gap = -1;
    CHECK_THROWS_AS(cs.validate(), ConfigError);
}
