#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "raccon/attack.hpp"
#include "raccon/errors.hpp"

using namespace raccon;

namespace {

AttackSpec spec_with(BiasFunction bias, FrequencyPattern pattern = {}, double start = 0.0, double end = 100.0) {
    AttackSpec s;
    s.name = "t";
    s.bias = bias;
    s.pattern = pattern;
    s.start_time = start;
    s.end_time = end;
    return s;
}

} // namespace

TEST_CASE("payload for constant, sinusoid, linear") {
    const double dt = 0.01;
    auto s = spec_with({BiasShape::Constant, +1, 0.8});
    CHECK(apply_attack(s, 0, 0.5, dt).payload_a_p == doctest::Approx(1.3));
    s = spec_with({BiasShape::Sinusoidal, +1, 0.5, 0.02});
    CHECK(apply_attack(s, 0, 0.0, dt).payload_a_p == 0.0);
    s = spec_with({BiasShape::Linear, +1, 0.3}, {}, 10.0, 50.0);
    CHECK(apply_attack(s, 2000, 0.0, dt).payload_a_p == doctest::Approx(3.0));
    CHECK(apply_attack(s, 999, 0.0, dt).payload_a_p == 0.0);
    CHECK(apply_attack(s, 5000, 0.0, dt).payload_a_p == 0.0);
    s = spec_with({BiasShape::Constant, -1, 2.0});
    CHECK(apply_attack(s, 10, 1.0, dt).payload_a_p == doctest::Approx(-1.0));
}

TEST_CASE("cluster and discrete patterns") {
    const double dt = 0.01;
    const FrequencyPattern cluster{PatternKind::Cluster, 20.0, 2.0};
    CHECK(pattern_active(cluster, 1.9, dt));
    CHECK_FALSE(pattern_active(cluster, 2.1, dt));
    CHECK(pattern_active(cluster, 20.5, dt));

    const FrequencyPattern discrete{PatternKind::Discrete, 5.0, 0.0};
    const auto s = spec_with({BiasShape::Constant, +1, 1.0}, discrete, 0.0, 60.0);
    int hits_in_window = 0;
    for (std::int64_t k = 0; k < 6000; ++k) {
        const bool on = s.active(k, dt);
        if (on) ++hits_in_window;
        if (k % 500 == 499) {
            CHECK(hits_in_window == 1);
            hits_in_window = 0;
        }
    }
}

TEST_CASE("jamming drops 10 percent of messages") {
    const double dt = 0.01;
    const auto s = nday_preset("jamming", 0.0, 200.0);
    int dropped = 0;
    for (std::int64_t k = 0; k < 20000; ++k) {
        const auto m = apply_attack(s, k, 0.4, dt);
        if (!m.delivered) ++dropped;
        CHECK_FALSE(m.fabricated);
    }
    CHECK(dropped == 2000);
}

TEST_CASE("flooding is undelivered and marked fabricated") {
    const auto s = nday_preset("flooding", 0.0, 30.0);
    const auto m = apply_attack(s, 5, 0.4, 0.01);
    CHECK_FALSE(m.delivered);
    CHECK(m.fabricated);
    CHECK(apply_attack(s, 500, 0.4, 0.01).delivered);
    CHECK_THROWS_AS(nday_preset("spoof", 0, 1), ConfigError);
}

TEST_CASE("zero bias leaves the payload untouched") {
    for (auto shape : {BiasShape::Constant, BiasShape::Linear}) {
        const auto s = spec_with({shape, +1, 0.0});
        for (std::int64_t k = 0; k < 1000; k += 37) {
            const double a = std::sin(0.01 * static_cast<double>(k));
            CHECK(apply_attack(s, k, a, 0.01).payload_a_p == a);
        }
    }
}

TEST_CASE("random bias stays in bounds and is deterministic") {
    auto s = spec_with({BiasShape::RandomUniform, +1, 0.0, 0.0, -2.0, 2.0});
    s.rng_seed = 7;
    double lo = 1e9, hi = -1e9;
    for (std::int64_t k = 0; k < 5000; ++k) {
        const double p = apply_attack(s, k, 0.0, 0.01).payload_a_p;
        CHECK(p == apply_attack(s, k, 0.0, 0.01).payload_a_p);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    CHECK(lo >= -2.0);
    CHECK(hi < 2.0);
    CHECK(lo < -1.9);
    CHECK(hi > 1.9);
}

TEST_CASE("cluster duty cycle over a window") {
    const auto s = builtin_attack("cluster-bias+0.8", 20.0, 80.0);
    int on = 0;
    for (std::int64_t k = 0; k < 10000; ++k) on += s.active(k, 0.01);
    CHECK(on == 6 * 250);
}

TEST_CASE("every builtin validates") {
    for (const auto& n : builtin_attack_names()) {
        CAPTURE(n);
        CHECK_NOTHROW(builtin_attack(n, 20.0, 80.0).validate(0.01));
    }
    CHECK_THROWS_AS(builtin_attack("nope", 0, 1), ConfigError);
}

TEST_CASE("spec validation") {
    auto s = spec_with({BiasShape::Constant, +1, 1.0});
    s.end_time = 0.0;
    CHECK_THROWS_AS(s.validate(0.01), ConfigError);
    s = spec_with({BiasShape::Constant, 0, 1.0});
    CHECK_THROWS_AS(s.validate(0.01), ConfigError);
    s = spec_with({BiasShape::Sinusoidal, +1, 1.0, 0.0});
    CHECK_THROWS_AS(s.validate(0.01), ConfigError);
    s = spec_with({BiasShape::Constant, +1, 1.0}, {PatternKind::Cluster, 2.0, 3.0});
    CHECK_THROWS_AS(s.validate(0.01), ConfigError);
    s.operation = Operation::DeliveryPrevention;
    s.pattern = {};
    CHECK_THROWS_AS(s.validate(0.01), ConfigError);
}

TEST_CASE("JSON round trip and unknown keys") {
    for (const auto& n : builtin_attack_names()) {
        const auto s = builtin_attack(n, 20.0, 80.0);
        const auto j = attack_to_json(s);
        const auto back = attack_from_json(nlohmann::json::parse(j.dump()));
        CHECK(attack_to_json(back) == j);
    }
    auto j = attack_to_json(builtin_attack("mitm", 0, 10));
    j["colour"] = "red";
    CHECK_THROWS_AS(attack_from_json(j), ConfigError);
    CHECK_THROWS_AS(campaign_from_json(nlohmann::json(3)), ConfigError);
    try {
        campaign_from_json(nlohmann::json::array({attack_to_json(builtin_attack("mitm", 0, 10)), j}));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("campaign entry 1") != std::string::npos);
    }
}
