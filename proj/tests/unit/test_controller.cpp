#include <doctest.h>

#include <cmath>

#include "raccon/controller.hpp"
#include "raccon/errors.hpp"
#include "raccon/kinematics.hpp"

using namespace raccon;

namespace {
const ControllerParams P;

bool near(double a, double b) { return std::abs(a - b) <= 1e-12; }
} // namespace

TEST_CASE("safe_gap hand values") {
    CHECK(near(safe_gap(20, 20, P), 3.0));
    CHECK(near(safe_gap(0, 0, P), 1.0));
    CHECK(near(safe_gap(20, 0, P), 28.0));
}

TEST_CASE("acc_accel as printed") {
    CHECK(near(acc_accel({0, 20, 20, 26}, P), -1.2));
    const double zero_gap = 20 * 1.2 + 1 + 0.66 * 8 / 4.08;
    CHECK(near(acc_accel({0, 20, 20, zero_gap}, P), 0.0));
    // the V2V field plays no role in ACC
    CHECK(acc_accel({5.0, 20, 20, 26}, P) == acc_accel({-5.0, 20, 20, 26}, P));
}

TEST_CASE("acc_accel without the braking term") {
    ControllerParams p = P;
    p.acc_variant = AccVariant::WithoutBrakingTerm;
    CHECK(near(acc_accel({0, 20, 20, 25}, p), 0.0));
    CHECK(to_string(parse_acc_variant("without-braking-term")) == "without-braking-term");
    CHECK_THROWS_AS(parse_acc_variant("sometimes"), ConfigError);
}

TEST_CASE("cacc_accel") {
    CHECK(cacc_accel({0, 20, 20, 12}, P) == 0.0);
    CHECK(near(cacc_accel({1.0, 22, 20, 15}, P), 14.88));
}

TEST_CASE("comp switches modes at the safe gap") {
    const auto eq = comp({0, 20, 20, 12}, P);
    CHECK(eq.accel == 0.0);
    CHECK(eq.mode == ControlMode::GapControl);
    const auto close = comp({0, 20, 20, 2}, P);
    CHECK(close.accel == -8.0);
    CHECK(close.mode == ControlMode::CollisionAvoidance);
    const auto boundary = comp({0, 20, 20, safe_gap(20, 20, P)}, P);
    CHECK(boundary.mode == ControlMode::CollisionAvoidance);
    const auto acc = comp({0, 20, 20, 26}, P, ControlLaw::Acc);
    CHECK(near(acc.accel, -1.2));
}

TEST_CASE("params validation") {
    ControllerParams p = P;
    p.k_g = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = P;
    p.t_gap_acc = 0.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK_NOTHROW(P.validate());
}

TEST_CASE("ACC equilibrium gap is larger than CACC") {
    for (double v : {10.0, 20.0, 30.0}) {
        const double cacc_gap = v * P.t_gap_cacc + P.g_min;
        const double acc_gap = v * P.t_gap_acc + P.g_min + P.k_a * P.d_p_max / P.k_g;
        CHECK(near(cacc_accel({0, v, v, cacc_gap}, P), 0.0));
        CHECK(near(acc_accel({0, v, v, acc_gap}, P), 0.0));
        CHECK(acc_gap > cacc_gap);
    }
}

TEST_CASE("closed loop settles from perturbed starts") {
    for (double v : {10.0, 20.0, 30.0}) {
        for (double dg : {-3.0, 4.0}) {
            VehicleState p{v * 0.55 + 1 + dg + 4.0, v, 0}, e{0, v, 0};
            double a = 0;
            for (int k = 0; k < 6000; ++k) {
                a = comp({0.0, p.velocity, e.velocity, gap(p, e)}, P).accel;
                p = integrate_step(p, 0.0, {}, 0.01);
                e = integrate_step(e, a, {}, 0.01);
            }
            CHECK(std::abs(a) < 0.01);
            CHECK(gap(p, e) == doctest::Approx(v * 0.55 + 1).epsilon(1e-3));
        }
    }
}
