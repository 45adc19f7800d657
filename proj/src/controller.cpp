#include "raccon/controller.hpp"

#include <cmath>

#include "raccon/errors.hpp"

namespace raccon {

void ControllerParams::validate() const {
    const double all[] = {k_a, k_v, k_g, g_min, t_gap_acc, t_gap_cacc, d_e_max, d_p_max};
    for (double x : all)
        if (!(x > 0.0) || !std::isfinite(x))
            throw ConfigError("controller parameters must be finite and positive");
    if (!(t_gap_acc > t_gap_cacc))
        throw ConfigError("controller t_gap_acc must exceed t_gap_cacc");
}

double safe_gap(double v_e, double v_p, const ControllerParams& p) {
    return 0.1 * v_e + v_e * v_e / (2.0 * p.d_e_max) - v_p * v_p / (2.0 * p.d_p_max) + p.g_min;
}

double acc_accel(const ControllerInput& in, const ControllerParams& p) {
    const double braking = p.acc_variant == AccVariant::AsPrinted ? -p.k_a * p.d_p_max : 0.0;
    return braking + p.k_v * (in.v_p - in.v_e) +
           p.k_g * (in.gap - in.v_e * p.t_gap_acc - p.g_min);
}

double cacc_accel(const ControllerInput& in, const ControllerParams& p) {
    return p.k_a * in.a_p + p.k_v * (in.v_p - in.v_e) +
           p.k_g * (in.gap - in.v_e * p.t_gap_cacc - p.g_min);
}

ControlOutput comp(const ControllerInput& in, const ControllerParams& params, ControlLaw law) {
    if (in.gap <= safe_gap(in.v_e, in.v_p, params))
        return {-params.d_e_max, ControlMode::CollisionAvoidance};
    const double a = law == ControlLaw::Cacc ? cacc_accel(in, params) : acc_accel(in, params);
    return {a, ControlMode::GapControl};
}

std::string to_string(ControlMode mode) {
    return mode == ControlMode::GapControl ? "gap-control" : "collision-avoidance";
}

std::string to_string(AccVariant variant) {
    return variant == AccVariant::AsPrinted ? "as-printed" : "without-braking-term";
}

AccVariant parse_acc_variant(const std::string& name) {
    if (name == "as-printed") return AccVariant::AsPrinted;
    if (name == "without-braking-term") return AccVariant::WithoutBrakingTerm;
    throw ConfigError("unknown acc variant: " + name);
}

} // namespace raccon
