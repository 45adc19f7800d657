#pragma once

#include <string>

namespace raccon {

enum class ControlLaw { Cacc, Acc };
enum class ControlMode { GapControl, CollisionAvoidance };

/// Which form of the ACC law to evaluate. AsPrinted keeps the constant
/// -K_a * D_P_max term; WithoutBrakingTerm drops it (plain constant-time-gap ACC).
enum class AccVariant { AsPrinted, WithoutBrakingTerm };

struct ControllerParams {
    double k_a = 0.66;       // dimensionless
    double k_v = 0.99;       // 1/s
    double k_g = 4.08;       // 1/s^2
    double g_min = 1.0;      // m
    double t_gap_acc = 1.2;  // s
    double t_gap_cacc = 0.55;// s
    double d_e_max = 8.0;    // m/s^2
    double d_p_max = 8.0;    // m/s^2
    AccVariant acc_variant = AccVariant::AsPrinted;

    void validate() const;
};

/// Controller inputs for one step. a_p comes from V2V and is untrusted; the
/// rest are sensor or on-board readings.
struct ControllerInput {
    double a_p = 0.0;
    double v_p = 0.0;
    double v_e = 0.0;
    double gap = 0.0;
};

struct ControlOutput {
    double accel = 0.0;
    ControlMode mode = ControlMode::GapControl;
};

double safe_gap(double v_e, double v_p, const ControllerParams& params);
double acc_accel(const ControllerInput& in, const ControllerParams& params);
double cacc_accel(const ControllerInput& in, const ControllerParams& params);

/// Gap control while gap > safe_gap, otherwise maximum braking. Output is the
/// raw controller demand; actuator clamping happens in integrate_step.
ControlOutput comp(const ControllerInput& in, const ControllerParams& params,
                   ControlLaw law = ControlLaw::Cacc);

std::string to_string(ControlMode mode);
std::string to_string(AccVariant variant);
AccVariant parse_acc_variant(const std::string& name);

} // namespace raccon
