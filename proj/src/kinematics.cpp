#include "raccon/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "raccon/errors.hpp"

namespace raccon {

void ActuatorLimits::validate() const {
    if (!(max_accel > 0.0) || !std::isfinite(max_accel))
        throw ConfigError("actuator max_accel must be positive");
    if (!(max_decel > 0.0) || !std::isfinite(max_decel))
        throw ConfigError("actuator max_decel must be positive");
}

VehicleState integrate_step(const VehicleState& state, double commanded_accel,
                            const ActuatorLimits& limits, double dt) {
    if (!std::isfinite(commanded_accel))
        throw NumericError("non-finite commanded acceleration");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");

    double a = std::clamp(commanded_accel, -limits.max_decel, limits.max_accel);
    double v = state.velocity + a * dt;
    if (v < 0.0) {
        a = -state.velocity / dt;
        v = 0.0;
    }
    VehicleState next;
    next.velocity = v;
    next.acceleration = a;
    next.position = state.position + v * dt;
    return next;
}

double gap(const VehicleState& preceding, const VehicleState& ego, double vehicle_length) {
    return preceding.position - ego.position - vehicle_length;
}

double time_headway(double gap, double ego_velocity) {
    return gap / std::max(ego_velocity, kThwVelocityFloor);
}

bool detect_collision(double gap) noexcept { return gap <= 0.0; }

} // namespace raccon
