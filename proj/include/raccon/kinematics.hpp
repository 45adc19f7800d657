#pragma once

#include <cstdint>

namespace raccon {

struct VehicleState {
    double position = 0.0;     // m
    double velocity = 0.0;     // m/s, never negative
    double acceleration = 0.0; // m/s^2, as applied after clamping
};

struct ActuatorLimits {
    double max_accel = 3.0; // m/s^2
    double max_decel = 8.0; // m/s^2, positive magnitude

    void validate() const;
};

struct SimClock {
    std::int64_t step_index = 0;
    double dt = 0.01;

    double time() const noexcept { return static_cast<double>(step_index) * dt; }
    void advance() noexcept { ++step_index; }
};

/// Velocity floor used by time_headway so the metric stays finite at standstill.
inline constexpr double kThwVelocityFloor = 0.1;
inline constexpr double kDefaultVehicleLength = 4.0;

/// Semi-implicit Euler: velocity is updated first, then position uses the new
/// velocity. The commanded acceleration is clamped to the actuator envelope and
/// raised further if needed so the vehicle stops exactly at zero velocity.
/// Throws NumericError for a non-finite command and ConfigError for dt <= 0.
VehicleState integrate_step(const VehicleState& state, double commanded_accel,
                            const ActuatorLimits& limits, double dt);

/// Bumper-to-bumper distance. Negative values mean the vehicles overlap.
double gap(const VehicleState& preceding, const VehicleState& ego,
           double vehicle_length = kDefaultVehicleLength);

double time_headway(double gap, double ego_velocity);

/// Contact counts as a collision.
bool detect_collision(double gap) noexcept;

} // namespace raccon
