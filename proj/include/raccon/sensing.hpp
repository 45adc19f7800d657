#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace raccon {

enum class SensorRate { Normal, Max };

struct SensorConfig {
    double f_normal = 10.0;  // Hz
    double f_max = 100.0;    // Hz
    SensorRate current = SensorRate::Normal;

    /// F_max >= F_normal > 0, F_max no faster than the control loop, and both
    /// periods whole multiples of dt.
    void validate(double dt) const;
};

struct SensorSample {
    std::int64_t step = 0;
    double v_p = 0.0;
    double gap = 0.0;
};

/// RADAR/LIDAR front end for v_P and gap. The hardware samples on the F_max
/// grid; readings are published to the controller at the current rate and held
/// in between. Switching to Max republishes the newest hardware sample at once.
class SensorFrontEnd {
public:
    SensorFrontEnd(const SensorConfig& config, double dt);

    void observe(std::int64_t step, double v_p_true, double gap_true);

    SensorRate rate() const noexcept { return rate_; }
    void set_rate(SensorRate rate);

    /// Held reading the controller currently sees.
    const SensorSample& published() const;
    /// Newest reading on the F_max grid.
    const SensorSample& latest_fast() const;

    /// (v_P(t) - v_P(t - delta)) / delta over the last two published samples;
    /// empty until two samples exist.
    std::optional<double> published_lead_accel() const;
    /// Same over the last two F_max readings, delta = 1/F_max.
    std::optional<double> fast_lead_accel() const;

    double fast_interval() const noexcept { return fast_steps_ * dt_; }
    double normal_interval() const noexcept { return normal_steps_ * dt_; }

private:
    void publish(const SensorSample& s);

    double dt_;
    std::int64_t normal_steps_;
    std::int64_t fast_steps_;
    SensorRate rate_;
    std::optional<SensorSample> fast_[2];
    std::optional<SensorSample> pub_[2];
};

std::string to_string(SensorRate rate);

} // namespace raccon
