#include "raccon/sensing.hpp"

#include <cmath>

#include "raccon/errors.hpp"

namespace raccon {

namespace {

std::int64_t period_steps(double hz, double dt, const char* what) {
    const double steps = 1.0 / (hz * dt);
    const double rounded = std::round(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * rounded)
        throw ConfigError(std::string("sensor ") + what + " period must be a whole number of control steps");
    return static_cast<std::int64_t>(rounded);
}

} // namespace

void SensorConfig::validate(double dt) const {
    if (!(f_normal > 0.0) || !std::isfinite(f_normal)) throw ConfigError("sensor f_normal must be positive");
    if (!(f_max >= f_normal) || !std::isfinite(f_max)) throw ConfigError("sensor f_max must be >= f_normal");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    period_steps(f_max, dt, "f_max");
    period_steps(f_normal, dt, "f_normal");
}

SensorFrontEnd::SensorFrontEnd(const SensorConfig& config, double dt)
    : dt_(dt), rate_(config.current) {
    config.validate(dt);
    normal_steps_ = period_steps(config.f_normal, dt, "f_normal");
    fast_steps_ = period_steps(config.f_max, dt, "f_max");
}

void SensorFrontEnd::publish(const SensorSample& s) {
    if (pub_[1] && pub_[1]->step == s.step) {
        pub_[1] = s;
        return;
    }
    pub_[0] = pub_[1];
    pub_[1] = s;
}

void SensorFrontEnd::observe(std::int64_t step, double v_p_true, double gap_true) {
    if (step % fast_steps_ != 0) return;
    const SensorSample s{step, v_p_true, gap_true};
    fast_[0] = fast_[1];
    fast_[1] = s;
    const std::int64_t interval = rate_ == SensorRate::Max ? fast_steps_ : normal_steps_;
    if (step % interval == 0 || !pub_[1]) publish(s);
}

void SensorFrontEnd::set_rate(SensorRate rate) {
    if (rate == rate_) return;
    rate_ = rate;
    if (rate == SensorRate::Max && fast_[1]) publish(*fast_[1]);
}

const SensorSample& SensorFrontEnd::published() const {
    if (!pub_[1]) throw Error("sensor front end has not published a sample yet");
    return *pub_[1];
}

const SensorSample& SensorFrontEnd::latest_fast() const {
    if (!fast_[1]) throw Error("sensor front end has not sampled yet");
    return *fast_[1];
}

std::optional<double> SensorFrontEnd::published_lead_accel() const {
    if (!pub_[0] || !pub_[1]) return std::nullopt;
    const double delta = static_cast<double>(pub_[1]->step - pub_[0]->step) * dt_;
    return (pub_[1]->v_p - pub_[0]->v_p) / delta;
}

std::optional<double> SensorFrontEnd::fast_lead_accel() const {
    if (!fast_[0] || !fast_[1]) return std::nullopt;
    const double delta = static_cast<double>(fast_[1]->step - fast_[0]->step) * dt_;
    return (fast_[1]->v_p - fast_[0]->v_p) / delta;
}

std::string to_string(SensorRate rate) { return rate == SensorRate::Normal ? "normal" : "max"; }

} // namespace raccon
