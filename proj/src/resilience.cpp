#include "raccon/resilience.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raccon/errors.hpp"

namespace raccon {

void DetectorConfig::validate() const {
    if (!(anomaly_threshold > 0.0) || !std::isfinite(anomaly_threshold))
        throw ConfigError("detector anomaly_threshold must be positive");
}

std::string to_string(MitigationPath path) {
    switch (path) {
    case MitigationPath::NormalCacc: return "normal-cacc";
    case MitigationPath::CorrectedCacc: return "corrected-cacc";
    case MitigationPath::ResponseEstimator: return "response-estimator";
    case MitigationPath::DegradeAcc: return "degrade-acc";
    case MitigationPath::CollisionAvoidance: return "collision-avoidance";
    }
    return "?";
}

bool comparator(double a_e_cacc, double a_e_pred, const DetectorConfig& config) {
    return std::abs(a_e_cacc - a_e_pred) > config.anomaly_threshold;
}

double get_tgap(double a_candidate, double v_p, double v_e, double gap0, const ControllerParams& params,
                const LookaheadSettings& lookahead, double vehicle_length) {
    if (gap0 <= 0.0) return 0.0;
    const double dt = lookahead.dt;
    const ActuatorLimits lead_brake{std::numeric_limits<double>::max(), params.d_p_max};
    VehicleState p{gap0 + vehicle_length, std::max(v_p, 0.0), 0.0};
    VehicleState e{0.0, std::max(v_e, 0.0), 0.0};
    const auto hold_steps = static_cast<std::int64_t>(std::llround(lookahead.mitigation_interval / dt));
    const auto max_steps = static_cast<std::int64_t>(std::llround(lookahead.horizon / dt));

    double min_thw = std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < max_steps; ++k) {
        const double a_e = k < hold_steps ? a_candidate : -params.d_e_max;
        p = integrate_step(p, -params.d_p_max, lead_brake, dt);
        e = integrate_step(e, a_e, lookahead.ego_limits, dt);
        const double g = gap(p, e, vehicle_length);
        if (detect_collision(g)) return 0.0;
        min_thw = std::min(min_thw, time_headway(g, e.velocity));
        if (p.velocity <= 0.0 && e.velocity <= 0.0 && k + 1 >= hold_steps) break;
    }
    return min_thw;
}

PlausibilityResult plausibility(double a_e_est, double a_e_corrected, const ControllerInput& sensed,
                                const ControllerParams& params, const LookaheadSettings& lookahead,
                                double vehicle_length) {
    PlausibilityResult r;
    r.t_gap_c = get_tgap(a_e_corrected, sensed.v_p, sensed.v_e, sensed.gap, params, lookahead, vehicle_length);
    r.t_gap_est = get_tgap(a_e_est, sensed.v_p, sensed.v_e, sensed.gap, params, lookahead, vehicle_length);
    r.path = plausibility_branch(r.t_gap_c, r.t_gap_est, params);
    switch (r.path) {
    case MitigationPath::CorrectedCacc: r.a_e_applied = a_e_corrected; break;
    case MitigationPath::ResponseEstimator: r.a_e_applied = a_e_est; break;
    default: r.a_e_applied = acc_accel(sensed, params); break;
    }
    return r;
}

MitigationPath plausibility_branch(double t_gap_c, double t_gap_est, const ControllerParams& params) {
    const double tc = params.t_gap_cacc;
    const double ta = params.t_gap_acc;
    if (t_gap_c > tc && t_gap_c < t_gap_est && t_gap_c < ta) return MitigationPath::CorrectedCacc;
    if (t_gap_est > tc && t_gap_est < ta) return MitigationPath::ResponseEstimator;
    return MitigationPath::DegradeAcc;
}

NormalBehaviorModel NormalBehaviorModel::from_mlp(MlpModel model) {
    model.validate();
    if (model.kind != ModelKind::Predictor) throw ModelError("normal behaviour model needs a predictor network");
    NormalBehaviorModel m;
    m.mlp_ = std::make_shared<const MlpModel>(std::move(model));
    return m;
}

NormalBehaviorModel NormalBehaviorModel::controller_oracle(ControllerParams params) {
    NormalBehaviorModel m;
    m.params_ = params;
    return m;
}

double NormalBehaviorModel::predict(double trusted_a_p, double v_p, double v_e, double gap,
                                    const OracleView& oracle) const {
    if (mlp_) return mlp_->forward(PredictorFeatures{trusted_a_p, v_p, v_e, gap});
    return comp({oracle.a_p_true, v_p, v_e, gap}, params_, ControlLaw::Cacc).accel;
}

ResponseEstimatorModel ResponseEstimatorModel::from_mlp(MlpModel model) {
    model.validate();
    if (model.kind != ModelKind::ResponseEstimator)
        throw ModelError("response estimator needs a response-estimator network");
    ResponseEstimatorModel m;
    m.mlp_ = std::make_shared<const MlpModel>(std::move(model));
    return m;
}

ResponseEstimatorModel ResponseEstimatorModel::acc_fallback(ControllerParams params) {
    ResponseEstimatorModel m;
    m.params_ = params;
    return m;
}

double ResponseEstimatorModel::estimate(const EstimatorFeatures& f) const {
    if (mlp_) return mlp_->forward(f);
    return acc_accel({0.0, f.v_p, f.v_e, f.gap}, params_);
}

void PipelineConfig::validate() const {
    controller.validate();
    ego_limits.validate();
    lead_limits.validate();
    sensor.validate(dt);
    detector.validate();
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(vehicle_length >= 0.0)) throw ConfigError("vehicle_length must be non-negative");
    if (!(lookahead_horizon > 0.0)) throw ConfigError("lookahead horizon must be positive");
}

DetectionResult detect(const NormalBehaviorModel& predictor, const ControllerParams& params,
                       const DetectorConfig& detector, const ControllerInput& controller_input,
                       double trusted_a_p, bool delivered, const OracleView& oracle) {
    DetectionResult r;
    r.a_e_cacc = comp(controller_input, params, ControlLaw::Cacc).accel;
    r.a_e_pred = predictor.predict(trusted_a_p, controller_input.v_p, controller_input.v_e, controller_input.gap,
                                   oracle);
    r.deviation = std::abs(r.a_e_cacc - r.a_e_pred);
    r.anomaly_flag = detector.enabled && comparator(r.a_e_cacc, r.a_e_pred, detector);
    r.no_comm = !delivered;
    return r;
}

RacconPipeline::RacconPipeline(PipelineConfig config, NormalBehaviorModel predictor,
                               ResponseEstimatorModel estimator)
    : config_(std::move(config)),
      predictor_(std::move(predictor)),
      estimator_(std::move(estimator)),
      sensors_((config_.validate(), config_.sensor), config_.dt) {}

RacconPipeline::MitigationOutcome RacconPipeline::mitigate(double v_e) {
    const auto& params = config_.controller;
    const auto& fast = sensors_.latest_fast();
    const double a_rec = std::clamp(sensors_.fast_lead_accel().value_or(0.0), -params.d_p_max,
                                    config_.lead_limits.max_accel);
    const ControllerInput in{a_rec, fast.v_p, v_e, fast.gap};
    const auto corrected = comp(in, params, ControlLaw::Cacc);

    MitigationOutcome out{};
    out.a_p_reconstructed = a_rec;
    out.a_e_corrected = corrected.accel;
    if (corrected.mode == ControlMode::CollisionAvoidance) {
        out.a_e_applied = -params.d_e_max;
        out.path = MitigationPath::CollisionAvoidance;
        return out;
    }
    const double a_est = estimator_.estimate(EstimatorFeatures{fast.v_p, v_e, fast.gap});
    LookaheadSettings look;
    look.ego_limits = config_.ego_limits;
    look.mitigation_interval = 1.0 / config_.sensor.f_normal;
    look.dt = config_.dt;
    look.horizon = config_.lookahead_horizon;
    const auto pr = plausibility(a_est, corrected.accel, in, params, look, config_.vehicle_length);
    out.a_e_applied = pr.a_e_applied;
    out.path = pr.path;
    out.a_e_est = a_est;
    out.t_gap_c = pr.t_gap_c;
    out.t_gap_est = pr.t_gap_est;
    return out;
}

StepDecision RacconPipeline::step(const V2VMessage& msg, const TruthSample& truth) {
    sensors_.observe(msg.step_index, truth.v_p, truth.gap);
    if (msg.delivered) last_payload_ = msg.payload_a_p;
    const auto& s = sensors_.published();
    const ControllerInput in{last_payload_, s.v_p, truth.v_e, s.gap};
    const auto fd = sensors_.rate() == SensorRate::Max ? sensors_.fast_lead_accel() : sensors_.published_lead_accel();
    const double trusted = std::clamp(fd.value_or(0.0), -config_.controller.d_p_max, config_.lead_limits.max_accel);
    const auto det = detect(predictor_, config_.controller, config_.detector, in, trusted, msg.delivered,
                            OracleView{truth.a_p_true});

    StepDecision d;
    d.a_e_cacc = det.a_e_cacc;
    d.a_e_pred = det.a_e_pred;
    d.deviation = det.deviation;
    d.anomaly_flag = det.anomaly_flag;
    d.no_comm = det.no_comm;
    d.sensor_rate = sensors_.rate();
    if (!det.anomaly_flag && !det.no_comm) {
        d.mitigation_path = MitigationPath::NormalCacc;
        d.a_e_applied = det.a_e_cacc;
        sensors_.set_rate(SensorRate::Normal);
        return d;
    }
    sensors_.set_rate(SensorRate::Max);
    const auto m = mitigate(truth.v_e);
    d.mitigation_path = m.path;
    d.a_e_applied = m.a_e_applied;
    d.a_p_reconstructed = m.a_p_reconstructed;
    d.a_e_corrected = m.a_e_corrected;
    d.a_e_est = m.a_e_est;
    d.t_gap_c = m.t_gap_c;
    d.t_gap_est = m.t_gap_est;
    return d;
}

} // namespace raccon
