#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "raccon/attack.hpp"
#include "raccon/controller.hpp"
#include "raccon/kinematics.hpp"
#include "raccon/neural.hpp"
#include "raccon/sensing.hpp"

namespace raccon {

struct DetectorConfig {
    double anomaly_threshold = 0.15; // m/s^2
    bool enabled = true;

    void validate() const;
};

enum class MitigationPath { NormalCacc, CorrectedCacc, ResponseEstimator, DegradeAcc, CollisionAvoidance };
std::string to_string(MitigationPath path);

struct StepDecision {
    double a_e_cacc = 0.0;    // raw COMP on the V2V input
    double a_e_pred = 0.0;
    double deviation = 0.0;   // |a_e_cacc - a_e_pred|
    bool anomaly_flag = false;
    bool no_comm = false;
    MitigationPath mitigation_path = MitigationPath::NormalCacc;
    double a_e_applied = 0.0;
    std::optional<double> a_p_reconstructed;
    std::optional<double> a_e_corrected;
    std::optional<double> a_e_est;
    std::optional<double> t_gap_c;
    std::optional<double> t_gap_est;
    SensorRate sensor_rate = SensorRate::Normal; // rate in force when the step was decided
};

/// True iff the deviation is strictly beyond the threshold.
bool comparator(double a_e_cacc, double a_e_pred, const DetectorConfig& config);

struct LookaheadSettings {
    ActuatorLimits ego_limits{};
    double mitigation_interval = 0.1; // s, 1/F_normal
    double dt = 0.01;
    double horizon = 10.0;            // s
};

/// Worst-case headway for applying `a_candidate`: P brakes at D_P_max to
/// standstill while E holds the candidate for one mitigation interval and then
/// brakes at D_E_max. Returns the minimum time headway over the rollout
/// (first step up to both stopped or the horizon), 0 if the gap closes.
double get_tgap(double a_candidate, double v_p, double v_e, double gap,
                const ControllerParams& params, const LookaheadSettings& lookahead,
                double vehicle_length = kDefaultVehicleLength);

struct PlausibilityResult {
    double a_e_applied = 0.0;
    MitigationPath path = MitigationPath::DegradeAcc;
    double t_gap_c = 0.0;
    double t_gap_est = 0.0;
};

/// Branch rule alone: CorrectedCacc, ResponseEstimator or DegradeAcc.
MitigationPath plausibility_branch(double t_gap_c, double t_gap_est, const ControllerParams& params);

/// Selects the corrected CACC output, the Response Estimator output or ACC,
/// in that order of precedence.
PlausibilityResult plausibility(double a_e_est, double a_e_corrected, const ControllerInput& sensed,
                                const ControllerParams& params, const LookaheadSettings& lookahead,
                                double vehicle_length = kDefaultVehicleLength);

/// Ground truth that only simulation oracles may read.
struct OracleView {
    double a_p_true = 0.0;
};

/// Source of a_E^pred. The MLP variant is the deployed Predictor; the oracle
/// variant evaluates the controller on the true lead acceleration and exists
/// for transparency checks and tests.
class NormalBehaviorModel {
public:
    static NormalBehaviorModel from_mlp(MlpModel model);
    static NormalBehaviorModel controller_oracle(ControllerParams params);

    /// `trusted_a_p` is the lead acceleration reconstructed from sensed v_P.
    double predict(double trusted_a_p, double v_p, double v_e, double gap,
                   const OracleView& oracle) const;
    bool is_oracle() const noexcept { return !mlp_; }

private:
    std::shared_ptr<const MlpModel> mlp_;
    ControllerParams params_{};
};

/// Learned Response Estimator or, for tests, a callable stand-in.
class ResponseEstimatorModel {
public:
    static ResponseEstimatorModel from_mlp(MlpModel model);
    /// ACC law used as the estimate; handy when no trained model is present.
    static ResponseEstimatorModel acc_fallback(ControllerParams params);

    double estimate(const EstimatorFeatures& f) const;

private:
    std::shared_ptr<const MlpModel> mlp_;
    ControllerParams params_{};
};

struct PipelineConfig {
    ControllerParams controller{};
    ActuatorLimits ego_limits{};
    ActuatorLimits lead_limits{};
    SensorConfig sensor{};
    DetectorConfig detector{};
    double dt = 0.01;
    double vehicle_length = kDefaultVehicleLength;
    double lookahead_horizon = 10.0;

    void validate() const;
};

struct TruthSample {
    double v_p = 0.0;
    double gap = 0.0;
    double v_e = 0.0;
    double a_p_true = 0.0;
};

/// One ego vehicle's on-board detection and mitigation state. Single owner;
/// holds the sensor front end, the last delivered payload and the sensor-rate
/// hysteresis.
class RacconPipeline {
public:
    RacconPipeline(PipelineConfig config, NormalBehaviorModel predictor,
                   ResponseEstimatorModel estimator);

    StepDecision step(const V2VMessage& msg, const TruthSample& truth);

    const SensorFrontEnd& sensors() const noexcept { return sensors_; }
    const PipelineConfig& config() const noexcept { return config_; }

private:
    struct MitigationOutcome {
        double a_e_applied;
        MitigationPath path;
        double a_p_reconstructed;
        std::optional<double> a_e_corrected;
        std::optional<double> a_e_est;
        std::optional<double> t_gap_c;
        std::optional<double> t_gap_est;
    };
    MitigationOutcome mitigate(double v_e);

    PipelineConfig config_;
    NormalBehaviorModel predictor_;
    ResponseEstimatorModel estimator_;
    SensorFrontEnd sensors_;
    double last_payload_ = 0.0;
};

/// Detection half of the pipeline without mitigation: used by Naive and
/// DegradeACC runs and by threshold sweeps. Sensors stay at the normal rate.
struct DetectionResult {
    double a_e_cacc = 0.0;
    double a_e_pred = 0.0;
    double deviation = 0.0;
    bool anomaly_flag = false;
    bool no_comm = false;
};

DetectionResult detect(const NormalBehaviorModel& predictor, const ControllerParams& params,
                       const DetectorConfig& detector, const ControllerInput& controller_input,
                       double trusted_a_p, bool delivered, const OracleView& oracle);

} // namespace raccon
