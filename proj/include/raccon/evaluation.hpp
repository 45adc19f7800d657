#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "raccon/attack.hpp"
#include "raccon/resilience.hpp"
#include "raccon/scenario.hpp"

namespace raccon {

enum class PipelineMode { Naive, DegradeAcc, Raccon };
std::string to_string(PipelineMode mode);
PipelineMode parse_pipeline_mode(const std::string& name);

inline constexpr double kThwBandLow = 0.55;
inline constexpr double kThwBandHigh = 0.75;

struct CampaignConfig {
    std::string name = "campaign";
    PipelineConfig pipeline{};
    PipelineMode mode = PipelineMode::Naive;
    /// Log detector output in Naive mode when a predictor is supplied.
    bool monitor = true;
    /// Seconds after the attack window still counted in bucket statistics.
    double recovery_tail = 10.0;
    double initial_gap_perturbation = 0.0; // m
};

struct Models {
    std::optional<NormalBehaviorModel> predictor;
    std::optional<ResponseEstimatorModel> estimator;
};

struct StepRecord {
    double t = 0.0;
    double pos_p = 0.0;
    double pos_e = 0.0;
    double v_p = 0.0;
    double v_e = 0.0;
    double gap = 0.0;
    double a_p_true = 0.0;
    double a_p_received = 0.0;
    bool delivered = true;
    double a_e_pred = 0.0;
    double a_e_cacc = 0.0;
    double a_e_applied = 0.0;
    double deviation = 0.0;
    bool anomaly_flag = false;
    bool no_comm = false;
    bool attack_active = false;
    MitigationPath mitigation_path = MitigationPath::NormalCacc;
    double thw = 0.0;
    /// Lookahead headway of the candidate chosen by the plausibility checker.
    std::optional<double> selected_t_gap;
};

struct RunLog {
    std::string name;
    PipelineMode mode = PipelineMode::Naive;
    double dt = 0.01;
    std::optional<AttackSpec> attack;
    std::vector<StepRecord> steps;
    bool collision = false;
    std::optional<std::size_t> collision_step;
    bool detector_present = false;
    nlohmann::json metadata;
};

/// Steps the two-vehicle string through the lead trajectory. Naive applies
/// CACC on the received payload, DegradeAcc latches onto ACC at the first
/// detected anomaly or lost message, Raccon runs the full pipeline. Halts at
/// the first collision. Throws ConfigError on inconsistent settings.
RunLog run_campaign(const LeadTrajectory& lead, const std::optional<AttackSpec>& attack,
                    const CampaignConfig& config, const Models& models);

struct TimeWindow {
    double start = 0.0;
    double end = 0.0; // exclusive
};

/// Attack window plus the recovery tail, or the whole run without an attack.
TimeWindow evaluation_window(const RunLog& log, double recovery_tail);

struct ThwBuckets {
    double frac_below = 0.0; // percent of steps with THW < 0.55 s
    double frac_ideal = 0.0; // percent in [0.55, 0.75] s
    double frac_above = 0.0; // percent > 0.75 s
    double max_thw = 0.0;
    bool collision = false;
    std::size_t steps = 0;
};

/// Throws ConfigError if the window holds no steps.
ThwBuckets thw_buckets(const RunLog& log, const std::optional<TimeWindow>& window);

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

ConfusionCounts confusion(const RunLog& log);
/// Recomputes flags as deviation > threshold; valid for logs whose detector
/// did not influence the trajectory (Naive monitor runs).
ConfusionCounts confusion_at(const RunLog& log, double threshold);

struct DetectionMetrics {
    std::optional<double> recall;
    std::optional<double> precision;
    std::optional<double> f1;
    std::optional<double> false_positive_rate_benign;
};

DetectionMetrics metrics_from_counts(const ConfusionCounts& attack,
                                     const std::optional<ConfusionCounts>& benign);
DetectionMetrics detection_metrics(const RunLog& attack_log, const RunLog* benign_log = nullptr);

struct Quantiles {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};
/// Linear-interpolated quartiles. Empty input gives count == 0.
Quantiles quantiles(std::vector<double> values);

struct SweepSettings {
    std::vector<double> thresholds{0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
    AttackSpec reference_attack;
    CampaignConfig base{};
};

/// Clustered sinusoidal attack touching about a quarter of the messages.
AttackSpec reference_sweep_attack(double start_time, double end_time);

struct EnvironmentSweep {
    Environment environment;
    std::vector<DetectionMetrics> per_threshold;
};

struct ThresholdSummary {
    double threshold = 0.0;
    Quantiles recall;
    Quantiles precision;
    Quantiles f1;
    Quantiles fp_rate;
};

struct SweepResult {
    std::vector<double> thresholds;
    std::vector<EnvironmentSweep> environments;
    std::vector<ThresholdSummary> summary;
};

/// For each environment: one attacked and one benign Naive monitor run, then
/// every threshold is scored against the same recorded deviations.
SweepResult threshold_sweep(const std::vector<Environment>& envs,
                            const std::vector<LeadTrajectory>& trajectories,
                            const SweepSettings& settings, const Models& models, unsigned jobs = 1);

struct PatternClass {
    std::string name;
    FrequencyPattern pattern;
};

struct SubversionSettings {
    CampaignConfig base{};
    std::vector<PatternClass> classes;
    std::vector<double> bias_grid;
    double sinusoid_frequency = 0.05; // rad/s
    double attack_start = 20.0;
    double attack_end = 80.0;

    static SubversionSettings defaults(const CampaignConfig& base);
};

/// 1-2-3-5 ladder per decade from `lo` to `hi`.
std::vector<double> log_bias_ladder(double lo, double hi);

struct ClassScan {
    std::string name;
    std::optional<double> tolerable_constant;
    std::optional<double> tolerable_sinusoidal;
    std::vector<bool> impact_constant;   // per grid entry
    std::vector<bool> impact_sinusoidal;
    std::vector<double> max_dev_constant; // max deviation over attack-active steps
    std::vector<double> max_dev_sinusoidal;

    /// Smaller of the two shape tolerances (0 if either is absent).
    double tolerable() const;
};

struct ClassDetectability {
    std::string name;
    double tolerable = 0.0;
    std::optional<double> min_constant;
    std::optional<double> min_sinusoidal;
    bool subvertible = false; // some index exceeds the tolerable bias
};

struct SubversionRow {
    double threshold = 0.0;
    double fp_benign = 0.0; // percent
    std::vector<ClassDetectability> classes;

    bool any_subvertible() const;
};

/// Runs the bias ladders once (Naive monitor mode) and answers per-threshold
/// queries from the recorded deviations.
class SubversionScanner {
public:
    SubversionScanner(const LeadTrajectory& lead, SubversionSettings settings, const Models& models,
                      unsigned jobs = 1);

    SubversionRow row(double threshold) const;
    const std::vector<ClassScan>& scans() const noexcept { return scans_; }
    const SubversionSettings& settings() const noexcept { return settings_; }
    bool baseline_in_band() const noexcept { return baseline_in_band_; }

private:
    SubversionSettings settings_;
    std::vector<ClassScan> scans_;
    RunLog benign_;
    bool baseline_in_band_ = false;
};

/// Out-of-band THW or collision anywhere in the attack window plus tail.
bool perceptible_impact(const RunLog& log, double recovery_tail);

/// Among `thresholds`, the one with the fewest benign false positives whose
/// row has no subvertible class; empty if none qualifies.
std::optional<double> tune_threshold(const SubversionScanner& scanner,
                                     const std::vector<double>& thresholds);

SubversionRow subversion_scan(double threshold, const LeadTrajectory& lead,
                              const SubversionSettings& settings, const Models& models);

struct ImpactEntry {
    std::string name;
    ThwBuckets buckets;
    double displacement_integral = 0.0; // s^2, integral of |THW - benign THW|
    std::vector<double> thw_trace;
};

/// The twelve attack instances of the impact study.
std::vector<AttackSpec> default_impact_grid(double start_time, double end_time);

std::vector<ImpactEntry> impact_analysis(const std::vector<AttackSpec>& grid, const LeadTrajectory& lead,
                                         const CampaignConfig& base, unsigned jobs = 1);

/// Campaign names of the resiliency tables (collision, efficiency, random and
/// delivery prevention) plus the N-day presets.
std::vector<std::string> resiliency_campaign_names();

struct ModeComparison {
    std::string attack;
    ThwBuckets raccon;
    ThwBuckets degrade_acc;
    ThwBuckets naive;
};

// Reporting.
void write_runlog_csv(const std::filesystem::path& path, const RunLog& log);
std::string format_runlog_csv(const RunLog& log);
nlohmann::json buckets_to_json(const ThwBuckets& b);
nlohmann::json metrics_to_json(const DetectionMetrics& m);
nlohmann::json campaign_report(const RunLog& log, double recovery_tail);
nlohmann::json subversion_row_to_json(const SubversionRow& row);
std::string resiliency_table_markdown(const std::vector<ModeComparison>& rows);
std::string sweep_quantiles_csv(const SweepResult& sweep);
std::string sweep_matrix_csv(const SweepResult& sweep);
std::string impact_table_csv(const std::vector<ImpactEntry>& entries);

} // namespace raccon
