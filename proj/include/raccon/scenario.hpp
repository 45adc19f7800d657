#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raccon/controller.hpp"
#include "raccon/kinematics.hpp"

namespace raccon {

enum class Terrain { Highway, Suburban, City };
enum class Weather { Clear, Windy, Snowy, Rainy };
enum class TimeOfDay { Day, Night };

struct Environment {
    Terrain terrain = Terrain::Highway;
    Weather weather = Weather::Clear;
    TimeOfDay time_of_day = TimeOfDay::Day;

    /// "highway-day-clear" style identifier used in file names and CLI lists.
    std::string name() const;
    static Environment parse(std::string_view name);

    friend bool operator==(const Environment&, const Environment&) = default;
};

/// All 24 combinations, ordered terrain-major, then time of day, then weather.
std::vector<Environment> all_environments();
std::size_t environment_index(const Environment& env);

struct TrajectoryProfile {
    double cruise_speed_mean = 30.0;       // m/s
    double cruise_speed_std = 2.0;         // m/s
    double accel_event_rate = 2.0;         // events/minute
    double accel_magnitude_std = 0.8;      // m/s^2
    double smoothing_time_constant = 1.0;  // s
    double stop_probability = 0.0;         // stops/minute
    double duration = 900.0;               // s
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Stand-in statistics for the driving environments. Every entry is
/// configuration, not ground truth; the CSV importer replaces it with real data.
struct ProfileTable {
    double highway_speed = 30.0;
    double suburban_speed = 18.0;
    double city_speed = 12.0;
    double highway_event_rate = 2.0;
    double suburban_event_rate = 6.0;
    double city_event_rate = 12.0;
    double highway_speed_std = 2.0;
    double suburban_speed_std = 1.5;
    double city_speed_std = 1.0;
    double highway_stop_probability = 0.0;
    double suburban_stop_probability = 0.1;
    double city_stop_probability = 0.4;
    double base_accel_std = 0.8;
    double clear_scale = 1.0;
    double windy_scale = 1.1;
    double snowy_scale = 0.7;
    double rainy_scale = 0.85;
    double night_speed_scale = 0.9;
    double smoothing_time_constant = 1.0;
    double duration = 900.0;
};

TrajectoryProfile profile_for(const Environment& env, const ProfileTable& table = {});

/// Preceding-vehicle ground truth: one acceleration sample per control step.
struct LeadTrajectory {
    double dt = 0.01;
    double initial_speed = 0.0;
    std::vector<double> accel;

    std::size_t size() const noexcept { return accel.size(); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt; }
};

struct GeneratorSettings {
    double dt = 0.01;
    ActuatorLimits lead_limits{};
    double speed_ceiling_factor = 1.3;   // v_P stays within [0, factor * cruise mean]
    double restoring_gain = 0.1;         // 1/s, pull toward the current target speed
    double event_min_duration = 1.0;     // s
    double event_max_duration = 4.0;     // s
    double stop_decel = 2.0;             // m/s^2
    double stop_hold_min = 3.0;          // s
    double stop_hold_max = 8.0;          // s
};

LeadTrajectory generate_lead_trajectory(const TrajectoryProfile& profile,
                                        const GeneratorSettings& settings = {});

/// Reads a `t,a` CSV (SI units, strictly increasing t) and resamples it onto
/// the dt grid by linear interpolation. Throws ParseError with row numbers.
LeadTrajectory import_trajectory_csv(const std::filesystem::path& path, double dt,
                                     double initial_speed);
LeadTrajectory parse_trajectory_csv(std::string_view text, double dt, double initial_speed);

struct DatasetRecord {
    double t = 0.0;
    double a_p = 0.0;
    double v_p = 0.0;
    double v_e = 0.0;
    double gap = 0.0;
    double a_e_response = 0.0;
    bool anomaly_flag = false;
};

struct EnvironmentDataset {
    Environment environment;
    std::vector<DatasetRecord> records;
    std::size_t train_count = 0; // contiguous head; the tail is the test split

    std::span<const DatasetRecord> train() const {
        return std::span(records).first(train_count);
    }
    std::span<const DatasetRecord> test() const {
        return std::span(records).subspan(train_count);
    }
};

struct CollectionSettings {
    ControllerParams controller{};
    ActuatorLimits ego_limits{};
    GeneratorSettings generator{};
    double vehicle_length = kDefaultVehicleLength;
    double sensor_f_normal = 10.0;      // Hz, sampling rate of v_P and gap while collecting
    double train_fraction = 0.8;
    double initial_gap_perturbation = 0.0; // m added to the equilibrium start gap
    std::uint64_t master_seed = 0;
    // Benign cut-in style disturbances: at Poisson times the ego is displaced
    // by up to +-excitation_gap and its speed by up to +-excitation_speed.
    // Without them gap error and a_P are nearly collinear in the recordings.
    double excitation_rate = 0.0;  // events/minute
    double excitation_gap = 0.0;   // m
    double excitation_speed = 0.0; // m/s

    void validate() const;
};

/// Drives the ego behind one lead trajectory with benign V2V and records the
/// controller's inputs and raw output each step.
std::vector<DatasetRecord> record_benign_run(const LeadTrajectory& lead,
                                             const CollectionSettings& settings,
                                             std::uint64_t excitation_seed = 0);

/// Generates each environment's trajectory from a seed derived from
/// (master_seed, environment index) and records it. Environments are
/// independent; `jobs` bounds the worker count and output order is fixed.
std::vector<EnvironmentDataset> collect_benign_dataset(const std::vector<Environment>& envs,
                                                       const CollectionSettings& settings,
                                                       const ProfileTable& table = {},
                                                       unsigned jobs = 1);

/// Concatenates per-environment splits into the global train/test sets.
struct GlobalSplit {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> test;
};
GlobalSplit aggregate(const std::vector<EnvironmentDataset>& datasets);

inline constexpr std::string_view kDatasetHeader = "t,a_p,v_p,v_e,gap,a_e_response,anomaly_flag";

std::string format_dataset_csv(std::span<const DatasetRecord> records);
void write_dataset_csv(const std::filesystem::path& path, std::span<const DatasetRecord> records);
std::vector<DatasetRecord> read_dataset_csv(const std::filesystem::path& path);
std::vector<DatasetRecord> parse_dataset_csv(std::string_view text);

} // namespace raccon
