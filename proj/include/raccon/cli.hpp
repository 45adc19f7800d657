#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "raccon/evaluation.hpp"
#include "raccon/neural.hpp"
#include "raccon/scenario.hpp"

namespace raccon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitModel = 4;

/// Built-in defaults; also the schema every user config is checked against.
const nlohmann::json& default_config();

/// Rejects unknown key paths and type mismatches, then overlays `user` on the
/// defaults. Error messages name the failing key path (e.g. /controller/k_a).
nlohmann::json merge_config(const nlohmann::json& user);

struct CampaignSection {
    std::string environment = "highway-day-windy";
    double duration = 100.0;
    double attack_start = 20.0;
    double attack_end = 80.0;
    double recovery_tail = 10.0;
    double initial_gap_perturbation = 0.0;
    std::string trajectory_csv;
    std::string attack = "none";
    PipelineMode mode = PipelineMode::Raccon;
};

struct SweepSection {
    std::vector<double> thresholds;
    double duration = 300.0;
    double attack_start = 20.0;
    double attack_end = 280.0;
};

struct SubversionSection {
    std::string environment = "highway-day-windy";
    double duration = 100.0;
    double attack_start = 20.0;
    double attack_end = 80.0;
    double bias_min = 0.001;
    double bias_max = 5.0;
    double sinusoid_frequency = 0.05;
    std::vector<double> thresholds;
};

struct ImpactSection {
    std::string environment = "highway-day-windy";
    double duration = 100.0;
    double attack_start = 20.0;
    double attack_end = 80.0;
};

struct RunConfig {
    std::uint64_t master_seed = 0;
    std::filesystem::path outdir;
    unsigned jobs = 1;
    PipelineConfig pipeline;
    std::vector<Environment> environments;
    ProfileTable profiles;
    GeneratorSettings generator;
    CollectionSettings collection;
    std::string dataset_name;
    std::string dataset_dir;
    TrainConfig training;
    double mae_gate = 0.05;
    std::string predictor_path;
    std::string estimator_path;
    std::string predictor_kind; // "mlp" or "oracle"
    std::string estimator_kind; // "mlp" or "acc"
    CampaignSection campaign;
    SweepSection sweep;
    SubversionSection subversion;
    ImpactSection impact;
    nlohmann::json resolved; // merged JSON the run used
};

/// Converts a merged config into typed settings and runs every domain check.
RunConfig parse_run_config(const nlohmann::json& merged);

/// SHA-256 of bytes / of a file, lowercase hex.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Entry point behind the `raccon` executable. Returns the process exit code.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

} // namespace raccon::cli
