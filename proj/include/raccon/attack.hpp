#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace raccon {

struct V2VMessage {
    std::int64_t step_index = 0;
    double payload_a_p = 0.0;
    bool delivered = true;
    bool fabricated = false;
};

enum class BiasShape { Constant, Linear, Sinusoidal, RandomUniform };

struct BiasFunction {
    BiasShape shape = BiasShape::Constant;
    int sign = +1;       // +1 or -1
    double b = 0.0;      // m/s^2 (m/s^3 for Linear)
    double f = 0.0;      // rad/s, Sinusoidal only
    double lo = 0.0;     // RandomUniform bounds
    double hi = 0.0;

    void validate() const;
    /// Bias at time t_attack since onset. `draw` is a uniform [0,1) sample
    /// consumed only by RandomUniform.
    double evaluate(double t_attack, double draw) const;
};

enum class PatternKind { Continuous, Cluster, Discrete };

struct FrequencyPattern {
    PatternKind kind = PatternKind::Continuous;
    double period = 0.0;  // s, Cluster and Discrete
    double burst = 0.0;   // s, Cluster only

    void validate(double dt) const;
};

enum class Operation { Mutation, Fabrication, DeliveryPrevention };
enum class ImpactLabel { Collision, EfficiencyDegradation, Instability };

struct AttackSpec {
    std::string name;
    Operation operation = Operation::Mutation;
    FrequencyPattern pattern{};
    std::optional<BiasFunction> bias; // absent for DeliveryPrevention
    double start_time = 0.0;
    double end_time = 0.0;
    ImpactLabel impact_label = ImpactLabel::Collision;
    std::uint64_t rng_seed = 0;
    // Delivery prevention realized as junk-packet flooding.
    bool flooding = false;

    void validate(double dt) const;
    /// True while the attack window and pattern both select this step.
    bool active(std::int64_t step_index, double dt) const;
};

/// Cluster: (t mod period) < burst. Discrete: the single step nearest each
/// multiple of period. Evaluated on the integer step grid.
bool pattern_active(const FrequencyPattern& pattern, double t_attack, double dt);

/// Transforms the ground-truth acceleration of one step into the message the
/// ego receives. Attack window is [start_time, end_time).
V2VMessage apply_attack(const AttackSpec& spec, std::int64_t step_index, double a_p_true, double dt);
V2VMessage benign_message(std::int64_t step_index, double a_p_true);

AttackSpec nday_preset(std::string_view name, double start_time, double end_time);

/// Named campaigns used by the CLI (`--attack NAME`) and the shipped grids.
std::vector<std::string> builtin_attack_names();
AttackSpec builtin_attack(std::string_view name, double start_time, double end_time);

std::string to_string(Operation op);
std::string to_string(PatternKind kind);
std::string to_string(BiasShape shape);
std::string to_string(ImpactLabel label);

nlohmann::json attack_to_json(const AttackSpec& spec);
AttackSpec attack_from_json(const nlohmann::json& j);
/// A campaign file is a JSON array of named specs.
std::vector<AttackSpec> campaign_from_json(const nlohmann::json& j);

} // namespace raccon
