#include "raccon/attack.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "raccon/errors.hpp"
#include "raccon/seeding.hpp"

namespace raccon {

namespace {

std::int64_t to_steps(double seconds, double dt) { return std::llround(seconds / dt); }

std::int64_t positive_mod(std::int64_t a, std::int64_t m) {
    const auto r = a % m;
    return r < 0 ? r + m : r;
}

template <typename E>
struct Names {
    E value;
    const char* name;
};

constexpr Names<Operation> kOperations[] = {
    {Operation::Mutation, "mutation"},
    {Operation::Fabrication, "fabrication"},
    {Operation::DeliveryPrevention, "delivery-prevention"}};
constexpr Names<PatternKind> kPatterns[] = {
    {PatternKind::Continuous, "continuous"}, {PatternKind::Cluster, "cluster"}, {PatternKind::Discrete, "discrete"}};
constexpr Names<BiasShape> kShapes[] = {{BiasShape::Constant, "constant"},
                                        {BiasShape::Linear, "linear"},
                                        {BiasShape::Sinusoidal, "sinusoidal"},
                                        {BiasShape::RandomUniform, "random-uniform"}};
constexpr Names<ImpactLabel> kImpacts[] = {{ImpactLabel::Collision, "collision"},
                                           {ImpactLabel::EfficiencyDegradation, "efficiency-degradation"},
                                           {ImpactLabel::Instability, "instability"}};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    return "?";
}

template <typename E, std::size_t N>
E value_of(const Names<E> (&table)[N], const std::string& s, const char* what) {
    for (const auto& e : table)
        if (s == e.name) return e.value;
    throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

AttackSpec mutation(std::string name, PatternKind kind, double period, double burst, BiasFunction bias,
                    ImpactLabel label, double start, double end) {
    AttackSpec s;
    s.name = std::move(name);
    s.operation = Operation::Mutation;
    s.pattern = {kind, period, burst};
    s.bias = bias;
    s.start_time = start;
    s.end_time = end;
    s.impact_label = label;
    s.rng_seed = fnv1a(s.name);
    return s;
}

AttackSpec intermittent(std::string name, double period, double burst, double start, double end) {
    AttackSpec s;
    s.name = std::move(name);
    s.operation = Operation::DeliveryPrevention;
    s.pattern = {PatternKind::Cluster, period, burst};
    s.start_time = start;
    s.end_time = end;
    s.impact_label = ImpactLabel::Instability;
    s.rng_seed = fnv1a(s.name);
    return s;
}

// Cluster shape used by the resiliency tables: 2.5 s bursts every 10 s.
constexpr double kClusterPeriod = 10.0;
constexpr double kClusterBurst = 2.5;
constexpr double kDiscretePeriod = 5.0;

BiasFunction constant(double b) { return {BiasShape::Constant, b < 0 ? -1 : +1, std::abs(b), 0.0, 0.0, 0.0}; }
BiasFunction linear(double b) { return {BiasShape::Linear, b < 0 ? -1 : +1, std::abs(b), 0.0, 0.0, 0.0}; }
BiasFunction sinusoid(double b, double f) {
    return {BiasShape::Sinusoidal, b < 0 ? -1 : +1, std::abs(b), f, 0.0, 0.0};
}
BiasFunction uniform(double lo, double hi) { return {BiasShape::RandomUniform, +1, 0.0, 0.0, lo, hi}; }

AttackSpec make_table_attack(std::string_view name, double start, double end) {
    const std::string n(name);
    const auto cl = PatternKind::Cluster;
    const auto co = PatternKind::Continuous;
    const auto di = PatternKind::Discrete;
    const auto C = ImpactLabel::Collision;
    const auto E = ImpactLabel::EfficiencyDegradation;
    const auto I = ImpactLabel::Instability;
    // Collision attacks.
    if (n == "continuous-linear+0.3") return mutation(n, co, 0, 0, linear(0.3), C, start, end);
    if (n == "cluster-bias+0.8") return mutation(n, cl, kClusterPeriod, kClusterBurst, constant(0.8), C, start, end);
    if (n == "discrete-bias+2") return mutation(n, di, kDiscretePeriod, 0, constant(2.0), C, start, end);
    if (n == "continuous-sin+0.5f0.02") return mutation(n, co, 0, 0, sinusoid(0.5, 0.02), C, start, end);
    if (n == "cluster-sin+0.8f0.03")
        return mutation(n, cl, kClusterPeriod, kClusterBurst, sinusoid(0.8, 0.03), C, start, end);
    if (n == "cluster-sin+1f0.05")
        return mutation(n, cl, kClusterPeriod, kClusterBurst, sinusoid(1.0, 0.05), C, start, end);
    // Efficiency degradation attacks.
    if (n == "continuous-linear-0.3") return mutation(n, co, 0, 0, linear(-0.3), E, start, end);
    if (n == "cluster-bias-0.8")
        return mutation(n, cl, kClusterPeriod, kClusterBurst, constant(-0.8), E, start, end);
    if (n == "discrete-bias-2") return mutation(n, di, kDiscretePeriod, 0, constant(-2.0), E, start, end);
    if (n == "continuous-sin-0.5f0.02") return mutation(n, co, 0, 0, sinusoid(-0.5, 0.02), E, start, end);
    if (n == "cluster-sin-0.8f0.03")
        return mutation(n, cl, kClusterPeriod, kClusterBurst, sinusoid(-0.8, 0.03), E, start, end);
    if (n == "cluster-sin-1f0.05")
        return mutation(n, cl, kClusterPeriod, kClusterBurst, sinusoid(-1.0, 0.05), E, start, end);
    // Random mutation.
    if (n == "continuous-random2") return mutation(n, co, 0, 0, uniform(-2, 2), I, start, end);
    if (n == "cluster-random2") return mutation(n, cl, kClusterPeriod, kClusterBurst, uniform(-2, 2), I, start, end);
    if (n == "discrete-random2") return mutation(n, di, kDiscretePeriod, 0, uniform(-2, 2), I, start, end);
    // Delivery prevention.
    if (n == "intermittent-0.2hz-1.5s") return intermittent(n, 5.0, 1.5, start, end);
    if (n == "intermittent-0.1hz-2s") return intermittent(n, 10.0, 2.0, start, end);
    if (n == "intermittent-0.05hz-2s") return intermittent(n, 20.0, 2.0, start, end);
    throw ConfigError("unknown attack '" + n + "'");
}

constexpr const char* kTableNames[] = {
    "continuous-linear+0.3", "cluster-bias+0.8",       "discrete-bias+2",
    "continuous-sin+0.5f0.02", "cluster-sin+0.8f0.03",  "cluster-sin+1f0.05",
    "continuous-linear-0.3", "cluster-bias-0.8",       "discrete-bias-2",
    "continuous-sin-0.5f0.02", "cluster-sin-0.8f0.03",  "cluster-sin-1f0.05",
    "continuous-random2",    "cluster-random2",         "discrete-random2",
    "intermittent-0.2hz-1.5s", "intermittent-0.1hz-2s", "intermittent-0.05hz-2s"};

} // namespace

void BiasFunction::validate() const {
    if (sign != 1 && sign != -1) throw ConfigError("bias sign must be +1 or -1");
    if (!std::isfinite(b) || !std::isfinite(f) || !std::isfinite(lo) || !std::isfinite(hi))
        throw ConfigError("bias parameters must be finite");
    if (b < 0.0) throw ConfigError("bias magnitude b must be non-negative (use sign)");
    if (shape == BiasShape::Sinusoidal && !(f > 0.0)) throw ConfigError("sinusoidal bias needs f > 0");
    if (shape == BiasShape::RandomUniform && !(lo <= hi)) throw ConfigError("random bias needs lo <= hi");
}

double BiasFunction::evaluate(double t_attack, double draw) const {
    switch (shape) {
    case BiasShape::Constant: return sign * b;
    case BiasShape::Linear: return sign * b * t_attack;
    case BiasShape::Sinusoidal: return sign * b * std::sin(f * t_attack);
    case BiasShape::RandomUniform: return sign * (lo + draw * (hi - lo));
    }
    return 0.0;
}

void FrequencyPattern::validate(double dt) const {
    switch (kind) {
    case PatternKind::Continuous: return;
    case PatternKind::Cluster:
        if (!(burst > dt)) throw ConfigError("cluster burst must exceed dt");
        if (!(burst < period)) throw ConfigError("cluster burst must be shorter than its period");
        return;
    case PatternKind::Discrete:
        if (!(period > dt)) throw ConfigError("discrete period must exceed dt");
        return;
    }
}

void AttackSpec::validate(double dt) const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!std::isfinite(start_time) || !std::isfinite(end_time) || !(start_time < end_time))
        throw ConfigError("attack '" + name + "': start must precede end");
    if (start_time < 0.0) throw ConfigError("attack '" + name + "': start must be non-negative");
    pattern.validate(dt);
    if (operation == Operation::DeliveryPrevention) {
        if (bias) throw ConfigError("attack '" + name + "': delivery prevention takes no bias");
    } else {
        if (!bias) throw ConfigError("attack '" + name + "': mutation and fabrication need a bias");
        bias->validate();
        if (flooding) throw ConfigError("attack '" + name + "': flooding applies to delivery prevention only");
    }
}

bool pattern_active(const FrequencyPattern& pattern, double t_attack, double dt) {
    const auto k = to_steps(t_attack, dt);
    switch (pattern.kind) {
    case PatternKind::Continuous: return true;
    case PatternKind::Cluster: return positive_mod(k, to_steps(pattern.period, dt)) < to_steps(pattern.burst, dt);
    case PatternKind::Discrete: return positive_mod(k, to_steps(pattern.period, dt)) == 0;
    }
    return false;
}

bool AttackSpec::active(std::int64_t step_index, double dt) const {
    const auto first = to_steps(start_time, dt);
    const auto last = to_steps(end_time, dt);
    if (step_index < first || step_index >= last) return false;
    return pattern_active(pattern, static_cast<double>(step_index - first) * dt, dt);
}

V2VMessage benign_message(std::int64_t step_index, double a_p_true) {
    return {step_index, a_p_true, true, false};
}

V2VMessage apply_attack(const AttackSpec& spec, std::int64_t step_index, double a_p_true, double dt) {
    if (!spec.active(step_index, dt)) return benign_message(step_index, a_p_true);
    V2VMessage m = benign_message(step_index, a_p_true);
    if (spec.operation == Operation::DeliveryPrevention) {
        m.delivered = false;
        m.fabricated = spec.flooding;
        return m;
    }
    const double t_attack = static_cast<double>(step_index - to_steps(spec.start_time, dt)) * dt;
    const double draw = unit_interval(splitmix64(splitmix64(spec.rng_seed) + static_cast<std::uint64_t>(step_index)));
    m.payload_a_p = a_p_true + spec.bias->evaluate(t_attack, draw);
    m.fabricated = spec.operation == Operation::Fabrication;
    return m;
}

AttackSpec nday_preset(std::string_view name, double start_time, double end_time) {
    if (name == "mitm") {
        return mutation("mitm", PatternKind::Continuous, 0, 0, sinusoid(0.8, 0.05), ImpactLabel::Collision,
                        start_time, end_time);
    }
    if (name == "jamming") return intermittent("jamming", 20.0, 2.0, start_time, end_time);
    if (name == "flooding") {
        auto s = intermittent("flooding", 10.0, 2.0, start_time, end_time);
        s.flooding = true;
        return s;
    }
    throw ConfigError("unknown N-day preset '" + std::string(name) + "'");
}

std::vector<std::string> builtin_attack_names() {
    std::vector<std::string> out(std::begin(kTableNames), std::end(kTableNames));
    out.insert(out.end(), {"mitm", "jamming", "flooding"});
    return out;
}

AttackSpec builtin_attack(std::string_view name, double start_time, double end_time) {
    if (name == "mitm" || name == "jamming" || name == "flooding") return nday_preset(name, start_time, end_time);
    return make_table_attack(name, start_time, end_time);
}

std::string to_string(Operation op) { return name_of(kOperations, op); }
std::string to_string(PatternKind kind) { return name_of(kPatterns, kind); }
std::string to_string(BiasShape shape) { return name_of(kShapes, shape); }
std::string to_string(ImpactLabel label) { return name_of(kImpacts, label); }

nlohmann::json attack_to_json(const AttackSpec& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["operation"] = to_string(s.operation);
    j["pattern"] = {{"kind", to_string(s.pattern.kind)}, {"period", s.pattern.period}, {"burst", s.pattern.burst}};
    if (s.bias) {
        j["bias"] = {{"shape", to_string(s.bias->shape)}, {"sign", s.bias->sign}, {"b", s.bias->b},
                     {"f", s.bias->f}, {"lo", s.bias->lo}, {"hi", s.bias->hi}};
    } else {
        j["bias"] = nullptr;
    }
    j["start"] = s.start_time;
    j["end"] = s.end_time;
    j["impact_label"] = to_string(s.impact_label);
    j["seed"] = s.rng_seed;
    j["flooding"] = s.flooding;
    return j;
}

AttackSpec attack_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ConfigError("attack spec must be a JSON object");
        static const char* known[] = {"name", "operation", "pattern", "bias", "start", "end",
                                      "impact_label", "seed", "flooding"};
        for (const auto& [key, _] : j.items()) {
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
                std::end(known))
                throw ConfigError("attack spec: unknown key '" + key + "'");
        }
        AttackSpec s;
        s.name = j.value("name", std::string("attack"));
        s.operation = value_of(kOperations, j.at("operation").get<std::string>(), "operation");
        const auto& p = j.at("pattern");
        s.pattern.kind = value_of(kPatterns, p.at("kind").get<std::string>(), "pattern kind");
        s.pattern.period = p.value("period", 0.0);
        s.pattern.burst = p.value("burst", 0.0);
        if (j.contains("bias") && !j.at("bias").is_null()) {
            const auto& b = j.at("bias");
            BiasFunction f;
            f.shape = value_of(kShapes, b.at("shape").get<std::string>(), "bias shape");
            f.sign = b.value("sign", 1);
            f.b = b.value("b", 0.0);
            f.f = b.value("f", 0.0);
            f.lo = b.value("lo", 0.0);
            f.hi = b.value("hi", 0.0);
            s.bias = f;
        }
        s.start_time = j.at("start").get<double>();
        s.end_time = j.at("end").get<double>();
        s.impact_label = value_of(kImpacts, j.value("impact_label", std::string("collision")), "impact label");
        s.rng_seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : fnv1a(s.name);
        s.flooding = j.value("flooding", false);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("attack spec: ") + e.what());
    }
}

std::vector<AttackSpec> campaign_from_json(const nlohmann::json& j) {
    std::vector<AttackSpec> out;
    if (j.is_object()) {
        out.push_back(attack_from_json(j));
        return out;
    }
    if (!j.is_array()) throw ConfigError("campaign file must be a JSON array of attack specs");
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            out.push_back(attack_from_json(j[i]));
        } catch (const ConfigError& e) {
            throw ConfigError("campaign entry " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

} // namespace raccon
