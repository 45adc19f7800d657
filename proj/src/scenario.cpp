#include "raccon/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "raccon/errors.hpp"
#include "raccon/parallel.hpp"
#include "raccon/seeding.hpp"
#include "raccon/sensing.hpp"

namespace raccon {

namespace {

constexpr std::string_view kTerrainNames[] = {"highway", "suburban", "city"};
constexpr std::string_view kWeatherNames[] = {"clear", "windy", "snowy", "rainy"};
constexpr std::string_view kTimeNames[] = {"day", "night"};

template <typename E, std::size_t N>
E lookup(std::string_view token, const std::string_view (&names)[N], std::string_view what) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == token) return static_cast<E>(i);
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(token) + "'");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view field, long row, std::string_view column) {
    field = trim(field);
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError("column '" + std::string(column) + "': not a number '" + std::string(field) + "'", row);
    if (!std::isfinite(value))
        throw ParseError("column '" + std::string(column) + "': non-finite value", row);
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

std::string Environment::name() const {
    return std::string(kTerrainNames[static_cast<int>(terrain)]) + "-" +
           std::string(kTimeNames[static_cast<int>(time_of_day)]) + "-" +
           std::string(kWeatherNames[static_cast<int>(weather)]);
}

Environment Environment::parse(std::string_view name) {
    const auto parts = split(name, '-');
    if (parts.size() != 3) throw ConfigError("environment must look like terrain-time-weather: " + std::string(name));
    Environment env;
    env.terrain = lookup<Terrain>(parts[0], kTerrainNames, "terrain");
    env.time_of_day = lookup<TimeOfDay>(parts[1], kTimeNames, "time of day");
    env.weather = lookup<Weather>(parts[2], kWeatherNames, "weather");
    return env;
}

std::vector<Environment> all_environments() {
    std::vector<Environment> out;
    for (int t = 0; t < 3; ++t)
        for (int d = 0; d < 2; ++d)
            for (int w = 0; w < 4; ++w)
                out.push_back({static_cast<Terrain>(t), static_cast<Weather>(w), static_cast<TimeOfDay>(d)});
    return out;
}

std::size_t environment_index(const Environment& env) {
    return static_cast<std::size_t>(env.terrain) * 8 + static_cast<std::size_t>(env.time_of_day) * 4 +
           static_cast<std::size_t>(env.weather);
}

void TrajectoryProfile::validate() const {
    const double fields[] = {cruise_speed_mean, cruise_speed_std, accel_event_rate, accel_magnitude_std,
                             smoothing_time_constant, stop_probability};
    for (double x : fields)
        if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("trajectory profile values must be non-negative");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("trajectory duration must be positive");
}

TrajectoryProfile profile_for(const Environment& env, const ProfileTable& table) {
    TrajectoryProfile p;
    switch (env.terrain) {
    case Terrain::Highway:
        p.cruise_speed_mean = table.highway_speed;
        p.cruise_speed_std = table.highway_speed_std;
        p.accel_event_rate = table.highway_event_rate;
        p.stop_probability = table.highway_stop_probability;
        break;
    case Terrain::Suburban:
        p.cruise_speed_mean = table.suburban_speed;
        p.cruise_speed_std = table.suburban_speed_std;
        p.accel_event_rate = table.suburban_event_rate;
        p.stop_probability = table.suburban_stop_probability;
        break;
    case Terrain::City:
        p.cruise_speed_mean = table.city_speed;
        p.cruise_speed_std = table.city_speed_std;
        p.accel_event_rate = table.city_event_rate;
        p.stop_probability = table.city_stop_probability;
        break;
    }
    double scale = table.clear_scale;
    switch (env.weather) {
    case Weather::Clear: scale = table.clear_scale; break;
    case Weather::Windy: scale = table.windy_scale; break;
    case Weather::Snowy: scale = table.snowy_scale; break;
    case Weather::Rainy: scale = table.rainy_scale; break;
    }
    p.accel_magnitude_std = table.base_accel_std * scale;
    if (env.time_of_day == TimeOfDay::Night) p.cruise_speed_mean *= table.night_speed_scale;
    p.smoothing_time_constant = table.smoothing_time_constant;
    p.duration = table.duration;
    return p;
}

LeadTrajectory generate_lead_trajectory(const TrajectoryProfile& profile, const GeneratorSettings& settings) {
    profile.validate();
    settings.lead_limits.validate();
    if (!(settings.dt > 0.0)) throw ConfigError("dt must be positive");

    const double dt = settings.dt;
    const auto n = static_cast<std::size_t>(std::llround(profile.duration / dt));
    const double v_max = settings.speed_ceiling_factor * profile.cruise_speed_mean;

    std::mt19937_64 rng(profile.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto exponential = [&](double rate_per_minute) {
        if (rate_per_minute <= 0.0) return std::numeric_limits<double>::infinity();
        return std::exponential_distribution<double>(rate_per_minute / 60.0)(rng);
    };
    auto normal = [&](double mean, double sd) {
        return sd > 0.0 ? std::normal_distribution<double>(mean, sd)(rng) : mean;
    };

    LeadTrajectory traj;
    traj.dt = dt;
    traj.initial_speed = std::clamp(normal(profile.cruise_speed_mean, profile.cruise_speed_std), 0.0, v_max);
    traj.accel.reserve(n);

    enum class Phase { Cruise, Braking, Holding };
    Phase phase = Phase::Cruise;
    double hold_until = 0.0;
    double next_event = exponential(profile.accel_event_rate);
    double next_stop = exponential(profile.stop_probability);
    double event_accel = 0.0;
    double event_end = -1.0;
    double filtered = 0.0;
    const double tau = profile.smoothing_time_constant;

    VehicleState lead{0.0, traj.initial_speed, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        while (t >= next_event) {
            event_accel = normal(0.0, profile.accel_magnitude_std);
            event_end = next_event + settings.event_min_duration +
                        unit(rng) * (settings.event_max_duration - settings.event_min_duration);
            next_event += exponential(profile.accel_event_rate);
        }
        if (t >= event_end) event_accel = 0.0;
        if (phase == Phase::Cruise && t >= next_stop) {
            phase = Phase::Braking;
            next_stop = t + exponential(profile.stop_probability);
        }

        double raw = 0.0;
        switch (phase) {
        case Phase::Cruise:
            raw = event_accel + settings.restoring_gain * (profile.cruise_speed_mean - lead.velocity);
            break;
        case Phase::Braking:
            raw = -settings.stop_decel;
            if (lead.velocity <= 0.0) {
                phase = Phase::Holding;
                hold_until = t + settings.stop_hold_min +
                             unit(rng) * (settings.stop_hold_max - settings.stop_hold_min);
                raw = 0.0;
            }
            break;
        case Phase::Holding:
            raw = 0.0;
            if (t >= hold_until) phase = Phase::Cruise;
            break;
        }

        filtered = tau > 0.0 ? filtered + (dt / tau) * (raw - filtered) : raw;
        double cmd = filtered;
        if (phase == Phase::Holding) cmd = std::min(cmd, 0.0);
        if (lead.velocity + cmd * dt > v_max) cmd = (v_max - lead.velocity) / dt;
        lead = integrate_step(lead, cmd, settings.lead_limits, dt);
        traj.accel.push_back(lead.acceleration);
    }
    return traj;
}

LeadTrajectory parse_trajectory_csv(std::string_view text, double dt, double initial_speed) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    std::vector<std::string_view> lines;
    for (auto line : split(text, '\n'))
        if (!trim(line).empty()) lines.push_back(line);
    if (lines.empty()) throw ParseError("trajectory CSV is empty", 1);

    const auto header = split(lines[0], ',');
    long t_col = -1;
    long a_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = trim(header[i]);
        if (h == "t") t_col = static_cast<long>(i);
        if (h == "a") a_col = static_cast<long>(i);
    }
    if (t_col < 0) throw ParseError("missing column 't'", 1);
    if (a_col < 0) throw ParseError("missing column 'a'", 1);

    std::vector<double> ts;
    std::vector<double> as;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const long row = static_cast<long>(r) + 1;
        const auto fields = split(lines[r], ',');
        if (fields.size() != header.size()) throw ParseError("wrong number of fields", row);
        const double t = parse_double(fields[static_cast<std::size_t>(t_col)], row, "t");
        const double a = parse_double(fields[static_cast<std::size_t>(a_col)], row, "a");
        if (!ts.empty() && !(t > ts.back())) throw ParseError("time is not strictly increasing", row);
        ts.push_back(t);
        as.push_back(a);
    }
    if (ts.empty()) throw ParseError("trajectory CSV has no data rows", 2);

    LeadTrajectory traj;
    traj.dt = dt;
    traj.initial_speed = initial_speed;
    const double span = ts.back() - ts.front();
    const auto n = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;
    traj.accel.reserve(n);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = ts.front() + static_cast<double>(i) * dt;
        while (j + 1 < ts.size() && ts[j + 1] <= t) ++j;
        if (j + 1 >= ts.size()) {
            traj.accel.push_back(as.back());
            continue;
        }
        const double w = (t - ts[j]) / (ts[j + 1] - ts[j]);
        traj.accel.push_back(as[j] + w * (as[j + 1] - as[j]));
    }
    return traj;
}

LeadTrajectory import_trajectory_csv(const std::filesystem::path& path, double dt, double initial_speed) {
    return parse_trajectory_csv(read_file(path), dt, initial_speed);
}

void CollectionSettings::validate() const {
    controller.validate();
    ego_limits.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    if (!(excitation_rate >= 0.0 && excitation_gap >= 0.0 && excitation_speed >= 0.0))
        throw ConfigError("excitation settings must be non-negative");
    if (!std::isfinite(initial_gap_perturbation)) throw ConfigError("initial_gap_perturbation must be finite");
}

std::vector<DatasetRecord> record_benign_run(const LeadTrajectory& lead, const CollectionSettings& settings,
                                             std::uint64_t excitation_seed) {
    settings.validate();
    const double dt = lead.dt;
    SensorConfig sensor_cfg;
    sensor_cfg.f_normal = settings.sensor_f_normal;
    sensor_cfg.f_max = 1.0 / dt;
    SensorFrontEnd sensors(sensor_cfg, dt);

    const double gap0 = lead.initial_speed * settings.controller.t_gap_cacc + settings.controller.g_min +
                        settings.initial_gap_perturbation;
    VehicleState p{gap0 + settings.vehicle_length, lead.initial_speed, 0.0};
    VehicleState e{0.0, lead.initial_speed, 0.0};

    std::mt19937_64 rng(excitation_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double event_prob = settings.excitation_rate / 60.0 * dt;
    std::bernoulli_distribution fire(std::min(1.0, event_prob));

    std::vector<DatasetRecord> records;
    records.reserve(lead.size());
    for (std::size_t k = 0; k < lead.size(); ++k) {
        if (event_prob > 0.0 && fire(rng)) {
            const double g = gap(p, e, settings.vehicle_length);
            const double shift = unit(rng) * settings.excitation_gap;
            e.position -= std::max(shift, -0.5 * g); // never closes more than half the gap
            e.velocity = std::max(0.0, e.velocity + unit(rng) * settings.excitation_speed);
        }
        const double a_p = lead.accel[k];
        sensors.observe(static_cast<std::int64_t>(k), p.velocity, gap(p, e, settings.vehicle_length));
        const auto& s = sensors.published();
        const ControllerInput in{a_p, s.v_p, e.velocity, s.gap};
        const auto out = comp(in, settings.controller, ControlLaw::Cacc);
        records.push_back({lead.time(k), a_p, s.v_p, e.velocity, s.gap, out.accel, false});
        p = integrate_step(p, a_p, settings.generator.lead_limits, dt);
        e = integrate_step(e, out.accel, settings.ego_limits, dt);
    }
    return records;
}

std::vector<EnvironmentDataset> collect_benign_dataset(const std::vector<Environment>& envs,
                                                       const CollectionSettings& settings,
                                                       const ProfileTable& table, unsigned jobs) {
    settings.validate();
    std::vector<EnvironmentDataset> out(envs.size());
    parallel_for(envs.size(), jobs, [&](std::size_t i) {
        auto profile = profile_for(envs[i], table);
        profile.rng_seed = derive_seed(settings.master_seed, "trajectory", environment_index(envs[i]));
        auto gen = settings.generator;
        const auto lead = generate_lead_trajectory(profile, gen);
        EnvironmentDataset ds;
        ds.environment = envs[i];
        ds.records = record_benign_run(lead, settings,
                                       derive_seed(settings.master_seed, "excitation", environment_index(envs[i])));
        ds.train_count = static_cast<std::size_t>(
            std::floor(settings.train_fraction * static_cast<double>(ds.records.size())));
        out[i] = std::move(ds);
    });
    return out;
}

GlobalSplit aggregate(const std::vector<EnvironmentDataset>& datasets) {
    GlobalSplit g;
    for (const auto& ds : datasets) {
        const auto tr = ds.train();
        const auto te = ds.test();
        g.train.insert(g.train.end(), tr.begin(), tr.end());
        g.test.insert(g.test.end(), te.begin(), te.end());
    }
    return g;
}

std::string format_dataset_csv(std::span<const DatasetRecord> records) {
    std::string out(kDatasetHeader);
    out += '\n';
    char buf[256];
    for (const auto& r : records) {
        const int len = std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", r.t, r.a_p, r.v_p,
                                      r.v_e, r.gap, r.a_e_response, r.anomaly_flag ? 1 : 0);
        out.append(buf, static_cast<std::size_t>(len));
    }
    return out;
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
    write_file(path, format_dataset_csv(records));
}

std::vector<DatasetRecord> parse_dataset_csv(std::string_view text) {
    auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != kDatasetHeader)
        throw ParseError("dataset header must be '" + std::string(kDatasetHeader) + "'", 1);
    std::vector<DatasetRecord> out;
    out.reserve(lines.size());
    static constexpr std::string_view cols[] = {"t", "a_p", "v_p", "v_e", "gap", "a_e_response"};
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (trim(lines[r]).empty()) continue;
        const long row = static_cast<long>(r) + 1;
        const auto f = split(lines[r], ',');
        if (f.size() != 7) throw ParseError("expected 7 fields", row);
        double v[6];
        for (int c = 0; c < 6; ++c) v[c] = parse_double(f[static_cast<std::size_t>(c)], row, cols[c]);
        const auto flag = trim(f[6]);
        if (flag != "0" && flag != "1") throw ParseError("column 'anomaly_flag' must be 0 or 1", row);
        out.push_back({v[0], v[1], v[2], v[3], v[4], v[5], flag == "1"});
    }
    return out;
}

std::vector<DatasetRecord> read_dataset_csv(const std::filesystem::path& path) {
    return parse_dataset_csv(read_file(path));
}

} // namespace raccon
