#include "raccon/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "raccon/default_config.hpp"
#include "raccon/errors.hpp"
#include "raccon/parallel.hpp"
#include "raccon/seeding.hpp"
#include "raccon/version.hpp"

namespace raccon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* type_name(const json& j) {
    if (j.is_number()) return "number";
    if (j.is_boolean()) return "boolean";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    if (j.is_object()) return "object";
    return "null";
}

bool same_kind(const json& schema, const json& value) {
    if (schema.is_number()) {
        if (!value.is_number()) return false;
        if (schema.is_number_integer() && !value.is_number_integer()) return false;
        return true;
    }
    return std::string_view(type_name(schema)) == type_name(value);
}

void check_against(const json& schema, const json& value, const std::string& path) {
    if (!same_kind(schema, value))
        throw ConfigError("config " + (path.empty() ? std::string("/") : path) + ": expected " + type_name(schema) +
                          ", got " + type_name(value));
    if (schema.is_object()) {
        for (const auto& [key, v] : value.items()) {
            if (!schema.contains(key)) throw ConfigError("config " + path + "/" + key + ": unknown key");
            check_against(schema.at(key), v, path + "/" + key);
        }
    } else if (schema.is_array() && !schema.empty()) {
        for (std::size_t i = 0; i < value.size(); ++i)
            check_against(schema.front(), value[i], path + "/" + std::to_string(i));
    }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + "/" + key + ": " + e.what());
    }
}

// Runs `fn` and prefixes any ConfigError with the section path.
template <typename Fn>
void checked(const std::string& path, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind("config ", 0) == 0) throw;
        throw ConfigError("config " + path + ": " + msg);
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Sidecar holding everything that legitimately differs between reruns.
void write_sidecar(const fs::path& path, const std::string& command) {
    json j{{"command", command}, {"created_at", utc_timestamp()}, {"version", std::string(kVersion)}};
    write_text(path, j.dump(2) + "\n");
}

// outdir and jobs never change an artifact, so they stay out of the hash.
std::string config_hash(const RunConfig& rc) {
    json j = rc.resolved;
    j.erase("outdir");
    j.erase("jobs");
    return sha256_hex(j.dump());
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

LeadTrajectory make_trajectory(const RunConfig& rc, const std::string& env_name, double duration,
                               std::string_view domain, const std::string& csv) {
    if (!csv.empty()) {
        const auto env = Environment::parse(env_name);
        const auto profile = profile_for(env, rc.profiles);
        return import_trajectory_csv(csv, rc.pipeline.dt, profile.cruise_speed_mean);
    }
    const auto env = Environment::parse(env_name);
    auto profile = profile_for(env, rc.profiles);
    profile.duration = duration;
    profile.rng_seed = derive_seed(rc.master_seed, domain, environment_index(env));
    return generate_lead_trajectory(profile, rc.generator);
}

fs::path default_model_path(const RunConfig& rc, ModelKind kind) {
    return rc.outdir / "train" / to_string(kind) / "model.json";
}

struct LoadedModels {
    Models models;
    json hashes = json::object();
};

MlpModel load_checked(const fs::path& path, ModelKind kind, json& hashes) {
    if (!fs::exists(path))
        throw ModelError("model file " + path.string() + " not found; run `raccon train " + to_string(kind) +
                         "` first or set models paths in the config");
    auto m = load_model(path);
    if (m.kind != kind) throw ModelError(path.string() + " holds a " + to_string(m.kind) + ", not a " + to_string(kind));
    hashes[to_string(kind)] = sha256_file(path);
    return m;
}

LoadedModels load_models(const RunConfig& rc, bool need_estimator) {
    LoadedModels lm;
    if (rc.predictor_kind == "oracle") {
        lm.models.predictor = NormalBehaviorModel::controller_oracle(rc.pipeline.controller);
        lm.hashes["predictor"] = "controller-oracle";
    } else {
        const fs::path p = rc.predictor_path.empty() ? default_model_path(rc, ModelKind::Predictor) : fs::path(rc.predictor_path);
        lm.models.predictor = NormalBehaviorModel::from_mlp(load_checked(p, ModelKind::Predictor, lm.hashes));
    }
    if (!need_estimator) return lm;
    if (rc.estimator_kind == "acc") {
        lm.models.estimator = ResponseEstimatorModel::acc_fallback(rc.pipeline.controller);
        lm.hashes["response-estimator"] = "acc-law";
    } else {
        const fs::path p =
            rc.estimator_path.empty() ? default_model_path(rc, ModelKind::ResponseEstimator) : fs::path(rc.estimator_path);
        lm.models.estimator =
            ResponseEstimatorModel::from_mlp(load_checked(p, ModelKind::ResponseEstimator, lm.hashes));
    }
    return lm;
}

// A name, "none", or a path to a JSON attack/campaign file.
std::vector<AttackSpec> resolve_attacks(const RunConfig& rc, const std::string& ref, double start, double end,
                                        json& hashes) {
    if (ref == "none") return {};
    if (fs::exists(ref) && fs::is_regular_file(ref)) {
        const auto text = read_text(ref);
        hashes["attack_file"] = sha256_hex(text);
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("attack file " + ref + ": " + e.what());
        }
        auto specs = campaign_from_json(j);
        for (const auto& s : specs) s.validate(rc.pipeline.dt);
        return specs;
    }
    auto spec = builtin_attack(ref, start, end);
    spec.rng_seed = derive_seed(rc.master_seed, "attack", fnv1a(spec.name));
    spec.validate(rc.pipeline.dt);
    return {spec};
}

std::string format_buckets(const ThwBuckets& b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "below=%.2f%% ideal=%.2f%% above=%.2f%% max_thw=%.3f collision=%s", b.frac_below,
                  b.frac_ideal, b.frac_above, b.max_thw, b.collision ? "yes" : "no");
    return buf;
}

// ---- commands ----

int cmd_generate(const RunConfig& rc) {
    const auto dir = rc.outdir / "generate-data" / rc.dataset_name;
    const auto datasets = collect_benign_dataset(rc.environments, rc.collection, rc.profiles, rc.jobs);
    json manifest;
    manifest["config_sha256"] = config_hash(rc);
    manifest["master_seed"] = rc.master_seed;
    manifest["train_fraction"] = rc.collection.train_fraction;
    manifest["header"] = std::string(kDatasetHeader);
    manifest["environments"] = json::array();
    for (const auto& ds : datasets) {
        const auto name = ds.environment.name() + ".csv";
        const auto text = format_dataset_csv(ds.records);
        write_text(dir / name, text);
        manifest["environments"].push_back({{"environment", ds.environment.name()},
                                            {"file", name},
                                            {"rows", ds.records.size()},
                                            {"train_rows", ds.train_count},
                                            {"sha256", sha256_hex(text)}});
    }
    const auto global = aggregate(datasets);
    const auto train_text = format_dataset_csv(global.train);
    const auto test_text = format_dataset_csv(global.test);
    write_text(dir / "global_train.csv", train_text);
    write_text(dir / "global_test.csv", test_text);
    manifest["global"] = {{"train_file", "global_train.csv"},
                          {"test_file", "global_test.csv"},
                          {"train_rows", global.train.size()},
                          {"test_rows", global.test.size()},
                          {"train_sha256", sha256_hex(train_text)},
                          {"test_sha256", sha256_hex(test_text)}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    write_sidecar(dir / "manifest.meta.json", "generate-data");
    std::cout << "wrote " << datasets.size() << " environment datasets (" << global.train.size() << " train / "
              << global.test.size() << " test rows) to " << dir.string() << "\n";
    return kExitOk;
}

struct LoadedDataset {
    std::vector<EnvironmentDataset> envs;
    std::string manifest_sha256;
};

LoadedDataset load_dataset(const RunConfig& rc) {
    const fs::path dir = rc.dataset_dir.empty() ? rc.outdir / "generate-data" / rc.dataset_name : fs::path(rc.dataset_dir);
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw ConfigError("no dataset manifest at " + manifest_path.string() +
                          "; run `raccon generate-data` first or set dataset.dir");
    const auto text = read_text(manifest_path);
    LoadedDataset out;
    out.manifest_sha256 = sha256_hex(text);
    json manifest;
    try {
        manifest = json::parse(text);
        for (const auto& e : manifest.at("environments")) {
            const auto env = Environment::parse(e.at("environment").get<std::string>());
            if (std::find(rc.environments.begin(), rc.environments.end(), env) == rc.environments.end()) continue;
            EnvironmentDataset ds;
            ds.environment = env;
            ds.records = read_dataset_csv(dir / e.at("file").get<std::string>());
            ds.train_count = e.at("train_rows").get<std::size_t>();
            if (ds.train_count > ds.records.size()) throw ParseError("manifest train_rows exceeds file length");
            out.envs.push_back(std::move(ds));
        }
    } catch (const json::exception& e) {
        throw ParseError("dataset manifest " + manifest_path.string() + ": " + e.what());
    }
    if (out.envs.empty()) throw ConfigError("dataset holds none of the selected environments");
    return out;
}

json train_one(const RunConfig& rc, std::span<const DatasetRecord> train_set, std::span<const DatasetRecord> test_set,
               ModelKind kind, std::uint64_t seed_index, const fs::path& model_path, TrainResult& result) {
    TrainConfig tc = rc.training;
    tc.rng_seed = derive_seed(rc.master_seed, "train-" + to_string(kind), seed_index);
    result = train(train_set, test_set, tc, kind);
    const auto text = model_to_json(result.model);
    write_text(model_path, text);
    return {{"model_sha256", sha256_hex(text)},
            {"best_epoch", result.report.best_epoch},
            {"best_validation_mae", result.report.best_validation_mae}};
}

int cmd_train(const RunConfig& rc, const std::string& kind_arg, bool per_environment) {
    std::vector<ModelKind> kinds;
    if (kind_arg == "both") kinds = {ModelKind::Predictor, ModelKind::ResponseEstimator};
    else kinds = {parse_model_kind(kind_arg)};
    const auto data = load_dataset(rc);
    const auto global = aggregate(data.envs);

    for (ModelKind kind : kinds) {
        const auto dir = rc.outdir / "train" / to_string(kind);
        TrainResult result;
        auto report = train_one(rc, global.train, global.test, kind, 0, dir / "model.json", result);
        std::string epochs = "epoch,train_mae,validation_mae\n";
        char buf[96];
        for (const auto& e : result.report.epochs) {
            std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.epoch, e.train_mae, e.validation_mae);
            epochs += buf;
        }
        write_text(dir / "epochs.csv", epochs);
        report["kind"] = to_string(kind);
        report["dataset_manifest_sha256"] = data.manifest_sha256;
        report["config_sha256"] = config_hash(rc);
        report["train_rows"] = global.train.size();
        report["validation_rows"] = global.test.size();
        const bool gated = kind == ModelKind::Predictor;
        if (gated) {
            report["mae_gate"] = rc.mae_gate;
            report["gate_passed"] = result.report.best_validation_mae <= rc.mae_gate;
        }
        std::printf("%s: validation MAE %.6f m/s^2 (best epoch %zu)%s\n", to_string(kind).c_str(),
                    result.report.best_validation_mae, result.report.best_epoch,
                    gated ? (result.report.best_validation_mae <= rc.mae_gate ? " gate: pass" : " gate: FAIL") : "");

        if (per_environment) {
            std::string table = "environment,unique_mae,global_mae\n";
            json per_env = json::array();
            for (const auto& ds : data.envs) {
                TrainResult unique;
                const auto path = dir / "per-environment" / (ds.environment.name() + ".json");
                auto r = train_one(rc, ds.train(), ds.test(), kind, 1 + environment_index(ds.environment), path,
                                   unique);
                const double unique_mae = mae(unique.model, ds.test());
                const double global_mae = mae(result.model, ds.test());
                std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", unique_mae, global_mae);
                table += ds.environment.name() + buf;
                r["environment"] = ds.environment.name();
                r["unique_mae"] = unique_mae;
                r["global_mae"] = global_mae;
                per_env.push_back(r);
            }
            write_text(dir / "per-environment" / "comparison.csv", table);
            report["per_environment"] = per_env;
        }
        write_text(dir / "report.json", report.dump(2) + "\n");
        write_sidecar(dir / "report.meta.json", "train");
    }
    return kExitOk;
}

int cmd_simulate(const RunConfig& rc, bool all_modes) {
    json hashes;
    const auto attacks = resolve_attacks(rc, rc.campaign.attack, rc.campaign.attack_start, rc.campaign.attack_end, hashes);
    std::vector<PipelineMode> modes =
        all_modes ? std::vector<PipelineMode>{PipelineMode::Raccon, PipelineMode::DegradeAcc, PipelineMode::Naive}
                  : std::vector<PipelineMode>{rc.campaign.mode};
    const bool need_est = std::find(modes.begin(), modes.end(), PipelineMode::Raccon) != modes.end();
    auto lm = load_models(rc, need_est);
    const auto lead = make_trajectory(rc, rc.campaign.environment, rc.campaign.duration, "campaign",
                                      rc.campaign.trajectory_csv);
    if (!rc.campaign.trajectory_csv.empty()) hashes["trajectory_csv"] = sha256_file(rc.campaign.trajectory_csv);

    std::vector<std::optional<AttackSpec>> runs;
    if (attacks.empty()) runs.push_back(std::nullopt);
    for (const auto& a : attacks) runs.emplace_back(a);

    struct Job {
        std::size_t run;
        PipelineMode mode;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < runs.size(); ++r)
        for (auto m : modes) jobs.push_back({r, m});
    std::vector<ThwBuckets> buckets(jobs.size());
    std::vector<std::string> lines(jobs.size());

    parallel_for(jobs.size(), rc.jobs, [&](std::size_t i) {
        const auto& attack = runs[jobs[i].run];
        const std::string name = attack ? attack->name : "none";
        CampaignConfig cfg;
        cfg.name = name;
        cfg.pipeline = rc.pipeline;
        cfg.mode = jobs[i].mode;
        cfg.recovery_tail = rc.campaign.recovery_tail;
        cfg.initial_gap_perturbation = rc.campaign.initial_gap_perturbation;
        const auto log = run_campaign(lead, attack, cfg, lm.models);
        const auto dir = rc.outdir / "simulate" / name;
        const auto mode = to_string(jobs[i].mode);
        const auto csv = format_runlog_csv(log);
        write_text(dir / (mode + ".runlog.csv"), csv);
        auto report = campaign_report(log, rc.campaign.recovery_tail);
        report["environment"] = rc.campaign.environment;
        report["inputs"] = hashes;
        report["inputs"]["config_sha256"] = config_hash(rc);
        report["runlog_sha256"] = sha256_hex(csv);
        report["metadata"] = log.metadata;
        write_text(dir / (mode + ".report.json"), report.dump(2) + "\n");
        write_sidecar(dir / (mode + ".meta.json"), "simulate");
        buckets[i] = thw_buckets(log, evaluation_window(log, rc.campaign.recovery_tail));
        lines[i] = name + " [" + mode + "] " + format_buckets(buckets[i]);
    });
    for (const auto& l : lines) std::cout << l << "\n";

    if (all_modes) {
        std::vector<ModeComparison> rows;
        for (std::size_t r = 0; r < runs.size(); ++r)
            rows.push_back({runs[r] ? runs[r]->name : "none", buckets[r * 3], buckets[r * 3 + 1], buckets[r * 3 + 2]});
        const auto dir = rc.outdir / "simulate" / (runs.size() == 1 ? (runs[0] ? runs[0]->name : "none") : "campaign");
        write_text(dir / "table.md", resiliency_table_markdown(rows));
    }
    return kExitOk;
}

int cmd_sweep(const RunConfig& rc, const std::string& attack_ref) {
    json hashes;
    AttackSpec reference = reference_sweep_attack(rc.sweep.attack_start, rc.sweep.attack_end);
    if (!attack_ref.empty() && attack_ref != "none") {
        const auto specs = resolve_attacks(rc, attack_ref, rc.sweep.attack_start, rc.sweep.attack_end, hashes);
        if (specs.size() != 1) throw ConfigError("sweep needs exactly one reference attack");
        reference = specs.front();
    }
    auto lm = load_models(rc, false);
    std::vector<LeadTrajectory> trajectories;
    for (const auto& env : rc.environments)
        trajectories.push_back(make_trajectory(rc, env.name(), rc.sweep.duration, "sweep", ""));
    SweepSettings settings;
    settings.thresholds = rc.sweep.thresholds;
    settings.reference_attack = reference;
    settings.base.pipeline = rc.pipeline;
    settings.base.recovery_tail = rc.campaign.recovery_tail;
    const auto result = threshold_sweep(rc.environments, trajectories, settings, lm.models, rc.jobs);

    const auto dir = rc.outdir / "sweep" / reference.name;
    write_text(dir / "quantiles.csv", sweep_quantiles_csv(result));
    write_text(dir / "matrix.csv", sweep_matrix_csv(result));
    json report;
    report["reference_attack"] = attack_to_json(reference);
    report["inputs"] = hashes;
    report["inputs"]["models"] = lm.hashes;
    report["inputs"]["config_sha256"] = config_hash(rc);
    report["environments"] = rc.environments.size();
    report["thresholds"] = rc.sweep.thresholds;
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_sidecar(dir / "report.meta.json", "sweep");
    std::cout << "swept " << rc.sweep.thresholds.size() << " thresholds x " << rc.environments.size()
              << " environments into " << dir.string() << "\n";
    return kExitOk;
}

int cmd_subversion(const RunConfig& rc, std::optional<double> threshold) {
    auto lm = load_models(rc, false);
    const auto lead = make_trajectory(rc, rc.subversion.environment, rc.subversion.duration, "subversion", "");
    CampaignConfig base;
    base.pipeline = rc.pipeline;
    base.recovery_tail = rc.campaign.recovery_tail;
    auto settings = SubversionSettings::defaults(base);
    settings.bias_grid = log_bias_ladder(rc.subversion.bias_min, rc.subversion.bias_max);
    settings.sinusoid_frequency = rc.subversion.sinusoid_frequency;
    settings.attack_start = rc.subversion.attack_start;
    settings.attack_end = rc.subversion.attack_end;
    const SubversionScanner scanner(lead, settings, lm.models, rc.jobs);

    const auto dir = rc.outdir / "subversion" / rc.subversion.environment;
    json out;
    out["environment"] = rc.subversion.environment;
    out["baseline_in_band"] = scanner.baseline_in_band();
    out["inputs"] = {{"models", lm.hashes}, {"config_sha256", config_hash(rc)}};
    json tol = json::array();
    for (const auto& s : scanner.scans()) {
        tol.push_back({{"class", s.name},
                       {"tolerable_constant", s.tolerable_constant ? json(*s.tolerable_constant) : json()},
                       {"tolerable_sinusoidal", s.tolerable_sinusoidal ? json(*s.tolerable_sinusoidal) : json()}});
    }
    out["tolerable_bias"] = tol;
    if (threshold) {
        const auto row = scanner.row(*threshold);
        out["row"] = subversion_row_to_json(row);
        std::cout << subversion_row_to_json(row).dump(2) << "\n";
        char name[48];
        std::snprintf(name, sizeof name, "row-%.4g.json", *threshold);
        write_text(dir / name, out.dump(2) + "\n");
        write_sidecar(dir / (std::string(name) + ".meta"), "subversion");
        return kExitOk;
    }
    std::string table = "threshold,fp_benign_percent";
    for (const auto& s : scanner.scans())
        table += "," + s.name + "_tolerable," + s.name + "_min_constant," + s.name + "_min_sinusoidal," + s.name +
                 "_subvertible";
    table += "\n";
    json rows = json::array();
    for (double t : rc.subversion.thresholds) {
        const auto row = scanner.row(t);
        rows.push_back(subversion_row_to_json(row));
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4g,%.4f", t, row.fp_benign);
        table += buf;
        for (const auto& c : row.classes) {
            std::snprintf(buf, sizeof buf, ",%.4g,", c.tolerable);
            table += buf;
            table += c.min_constant ? std::to_string(*c.min_constant) : "";
            table += ",";
            table += c.min_sinusoidal ? std::to_string(*c.min_sinusoidal) : "";
            table += c.subvertible ? ",yes" : ",no";
        }
        table += "\n";
    }
    const auto tuned = tune_threshold(scanner, rc.subversion.thresholds);
    out["rows"] = rows;
    out["tuned_threshold"] = tuned ? json(*tuned) : json();
    write_text(dir / "table.csv", table);
    write_text(dir / "rows.json", out.dump(2) + "\n");
    write_sidecar(dir / "rows.meta.json", "subversion");
    std::cout << table;
    std::cout << "tuned threshold: " << (tuned ? std::to_string(*tuned) : std::string("none")) << "\n";
    return kExitOk;
}

int cmd_impact(const RunConfig& rc, const std::string& attack_ref) {
    json hashes;
    std::vector<AttackSpec> grid = default_impact_grid(rc.impact.attack_start, rc.impact.attack_end);
    if (!attack_ref.empty() && attack_ref != "none")
        grid = resolve_attacks(rc, attack_ref, rc.impact.attack_start, rc.impact.attack_end, hashes);
    const auto lead = make_trajectory(rc, rc.impact.environment, rc.impact.duration, "impact", "");
    CampaignConfig base;
    base.pipeline = rc.pipeline;
    base.recovery_tail = rc.campaign.recovery_tail;
    const auto entries = impact_analysis(grid, lead, base, rc.jobs);

    const auto dir = rc.outdir / "impact" / rc.impact.environment;
    write_text(dir / "table.csv", impact_table_csv(entries));
    std::string traces = "t";
    for (const auto& e : entries) traces += "," + e.name;
    traces += "\n";
    std::size_t len = 0;
    for (const auto& e : entries) len = std::max(len, e.thw_trace.size());
    char buf[32];
    for (std::size_t k = 0; k < len; ++k) {
        std::snprintf(buf, sizeof buf, "%.2f", rc.impact.attack_start + static_cast<double>(k) * rc.pipeline.dt);
        traces += buf;
        for (const auto& e : entries) {
            traces += ",";
            if (k < e.thw_trace.size()) {
                std::snprintf(buf, sizeof buf, "%.6f", e.thw_trace[k]);
                traces += buf;
            }
        }
        traces += "\n";
    }
    write_text(dir / "traces.csv", traces);
    json report;
    report["inputs"] = hashes;
    report["inputs"]["config_sha256"] = config_hash(rc);
    report["attacks"] = json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        report["attacks"].push_back({{"spec", attack_to_json(grid[i])},
                                     {"thw_buckets", buckets_to_json(entries[i].buckets)},
                                     {"displacement_integral", entries[i].displacement_integral}});
    }
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_sidecar(dir / "report.meta.json", "impact");
    std::cout << impact_table_csv(entries);
    return kExitOk;
}

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> outdir;
    std::optional<std::string> environments;
    std::optional<std::string> mode;
    std::optional<std::string> attack;
    std::optional<double> threshold;
    std::optional<std::string> predictor;
    std::optional<std::string> estimator;
};

RunConfig load_config(const Overrides& o, bool attack_sets_campaign) {
    json user = json::object();
    if (!o.config_path.empty()) {
        const auto text = read_text(o.config_path);
        try {
            user = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + o.config_path + ": " + e.what());
        }
    }
    json merged = merge_config(user);
    if (o.seed) merged["master_seed"] = *o.seed;
    if (o.jobs) merged["jobs"] = *o.jobs;
    if (o.outdir) merged["outdir"] = *o.outdir;
    if (o.environments) merged["environments"] = split_list(*o.environments);
    if (o.mode && *o.mode != "all") merged["campaign"]["mode"] = *o.mode;
    if (o.attack && attack_sets_campaign) merged["campaign"]["attack"] = *o.attack;
    if (o.threshold) merged["detector"]["anomaly_threshold"] = *o.threshold;
    if (o.predictor) merged["models"]["predictor_kind"] = *o.predictor;
    if (o.estimator) merged["models"]["estimator_kind"] = *o.estimator;
    return parse_run_config(merged);
}

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--outdir", o.outdir, "output root directory");
    sub->add_option("--environments", o.environments, "comma-separated environments or 'all'");
}

} // namespace

const json& default_config() {
    static const json j = json::parse(kDefaultConfigJson);
    return j;
}

json merge_config(const json& user) {
    const auto& defaults = default_config();
    check_against(defaults, user, "");
    json merged = defaults;
    merged.merge_patch(user);
    return merged;
}

RunConfig parse_run_config(const json& j) {
    check_against(default_config(), j, "");
    RunConfig rc;
    rc.resolved = j;
    if (!j.at("master_seed").is_number_unsigned()) throw ConfigError("config /master_seed: must be a non-negative integer");
    rc.master_seed = get<std::uint64_t>(j, "master_seed", "");
    rc.outdir = get<std::string>(j, "outdir", "");
    const auto jobs = get<long>(j, "jobs", "");
    if (jobs < 1) throw ConfigError("config /jobs: must be at least 1");
    rc.jobs = static_cast<unsigned>(jobs);
    if (get<int>(j, "schema_version", "") != 1) throw ConfigError("config /schema_version: unsupported version");

    auto& pc = rc.pipeline;
    pc.dt = get<double>(j, "dt", "");
    pc.vehicle_length = get<double>(j, "vehicle_length", "");
    pc.lookahead_horizon = get<double>(j, "lookahead_horizon", "");
    const auto& c = j.at("controller");
    checked("/controller", [&] {
        pc.controller.k_a = get<double>(c, "k_a", "/controller");
        pc.controller.k_v = get<double>(c, "k_v", "/controller");
        pc.controller.k_g = get<double>(c, "k_g", "/controller");
        pc.controller.g_min = get<double>(c, "g_min", "/controller");
        pc.controller.t_gap_acc = get<double>(c, "t_gap_acc", "/controller");
        pc.controller.t_gap_cacc = get<double>(c, "t_gap_cacc", "/controller");
        pc.controller.d_e_max = get<double>(c, "d_e_max", "/controller");
        pc.controller.d_p_max = get<double>(c, "d_p_max", "/controller");
        pc.controller.acc_variant = parse_acc_variant(get<std::string>(c, "acc_variant", "/controller"));
        pc.controller.validate();
    });
    auto limits = [&](const char* key, ActuatorLimits& out) {
        const std::string path = std::string("/") + key;
        checked(path, [&] {
            out.max_accel = get<double>(j.at(key), "max_accel", path);
            out.max_decel = get<double>(j.at(key), "max_decel", path);
            out.validate();
        });
    };
    limits("ego_limits", pc.ego_limits);
    limits("lead_limits", pc.lead_limits);
    checked("/sensor", [&] {
        pc.sensor.f_normal = get<double>(j.at("sensor"), "f_normal", "/sensor");
        pc.sensor.f_max = get<double>(j.at("sensor"), "f_max", "/sensor");
        pc.sensor.validate(pc.dt);
    });
    checked("/detector", [&] {
        pc.detector.anomaly_threshold = get<double>(j.at("detector"), "anomaly_threshold", "/detector");
        pc.detector.enabled = get<bool>(j.at("detector"), "enabled", "/detector");
        pc.detector.validate();
    });
    checked("", [&] { pc.validate(); });

    checked("/environments", [&] {
        const auto names = j.at("environments").get<std::vector<std::string>>();
        if (names.empty()) throw ConfigError("at least one environment is required");
        for (const auto& n : names) {
            if (n == "all") {
                rc.environments = all_environments();
                break;
            }
            const auto env = Environment::parse(n);
            if (std::find(rc.environments.begin(), rc.environments.end(), env) == rc.environments.end())
                rc.environments.push_back(env);
        }
    });

    const auto& pr = j.at("profiles");
    auto& t = rc.profiles;
    checked("/profiles", [&] {
        const std::pair<const char*, double*> fields[] = {
            {"highway_speed", &t.highway_speed},
            {"suburban_speed", &t.suburban_speed},
            {"city_speed", &t.city_speed},
            {"highway_event_rate", &t.highway_event_rate},
            {"suburban_event_rate", &t.suburban_event_rate},
            {"city_event_rate", &t.city_event_rate},
            {"highway_speed_std", &t.highway_speed_std},
            {"suburban_speed_std", &t.suburban_speed_std},
            {"city_speed_std", &t.city_speed_std},
            {"highway_stop_probability", &t.highway_stop_probability},
            {"suburban_stop_probability", &t.suburban_stop_probability},
            {"city_stop_probability", &t.city_stop_probability},
            {"base_accel_std", &t.base_accel_std},
            {"clear_scale", &t.clear_scale},
            {"windy_scale", &t.windy_scale},
            {"snowy_scale", &t.snowy_scale},
            {"rainy_scale", &t.rainy_scale},
            {"night_speed_scale", &t.night_speed_scale},
            {"smoothing_time_constant", &t.smoothing_time_constant},
            {"duration", &t.duration}};
        for (const auto& [key, dst] : fields) {
            *dst = get<double>(pr, key, "/profiles");
            if (!(*dst >= 0.0)) throw ConfigError(std::string(key) + " must be non-negative");
        }
        if (!(t.duration > 0.0)) throw ConfigError("duration must be positive");
    });

    const auto& g = j.at("generator");
    auto& gs = rc.generator;
    checked("/generator", [&] {
        gs.dt = pc.dt;
        gs.lead_limits = pc.lead_limits;
        gs.speed_ceiling_factor = get<double>(g, "speed_ceiling_factor", "/generator");
        gs.restoring_gain = get<double>(g, "restoring_gain", "/generator");
        gs.event_min_duration = get<double>(g, "event_min_duration", "/generator");
        gs.event_max_duration = get<double>(g, "event_max_duration", "/generator");
        gs.stop_decel = get<double>(g, "stop_decel", "/generator");
        gs.stop_hold_min = get<double>(g, "stop_hold_min", "/generator");
        gs.stop_hold_max = get<double>(g, "stop_hold_max", "/generator");
        if (!(gs.speed_ceiling_factor >= 1.0)) throw ConfigError("speed_ceiling_factor must be >= 1");
        if (!(gs.event_min_duration > 0.0 && gs.event_max_duration >= gs.event_min_duration))
            throw ConfigError("event durations must satisfy 0 < min <= max");
        if (!(gs.stop_hold_min >= 0.0 && gs.stop_hold_max >= gs.stop_hold_min))
            throw ConfigError("stop holds must satisfy 0 <= min <= max");
        if (!(gs.stop_decel > 0.0) || !(gs.restoring_gain >= 0.0))
            throw ConfigError("stop_decel must be positive and restoring_gain non-negative");
    });

    const auto& d = j.at("dataset");
    checked("/dataset", [&] {
        rc.dataset_name = get<std::string>(d, "name", "/dataset");
        if (rc.dataset_name.empty() || rc.dataset_name.find('/') != std::string::npos)
            throw ConfigError("name must be a non-empty plain file name");
        rc.dataset_dir = get<std::string>(d, "dir", "/dataset");
        rc.collection.controller = pc.controller;
        rc.collection.ego_limits = pc.ego_limits;
        rc.collection.generator = gs;
        rc.collection.vehicle_length = pc.vehicle_length;
        rc.collection.sensor_f_normal = pc.sensor.f_normal;
        rc.collection.train_fraction = get<double>(d, "train_fraction", "/dataset");
        rc.collection.initial_gap_perturbation = get<double>(d, "initial_gap_perturbation", "/dataset");
        rc.collection.master_seed = rc.master_seed;
        rc.collection.excitation_rate = get<double>(d, "excitation_rate", "/dataset");
        rc.collection.excitation_gap = get<double>(d, "excitation_gap", "/dataset");
        rc.collection.excitation_speed = get<double>(d, "excitation_speed", "/dataset");
        rc.collection.validate();
    });

    const auto& tr = j.at("training");
    checked("/training", [&] {
        rc.training.hidden_layers = get<std::vector<int>>(tr, "hidden_layers", "/training");
        rc.training.hidden_activation = [&] {
            try {
                return parse_activation(get<std::string>(tr, "activation", "/training"));
            } catch (const ModelError& e) {
                throw ConfigError(e.what());
            }
        }();
        rc.training.learning_rate = get<double>(tr, "learning_rate", "/training");
        const auto batch = get<long>(tr, "batch_size", "/training");
        const auto epochs = get<long>(tr, "epochs", "/training");
        const auto patience = get<long>(tr, "early_stop_patience", "/training");
        if (batch < 1 || epochs < 1 || patience < 1)
            throw ConfigError("batch_size, epochs and early_stop_patience must be positive");
        rc.training.batch_size = static_cast<std::size_t>(batch);
        rc.training.epochs = static_cast<std::size_t>(epochs);
        rc.training.early_stop_patience = static_cast<std::size_t>(patience);
        rc.training.optimizer = parse_optimizer(get<std::string>(tr, "optimizer", "/training"));
        rc.training.momentum = get<double>(tr, "momentum", "/training");
        rc.mae_gate = get<double>(tr, "mae_gate", "/training");
        rc.training.validate();
    });

    const auto& m = j.at("models");
    checked("/models", [&] {
        rc.predictor_path = get<std::string>(m, "predictor", "/models");
        rc.estimator_path = get<std::string>(m, "response_estimator", "/models");
        rc.predictor_kind = get<std::string>(m, "predictor_kind", "/models");
        rc.estimator_kind = get<std::string>(m, "estimator_kind", "/models");
        if (rc.predictor_kind != "mlp" && rc.predictor_kind != "oracle")
            throw ConfigError("predictor_kind must be 'mlp' or 'oracle'");
        if (rc.estimator_kind != "mlp" && rc.estimator_kind != "acc")
            throw ConfigError("estimator_kind must be 'mlp' or 'acc'");
    });

    auto window = [](double start, double end, double duration) {
        if (!(start >= 0.0 && start < end)) throw ConfigError("attack_start must be >= 0 and before attack_end");
        if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    };
    const auto& cj = j.at("campaign");
    checked("/campaign", [&] {
        auto& cs = rc.campaign;
        cs.environment = get<std::string>(cj, "environment", "/campaign");
        Environment::parse(cs.environment);
        cs.duration = get<double>(cj, "duration", "/campaign");
        cs.attack_start = get<double>(cj, "attack_start", "/campaign");
        cs.attack_end = get<double>(cj, "attack_end", "/campaign");
        cs.recovery_tail = get<double>(cj, "recovery_tail", "/campaign");
        cs.initial_gap_perturbation = get<double>(cj, "initial_gap_perturbation", "/campaign");
        cs.trajectory_csv = get<std::string>(cj, "trajectory_csv", "/campaign");
        cs.attack = get<std::string>(cj, "attack", "/campaign");
        cs.mode = parse_pipeline_mode(get<std::string>(cj, "mode", "/campaign"));
        window(cs.attack_start, cs.attack_end, cs.duration);
        if (!(cs.recovery_tail >= 0.0)) throw ConfigError("recovery_tail must be non-negative");
    });
    const auto& sj = j.at("sweep");
    checked("/sweep", [&] {
        rc.sweep.thresholds = get<std::vector<double>>(sj, "thresholds", "/sweep");
        rc.sweep.duration = get<double>(sj, "duration", "/sweep");
        rc.sweep.attack_start = get<double>(sj, "attack_start", "/sweep");
        rc.sweep.attack_end = get<double>(sj, "attack_end", "/sweep");
        window(rc.sweep.attack_start, rc.sweep.attack_end, rc.sweep.duration);
        if (rc.sweep.thresholds.empty()) throw ConfigError("thresholds must not be empty");
        for (double x : rc.sweep.thresholds)
            if (!(x > 0.0)) throw ConfigError("thresholds must be positive");
    });
    const auto& vj = j.at("subversion");
    checked("/subversion", [&] {
        auto& s = rc.subversion;
        s.environment = get<std::string>(vj, "environment", "/subversion");
        Environment::parse(s.environment);
        s.duration = get<double>(vj, "duration", "/subversion");
        s.attack_start = get<double>(vj, "attack_start", "/subversion");
        s.attack_end = get<double>(vj, "attack_end", "/subversion");
        s.bias_min = get<double>(vj, "bias_min", "/subversion");
        s.bias_max = get<double>(vj, "bias_max", "/subversion");
        s.sinusoid_frequency = get<double>(vj, "sinusoid_frequency", "/subversion");
        s.thresholds = get<std::vector<double>>(vj, "thresholds", "/subversion");
        window(s.attack_start, s.attack_end, s.duration);
        log_bias_ladder(s.bias_min, s.bias_max);
        if (!(s.sinusoid_frequency > 0.0)) throw ConfigError("sinusoid_frequency must be positive");
        for (double x : s.thresholds)
            if (!(x > 0.0)) throw ConfigError("thresholds must be positive");
    });
    const auto& ij = j.at("impact");
    checked("/impact", [&] {
        auto& s = rc.impact;
        s.environment = get<std::string>(ij, "environment", "/impact");
        Environment::parse(s.environment);
        s.duration = get<double>(ij, "duration", "/impact");
        s.attack_start = get<double>(ij, "attack_start", "/impact");
        s.attack_end = get<double>(ij, "attack_end", "/impact");
        window(s.attack_start, s.attack_end, s.duration);
    });
    return rc;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

int run(const std::vector<std::string>& args) {
    std::vector<char*> argv;
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, char** argv) {
    CLI::App app{"Resilient CACC simulation, detection and mitigation toolkit"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kVersion));

    Overrides o;
    std::string kind = "predictor";
    bool per_env = false;
    std::string mode_arg;

    auto* gen = app.add_subcommand("generate-data", "record benign datasets for the selected environments");
    add_common(gen, o);

    auto* tr = app.add_subcommand("train", "train the predictor and/or response estimator");
    add_common(tr, o);
    tr->add_option("kind", kind, "predictor, response-estimator or both")
        ->check(CLI::IsMember({"predictor", "response-estimator", "both"}));
    tr->add_flag("--per-environment", per_env, "also train one model per environment");

    auto* sim = app.add_subcommand("simulate", "run one campaign");
    add_common(sim, o);
    sim->add_option("--mode", o.mode, "naive, degrade-acc, raccon or all")
        ->check(CLI::IsMember({"naive", "degrade-acc", "raccon", "all"}));
    sim->add_option("--attack", o.attack, "built-in attack name, attack JSON path or 'none'");
    sim->add_option("--threshold", o.threshold, "anomaly threshold (m/s^2)");
    sim->add_option("--predictor", o.predictor, "mlp or oracle")->check(CLI::IsMember({"mlp", "oracle"}));
    sim->add_option("--estimator", o.estimator, "mlp or acc")->check(CLI::IsMember({"mlp", "acc"}));

    auto* sweep = app.add_subcommand("sweep", "anomaly-threshold sweep across environments");
    add_common(sweep, o);
    sweep->add_option("--attack", o.attack, "reference attack name or JSON path");
    sweep->add_option("--predictor", o.predictor, "mlp or oracle")->check(CLI::IsMember({"mlp", "oracle"}));

    auto* sub = app.add_subcommand("subversion", "detector subversion scan");
    add_common(sub, o);
    sub->add_option("--threshold", o.threshold, "report a single threshold row");
    sub->add_option("--predictor", o.predictor, "mlp or oracle")->check(CLI::IsMember({"mlp", "oracle"}));

    auto* imp = app.add_subcommand("impact", "attack impact analysis under naive CACC");
    add_common(imp, o);
    imp->add_option("--attack", o.attack, "attack grid JSON path (default: built-in grid)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        auto* chosen = app.get_subcommands().front();
        const std::string name = chosen->get_name();
        if (name == "generate-data") return cmd_generate(load_config(o, false));
        if (name == "train") return cmd_train(load_config(o, false), kind, per_env);
        if (name == "simulate") return cmd_simulate(load_config(o, true), o.mode && *o.mode == "all");
        if (name == "sweep") return cmd_sweep(load_config(o, false), o.attack.value_or(""));
        if (name == "subversion") {
            auto rc = load_config(o, false);
            return cmd_subversion(rc, o.threshold ? std::optional<double>(rc.pipeline.detector.anomaly_threshold)
                                                  : std::nullopt);
        }
        if (name == "impact") return cmd_impact(load_config(o, false), o.attack.value_or(""));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}

} // namespace raccon::cli
