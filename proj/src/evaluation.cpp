#include "raccon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "raccon/errors.hpp"
#include "raccon/parallel.hpp"
#include "raccon/seeding.hpp"
#include "raccon/sensing.hpp"
#include "raccon/version.hpp"

namespace raccon {

namespace {

std::int64_t to_steps(double seconds, double dt) { return std::llround(seconds / dt); }

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string fmt_opt(const std::optional<double>& v, const char* spec = "%.4f") {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, *v);
    return buf;
}

std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

AttackSpec make_mutation(std::string name, FrequencyPattern pattern, BiasFunction bias, double start, double end) {
    AttackSpec s;
    s.name = std::move(name);
    s.operation = Operation::Mutation;
    s.pattern = pattern;
    s.bias = bias;
    s.start_time = start;
    s.end_time = end;
    s.impact_label = bias.shape == BiasShape::RandomUniform ? ImpactLabel::Instability
                     : bias.sign > 0                        ? ImpactLabel::Collision
                                                            : ImpactLabel::EfficiencyDegradation;
    s.rng_seed = fnv1a(s.name);
    return s;
}

BiasFunction signed_bias(BiasShape shape, double b, double f = 0.0) {
    return {shape, b < 0 ? -1 : +1, std::abs(b), f, 0.0, 0.0};
}

} // namespace

std::string to_string(PipelineMode mode) {
    switch (mode) {
    case PipelineMode::Naive: return "naive";
    case PipelineMode::DegradeAcc: return "degrade-acc";
    case PipelineMode::Raccon: return "raccon";
    }
    return "?";
}

PipelineMode parse_pipeline_mode(const std::string& name) {
    if (name == "naive") return PipelineMode::Naive;
    if (name == "degrade-acc") return PipelineMode::DegradeAcc;
    if (name == "raccon") return PipelineMode::Raccon;
    throw ConfigError("unknown mode '" + name + "' (expected naive, degrade-acc or raccon)");
}

RunLog run_campaign(const LeadTrajectory& lead, const std::optional<AttackSpec>& attack,
                    const CampaignConfig& config, const Models& models) {
    const auto& pc = config.pipeline;
    pc.validate();
    if (std::abs(lead.dt - pc.dt) > 1e-12) throw ConfigError("lead trajectory dt differs from the pipeline dt");
    if (lead.size() == 0) throw ConfigError("lead trajectory is empty");
    if (attack) attack->validate(pc.dt);
    if (config.mode == PipelineMode::Raccon && (!models.predictor || !models.estimator))
        throw ConfigError("raccon mode needs a predictor and a response estimator");
    if (config.mode == PipelineMode::DegradeAcc && !models.predictor)
        throw ConfigError("degrade-acc mode needs a predictor for detection");

    RunLog log;
    log.name = config.name;
    log.mode = config.mode;
    log.dt = pc.dt;
    log.attack = attack;
    log.steps.reserve(lead.size());

    const bool detector = config.mode != PipelineMode::Naive || (config.monitor && models.predictor.has_value());
    log.detector_present = detector;

    std::optional<RacconPipeline> pipeline;
    if (config.mode == PipelineMode::Raccon) pipeline.emplace(pc, *models.predictor, *models.estimator);
    SensorConfig normal_sensors = pc.sensor;
    normal_sensors.current = SensorRate::Normal;
    SensorFrontEnd sensors(normal_sensors, pc.dt);

    const auto& params = pc.controller;
    const double gap0 = lead.initial_speed * params.t_gap_cacc + params.g_min + config.initial_gap_perturbation;
    VehicleState p{gap0 + pc.vehicle_length, lead.initial_speed, 0.0};
    VehicleState e{0.0, lead.initial_speed, 0.0};
    double last_payload = 0.0;
    bool latched = false;

    for (std::size_t k = 0; k < lead.size(); ++k) {
        const auto step = static_cast<std::int64_t>(k);
        const double a_true = lead.accel[k];
        const double g = gap(p, e, pc.vehicle_length);

        StepRecord r;
        r.t = lead.time(k);
        r.pos_p = p.position;
        r.pos_e = e.position;
        r.v_p = p.velocity;
        r.v_e = e.velocity;
        r.gap = g;
        r.thw = time_headway(g, e.velocity);
        r.a_p_true = a_true;
        r.attack_active = attack && attack->active(step, pc.dt);
        if (detect_collision(g)) {
            log.steps.push_back(r);
            log.collision = true;
            log.collision_step = k;
            break;
        }

        const V2VMessage msg = attack ? apply_attack(*attack, step, a_true, pc.dt) : benign_message(step, a_true);
        r.delivered = msg.delivered;
        if (msg.delivered) last_payload = msg.payload_a_p;
        r.a_p_received = last_payload;

        double applied = 0.0;
        if (pipeline) {
            const auto d = pipeline->step(msg, TruthSample{p.velocity, g, e.velocity, a_true});
            r.a_e_pred = d.a_e_pred;
            r.a_e_cacc = d.a_e_cacc;
            r.deviation = d.deviation;
            r.anomaly_flag = d.anomaly_flag;
            r.no_comm = d.no_comm;
            r.mitigation_path = d.mitigation_path;
            if (d.mitigation_path == MitigationPath::CorrectedCacc) r.selected_t_gap = d.t_gap_c;
            if (d.mitigation_path == MitigationPath::ResponseEstimator) r.selected_t_gap = d.t_gap_est;
            applied = d.a_e_applied;
        } else {
            sensors.observe(step, p.velocity, g);
            const auto& s = sensors.published();
            const ControllerInput in{last_payload, s.v_p, e.velocity, s.gap};
            const auto cacc = comp(in, params, ControlLaw::Cacc);
            r.a_e_cacc = cacc.accel;
            r.no_comm = !msg.delivered;
            if (detector) {
                const double trusted = std::clamp(sensors.published_lead_accel().value_or(0.0), -params.d_p_max,
                                                  pc.lead_limits.max_accel);
                const auto det =
                    detect(*models.predictor, params, pc.detector, in, trusted, msg.delivered, OracleView{a_true});
                r.a_e_pred = det.a_e_pred;
                r.deviation = det.deviation;
                r.anomaly_flag = det.anomaly_flag;
            }
            if (config.mode == PipelineMode::DegradeAcc && (r.anomaly_flag || r.no_comm)) latched = true;
            if (latched) {
                applied = comp(in, params, ControlLaw::Acc).accel;
                r.mitigation_path = MitigationPath::DegradeAcc;
            } else {
                applied = cacc.accel;
            }
        }
        r.a_e_applied = applied;
        log.steps.push_back(r);

        p = integrate_step(p, a_true, pc.lead_limits, pc.dt);
        e = integrate_step(e, applied, pc.ego_limits, pc.dt);
    }

    auto& md = log.metadata;
    md["name"] = log.name;
    md["mode"] = to_string(log.mode);
    md["version"] = std::string(kVersion);
    md["dt"] = pc.dt;
    md["steps"] = log.steps.size();
    md["vehicle_length"] = pc.vehicle_length;
    md["thw_velocity_floor"] = kThwVelocityFloor;
    md["anomaly_threshold"] = pc.detector.anomaly_threshold;
    md["sensor_f_normal"] = pc.sensor.f_normal;
    md["sensor_f_max"] = pc.sensor.f_max;
    md["acc_variant"] = to_string(params.acc_variant);
    md["predictor_input_on_lost_message"] = "last-delivered-payload";
    md["predictor"] = !models.predictor ? "none" : models.predictor->is_oracle() ? "controller-oracle" : "mlp";
    md["detector_present"] = detector;
    md["recovery_tail"] = config.recovery_tail;
    md["initial_gap_perturbation"] = config.initial_gap_perturbation;
    md["attack"] = attack ? attack_to_json(*attack) : nlohmann::json();
    md["collision"] = log.collision;
    md["collision_step"] = log.collision_step ? nlohmann::json(*log.collision_step) : nlohmann::json();
    return log;
}

TimeWindow evaluation_window(const RunLog& log, double recovery_tail) {
    if (!log.attack) return {0.0, std::numeric_limits<double>::infinity()};
    return {log.attack->start_time, log.attack->end_time + recovery_tail};
}

ThwBuckets thw_buckets(const RunLog& log, const std::optional<TimeWindow>& window) {
    std::int64_t first = 0;
    std::int64_t last = std::numeric_limits<std::int64_t>::max();
    if (window) {
        first = to_steps(window->start, log.dt);
        if (std::isfinite(window->end)) last = to_steps(window->end, log.dt);
    }
    ThwBuckets b;
    b.collision = log.collision;
    std::size_t below = 0;
    std::size_t ideal = 0;
    std::size_t above = 0;
    b.max_thw = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
        const auto i = static_cast<std::int64_t>(k);
        if (i < first || i >= last) continue;
        const double thw = log.steps[k].thw;
        if (thw < kThwBandLow)
            ++below;
        else if (thw <= kThwBandHigh)
            ++ideal;
        else
            ++above;
        b.max_thw = std::max(b.max_thw, thw);
        ++b.steps;
    }
    if (b.steps == 0) throw ConfigError("THW window contains no steps");
    const double n = static_cast<double>(b.steps);
    b.frac_below = 100.0 * static_cast<double>(below) / n;
    b.frac_ideal = 100.0 * static_cast<double>(ideal) / n;
    b.frac_above = 100.0 * static_cast<double>(above) / n;
    return b;
}

ConfusionCounts confusion(const RunLog& log) {
    ConfusionCounts c;
    for (const auto& s : log.steps) {
        if (s.anomaly_flag && s.attack_active) ++c.tp;
        else if (s.anomaly_flag) ++c.fp;
        else if (s.attack_active) ++c.fn;
        else ++c.tn;
    }
    return c;
}

ConfusionCounts confusion_at(const RunLog& log, double threshold) {
    if (!log.detector_present) throw ConfigError("run log has no detector output");
    ConfusionCounts c;
    for (const auto& s : log.steps) {
        const bool flag = s.deviation > threshold;
        if (flag && s.attack_active) ++c.tp;
        else if (flag) ++c.fp;
        else if (s.attack_active) ++c.fn;
        else ++c.tn;
    }
    return c;
}

DetectionMetrics metrics_from_counts(const ConfusionCounts& attack, const std::optional<ConfusionCounts>& benign) {
    DetectionMetrics m;
    m.recall = ratio(attack.tp, attack.tp + attack.fn);
    m.precision = ratio(attack.tp, attack.tp + attack.fp);
    if (m.recall && m.precision) {
        const double s = *m.recall + *m.precision;
        m.f1 = s > 0.0 ? 2.0 * *m.recall * *m.precision / s : 0.0;
    }
    if (benign) m.false_positive_rate_benign = ratio(benign->fp, benign->fp + benign->tn);
    return m;
}

DetectionMetrics detection_metrics(const RunLog& attack_log, const RunLog* benign_log) {
    std::optional<ConfusionCounts> benign;
    if (benign_log) benign = confusion(*benign_log);
    return metrics_from_counts(confusion(attack_log), benign);
}

Quantiles quantiles(std::vector<double> values) {
    Quantiles q;
    q.count = values.size();
    if (values.empty()) return q;
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    q.min = values.front();
    q.q1 = at(0.25);
    q.median = at(0.5);
    q.q3 = at(0.75);
    q.max = values.back();
    return q;
}

AttackSpec reference_sweep_attack(double start_time, double end_time) {
    return make_mutation("sweep-reference", {PatternKind::Cluster, 8.0, 2.0},
                         signed_bias(BiasShape::Sinusoidal, 0.5, 0.05), start_time, end_time);
}

SweepResult threshold_sweep(const std::vector<Environment>& envs, const std::vector<LeadTrajectory>& trajectories,
                            const SweepSettings& settings, const Models& models, unsigned jobs) {
    if (envs.size() != trajectories.size()) throw ConfigError("sweep: one trajectory per environment is required");
    if (!models.predictor) throw ConfigError("sweep: a predictor is required");
    if (settings.thresholds.empty()) throw ConfigError("sweep: empty threshold list");
    for (double t : settings.thresholds)
        if (!(t > 0.0)) throw ConfigError("sweep: thresholds must be positive");

    CampaignConfig cfg = settings.base;
    cfg.mode = PipelineMode::Naive;
    cfg.monitor = true;

    SweepResult result;
    result.thresholds = settings.thresholds;
    result.environments.resize(envs.size());
    parallel_for(envs.size(), jobs, [&](std::size_t i) {
        CampaignConfig c = cfg;
        c.name = envs[i].name();
        const auto attacked = run_campaign(trajectories[i], settings.reference_attack, c, models);
        const auto benign = run_campaign(trajectories[i], std::nullopt, c, models);
        EnvironmentSweep es;
        es.environment = envs[i];
        for (double t : settings.thresholds)
            es.per_threshold.push_back(metrics_from_counts(confusion_at(attacked, t), confusion_at(benign, t)));
        result.environments[i] = std::move(es);
    });

    for (std::size_t ti = 0; ti < settings.thresholds.size(); ++ti) {
        std::vector<double> rec;
        std::vector<double> pre;
        std::vector<double> f1;
        std::vector<double> fp;
        for (const auto& es : result.environments) {
            const auto& m = es.per_threshold[ti];
            if (m.recall) rec.push_back(*m.recall);
            if (m.precision) pre.push_back(*m.precision);
            if (m.f1) f1.push_back(*m.f1);
            if (m.false_positive_rate_benign) fp.push_back(*m.false_positive_rate_benign);
        }
        result.summary.push_back({settings.thresholds[ti], quantiles(rec), quantiles(pre), quantiles(f1), quantiles(fp)});
    }
    return result;
}

std::vector<double> log_bias_ladder(double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("bias ladder needs 0 < lo <= hi");
    std::vector<double> out;
    static constexpr double steps[] = {1.0, 2.0, 3.0, 5.0};
    for (int e = static_cast<int>(std::floor(std::log10(lo))) - 1; e <= static_cast<int>(std::ceil(std::log10(hi)));
         ++e) {
        for (double s : steps) {
            const double v = std::stod(fmt(s, "%.0f") + "e" + std::to_string(e));
            if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push_back(v);
        }
    }
    return out;
}

SubversionSettings SubversionSettings::defaults(const CampaignConfig& base) {
    SubversionSettings s;
    s.base = base;
    s.classes = {{"continuous", {PatternKind::Continuous, 0.0, 0.0}},
                 {"cluster", {PatternKind::Cluster, 10.0, 2.5}},
                 {"discrete", {PatternKind::Discrete, 5.0, 0.0}}};
    s.bias_grid = log_bias_ladder(0.001, 5.0);
    return s;
}

double ClassScan::tolerable() const {
    if (!tolerable_constant || !tolerable_sinusoidal) return 0.0;
    return std::min(*tolerable_constant, *tolerable_sinusoidal);
}

bool SubversionRow::any_subvertible() const {
    return std::any_of(classes.begin(), classes.end(), [](const ClassDetectability& c) { return c.subvertible; });
}

bool perceptible_impact(const RunLog& log, double recovery_tail) {
    if (log.collision) return true;
    const auto w = evaluation_window(log, recovery_tail);
    const auto b = thw_buckets(log, w);
    return b.frac_below > 0.0 || b.frac_above > 0.0;
}

SubversionScanner::SubversionScanner(const LeadTrajectory& lead, SubversionSettings settings, const Models& models,
                                     unsigned jobs)
    : settings_(std::move(settings)) {
    if (!models.predictor) throw ConfigError("subversion: a predictor is required");
    if (settings_.bias_grid.empty()) throw ConfigError("subversion: empty bias grid");
    if (!std::is_sorted(settings_.bias_grid.begin(), settings_.bias_grid.end()))
        throw ConfigError("subversion: bias grid must be ascending");
    CampaignConfig cfg = settings_.base;
    cfg.mode = PipelineMode::Naive;
    cfg.monitor = true;

    benign_ = run_campaign(lead, std::nullopt, cfg, models);
    {
        RunLog probe = benign_;
        probe.attack = make_mutation("probe", {}, signed_bias(BiasShape::Constant, 0.0), settings_.attack_start,
                                     settings_.attack_end);
        baseline_in_band_ = !perceptible_impact(probe, cfg.recovery_tail);
    }

    const std::size_t nb = settings_.bias_grid.size();
    const std::size_t nc = settings_.classes.size();
    scans_.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        scans_[c].name = settings_.classes[c].name;
        scans_[c].impact_constant.assign(nb, false);
        scans_[c].impact_sinusoidal.assign(nb, false);
        scans_[c].max_dev_constant.assign(nb, 0.0);
        scans_[c].max_dev_sinusoidal.assign(nb, 0.0);
    }
    parallel_for(nc * 2 * nb, jobs, [&](std::size_t idx) {
        const std::size_t c = idx / (2 * nb);
        const bool sinus = (idx / nb) % 2 == 1;
        const std::size_t bi = idx % nb;
        const double b = settings_.bias_grid[bi];
        const auto bias = sinus ? signed_bias(BiasShape::Sinusoidal, b, settings_.sinusoid_frequency)
                                : signed_bias(BiasShape::Constant, b);
        const auto spec = make_mutation(settings_.classes[c].name + (sinus ? "-sin-" : "-const-") + fmt(b, "%g"),
                                        settings_.classes[c].pattern, bias, settings_.attack_start,
                                        settings_.attack_end);
        const auto log = run_campaign(lead, spec, cfg, models);
        double max_dev = 0.0;
        for (const auto& s : log.steps)
            if (s.attack_active) max_dev = std::max(max_dev, s.deviation);
        const bool impact = perceptible_impact(log, cfg.recovery_tail);
        auto& scan = scans_[c];
        (sinus ? scan.impact_sinusoidal : scan.impact_constant)[bi] = impact;
        (sinus ? scan.max_dev_sinusoidal : scan.max_dev_constant)[bi] = max_dev;
    });

    auto tolerable = [&](const std::vector<bool>& impact) -> std::optional<double> {
        std::optional<double> t;
        for (std::size_t i = 0; i < nb; ++i) {
            if (impact[i]) break;
            t = settings_.bias_grid[i];
        }
        return t;
    };
    for (auto& scan : scans_) {
        scan.tolerable_constant = tolerable(scan.impact_constant);
        scan.tolerable_sinusoidal = tolerable(scan.impact_sinusoidal);
    }
}

SubversionRow SubversionScanner::row(double threshold) const {
    SubversionRow row;
    row.threshold = threshold;
    const auto benign = confusion_at(benign_, threshold);
    row.fp_benign = 100.0 * static_cast<double>(benign.fp) / static_cast<double>(benign.fp + benign.tn);
    auto first_detected = [&](const std::vector<double>& max_dev) -> std::optional<double> {
        for (std::size_t i = 0; i < max_dev.size(); ++i)
            if (max_dev[i] > threshold) return settings_.bias_grid[i];
        return std::nullopt;
    };
    for (const auto& scan : scans_) {
        ClassDetectability cd;
        cd.name = scan.name;
        cd.tolerable = scan.tolerable();
        cd.min_constant = first_detected(scan.max_dev_constant);
        cd.min_sinusoidal = first_detected(scan.max_dev_sinusoidal);
        auto exceeds = [&](const std::optional<double>& idx) { return !idx || *idx > cd.tolerable; };
        cd.subvertible = exceeds(cd.min_constant) || exceeds(cd.min_sinusoidal);
        row.classes.push_back(std::move(cd));
    }
    return row;
}

std::optional<double> tune_threshold(const SubversionScanner& scanner, const std::vector<double>& thresholds) {
    std::optional<double> best;
    double best_fp = std::numeric_limits<double>::infinity();
    for (double t : thresholds) {
        const auto row = scanner.row(t);
        if (row.any_subvertible()) continue;
        if (row.fp_benign < best_fp || (row.fp_benign == best_fp && best && t > *best)) {
            best_fp = row.fp_benign;
            best = t;
        }
    }
    return best;
}

SubversionRow subversion_scan(double threshold, const LeadTrajectory& lead, const SubversionSettings& settings,
                              const Models& models) {
    return SubversionScanner(lead, settings, models).row(threshold);
}

std::vector<AttackSpec> default_impact_grid(double start, double end) {
    const FrequencyPattern co{PatternKind::Continuous, 0.0, 0.0};
    const FrequencyPattern cl{PatternKind::Cluster, 10.0, 2.5};
    const FrequencyPattern di{PatternKind::Discrete, 5.0, 0.0};
    const auto C = BiasShape::Constant;
    const auto L = BiasShape::Linear;
    const auto S = BiasShape::Sinusoidal;
    std::vector<AttackSpec> g;
    g.push_back(make_mutation("continuous-const+0.15", co, signed_bias(C, 0.15), start, end));
    g.push_back(make_mutation("continuous-linear-0.005", co, signed_bias(L, -0.005), start, end));
    g.push_back(make_mutation("continuous-sin+0.2f0.005", co, signed_bias(S, 0.2, 0.005), start, end));
    g.push_back(make_mutation("cluster-const+0.3", cl, signed_bias(C, 0.3), start, end));
    g.push_back(make_mutation("cluster-linear-0.02", cl, signed_bias(L, -0.02), start, end));
    g.push_back(make_mutation("cluster-sin+0.5f0.05", cl, signed_bias(S, 0.5, 0.05), start, end));
    g.push_back(make_mutation("discrete-const+0.5", di, signed_bias(C, 0.5), start, end));
    g.push_back(make_mutation("discrete-linear-0.005", di, signed_bias(L, -0.005), start, end));
    g.push_back(make_mutation("discrete-sin+5f0.005", di, signed_bias(S, 5.0, 0.005), start, end));
    g.push_back(make_mutation("continuous-random0.2", co, {BiasShape::RandomUniform, 1, 0, 0, -0.2, 0.2}, start, end));
    g.push_back(make_mutation("cluster-random0.8", cl, {BiasShape::RandomUniform, 1, 0, 0, -0.8, 0.8}, start, end));
    AttackSpec dp;
    dp.name = "intermittent-0.1hz-2s";
    dp.operation = Operation::DeliveryPrevention;
    dp.pattern = {PatternKind::Cluster, 10.0, 2.0};
    dp.start_time = start;
    dp.end_time = end;
    dp.impact_label = ImpactLabel::Instability;
    dp.rng_seed = fnv1a(dp.name);
    g.push_back(dp);
    return g;
}

std::vector<ImpactEntry> impact_analysis(const std::vector<AttackSpec>& grid, const LeadTrajectory& lead,
                                         const CampaignConfig& base, unsigned jobs) {
    CampaignConfig cfg = base;
    cfg.mode = PipelineMode::Naive;
    cfg.monitor = false;
    const Models none;
    const auto benign = run_campaign(lead, std::nullopt, cfg, none);
    std::vector<ImpactEntry> out(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        CampaignConfig c = cfg;
        c.name = grid[i].name;
        const auto log = run_campaign(lead, grid[i], c, none);
        const auto w = evaluation_window(log, cfg.recovery_tail);
        ImpactEntry e;
        e.name = grid[i].name;
        e.buckets = thw_buckets(log, w);
        const auto first = static_cast<std::size_t>(std::max<std::int64_t>(0, to_steps(w.start, log.dt)));
        const auto last = std::min({static_cast<std::size_t>(to_steps(w.end, log.dt)), log.steps.size(),
                                    benign.steps.size()});
        for (std::size_t k = first; k < last; ++k) {
            e.thw_trace.push_back(log.steps[k].thw);
            e.displacement_integral += std::abs(log.steps[k].thw - benign.steps[k].thw) * log.dt;
        }
        out[i] = std::move(e);
    });
    return out;
}

std::vector<std::string> resiliency_campaign_names() { return builtin_attack_names(); }

std::string format_runlog_csv(const RunLog& log) {
    std::string out =
        "t,pos_p,pos_e,v_p,v_e,gap,a_p_true,a_p_received,delivered,a_e_pred,a_e_cacc,a_e_applied,deviation,"
        "anomaly_flag,no_comm,attack_active,mitigation_path,thw,selected_t_gap\n";
    char buf[512];
    for (const auto& s : log.steps) {
        const int n = std::snprintf(buf, sizeof buf,
                                    "%.2f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.9g,%.9g,%.9g,%.9g,%d,%d,%d,%s,%.9g,",
                                    s.t, s.pos_p, s.pos_e, s.v_p, s.v_e, s.gap, s.a_p_true, s.a_p_received,
                                    s.delivered ? 1 : 0, s.a_e_pred, s.a_e_cacc, s.a_e_applied, s.deviation,
                                    s.anomaly_flag ? 1 : 0, s.no_comm ? 1 : 0, s.attack_active ? 1 : 0,
                                    to_string(s.mitigation_path).c_str(), s.thw);
        out.append(buf, static_cast<std::size_t>(n));
        if (s.selected_t_gap) out += fmt(*s.selected_t_gap, "%.9g");
        out += '\n';
    }
    return out;
}

void write_runlog_csv(const std::filesystem::path& path, const RunLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_runlog_csv(log);
    if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json buckets_to_json(const ThwBuckets& b) {
    return {{"frac_below", b.frac_below}, {"frac_ideal", b.frac_ideal}, {"frac_above", b.frac_above},
            {"max_thw", b.max_thw},       {"collision", b.collision},   {"steps", b.steps}};
}

nlohmann::json metrics_to_json(const DetectionMetrics& m) {
    return {{"recall", opt_json(m.recall)},
            {"precision", opt_json(m.precision)},
            {"f1", opt_json(m.f1)},
            {"false_positive_rate_benign", opt_json(m.false_positive_rate_benign)}};
}

nlohmann::json campaign_report(const RunLog& log, double recovery_tail) {
    const auto w = evaluation_window(log, recovery_tail);
    const auto b = thw_buckets(log, w);
    nlohmann::json j;
    j["name"] = log.name;
    j["mode"] = to_string(log.mode);
    j["window"] = {{"start", w.start}, {"end", std::isfinite(w.end) ? nlohmann::json(w.end) : nlohmann::json()}};
    j["thw_buckets"] = buckets_to_json(b);
    j["detection_metrics"] = log.detector_present ? metrics_to_json(detection_metrics(log)) : nlohmann::json();
    j["collision"] = log.collision;
    j["max_thw"] = b.max_thw;
    return j;
}

nlohmann::json subversion_row_to_json(const SubversionRow& row) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : row.classes) {
        classes.push_back({{"class", c.name},
                           {"tolerable_bias", c.tolerable},
                           {"detectability_index_constant", opt_json(c.min_constant)},
                           {"detectability_index_sinusoidal", opt_json(c.min_sinusoidal)},
                           {"subvertible", c.subvertible}});
    }
    return {{"threshold", row.threshold}, {"fp_benign_percent", row.fp_benign}, {"classes", classes}};
}

std::string resiliency_table_markdown(const std::vector<ModeComparison>& rows) {
    std::ostringstream ss;
    ss << "| attack | mode | THW < 0.55 s | THW 0.55-0.75 s | THW > 0.75 s | max THW | collision |\n";
    ss << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        const std::pair<const char*, const ThwBuckets*> modes[] = {
            {"RACCON", &r.raccon}, {"Degrade ACC", &r.degrade_acc}, {"Naive CACC", &r.naive}};
        for (const auto& [name, b] : modes) {
            ss << "| " << r.attack << " | " << name << " | " << fmt(b->frac_below, "%.2f") << "% | "
               << fmt(b->frac_ideal, "%.2f") << "% | " << fmt(b->frac_above, "%.2f") << "% | "
               << fmt(b->max_thw, "%.2f") << " s | " << (b->collision ? "Yes" : "No") << " |\n";
        }
    }
    return ss.str();
}

std::string sweep_quantiles_csv(const SweepResult& sweep) {
    std::ostringstream ss;
    ss << "threshold,metric,count,min,q1,median,q3,max\n";
    for (const auto& s : sweep.summary) {
        const std::pair<const char*, const Quantiles*> metrics[] = {
            {"recall", &s.recall}, {"precision", &s.precision}, {"f1", &s.f1}, {"fp_rate_benign", &s.fp_rate}};
        for (const auto& [name, q] : metrics) {
            ss << fmt(s.threshold, "%.2f") << ',' << name << ',' << q->count;
            if (q->count == 0) {
                ss << ",,,,,\n";
                continue;
            }
            ss << ',' << fmt(q->min) << ',' << fmt(q->q1) << ',' << fmt(q->median) << ',' << fmt(q->q3) << ','
               << fmt(q->max) << '\n';
        }
    }
    return ss.str();
}

std::string sweep_matrix_csv(const SweepResult& sweep) {
    std::ostringstream ss;
    ss << "environment,threshold,recall,precision,f1,fp_rate_benign\n";
    for (const auto& es : sweep.environments) {
        for (std::size_t i = 0; i < sweep.thresholds.size(); ++i) {
            const auto& m = es.per_threshold[i];
            ss << es.environment.name() << ',' << fmt(sweep.thresholds[i], "%.2f") << ',' << fmt_opt(m.recall) << ','
               << fmt_opt(m.precision) << ',' << fmt_opt(m.f1) << ',' << fmt_opt(m.false_positive_rate_benign)
               << '\n';
        }
    }
    return ss.str();
}

std::string impact_table_csv(const std::vector<ImpactEntry>& entries) {
    std::ostringstream ss;
    ss << "attack,frac_below,frac_ideal,frac_above,max_thw,collision,displacement_integral\n";
    for (const auto& e : entries) {
        ss << e.name << ',' << fmt(e.buckets.frac_below, "%.2f") << ',' << fmt(e.buckets.frac_ideal, "%.2f") << ','
           << fmt(e.buckets.frac_above, "%.2f") << ',' << fmt(e.buckets.max_thw) << ','
           << (e.buckets.collision ? "yes" : "no") << ',' << fmt(e.displacement_integral, "%.6f") << '\n';
    }
    return ss.str();
}

} // namespace raccon
