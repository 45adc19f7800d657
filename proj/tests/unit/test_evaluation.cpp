#include <doctest.h>

#include <cmath>

#include "raccon/errors.hpp"
#include "raccon/evaluation.hpp"

using namespace raccon;

namespace {

RunLog log_with_thw(const std::vector<double>& thw) {
    RunLog log;
    for (std::size_t i = 0; i < thw.size(); ++i) {
        StepRecord s;
        s.t = 0.01 * static_cast<double>(i);
        s.thw = thw[i];
        log.steps.push_back(s);
    }
    return log;
}

LeadTrajectory lead_for(const char* env, double duration, std::uint64_t seed) {
    auto p = profile_for(Environment::parse(env));
    p.duration = duration;
    p.rng_seed = seed;
    return generate_lead_trajectory(p);
}

Models oracle_models() {
    const ControllerParams p;
    return {NormalBehaviorModel::controller_oracle(p), ResponseEstimatorModel::acc_fallback(p)};
}

CampaignConfig config_for(PipelineMode mode) {
    CampaignConfig c;
    c.mode = mode;
    return c;
}

} // namespace

TEST_CASE("THW buckets") {
    const auto log = log_with_thw({0.5, 0.55, 0.6, 0.75, 0.8});
    const auto b = thw_buckets(log, std::nullopt);
    CHECK(b.frac_below == doctest::Approx(20.0));
    CHECK(b.frac_ideal == doctest::Approx(60.0));
    CHECK(b.frac_above == doctest::Approx(20.0));
    CHECK(b.max_thw == 0.8);
    CHECK(b.steps == 5);
    const auto w = thw_buckets(log, TimeWindow{0.02, 0.04});
    CHECK(w.steps == 2);
    CHECK(w.frac_ideal == doctest::Approx(100.0));
    CHECK_THROWS_AS(thw_buckets(log, TimeWindow{1.0, 2.0}), ConfigError);
}

TEST_CASE("detection metrics from counts") {
    const auto m = metrics_from_counts({8, 12, 2, 78}, ConfusionCounts{0, 3, 0, 97});
    CHECK(*m.recall == doctest::Approx(0.8));
    CHECK(*m.precision == doctest::Approx(0.4));
    CHECK(*m.f1 == doctest::Approx(2.0 * 0.8 * 0.4 / 1.2));
    CHECK(*m.false_positive_rate_benign == doctest::Approx(0.03));

    const auto none = metrics_from_counts({0, 0, 0, 50}, std::nullopt);
    CHECK_FALSE(none.recall);
    CHECK_FALSE(none.precision);
    CHECK_FALSE(none.f1);
    CHECK_FALSE(none.false_positive_rate_benign);
    const auto missed = metrics_from_counts({0, 0, 10, 50}, std::nullopt);
    CHECK(*missed.recall == 0.0);
    CHECK_FALSE(missed.precision);
}

TEST_CASE("quantiles interpolate") {
    const auto q = quantiles({4, 1, 3, 2, 5});
    CHECK(q.min == 1);
    CHECK(q.q1 == 2);
    CHECK(q.median == 3);
    CHECK(q.q3 == 4);
    CHECK(q.max == 5);
    CHECK(quantiles({1, 2}).median == doctest::Approx(1.5));
    CHECK(quantiles({}).count == 0);
}

TEST_CASE("bias ladder") {
    const auto l = log_bias_ladder(0.001, 5.0);
    CHECK(l.front() == 0.001);
    CHECK(l.back() == 5.0);
    CHECK(l.size() == 16);
    CHECK(std::is_sorted(l.begin(), l.end()));
    CHECK(log_bias_ladder(1.0, 20.0) == std::vector<double>{1, 2, 3, 5, 10, 20});
    CHECK_THROWS_AS(log_bias_ladder(0.0, 1.0), ConfigError);
}

TEST_CASE("zero bias attack leaves the run identical") {
    const auto lead = lead_for("suburban-day-clear", 60.0, 3);
    const auto models = oracle_models();
    auto cfg = config_for(PipelineMode::Naive);
    const auto benign = run_campaign(lead, std::nullopt, cfg, models);
    auto atk = builtin_attack("cluster-bias+0.8", 10.0, 50.0);
    atk.bias->b = 0.0;
    const auto attacked = run_campaign(lead, atk, cfg, models);
    REQUIRE(attacked.steps.size() == benign.steps.size());
    for (std::size_t k = 0; k < benign.steps.size(); ++k) {
        REQUIRE(attacked.steps[k].gap == benign.steps[k].gap);
        REQUIRE(attacked.steps[k].a_e_applied == benign.steps[k].a_e_applied);
        REQUIRE_FALSE(attacked.steps[k].anomaly_flag);
    }
}

TEST_CASE("benign oracle runs raise no flags in any mode") {
    const auto lead = lead_for("city-day-rainy", 120.0, 4);
    for (auto mode : {PipelineMode::Naive, PipelineMode::DegradeAcc, PipelineMode::Raccon}) {
        const auto log = run_campaign(lead, std::nullopt, config_for(mode), oracle_models());
        CHECK_FALSE(log.collision);
        const auto c = confusion(log);
        CHECK(c.fp == 0);
        CHECK(c.tn == log.steps.size());
    }
}

TEST_CASE("DegradeACC never collides and RACCON keeps at least as much ideal headway") {
    const auto models = oracle_models();
    for (const char* env : {"highway-day-windy", "city-night-snowy"}) {
        const auto lead = lead_for(env, 100.0, 9);
        for (const char* name : {"continuous-linear+0.3", "cluster-bias+0.8", "discrete-bias+2", "mitm",
                                 "intermittent-0.2hz-1.5s"}) {
            CAPTURE(env);
            CAPTURE(name);
            const auto atk = builtin_attack(name, 20.0, 80.0);
            const auto d = run_campaign(lead, atk, config_for(PipelineMode::DegradeAcc), models);
            const auto r = run_campaign(lead, atk, config_for(PipelineMode::Raccon), models);
            CHECK_FALSE(d.collision);
            CHECK_FALSE(r.collision);
            const auto w = evaluation_window(r, 10.0);
            CHECK(thw_buckets(r, w).frac_ideal >= thw_buckets(d, w).frac_ideal);
        }
    }
}

TEST_CASE("mode prerequisites") {
    const auto lead = lead_for("highway-day-clear", 10.0, 1);
    CHECK_THROWS_AS(run_campaign(lead, std::nullopt, config_for(PipelineMode::Raccon), Models{}), ConfigError);
    CHECK_THROWS_AS(run_campaign(lead, std::nullopt, config_for(PipelineMode::DegradeAcc), Models{}), ConfigError);
    CHECK_NOTHROW(run_campaign(lead, std::nullopt, config_for(PipelineMode::Naive), Models{}));
    CHECK_THROWS_AS(parse_pipeline_mode("fast"), ConfigError);
}

TEST_CASE("sweep: recall and false positives fall as the threshold rises") {
    const std::vector<Environment> envs{Environment::parse("highway-day-clear"),
                                        Environment::parse("suburban-night-windy")};
    std::vector<LeadTrajectory> leads;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        auto p = profile_for(envs[i]);
        p.duration = 120.0;
        p.rng_seed = 40 + i;
        leads.push_back(generate_lead_trajectory(p));
    }
    SweepSettings s;
    s.reference_attack = reference_sweep_attack(20.0, 100.0);
    const auto sweep = threshold_sweep(envs, leads, s, oracle_models(), 2);
    REQUIRE(sweep.environments.size() == 2);
    for (const auto& e : sweep.environments) {
        for (std::size_t i = 1; i < e.per_threshold.size(); ++i) {
            const auto& prev = e.per_threshold[i - 1];
            const auto& cur = e.per_threshold[i];
            if (prev.recall && cur.recall) CHECK(*cur.recall <= *prev.recall);
            if (prev.false_positive_rate_benign && cur.false_positive_rate_benign)
                CHECK(*cur.false_positive_rate_benign <= *prev.false_positive_rate_benign);
        }
    }
    CHECK(sweep.summary.size() == s.thresholds.size());
}
