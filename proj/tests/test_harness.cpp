#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qest/harness.hpp"

using namespace qest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
constexpr double kT1 = 20.0 * kPi;

EnsembleConfig small_config() {
    EnsembleConfig cfg;
    cfg.n_samples = 8;
    cfg.shot_budget = 100;
    cfg.n_particles = 150;
    cfg.master_seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("true systems are drawn inside the prior box, reproducibly") {
    const PriorSpec prior;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const TrueSystem truth = sample_true_system(prior, kT1, 0.1, rng);
        CHECK(truth.g0 >= prior.g_lo());
        CHECK(truth.g0 <= prior.g_hi());
        CHECK(truth.omega_r0 >= prior.omega_lo());
        CHECK(truth.omega_r0 <= prior.omega_hi());
        CHECK(truth.t1 == kT1);
        CHECK(truth.p_e == 0.1);
    }
    Rng a(9), b(9);
    const TrueSystem ta = sample_true_system(prior, kT1, 0.0, a);
    const TrueSystem tb = sample_true_system(prior, kT1, 0.0, b);
    CHECK(ta.g0 == tb.g0);
    CHECK(ta.omega_r0 == tb.omega_r0);
}

TEST_CASE("ensemble configuration rejects out-of-range fields") {
    EnsembleConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    EnsembleConfig bad = cfg;
    bad.n_samples = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.shot_budget = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.record_stride = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.true_t1 = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.p_e = 0.6;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.n_particles = 50;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.prior.mu_omega0 = 3.0;  // support dips below zero at sigma 2
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("episode rows land on the batch grid and absorb the overshoot") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    EnsembleConfig cfg = small_config();
    cfg.shot_budget = 50;

    Rng rng(3);
    const TrueSystem truth = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng);
    const EpisodeTrace trace = run_episode(*policy, truth, cfg, rng);
    REQUIRE(trace.rows.size() == 6);  // prior row + one per ten-shot batch
    for (std::size_t r = 0; r < trace.rows.size(); ++r)
        CHECK(trace.rows[r].shot == static_cast<long>(10 * r));

    // a budget that is not a multiple of the batch size overshoots once
    cfg.shot_budget = 45;
    Rng rng2(3);
    const TrueSystem truth2 = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng2);
    const EpisodeTrace over = run_episode(*policy, truth2, cfg, rng2);
    CHECK(over.rows.back().shot == 50);

    // an explicit stride records only on its multiples, plus the final batch
    cfg.shot_budget = 95;
    cfg.record_stride = 25;
    Rng rng3(3);
    const TrueSystem truth3 = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng3);
    const EpisodeTrace strided = run_episode(*policy, truth3, cfg, rng3);
    REQUIRE(strided.rows.size() == 3);
    CHECK(strided.rows[0].shot == 0);
    CHECK(strided.rows[1].shot == 50);
    CHECK(strided.rows[2].shot == 100);
}

TEST_CASE("the shot-0 row scores the analytic prior estimate") {
    const ManualPolicy policy;
    EnsembleConfig cfg = small_config();
    cfg.shot_budget = 5;

    Rng rng(21);
    const TrueSystem truth = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng);
    const EpisodeTrace trace = run_episode(policy, truth, cfg, rng);

    const TraceRow& row0 = trace.rows.front();
    CHECK(row0.shot == 0);
    const double dw = cfg.prior.mu_omega0 - truth.omega_r0;
    const double dg = cfg.prior.mu_g0 - truth.g0;
    CHECK(row0.sq_err_omega == dw * dw);
    CHECK(row0.sq_err_g == dg * dg);
    CHECK(row0.sigma_omega == cfg.prior.sigma_omega0);
    CHECK(row0.sigma_g == cfg.prior.sigma_g0);
    CHECK(row0.t == 0.0);
    CHECK(row0.d == 0);
    CHECK(row0.rejected == false);
}

TEST_CASE("episodes replay bit for bit from the same seed") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    const EnsembleConfig cfg = small_config();

    auto run_once = [&] {
        Rng rng(77);
        const TrueSystem truth = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng);
        return run_episode(*policy, truth, cfg, rng);
    };
    const EpisodeTrace first = run_once();
    const EpisodeTrace second = run_once();
    REQUIRE(first.rows.size() == second.rows.size());
    for (std::size_t r = 0; r < first.rows.size(); ++r) {
        CHECK(first.rows[r].sq_err_omega == second.rows[r].sq_err_omega);
        CHECK(first.rows[r].t == second.rows[r].t);
        CHECK(first.rows[r].omega_q == second.rows[r].omega_q);
        CHECK(first.rows[r].d == second.rows[r].d);
    }
}

TEST_CASE("normalized curves start at exactly 1 and expose their normalizer") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    const EnsembleConfig cfg = small_config();

    const ErrorCurve curve = normalized_median_curve(cfg, *policy);
    REQUIRE(!curve.shot.empty());
    CHECK(curve.shot.front() == 0);
    CHECK(curve.med_sq_omega.front() == 1.0);
    CHECK(curve.med_sq_g.front() == 1.0);
    CHECK(curve.med_t.front() == 0.0);
    CHECK(curve.prior_median_sq_omega > 0.0);

    // the normalizer is the prior-estimator median of the same substreams
    const double prior_med =
        prior_median_sq_omega(cfg.prior, cfg.n_samples, cfg.master_seed);
    CHECK(curve.prior_median_sq_omega == prior_med);
}

TEST_CASE("curves are identical for any worker count") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    EnsembleConfig cfg = small_config();
    cfg.n_samples = 6;

    cfg.workers = 1;
    const ErrorCurve serial = normalized_median_curve(cfg, *policy);
    cfg.workers = 3;
    const ErrorCurve threaded = normalized_median_curve(cfg, *policy);

    REQUIRE(serial.shot == threaded.shot);
    CHECK(serial.med_sq_omega == threaded.med_sq_omega);
    CHECK(serial.med_sq_g == threaded.med_sq_g);
    CHECK(serial.med_t == threaded.med_t);
    CHECK(serial.prior_median_sq_omega == threaded.prior_median_sq_omega);
}

TEST_CASE("the prior-estimator median converges to 3 sigma^2 / 4") {
    const PriorSpec prior;  // sigma_omega0 = 2, analytic median 3
    const double med = prior_median_sq_omega(prior, 20000, 123);
    CHECK(med == doctest::Approx(3.0).epsilon(0.03));

    CHECK_THROWS_AS(prior_median_sq_omega(prior, 0, 1), std::invalid_argument);
}

TEST_CASE("single-shot updates drive the error far below the prior") {
    const ManualPolicy policy;
    EnsembleConfig cfg;
    cfg.true_t1 = kInf;  // relaxation-free: estimation is purely a policy test
    cfg.presumed_t1 = kInf;
    cfg.n_samples = 12;
    cfg.shot_budget = 600;
    cfg.record_stride = 100;
    cfg.n_particles = 400;
    cfg.master_seed = 31;

    const ErrorCurve curve = normalized_median_curve(cfg, policy);
    CHECK(curve.med_sq_omega.back() < 0.05);
    CHECK(curve.med_sq_g.back() < 0.05);
    // the error should already have dropped by mid-run
    CHECK(curve.med_sq_omega[3] < 0.5);
}

TEST_CASE("the random-time policy waits about half of t1 on average") {
    const RandomTimePolicy policy(kT1);
    EnsembleConfig cfg = small_config();
    cfg.policy_id = "rand";
    cfg.n_samples = 40;
    cfg.shot_budget = 60;
    cfg.n_particles = 150;

    const ErrorCurve curve = waiting_time_curve(cfg, policy);
    REQUIRE(curve.med_t.size() > 1);
    const double mean_med_t =
        std::accumulate(curve.med_t.begin() + 1, curve.med_t.end(), 0.0) /
        static_cast<double>(curve.med_t.size() - 1);
    CHECK(mean_med_t > 0.4 * kT1);
    CHECK(mean_med_t < 0.6 * kT1);
}

TEST_CASE("batched policies learn within their shot budget") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    EnsembleConfig cfg;
    cfg.n_samples = 24;
    cfg.shot_budget = 2000;
    cfg.n_particles = 300;
    cfg.master_seed = 7;

    const ErrorCurve curve = normalized_median_curve(cfg, *policy);
    CHECK(curve.med_sq_omega.back() < 0.1);
    CHECK(curve.med_sq_omega.back() < curve.med_sq_omega[curve.med_sq_omega.size() / 4]);
}

TEST_CASE("a matched mismatch study reduces to the plain curve") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1);
    const EnsembleConfig cfg = small_config();

    const ErrorCurve plain = normalized_median_curve(cfg, *policy);
    const std::vector<ErrorCurve> curves =
        mismatch_study(cfg, *policy, {cfg.true_t1, 0.5 * cfg.true_t1});
    REQUIRE(curves.size() == 2);
    CHECK(curves[0].med_sq_omega == plain.med_sq_omega);
    CHECK(curves[0].med_t == plain.med_t);

    // the family shares its truths, so the normalizers agree exactly
    CHECK(curves[0].prior_median_sq_omega == curves[1].prior_median_sq_omega);
    CHECK(curves[1].med_sq_omega != plain.med_sq_omega);
}

TEST_CASE("policy ids resolve to the right rules") {
    const PolicyStore store = PolicyStore::builtin();
    const auto man = make_policy("man", store, kT1);
    CHECK(man->repeats() == 1);
    const auto rnd = make_policy("rand", store, kT1);
    CHECK(rnd->repeats() == 1);
    const auto mach = make_policy("mach_u_20_2", store, kT1);
    CHECK(mach->repeats() == 10);
    CHECK(mach->click_threshold() == 6);
    CHECK_THROWS_AS(make_policy("mach_u_77_7", store, kT1), std::out_of_range);
}

TEST_CASE("the shaped-tail variant keeps waiting times under the cap") {
    const PolicyStore store = PolicyStore::builtin();
    const auto policy = make_policy("mach_u_20_2", store, kT1, /*uniform_tail=*/true);
    const double t_max = store.get("mach_u_20_2").params.t_max;

    PosteriorStats st;
    st.mu_g = 1.0;
    st.sigma_g = 1e-6;  // deep in the capped regime
    st.mu_omega = 30.0;
    st.sigma_omega = 0.05;
    PolicyState state;
    state.clicks = 200;  // past any c0 in the store
    ParticleCloud cloud;
    cloud.g = {1.0};
    cloud.omega = {30.0};
    cloud.weight = {1.0};

    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        const MeasurementSetting s = policy->next(st, state, cloud, rng);
        CHECK(s.t >= 0.0);
        CHECK(s.t <= t_max);
    }
}

TEST_CASE("curve and trace CSV layouts are stable") {
    ErrorCurve curve;
    curve.shot = {0, 10};
    curve.med_sq_omega = {1.0, 0.5};
    curve.med_sq_g = {1.0, 0.25};
    curve.med_t = {0.0, 3.5};
    std::ostringstream curve_out;
    write_curve_csv(curve, curve_out);
    CHECK(curve_out.str() ==
          "shot,median_sq_err_omega,median_sq_err_g,median_t\n"
          "0,1,1,0\n"
          "10,0.5,0.25,3.5\n");

    EpisodeTrace trace;
    TraceRow row;
    row.shot = 0;
    row.sq_err_omega = 4.0;
    row.sq_err_g = 0.0625;
    row.sigma_omega = 2.0;
    row.sigma_g = 0.25;
    trace.rows.push_back(row);
    row.shot = 10;
    row.sq_err_omega = 1.5;
    row.sq_err_g = 0.01;
    row.sigma_omega = 1.0;
    row.sigma_g = 0.125;
    row.t = 6.5;
    row.omega_q = 29.5;
    row.d = 7;
    row.clicks = 1;
    row.rejected = true;
    trace.rows.push_back(row);
    std::ostringstream trace_out;
    write_trace_csv(trace, trace_out);
    CHECK(trace_out.str() ==
          "shot,sq_err_omega,sq_err_g,sigma_omega,sigma_g,t,omega_q,d,clicks,rejected\n"
          "0,4,0.0625,2,0.25,0,0,0,0,0\n"
          "10,1.5,0.01,1,0.125,6.5,29.5,7,1,1\n");
}
