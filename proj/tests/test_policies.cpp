#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qest/errors.hpp"
#include "qest/inference.hpp"
#include "qest/policies.hpp"

using namespace qest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
constexpr double kT1 = 20.0 * kPi;

PosteriorStats typical_stats() {
    PosteriorStats st;
    st.mu_g = 1.0;
    st.sigma_g = 0.2;
    st.mu_omega = 30.0;
    st.sigma_omega = 1.0;
    return st;
}

ParticleCloud tiny_cloud(double omega) {
    ParticleCloud cloud;
    cloud.g = {1.0};
    cloud.omega = {omega};
    cloud.weight = {1.0};
    return cloud;
}

// two-sided Kolmogorov-Smirnov distance against a reference CDF
template <typename Cdf>
double ks_distance(std::vector<double> samples, const Cdf& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double reference = cdf(samples[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n - reference;
        const double lo = reference - static_cast<double>(i) / n;
        worst = std::max({worst, hi, lo});
    }
    return worst;
}

}  // namespace

TEST_CASE("early-phase manual rule spends one draw on both knobs") {
    const ManualPolicyParams params;
    const PosteriorStats st = typical_stats();
    PolicyDraws draws;
    draws.r1 = 0.8;
    draws.r2 = 0.3;

    const MeasurementSetting shared = manual_rule(params, st, 1, draws, true);
    CHECK(shared.t == doctest::Approx(1.57 * 0.8 / 0.2).epsilon(1e-15));
    CHECK(shared.omega_q == doctest::Approx(30.0 + (0.8 - 0.5) * 1.0).epsilon(1e-15));
    CHECK(shared.m_r == 1);

    const MeasurementSetting split = manual_rule(params, st, 1, draws, false);
    CHECK(split.t == shared.t);
    CHECK(split.omega_q == doctest::Approx(30.0 + (0.3 - 0.5) * 1.0).epsilon(1e-15));
}

TEST_CASE("late-phase manual rule switches to the spread-scaled form") {
    const ManualPolicyParams params;
    const PosteriorStats st = typical_stats();
    PolicyDraws draws;
    draws.r2 = 0.25;
    draws.z = -4.0;

    const MeasurementSetting s = manual_rule(params, st, params.m0 + 1, draws, true);
    CHECK(s.t == doctest::Approx(std::abs(1.57 + 0.518 * -4.0) / 0.2).epsilon(1e-15));
    CHECK(s.omega_q == doctest::Approx(30.0 + 3.0 * (0.25 - 0.5) * 1.0).epsilon(1e-15));

    // boundary: index m0 still uses the early branch
    PolicyDraws edge;
    edge.r1 = 0.5;
    const MeasurementSetting last_early = manual_rule(params, st, params.m0, edge, true);
    CHECK(last_early.t == doctest::Approx(1.57 * 0.5 / 0.2).epsilon(1e-15));
}

TEST_CASE("manual generator consumes draws in the documented order") {
    const ManualPolicyParams params;
    const PosteriorStats st = typical_stats();

    PolicyState early;
    early.settings_issued = 3;
    Rng rng_a(42);
    const MeasurementSetting got = next_setting_man(params, st, early, rng_a, true);
    Rng rng_b(42);
    const double r1 = rng_b.uniform();
    CHECK(got.t == params.a * r1 / st.sigma_g);
    CHECK(got.omega_q == st.mu_omega + (r1 - 0.5) * st.mu_g);

    PolicyState late;
    late.settings_issued = params.m0;  // next index is m0 + 1
    Rng rng_c(42);
    const MeasurementSetting got_late = next_setting_man(params, st, late, rng_c, true);
    Rng rng_d(42);
    const double r2 = rng_d.uniform();
    const double z = rng_d.normal();
    CHECK(got_late.t == std::abs(params.a + params.b * z) / st.sigma_g);
    CHECK(got_late.omega_q == st.mu_omega + params.c * (r2 - 0.5) * st.sigma_omega);
}

TEST_CASE("random-time policy draws waiting times uniformly over [0, t1]") {
    const PosteriorStats st = typical_stats();
    Rng rng(7);
    std::vector<double> times;
    for (int i = 0; i < 4000; ++i) {
        const MeasurementSetting s = next_setting_rand(kT1, st, rng);
        CHECK(s.t >= 0.0);
        CHECK(s.t <= kT1);
        CHECK(s.m_r == 1);
        times.push_back(s.t);
    }
    // alpha = 0.01 critical value 1.63 / sqrt(n)
    const double d = ks_distance(std::move(times), [](double t) { return t / kT1; });
    CHECK(d < 1.63 / std::sqrt(4000.0));

    CHECK_THROWS_AS(next_setting_rand(kInf, st, rng), std::invalid_argument);
    CHECK_THROWS_AS(next_setting_rand(0.0, st, rng), std::invalid_argument);
}

TEST_CASE("click bookkeeping is strict on the threshold") {
    PolicyState state;
    register_batch(state, 3, 3);
    CHECK(state.clicks == 0);
    CHECK(state.settings_issued == 1);
    register_batch(state, 4, 3);
    CHECK(state.clicks == 1);
    CHECK(state.settings_issued == 2);
    register_batch(state, 0, 3);
    CHECK(state.clicks == 1);
    CHECK(state.settings_issued == 3);
}

TEST_CASE("regimes split on clicks and on the spread-time product") {
    CHECK(mach_regime(0, 1.0, 50.0) == MachRegime::click_search);
    CHECK(mach_regime(0, 1e-9, 50.0) == MachRegime::click_search);
    CHECK(mach_regime(1, 1.0, 50.0) == MachRegime::refine);   // 1.0 > 1/t_max
    CHECK(mach_regime(1, 0.01, 50.0) == MachRegime::capped);  // 0.01 <= 1/t_max
    CHECK(mach_regime(1, 0.02, 50.0) == MachRegime::capped);  // boundary counts as capped
    CHECK(mach_regime(5, 0.020001, 50.0) == MachRegime::refine);
}

TEST_CASE("machine rule covers all three regimes") {
    MachinePolicyParams params;
    params.a = 2.0;
    params.b = 0.5;
    params.d = 1.5;
    params.f = 4.0;
    params.g_pol = 3.0;
    params.t_max = 50.0;
    params.d_th = 6;
    params.c0 = 2;
    params.validate(10);

    PosteriorStats st = typical_stats();
    PolicyDraws draws;
    draws.r1 = 0.6;
    draws.r2 = 0.9;
    draws.z = 1.5;

    // no clicks yet: frequency from the omega marginal, exploratory time
    const MeasurementSetting probe = mach_rule(params, st, 0, draws, 31.7, 12.0, 10);
    CHECK(probe.omega_q == 31.7);
    CHECK(probe.t == doctest::Approx(2.0 * 0.6 / 0.2).epsilon(1e-15));
    CHECK(probe.m_r == 10);

    // clicked, broad posterior, counter below c0: f-rule frequency
    const MeasurementSetting refine = mach_rule(params, st, 2, draws, 31.7, 12.0, 10);
    CHECK(refine.omega_q == doctest::Approx(30.0 + 4.0 * (0.6 - 0.5) * 1.0).epsilon(1e-15));
    CHECK(refine.t == doctest::Approx(2.0 * 0.6 / 0.2).epsilon(1e-15));

    // clicked, counter above c0: g-rule frequency, displaced-normal time
    const MeasurementSetting late = mach_rule(params, st, 3, draws, 31.7, 12.0, 10);
    CHECK(late.omega_q == doctest::Approx(30.0 + 3.0 * (0.9 - 0.5) * 1.0).epsilon(1e-15));
    CHECK(late.t == doctest::Approx(std::abs(1.5 + 0.5 * 1.5) / 0.2).epsilon(1e-15));

    // narrow posterior: waiting time handed over to the tail draw
    st.sigma_g = 0.01;  // 0.01 <= 1/50
    const MeasurementSetting capped = mach_rule(params, st, 3, draws, 31.7, 12.0, 10);
    CHECK(capped.t == 12.0);
    CHECK(capped.omega_q == doctest::Approx(30.0 + 3.0 * (0.9 - 0.5) * 1.0).epsilon(1e-15));
}

TEST_CASE("machine parameter validation rejects out-of-range vectors") {
    MachinePolicyParams params;
    params.t_max = 50.0;
    params.validate(10);
    MachinePolicyParams bad = params;
    bad.a = -0.1;
    CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
    bad = params;
    bad.t_max = 0.0;
    CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
    bad = params;
    bad.d_th = 11;
    CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
    bad = params;
    bad.c0 = -1;
    CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
}

TEST_CASE("collapsed posteriors raise the degenerate-posterior error") {
    PosteriorStats st = typical_stats();
    st.sigma_g = 0.0;
    PolicyDraws draws;
    CHECK_THROWS_AS(manual_rule(ManualPolicyParams{}, st, 1, draws, true),
                    DegeneratePosteriorError);
    Rng rng(1);
    CHECK_THROWS_AS(next_setting_rand(kT1, st, rng), DegeneratePosteriorError);
}

TEST_CASE("time grid matches the reference values and pins its endpoints") {
    // n_t = 16, t1 = 20 pi, t_max' = 30 pi, computed independently at 50 digits
    const std::vector<double> grid = build_time_grid(16, kT1, 30.0 * kPi);
    REQUIRE(grid.size() == 16);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 30.0 * kPi);
    CHECK(grid[1] == doctest::Approx(13.114909081030508683).epsilon(1e-14));
    CHECK(grid[4] == doctest::Approx(41.26273277051060993).epsilon(1e-14));
    CHECK(grid[8] == doctest::Approx(65.956946962967192748).epsilon(1e-14));
    CHECK(grid[15] == doctest::Approx(94.247779607693797154).epsilon(1e-14));
    CHECK(std::is_sorted(grid.begin(), grid.end()));

    // spacing shrinks toward late times: more points where the envelope decays
    for (std::size_t i = 2; i < grid.size(); ++i)
        CHECK(grid[i] - grid[i - 1] < grid[i - 1] - grid[i - 2]);
}

TEST_CASE("infinite t1 degenerates the grid to uniform spacing") {
    const std::vector<double> grid = build_time_grid(11, kInf, 100.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(grid[i] == doctest::Approx(10.0 * static_cast<double>(i)).epsilon(1e-14));
    // enormous but finite t1 takes the same degenerate path
    const std::vector<double> huge = build_time_grid(11, 1e18, 100.0);
    CHECK(huge[5] == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("shaped density validates and normalizes its input") {
    CHECK_THROWS_AS(make_shaped_density({0.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_shaped_density({1.0, 2.0}, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_shaped_density({0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_shaped_density({0.0, 1.0}, {1.0, -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_shaped_density({0.0, 1.0}, {0.0, 0.0}), std::invalid_argument);

    const ShapedTimeDensity density = make_shaped_density({0.0, 2.0, 6.0}, {3.0, 3.0, 3.0});
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < density.grid.size(); ++k)
        integral += 0.5 * (density.value[k] + density.value[k + 1]) *
                    (density.grid[k + 1] - density.grid[k]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(density.t_max() == 6.0);
}

TEST_CASE("flat shaped density samples uniformly") {
    const std::vector<double> grid = build_time_grid(16, kT1, 50.0);
    const ShapedTimeDensity density =
        make_shaped_density(grid, std::vector<double>(grid.size(), 1.0));
    Rng rng(19);
    std::vector<double> samples;
    for (int i = 0; i < 4000; ++i) {
        const double t = sample_shaped_time(density, rng);
        CHECK(t >= 0.0);
        CHECK(t <= 50.0);
        samples.push_back(t);
    }
    const double d = ks_distance(std::move(samples), [](double t) { return t / 50.0; });
    CHECK(d < 1.63 / std::sqrt(4000.0));
}

TEST_CASE("triangular shaped density samples with the right CDF") {
    // density proportional to t on [0, 4]: CDF is (t/4)^2
    const ShapedTimeDensity density = make_shaped_density({0.0, 4.0}, {0.0, 1.0});
    Rng rng(29);
    std::vector<double> samples;
    for (int i = 0; i < 4000; ++i)
        samples.push_back(sample_shaped_time(density, rng));
    const double d =
        ks_distance(std::move(samples), [](double t) { return (t / 4.0) * (t / 4.0); });
    CHECK(d < 1.63 / std::sqrt(4000.0));
}

TEST_CASE("machine policy walks through its regimes on real state") {
    MachinePolicyParams params;
    params.a = 2.0;
    params.b = 0.5;
    params.d = 1.5;
    params.f = 4.0;
    params.g_pol = 3.0;
    params.t_max = 50.0;
    params.d_th = 6;
    params.c0 = 2;
    const MachinePolicy policy(params);
    CHECK(policy.repeats() == 10);
    CHECK(policy.click_threshold() == 6);

    const ParticleCloud cloud = tiny_cloud(31.25);
    PolicyState state;
    PosteriorStats st = typical_stats();
    Rng rng(3);

    // click-search regime reads the frequency straight off the marginal
    const MeasurementSetting probe = policy.next(st, state, cloud, rng);
    CHECK(probe.omega_q == 31.25);
    CHECK(probe.m_r == 10);

    // after a click with a narrow posterior the waiting time is capped
    state.clicks = 5;
    st.sigma_g = 1e-4;
    for (int i = 0; i < 200; ++i) {
        const MeasurementSetting s = policy.next(st, state, cloud, rng);
        CHECK(s.t <= params.t_max);
    }
}

TEST_CASE("manual and random policy wrappers expose per-shot batching") {
    const ManualPolicy man;
    CHECK(man.repeats() == 1);
    CHECK(man.click_threshold() == 1);  // d never exceeds 1, so clicks stay 0
    const RandomTimePolicy rnd(kT1);
    CHECK(rnd.repeats() == 1);
}
