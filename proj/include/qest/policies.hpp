#ifndef QEST_POLICIES_HPP
#define QEST_POLICIES_HPP

#include <optional>
#include <vector>

#include "qest/inference.hpp"
#include "qest/physics.hpp"
#include "qest/rng.hpp"

namespace qest {

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

// Hand-tuned single-shot policy constants.
struct ManualPolicyParams {
    double a = 1.57;
    double b = 0.518;
    double c = 3.0;
    int m0 = 15;  // setting index at which the rule switches branches
};

// The 8-vector defining one optimized batched policy. g_pol is the omega
// spread factor (named g in the policy-vector convention; renamed so it
// cannot be confused with a coupling strength). d is likewise a real rule
// parameter, not a measurement count.
struct MachinePolicyParams {
    double a = 0.0;
    double b = 0.0;
    double d = 0.0;
    double f = 0.0;
    double g_pol = 0.0;
    double t_max = 1.0;
    int d_th = 0;  // click threshold on the batch ground count
    int c0 = 0;    // click count at which the refine rules switch

    void validate(int m_r) const;
};

// Piecewise-linear waiting-time density on a fixed grid, normalized so the
// linear interpolant integrates to 1. grid.front() must be 0.
struct ShapedTimeDensity {
    std::vector<double> grid;
    std::vector<double> value;

    double t_max() const { return grid.back(); }
};

ShapedTimeDensity make_shaped_density(std::vector<double> grid, std::vector<double> values);

// Per-episode policy memory: how many settings have been issued and how many
// batches counted as clicks (ground count d exceeded the threshold).
struct PolicyState {
    long settings_issued = 0;
    long clicks = 0;
};

// clicks increments only on d strictly greater than d_th.
void register_batch(PolicyState& state, int d, int d_th);

// ---------------------------------------------------------------------------
// Rule cores (pure functions of posterior stats + random draws, so every
// branch is directly testable)
// ---------------------------------------------------------------------------

struct PolicyDraws {
    double r1 = 0.0;  // uniform [0,1)
    double r2 = 0.0;  // uniform [0,1)
    double z = 0.0;   // standard normal
};

// setting_index is 1-based (the state's settings_issued + 1).
MeasurementSetting manual_rule(const ManualPolicyParams& params, const PosteriorStats& stats,
                               long setting_index, const PolicyDraws& draws,
                               bool shared_draw = true);

enum class MachRegime {
    click_search,  // no click yet: probe frequencies from the omega marginal
    refine,        // clicks seen, posterior still broad: scale times by 1/sigma_g
    capped         // sigma_g <= 1/t_max: waiting times drawn from the tail density
};

MachRegime mach_regime(long clicks, double sigma_g, double t_max);

// omega_marginal is the pre-drawn marginal sample (used only in click_search);
// tail_t is the pre-drawn tail waiting time (used only in capped).
MeasurementSetting mach_rule(const MachinePolicyParams& params, const PosteriorStats& stats,
                             long clicks, const PolicyDraws& draws, double omega_marginal,
                             double tail_t, int m_r);

// ---------------------------------------------------------------------------
// Setting generators
// ---------------------------------------------------------------------------

MeasurementSetting next_setting_man(const ManualPolicyParams& params, const PosteriorStats& stats,
                                    const PolicyState& state, Rng& rng, bool shared_draw = true);

// t uniform on [0, t1]; omega_q follows the adaptive sigma_omega rule.
MeasurementSetting next_setting_rand(double t1, const PosteriorStats& stats, Rng& rng,
                                     double c = 3.0);

MeasurementSetting next_setting_mach(const MachinePolicyParams& params,
                                     const std::optional<ShapedTimeDensity>& tail,
                                     const PosteriorStats& stats, const PolicyState& state,
                                     const ParticleCloud& cloud, Rng& rng, int m_r = 10);

// Grid whose point density grows like exp(t / t1), inverting the decay of the
// oscillation envelope: t_i = t1 * ln(1 + q_i * (e^{t_max'/t1} - 1)) with
// q_i = i / (n_t - 1). t1 = +infinity gives a uniform grid.
std::vector<double> build_time_grid(int n_t, double t1, double t_max_prime);

// Inverse-CDF draw from the piecewise-linear density.
double sample_shaped_time(const ShapedTimeDensity& density, Rng& rng);

// ---------------------------------------------------------------------------
// Polymorphic wrapper used by the episode loop
// ---------------------------------------------------------------------------

class Policy {
public:
    virtual ~Policy() = default;
    virtual MeasurementSetting next(const PosteriorStats& stats, const PolicyState& state,
                                    const ParticleCloud& cloud, Rng& rng) const = 0;
    virtual int repeats() const = 0;
    // d can never exceed repeats(), so the default never registers a click
    virtual int click_threshold() const { return repeats(); }
};

class ManualPolicy final : public Policy {
public:
    explicit ManualPolicy(ManualPolicyParams params = {}, bool shared_draw = true)
        : params_(params), shared_draw_(shared_draw) {}
    MeasurementSetting next(const PosteriorStats& stats, const PolicyState& state,
                            const ParticleCloud&, Rng& rng) const override {
        return next_setting_man(params_, stats, state, rng, shared_draw_);
    }
    int repeats() const override { return 1; }

private:
    ManualPolicyParams params_;
    bool shared_draw_;
};

class RandomTimePolicy final : public Policy {
public:
    explicit RandomTimePolicy(double t1, double c = 3.0) : t1_(t1), c_(c) {}
    MeasurementSetting next(const PosteriorStats& stats, const PolicyState&,
                            const ParticleCloud&, Rng& rng) const override {
        return next_setting_rand(t1_, stats, rng, c_);
    }
    int repeats() const override { return 1; }

private:
    double t1_;
    double c_;
};

// Batched click-counter policy; a shaped tail density makes it the
// continuous-density variant, otherwise the tail is uniform on [0, t_max].
class MachinePolicy final : public Policy {
public:
    explicit MachinePolicy(MachinePolicyParams params,
                           std::optional<ShapedTimeDensity> tail = std::nullopt, int m_r = 10)
        : params_(params), tail_(std::move(tail)), m_r_(m_r) {
        params_.validate(m_r_);
    }
    MeasurementSetting next(const PosteriorStats& stats, const PolicyState& state,
                            const ParticleCloud& cloud, Rng& rng) const override {
        return next_setting_mach(params_, tail_, stats, state, cloud, rng, m_r_);
    }
    int repeats() const override { return m_r_; }
    int click_threshold() const override { return params_.d_th; }
    const MachinePolicyParams& params() const { return params_; }

private:
    MachinePolicyParams params_;
    std::optional<ShapedTimeDensity> tail_;
    int m_r_;
};

}  // namespace qest

#endif
